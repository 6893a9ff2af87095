"""Command-line driver: one subcommand per verification or solve, JSON config in, CSV/JSON out."""

import argparse
import hashlib
import io
import json
import sys
import time
import warnings
from pathlib import Path

import numpy as np
import scipy.fft as sfft

from . import __version__
from .errors import (
    AliasingWarning,
    ConfigError,
    DiagnosticError,
    DomainError,
    ModeError,
    NonContractionError,
    NumericQualityError,
    ParameterError,
    StructuralError,
)
from .gabor import (
    amalgam_sup,
    decay_exponent_fit,
    fit_loglog,
    fresnel_norms,
    amalgam_norm,
    modulation_norm,
    omega2_sup_measure,
    fresnel_lattice,
    stft,
    window_from_config,
)
from .grid import (
    FREQUENCY,
    SPACE,
    GridSpec,
    SampledField,
    field_from_function,
    field_to_bytes,
    forward_fourier,
    inverse_fourier,
    lp_norm,
    read_field,
)
from .potentials import (
    CroppedCoulomb,
    SphereShell,
    amalgam_W_p1_estimate,
    coulomb_decay_exponent,
    potential_from_config,
    sphere_ft_asymptotic_check,
)
from .propagator import MultiplierPropagator, dispersive_decay_scan
from .symbols import SmoothedSymbol, calibrated_A, cone_separation_ratio, fresnel_field, symbol_from_config
from .solver import Nonlinearity, SolverConfig, global_solve, picard_solve

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_CONTRACTION = 0, 2, 3, 4


class Run:
    """Buffers outputs so that nothing is written unless the subcommand succeeds."""

    def __init__(self, text, args):
        self.text = text
        self.args = args
        self.rng = np.random.default_rng(args.seed)
        self.outputs = {}
        self.notes = []

    def key_line(self, key):
        needle = f'"{key}"'
        for i, line in enumerate(self.text.splitlines(), 1):
            if needle in line:
                return i
        return None

    def require(self, cfg, key, kind=None, where="config"):
        if not isinstance(cfg, dict) or key not in cfg:
            raise ConfigError(f"{where} is missing required key {key!r}", self.key_line(where))
        val = cfg[key]
        if kind is not None and not isinstance(val, kind):
            raise ConfigError(f"{key!r} has the wrong type", self.key_line(key))
        return val

    def number(self, cfg, key, default=None, positive=False):
        if key not in cfg:
            if default is None:
                raise ConfigError(f"missing required key {key!r}")
            return default
        val = cfg[key]
        if isinstance(val, bool) or not isinstance(val, (int, float)):
            raise ConfigError(f"{key!r} must be a number", self.key_line(key))
        if positive and not val > 0:
            raise ConfigError(f"{key!r} must be positive", self.key_line(key))
        return val

    def block(self, cfg, key, parse, *a):
        sub = self.require(cfg, key, dict)
        try:
            return parse(sub, *a)
        except ConfigError as exc:
            raise ConfigError(str(exc), self.key_line(key)) from None
        except (ParameterError, StructuralError, TypeError, ValueError) as exc:
            raise ConfigError(f"{key}: {exc}", self.key_line(key)) from None

    def write_csv(self, name, header, rows):
        buf = io.StringIO()
        buf.write(",".join(header) + "\n")
        for row in rows:
            buf.write(",".join(_fmt(v) for v in row) + "\n")
        self.outputs[name] = buf.getvalue().encode()

    def write_json(self, name, obj):
        self.outputs[name] = (json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n").encode()

    def write_bytes(self, name, data):
        self.outputs[name] = data


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _num_or_inf(v):
    return float("inf") if v in ("inf", "Infinity") else float(v)


# -- config blocks ---------------------------------------------------------------------------


def _symbol(run, cfg):
    return run.block(cfg, "symbol", symbol_from_config)


def _window(run, cfg, d, key="window"):
    if key not in cfg:
        return window_from_config({}, d)
    return run.block(cfg, key, window_from_config, d)


def _grid(run, cfg, d=None):
    def parse(g):
        return GridSpec(g.get("d", d if d is not None else 1), g["N"], g["L"])

    return run.block(cfg, "grid", parse)


def _datum(run, cfg, grid, base_dir):
    spec = run.require(cfg, "f", dict)
    kind = spec.get("kind", "gaussian")
    params = spec.get("params", {})
    if kind == "gaussian":
        width = float(params.get("width", 1.0))
        center = np.asarray(params.get("center", [0.0] * grid.d), dtype=float)
        freq = np.asarray(params.get("frequency", [0.0] * grid.d), dtype=float)
        f = field_from_function(
            grid,
            lambda x: np.exp(-np.pi * np.sum((x - center) ** 2, axis=-1) / width**2 + 2j * np.pi * (x @ freq)),
        )
    elif kind == "random_phase":
        F = np.exp(2j * np.pi * run.rng.uniform(size=grid.shape))
        f = inverse_fourier(SampledField(grid, F, FREQUENCY))
    elif kind == "file":
        path = Path(params["path"])
        f = read_field(path if path.is_absolute() else base_dir / path)
        if f.grid != grid:
            raise ConfigError("datum file grid differs from the configured grid", run.key_line("path"))
        if f.domain != SPACE:
            f = inverse_fourier(f)
    else:
        raise ConfigError(f"unknown datum kind {kind!r}", run.key_line("f"))
    if "fl1" in params:
        f = f * (float(params["fl1"]) / lp_norm(forward_fourier(f), 1))
    elif "amplitude" in params:
        f = f * complex(*params["amplitude"]) if isinstance(params["amplitude"], list) else f * params["amplitude"]
    return f


# -- subcommands ------------------------------------------------------------------------------


def cmd_fresnel_portrait(run, cfg, base_dir):
    symbol = _symbol(run, cfg)
    d = symbol.d
    window = _window(run, cfg, d)
    t = run.number(cfg, "t", 1.0, positive=True)
    norms_cfg = cfg.get("norms", {})
    L_list = [float(v) for v in norms_cfg.get("L_list", [16, 32, 64])]
    dx = float(norms_cfg.get("dx", 0.25))
    growth_min = float(norms_cfg.get("growth_min_x", 8.0))
    M_values, report = [], {}
    stream = None
    for L in L_list:
        stream = fresnel_norms(symbol, window, L, dx=dx, t=t)
        M_values.append(stream.modulation_norm(1, np.inf))
    drift = [abs(b - a) / a for a, b in zip(M_values, M_values[1:])]
    r = np.linalg.norm(stream.x_points(), axis=-1)
    slices = stream.slice_norms(1.0)
    far = r >= growth_min
    report["M_norms"] = dict(zip(map(str, L_list), M_values))
    report["M_drift"] = max(drift) if drift else None
    report["W_slice_flatness"] = float(slices.max() / slices.min())
    report["W_slice_exponent"] = fit_loglog(r[far], slices[far]).slope if far.sum() >= 2 else None

    pcfg = cfg.get("portrait", {})
    if d == 1:
        grid = GridSpec(1, int(pcfg.get("N", 4096)), float(pcfg.get("L", 16.0)))
        pwin = _window(run, pcfg, 1) if "window" in pcfg else window_from_config({"kind": "bump"}, 1)
        smoothed = SmoothedSymbol(symbol)
        A = float(pcfg.get("A", calibrated_A(symbol)))
        F = fresnel_field(symbol, grid, t)
        portrait = stft(F, pwin, int(pcfg.get("x_stride", 8)), pad=int(pcfg.get("pad", 2)))
        fit = decay_exponent_fit(portrait, smoothed, A, floor=float(pcfg.get("floor", 1e-12)),
                                 x_limit=grid.L / 2 - pwin.radius())
        report.update(A=A, decay_slope=fit.slope, decay_points=fit.npoints,
                      portrait_M_1_inf=modulation_norm(portrait, 1, np.inf),
                      portrait_W_1_inf=amalgam_norm(portrait, 1, np.inf))
        rows = []
        mags = np.abs(portrait.values)
        for i, x in enumerate(portrait.x[:, 0]):
            for k, xi in enumerate(portrait.xi_axis):
                rows.append((float(x), float(xi), float(mags[i, k])))
        run.write_csv("portrait.csv", ["x", "xi", "abs"], rows)
        B = symbol.m * (L_list[-1] / 2) ** (symbol.m - 1)
        xis = np.linspace(-B, B, 4001)[:, None]
        report["omega2_sup_measure"] = {
            str(L): omega2_sup_measure(smoothed, A, fresnel_lattice(L, dx, 1), dx, xis) for L in L_list
        }
    rows = [(float(x[0]) if d == 1 else float(np.linalg.norm(x)), float(s)) for x, s in zip(stream.x_points(), slices)]
    run.write_csv("slices.csv", ["x", "slice_l1"], rows)
    run.write_json("report.json", report)


def cmd_norms(run, cfg, base_dir):
    grid = _grid(run, cfg)
    window = _window(run, cfg, grid.d)
    fcfg = run.require(cfg, "field", dict)
    if fcfg.get("kind") == "fresnel":
        symbol = run.block(fcfg, "symbol", symbol_from_config)
        field = fresnel_field(symbol, grid, float(fcfg.get("t", 1.0)))
    else:
        field = _datum(run, {"f": fcfg}, grid, base_dir)
    pairs = cfg.get("pairs", [[1, "inf"]])
    P = stft(field, window, int(cfg.get("x_stride", 1)), pad=int(cfg.get("pad", 4)))
    rows = []
    for p, q in pairs:
        p, q = _num_or_inf(p), _num_or_inf(q)
        rows.append((p, q, modulation_norm(P, p, q), amalgam_norm(P, p, q)))
    run.write_csv("norms.csv", ["p", "q", "modulation", "amalgam"], rows)


def cmd_decay_scan(run, cfg, base_dir):
    symbol = _symbol(run, cfg)
    window = _window(run, cfg, symbol.d)
    t_list = run.require(cfg, "t_list", list)
    if not t_list:
        raise ParameterError("t_list is empty")
    N = int(run.number(cfg, "N", {1: 4096, 2: 512}.get(symbol.d, 64), positive=True))
    small = tuple(cfg.get("small", [1e-2, 1e-1]))
    large = tuple(cfg.get("large", [10.0, 100.0]))
    scan = dispersive_decay_scan(symbol, t_list, N, window, small, large, float(cfg.get("safety", 0.45)))
    run.write_csv("scan.csv", ["t", "L", "N", "norm"], [(r["t"], r["L"], r["N"], r["norm"]) for r in scan.rows()])
    out = {"small_slope": None, "large_slope": None, "expected_small": -2 * symbol.d / symbol.m,
           "expected_large": -symbol.d / symbol.m}
    if len(t_list) < 2:
        msg = "a single time gives norms only, no slope"
        warnings.warn(msg)
        out["warning"] = msg
    else:
        out["small_slope"] = scan.small_fit.slope if scan.small_fit else None
        out["large_slope"] = scan.large_fit.slope if scan.large_fit else None
    run.write_json("slopes.json", out)


def cmd_cone_check(run, cfg, base_dir):
    symbol = _symbol(run, cfg)
    axis = np.asarray(cfg.get("axis", [1.0] + [0.0] * (symbol.d - 1)), dtype=float)
    half = float(cfg.get("half_angle", 0.3))
    n = int(cfg.get("samples", 2000))
    rr = tuple(cfg.get("radius_range", [1e-2, 1e2]))
    merged = bool(cfg.get("merged", False))
    seed = int(run.args.seed)
    a = cone_separation_ratio(symbol, axis, half, n, seed=seed, radius_range=rr, merged=merged)
    b = cone_separation_ratio(symbol, axis, half, 2 * n, seed=seed + 1, radius_range=rr, merged=merged)
    run.write_json("cone.json", {"ratio": a, "ratio_doubled": b, "relative_change": abs(b - a) / a if a else None})


def cmd_potential_ft(run, cfg, base_dir):
    d_default = cfg.get("d", 3)
    pot = run.block(cfg, "potential", potential_from_config, d_default)
    if pot is None:
        raise ConfigError("potential-ft needs a non-zero potential", run.key_line("potential"))
    d = pot.d
    xi_max = run.number(cfg, "xi_max", 10.0, positive=True)
    n = int(run.number(cfg, "n", 201, positive=True))
    rho = np.linspace(0, xi_max, n)
    xi = np.zeros((n, d))
    xi[:, 0] = rho
    vals = pot.ft(xi)
    run.write_csv("ft.csv", ["xi", "re", "im"], [(float(r), float(v.real), float(v.imag)) for r, v in zip(rho, vals)])
    report = {"threshold": pot.threshold()}
    if isinstance(pot, SphereShell):
        report["asymptotics"] = sphere_ft_asymptotic_check(pot)
    if isinstance(pot, CroppedCoulomb):
        report["decay_exponent"] = coulomb_decay_exponent(pot)
    if "p_list" in cfg:
        grid = _grid(run, cfg, d)
        window = _window(run, cfg, d)
        report["W_p1"] = {str(p): amalgam_W_p1_estimate(pot, grid, window, _num_or_inf(p)) for p in cfg["p_list"]}
    run.write_json("thresholds.json", report)


def _solver_config(run, cfg, base_dir):
    grid = _grid(run, cfg)
    symbol = _symbol(run, cfg)
    pot = None
    if "potential" in cfg:
        pot = run.block(cfg, "potential", potential_from_config, grid.d)
    nl = Nonlinearity()
    if "nonlinearity" in cfg:
        def parse(c):
            lam = c.get("lam", 1.0)
            lam = complex(*lam) if isinstance(lam, list) else lam
            coeffs = tuple((j, l, complex(*c_) if isinstance(c_, list) else c_) for j, l, c_ in c.get("coefficients", []))
            return Nonlinearity(c.get("kind", "linear"), lam, c.get("k", 1), coeffs)

        nl = run.block(cfg, "nonlinearity", parse)
    mode = cfg.get("mode", {"kind": "standard"})
    f = _datum(run, cfg, grid, base_dir)
    tol = cfg.get("tolerances", {})
    kw = dict(
        mode=mode.get("kind", "standard"),
        nodes=int(cfg.get("nodes", 64)),
        tolerance=float(tol.get("picard", 1e-10)),
        max_iterations=int(tol.get("max_iterations", 50)),
        t_max=cfg.get("t_max"),
        norm=cfg.get("norm", "amalgam"),
        step=cfg.get("step"),
        C_prime=cfg.get("C_prime"),
        algebra_constant=cfg.get("algebra_constant"),
        workers=run.args.threads,
        window=_window(run, cfg, grid.d),
    )
    if kw["mode"] == "low_regularity":
        kw["p"] = _num_or_inf(mode.get("p", "inf"))
        kw["q"] = float(mode.get("q", 1.0))
    if "R" in cfg:
        kw["R"] = float(cfg["R"])
    try:
        return SolverConfig(grid, symbol, pot, nl, f, **kw)
    except (ParameterError, StructuralError) as exc:
        raise ConfigError(str(exc)) from None


def cmd_solve(run, cfg, base_dir):
    config = _solver_config(run, cfg, base_dir)
    if cfg.get("global", config.t_max is not None):
        traj = global_solve(config)
    else:
        traj = picard_solve(config)
    rows = [(r["window"], r["t"], r["norm"]) for r in traj.rows()]
    run.write_csv("diagnostics.csv", ["window", "t", "norm"], rows)
    run.write_json("trajectory.json", {
        "times": traj.times.tolist(),
        "windows": [w.to_dict() for w in traj.windows],
        "grid": config.grid.to_dict(),
    })
    snaps = [0] + [int(np.argmin(np.abs(traj.times - (w.start + w.T)))) for w in traj.windows]
    for k, i in enumerate(snaps):
        run.write_bytes(f"u_{k:04d}.fld", field_to_bytes(traj.fields[i]))


def cmd_propagate(run, cfg, base_dir):
    grid = _grid(run, cfg)
    symbol = _symbol(run, cfg)
    window = _window(run, cfg, grid.d)
    f = _datum(run, cfg, grid, base_dir)
    t_list = run.require(cfg, "t_list", list)
    prop = MultiplierPropagator(symbol, grid, workers=run.args.threads)
    rows = []
    for k, t in enumerate(t_list):
        u = prop.apply(float(t), f)
        rows.append((float(t), lp_norm(u, 2), amalgam_sup(u, window)[0]))
        run.write_bytes(f"u_{k:04d}.fld", field_to_bytes(u))
    run.write_csv("propagate.csv", ["t", "l2", "w_1_inf"], rows)


COMMANDS = {
    "fresnel-portrait": cmd_fresnel_portrait,
    "norms": cmd_norms,
    "decay-scan": cmd_decay_scan,
    "cone-check": cmd_cone_check,
    "potential-ft": cmd_potential_ft,
    "solve": cmd_solve,
    "propagate": cmd_propagate,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="fresnel-lab", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("config", type=Path, help="JSON run configuration")
        p.add_argument("--out-dir", type=Path, default=Path("."), help="directory for outputs")
        p.add_argument("--seed", type=int, default=0, help="seed for every random draw")
        p.add_argument("--threads", type=int, default=1, help="worker threads for FFTs and solver nodes")
    return parser


def _load(path):
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(exc.msg, exc.lineno) from None
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object", 1)
    return text, cfg


def run_command(args):
    """Execute one subcommand; returns (exit code, message)."""
    started = time.time()
    try:
        text, cfg = _load(args.config)
        run = Run(text, args)
        with warnings.catch_warnings():
            warnings.simplefilter("error", AliasingWarning)
            with sfft.set_workers(max(1, args.threads)):
                COMMANDS[args.command](run, cfg, args.config.parent)
    except AliasingWarning as exc:
        return EXIT_NUMERIC, f"aliasing: {exc}"
    except NumericQualityError as exc:
        return EXIT_NUMERIC, f"numeric quality: {exc}"
    except NonContractionError as exc:
        return EXIT_CONTRACTION, f"non-contraction: {exc}"
    except (ConfigError, ModeError, ParameterError, StructuralError, DomainError) as exc:
        return EXIT_CONFIG, f"{type(exc).__name__}: {exc}"
    except DiagnosticError as exc:
        return EXIT_NUMERIC, f"diagnostic: {exc}"
    out = args.out_dir
    out.mkdir(parents=True, exist_ok=True)
    digests = {}
    for name, data in sorted(run.outputs.items()):
        (out / name).write_bytes(data)
        digests[name] = hashlib.sha256(data).hexdigest()
    manifest = {
        "subcommand": args.command,
        "config": cfg,
        "version": __version__,
        "seed": args.seed,
        "threads": args.threads,
        "wall_clock_seconds": time.time() - started,
        "input_digest": hashlib.sha256(text.encode()).hexdigest(),
        "output_digests": digests,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return EXIT_OK, None


def main(argv=None):
    args = build_parser().parse_args(argv)
    code, message = run_command(args)
    if message:
        print(f"fresnel-lab {args.command}: {message}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
