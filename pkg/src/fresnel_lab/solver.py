"""Duhamel-Picard solver for i-type dispersive equations with measure potentials.

Solutions are stored on the frequency side at the nodes of a graded time
mesh. The Duhamel integral uses product integration: the factor
exp(2 pi i (t - s) mu(xi)) is integrated exactly against local
Lagrange interpolants (six points by default) of FT(V G(u))(s).
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft

from .errors import (
    ModeError,
    NonContractionError,
    NumericQualityError,
    ParameterError,
    StructuralError,
)
from .gabor import amalgam_sup, gaussian_window, stacked_amalgam_sup
from .grid import FREQUENCY, SPACE, SampledField, forward_fourier, lp_norm
from .potentials import amalgam_bound_w_inf1, amalgam_wp1_norm
from .propagator import kernel_amalgam_norm, scan_grid

_KINDS = ("linear", "power_abs", "power", "series")
# exponents 2d/(m p') near 1 would otherwise push all nodes towards s = 0
LOW_REGULARITY_MAX_GRADING = 4.0


@dataclass(frozen=True)
class Nonlinearity:
    """G(u): u, lam |u|^(2k) u, lam u^k, or sum c_(j,l) u^j conj(u)^l."""

    kind: str = "linear"
    lam: complex = 1.0
    k: int = 1
    coefficients: tuple = ()

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ParameterError(f"unknown nonlinearity {self.kind!r}")
        if self.kind in ("power_abs", "power") and (int(self.k) != self.k or self.k < 1):
            raise ParameterError("k must be a positive integer")
        if self.kind == "series":
            terms = tuple((int(j), int(l), complex(c)) for j, l, c in self.coefficients)
            if not terms:
                raise ParameterError("series nonlinearity needs coefficients")
            if any(j < 0 or l < 0 for j, l, _ in terms):
                raise ParameterError("series exponents must be non-negative")
            if any(j == 0 and l == 0 and c != 0 for j, l, c in terms):
                raise StructuralError("G(0) = 0 is violated: the constant coefficient must vanish")
            object.__setattr__(self, "coefficients", terms)

    @property
    def is_linear(self):
        return self.kind == "linear" or (self.kind == "power" and self.k == 1)

    def __call__(self, u):
        if self.kind == "linear":
            return u
        if self.kind == "power_abs":
            return self.lam * np.abs(u) ** (2 * self.k) * u
        if self.kind == "power":
            return self.lam * u**self.k
        out = np.zeros_like(u, dtype=complex)
        for j, l, c in self.coefficients:
            out += c * u**j * np.conj(u) ** l
        return out

    def to_config(self):
        cfg = {"kind": self.kind}
        if self.kind in ("power_abs", "power"):
            cfg.update(lam=[complex(self.lam).real, complex(self.lam).imag], k=self.k)
        if self.kind == "series":
            cfg["coefficients"] = [[j, l, [c.real, c.imag]] for j, l, c in self.coefficients]
        return cfg


def lipschitz_constant_C_R(nonlinearity, R, algebra_constant=1.0):
    """Lipschitz constant of G on the ball of radius R of the solution space."""
    if not R > 0:
        raise ParameterError("R must be positive")
    A = float(algebra_constant)
    G = nonlinearity
    if G.kind == "linear":
        return 1.0
    if G.kind == "power_abs":
        return abs(G.lam) * (2 * G.k + 1) * A ** (2 * G.k) * R ** (2 * G.k)
    if G.kind == "power":
        return abs(G.lam) * G.k * A ** (G.k - 1) * R ** (G.k - 1)
    return sum(abs(c) * (j + l) * A ** (j + l - 1) * R ** (j + l - 1) for j, l, c in G.coefficients)


def calibrate_algebra_constant(grid, window=None, pairs=100, seed=0):
    """max ||u v|| / (||u|| ||v||) in discrete W^{1,inf} over random smooth pairs."""
    if window is None:
        window = gaussian_window(1.0, grid.d)
    rng = np.random.default_rng(seed)
    x = grid.points(SPACE)
    best = 0.0

    def sample():
        c = rng.uniform(-grid.L / 4, grid.L / 4, grid.d)
        w = rng.uniform(0.5, 2.0)
        k = rng.uniform(-1.0, 1.0, grid.d)
        amp = rng.normal() + 1j * rng.normal()
        vals = amp * np.exp(-np.pi * np.sum((x - c) ** 2, axis=-1) / w**2 + 2j * np.pi * (x @ k))
        return SampledField(grid, vals, SPACE)

    for _ in range(pairs):
        u, v = sample(), sample()
        nu = amalgam_sup(u, window)[0]
        nv = amalgam_sup(v, window)[0]
        nuv = amalgam_sup(u.with_values(u.values * v.values), window)[0]
        best = max(best, nuv / (nu * nv))
    return best


def step_from_exponent(beta, C, C_R, V_bound):
    """Largest T with C C_R |V| int_0^T s^(-beta) ds <= 1/2, clamped to (0, 1]."""
    if not 0 <= beta < 1:
        raise ModeError(f"singular exponent {beta} must lie in [0, 1)")
    if not (C > 0 and C_R > 0):
        raise ParameterError("constants must be positive")
    if V_bound == 0:
        return 1.0
    if not V_bound > 0:
        raise ParameterError("potential bound must be non-negative")
    T = ((1 - beta) / (2 * C * C_R * V_bound)) ** (1.0 / (1 - beta))
    return float(min(T, 1.0))


def local_step_T(m, d, C_prime, C_R, V_bound):
    """T = min{((m - 2d) / (2 m C' C_R |V|))^(m / (m - 2d)), 1}."""
    if not m > 2 * d:
        raise ModeError(f"standard mode needs m > 2d (m={m}, d={d}); use low_regularity")
    return step_from_exponent(2 * d / m, C_prime, C_R, V_bound)


def low_regularity_step_T(m, d, p, C_second, V_bound):
    """T with C'' |V|_{W^{p,1}} int_0^T s^(-2d/(m p')) ds <= 1/2."""
    pd = dual_exponent(p)
    if not m > 2 * d / pd:
        raise ModeError(f"low_regularity needs m > 2d/p' (m={m}, 2d/p'={2 * d / pd:g})")
    return step_from_exponent(2 * d / (m * pd), C_second, 1.0, V_bound)


def dual_exponent(p):
    p = float(p)
    if np.isinf(p):
        return 1.0
    if p == 1:
        return np.inf
    return p / (p - 1)


def estimate_C_prime(symbol, window=None, exponent=None, p=1.0, t_range=(1e-2, 1.0), points=7,
                     N=None, max_size=1 << 21):
    """2 max_t t^exponent |E(t)|_{W^{p,inf}} over a log-spaced scan of t_range.

    exponent defaults to 2d/m. Each t uses the no-wrap scan grid; N is reduced
    where the window-resolved grid would exceed max_size points.
    """
    d, m = symbol.d, symbol.m
    if window is None:
        window = gaussian_window(1.0, d)
    if exponent is None:
        exponent = 2 * d / m
    if N is None:
        N = {1: 2048, 2: 128, 3: 32}[d]
    best = 0.0
    for t in np.geomspace(t_range[0], t_range[1], points):
        n = N
        while n > 8:
            h = scan_grid(symbol, t, n).h
            factor = 2 ** max(0, int(np.ceil(np.log2(6 * h / window.width))))
            if (n * factor) ** d <= max_size:
                break
            n //= 2
        val, _ = kernel_amalgam_norm(symbol, t, n, window, p=p)
        best = max(best, t**exponent * val)
    return 2.0 * best


@dataclass(frozen=True)
class SolverConfig:
    grid: object
    symbol: object
    potential: object
    nonlinearity: Nonlinearity
    f: SampledField
    R: float = None
    mode: str = "standard"
    p: float = np.inf
    q: float = 1.0
    nodes: int = 64
    tolerance: float = 1e-10
    max_iterations: int = 50
    t_max: float = None
    window: object = None
    norm: str = "amalgam"
    step: float = None
    C_prime: float = None
    algebra_constant: float = None
    workers: int = None
    max_halvings: int = 20
    check_quadrature: bool = True
    stencil: int = 6

    def __post_init__(self):
        d, m = self.grid.d, self.symbol.m
        if self.symbol.d != d or self.f.grid != self.grid:
            raise StructuralError("grid, symbol and datum dimensions must agree")
        if self.f.domain != SPACE:
            raise StructuralError("the initial datum must be a space-domain field")
        if self.potential is not None and self.potential.d != d:
            raise StructuralError("potential dimension differs from the grid")
        if self.mode not in ("standard", "low_regularity"):
            raise ParameterError(f"unknown mode {self.mode!r}")
        if self.norm not in ("amalgam", "fourier"):
            raise ParameterError(f"unknown norm {self.norm!r}")
        if self.stencil < 2:
            raise ParameterError("the interpolation stencil needs at least two points")
        if self.nodes < 2 * self.stencil or self.nodes % 2:
            raise ParameterError("nodes must be even and at least twice the stencil width")
        if not self.tolerance > 0 or self.max_iterations < 1:
            raise ParameterError("tolerance and max_iterations must be positive")
        if self.t_max is not None and not self.t_max > 0:
            raise ParameterError("t_max must be positive")
        if self.window is None:
            object.__setattr__(self, "window", gaussian_window(1.0, d))
        if self.mode == "standard":
            if not m > 2 * d:
                raise ModeError(f"standard mode needs m > 2d (m={m}, d={d}); use low_regularity")
            object.__setattr__(self, "p", np.inf)
            object.__setattr__(self, "q", 1.0)
        else:
            pd = dual_exponent(self.p)
            if not self.p >= 1:
                raise ParameterError("p must lie in [1, inf]")
            if not 1 <= self.q <= pd:
                raise ModeError(f"low_regularity needs 1 <= q <= p' (q={self.q:g}, p'={pd:g})")
            if not m > 2 * d / pd:
                raise ModeError(f"low_regularity needs m > 2d/p' (m={m}, 2d/p'={2 * d / pd:g})")
            if not self.nonlinearity.is_linear:
                raise ModeError("low_regularity mode is restricted to G(u) = u")
        if self.potential is not None:
            member = self.potential.membership(self.p)
            if member is False:
                pc = self.potential.threshold()
                need = f"p > {pc:g}" if pc is not None else "p = inf"
                raise ModeError(f"the potential is not in W^(p,1) for p={self.p:g}: requires {need}")
        fl1 = lp_norm(forward_fourier(self.f), 1)
        if self.R is None:
            object.__setattr__(self, "R", 2 * fl1 if fl1 > 0 else 1.0)
        elif fl1 > self.R / 2 * (1 + 1e-12):
            raise ParameterError(f"datum FL^1 norm {fl1:g} exceeds R/2 = {self.R / 2:g}")

    @property
    def singular_exponent(self):
        return 2 * self.grid.d / (self.symbol.m * dual_exponent(self.p))


@dataclass(frozen=True)
class WindowDiagnostics:
    start: float
    T: float
    iterations: int
    differences: tuple
    ratios: tuple
    norm: float
    residual: float
    quadrature_estimate: float
    halvings: int

    def to_dict(self):
        return {
            "start": self.start, "T": self.T, "iterations": self.iterations,
            "differences": list(self.differences), "ratios": list(self.ratios),
            "norm": self.norm, "residual": self.residual,
            "quadrature_estimate": self.quadrature_estimate, "halvings": self.halvings,
        }


@dataclass(frozen=True)
class SolutionTrajectory:
    times: np.ndarray
    fields: tuple
    windows: tuple
    norms: np.ndarray = field(default=None)

    def __post_init__(self):
        t = np.array(self.times, dtype=float)
        t.flags.writeable = False
        object.__setattr__(self, "times", t)

    @property
    def final(self):
        return self.fields[-1]

    def rows(self):
        out = []
        starts = [w.start for w in self.windows]
        for i, t in enumerate(self.times):
            w = int(np.searchsorted(starts, t, side="right")) - 1
            row = {"window": max(w, 0), "t": float(t)}
            if self.norms is not None:
                row["norm"] = float(self.norms[i])
            out.append(row)
        return out


def graded_mesh(T, n, beta, max_grading=None):
    """s_i = T (i/n)^gamma with gamma = 2 / (1 - beta), optionally capped."""
    gamma = 2.0 / (1.0 - beta)
    if max_grading is not None:
        gamma = min(gamma, max_grading)
    return T * (np.arange(n + 1) / n) ** gamma


def exp_moments(z, kmax=3):
    """m_k(z) = int_0^1 exp(z u) u^k du for k = 0..kmax, elementwise in z.

    |z| < 2: series for m_kmax, then the stable downward recursion
    m_k = (e^z - z m_(k+1)) / (k+1); otherwise the upward recursion.
    """
    z = np.asarray(z, dtype=complex)
    out = np.empty((kmax + 1,) + z.shape, dtype=complex)
    small = np.abs(z) < 2.0
    zs = z[small]
    ez = np.exp(zs)
    acc = np.zeros(zs.shape, dtype=complex)
    term = np.ones(zs.shape, dtype=complex)
    for n in range(26):
        acc += term / (n + kmax + 1)
        term = term * zs / (n + 1)
    out[kmax][small] = acc
    for k in range(kmax - 1, -1, -1):
        acc = (ez - zs * acc) / (k + 1)
        out[k][small] = acc
    zl = z[~small]
    ez = np.exp(zl)
    prev = (ez - 1) / zl
    out[0][~small] = prev
    for k in range(1, kmax + 1):
        prev = (ez - k * prev) / zl
        out[k][~small] = prev
    return out


def _stencil(i, n, width):
    lo = min(max(i - (width // 2 - 1), 0), n + 1 - width)
    return np.arange(lo, lo + width)


def interval_weights(mesh, i, mu, width=6):
    """Stencil and weights w_j(mu) = int_{s_i}^{s_i+1} exp(2 pi i (s_i+1 - r) mu) l_j(r) dr."""
    n = len(mesh) - 1
    st = _stencil(i, n, min(width, n + 1))
    a, b = mesh[i], mesh[i + 1]
    h = b - a
    u_nodes = (b - mesh[st]) / h
    mom = exp_moments(2j * np.pi * h * mu, kmax=len(st) - 1)
    weights = []
    for j in range(len(st)):
        others = np.delete(u_nodes, j)
        coef = np.poly(others)[::-1] / np.prod(u_nodes[j] - others)
        w = np.zeros(mu.shape, dtype=complex)
        for k, c in enumerate(coef):
            w += c * mom[k]
        weights.append(h * w)
    return st, weights


class _Duhamel:
    """u_0 + A G(u) on a fixed mesh.

    Interval weights depend on mu only, so they are computed once per distinct
    symbol value and gathered onto the grid when used.
    """

    def __init__(self, config, mesh, start):
        self.config = config
        self.mesh = mesh
        self.start = start
        grid = config.grid
        self.mu = config.symbol.sample_mu(grid.points(FREQUENCY))
        levels, inverse = np.unique(self.mu, return_inverse=True)
        self._levels = levels
        self._inverse = inverse.reshape(self.mu.shape)
        self.phase = [np.exp(2j * np.pi * (mesh[i + 1] - mesh[i]) * self.mu) for i in range(len(mesh) - 1)]
        n = len(mesh) - 1
        self._weights = None
        if n * config.stencil * levels.size <= 1 << 23:
            self._weights = [interval_weights(mesh, i, levels, config.stencil) for i in range(n)]

    def weights(self, i):
        if self._weights is not None:
            st, ws = self._weights[i]
        else:
            st, ws = interval_weights(self.mesh, i, self._levels, self.config.stencil)
        return st, [w[self._inverse] for w in ws]

    def free(self, f_hat):
        return np.stack([np.exp(2j * np.pi * s * self.mu) * f_hat for s in self.mesh])

    def source(self, u_hat):
        """FT(V(s) G(u(s))) at every node."""
        cfg = self.config
        pot = cfg.potential
        if pot is None:
            return np.zeros_like(u_hat)
        grid = cfg.grid
        axes = tuple(range(grid.d))

        def one(j):
            U = u_hat[j]
            u = sfft.fftshift(sfft.ifftn(sfft.ifftshift(U, axes=axes), axes=axes), axes=axes) / grid.h**grid.d
            Vu = pot.multiply(self.start + self.mesh[j], SampledField(grid, cfg.nonlinearity(u), SPACE))
            return forward_fourier(Vu).values

        idx = range(len(self.mesh))
        if cfg.workers and cfg.workers > 1:
            with ThreadPoolExecutor(cfg.workers) as ex:
                vals = list(ex.map(one, idx))
        else:
            vals = [one(j) for j in idx]
        return np.stack(vals)

    def apply(self, u_hat, free):
        W = self.source(u_hat)
        out = np.empty_like(free)
        out[0] = free[0]
        acc = np.zeros(free.shape[1:], dtype=complex)
        for i in range(len(self.mesh) - 1):
            st, ws = self.weights(i)
            J = sum(w * W[j] for j, w in zip(st, ws))
            acc = self.phase[i] * acc + J
            out[i + 1] = free[i + 1] + 2j * np.pi * acc
        return out


def _norm(config, F):
    """Discrete W^{q,inf} (or FL^q) norm of a frequency array."""
    grid = config.grid
    if config.norm == "fourier":
        return lp_norm(SampledField(grid, F, FREQUENCY), config.q)
    axes = tuple(range(grid.d))
    u = sfft.fftshift(sfft.ifftn(sfft.ifftshift(F, axes=axes), axes=axes), axes=axes) / grid.h**grid.d
    return amalgam_sup(SampledField(grid, u, SPACE), config.window, p=config.q)[0]


def _node_norm(config, U):
    return float(_node_norms(config, U).max())


def _node_norms(config, U):
    grid = config.grid
    if config.norm == "amalgam" and grid.d == 1:
        u = sfft.fftshift(sfft.ifft(sfft.ifftshift(U, axes=1), axis=1), axes=1) / grid.h
        return stacked_amalgam_sup(u, grid, config.window, p=config.q)
    return np.array([_norm(config, U[j]) for j in range(len(U))])


def potential_bound(config):
    """sup_t |V(t)| in W^{p,1} (W^{inf,1} in standard mode)."""
    pot = config.potential
    if pot is None:
        return 0.0
    if np.isinf(config.p):
        return amalgam_bound_w_inf1(pot, config.window, config.grid)
    return pot.envelope.sup() * amalgam_wp1_norm(pot, config.grid, config.window, config.p)


def step_size(config):
    """Ceiling for T from the step formula, or the configured step."""
    if config.step is not None:
        return float(config.step)
    V = potential_bound(config)
    if V == 0:
        return 1.0
    beta = config.singular_exponent
    C = config.C_prime
    if C is None:
        C = estimate_C_prime(config.symbol, config.window, exponent=beta, p=dual_exponent(config.p))
    C_R = 1.0
    if not config.nonlinearity.is_linear:
        A = config.algebra_constant
        if A is None:
            A = calibrate_algebra_constant(config.grid, config.window)
        C_R = lipschitz_constant_C_R(config.nonlinearity, config.R, A)
    return step_from_exponent(beta, C, C_R, V)


def _picard_window(config, f_hat, start, T):
    """Picard iteration on [start, start + T]; returns (mesh, nodes, diagnostics)."""
    cap = None if config.mode == "standard" else LOW_REGULARITY_MAX_GRADING
    mesh = graded_mesh(T, config.nodes, config.singular_exponent, cap)
    op = _Duhamel(config, mesh, start)
    free = op.free(f_hat)
    u = free
    diffs, ratios = [], []
    scale = max(_node_norm(config, free), 1e-300)
    for it in range(1, config.max_iterations + 1):
        new = op.apply(u, free)
        diff = _node_norm(config, new - u)
        if diffs and diffs[-1] > 1e3 * np.finfo(float).eps * scale:
            ratios.append(diff / diffs[-1])
            if len(ratios) >= 2 and ratios[-1] > 0.9 and ratios[-2] > 0.9:
                raise NonContractionError(
                    f"Picard ratios {ratios[-2]:.3f}, {ratios[-1]:.3f} > 0.9 on T={T:g}; use a smaller T"
                )
        diffs.append(diff)
        u = new
        if diff <= config.tolerance:
            break
    else:
        raise NonContractionError(f"no convergence in {config.max_iterations} Picard iterations on T={T:g}")
    return op, mesh, free, u, it, tuple(diffs), tuple(ratios)


def _quadrature_estimate(config, start, mesh, u, free_fine):
    """Node-doubling self-estimate: fine rule vs the rule on every other node."""
    coarse_mesh = mesh[::2]
    coarse = _Duhamel(config, coarse_mesh, start)
    a = _Duhamel(config, mesh, start).apply(u, free_fine)[::2]
    b = coarse.apply(u[::2], free_fine[::2])
    # the coarse rule's error is at least 3x the fine one for any order >= 2
    return _node_norm(config, a - b) / 3.0


def picard_solve(config, f=None, start=0.0, T=None):
    """Fixed point u = u_0 + A G(u) on one window, halving T until contraction <= 0.6."""
    f = config.f if f is None else f
    if T is None:
        T = step_size(config)
        if config.t_max is not None:
            T = min(T, config.t_max)
    f_hat = forward_fourier(f, config.workers).values
    for halvings in range(config.max_halvings + 1):
        try:
            op, mesh, free, u, its, diffs, ratios = _picard_window(config, f_hat, start, T)
        except NonContractionError:
            if halvings == config.max_halvings:
                raise
            T /= 2
            continue
        if all(r <= 0.6 for r in ratios):
            break
        if halvings == config.max_halvings:
            raise NonContractionError(f"contraction ratio {max(ratios):.3f} > 0.6 after {halvings} halvings")
        T /= 2
    residual = _node_norm(config, op.apply(u, free) - u)
    if residual > 2 * config.tolerance:
        raise NonContractionError(f"post-hoc fixed-point residual {residual:.2e} exceeds 2x tolerance")
    qest = _quadrature_estimate(config, start, mesh, u, free) if config.check_quadrature and config.potential is not None else 0.0
    if qest > 0.1 * config.tolerance:
        raise NumericQualityError(
            f"quadrature self-estimate {qest:.2e} > 0.1 x tolerance; increase the number of nodes"
        )
    axes = tuple(range(config.grid.d))
    fields = []
    for j in range(len(mesh)):
        vals = sfft.fftshift(sfft.ifftn(sfft.ifftshift(u[j], axes=axes), axes=axes), axes=axes) / config.grid.h**config.grid.d
        fields.append(SampledField(config.grid, vals, SPACE))
    fields[0] = f
    norms = _node_norms(config, u)
    diag = WindowDiagnostics(start, T, its, diffs, ratios, float(norms.max()), residual, qest, halvings)
    return SolutionTrajectory(start + mesh, tuple(fields), (diag,), norms)


def global_solve(config):
    """Concatenated windows [nT, (n+1)T] up to t_max; linear G only."""
    if not config.nonlinearity.is_linear:
        raise ModeError("global continuation is only available for G(u) = u; use picard_solve")
    if config.t_max is None:
        raise ParameterError("global_solve needs t_max")
    T0 = step_size(config)
    times, fields, windows, norms = [0.0], [config.f], [], []
    start, f = 0.0, config.f
    while start < config.t_max * (1 - 1e-12):
        T = min(T0, config.t_max - start)
        win = picard_solve(config, f=f, start=start, T=T)
        if not times[1:]:
            norms.append(win.norms[0])
        times.extend(win.times[1:])
        fields.extend(win.fields[1:])
        norms.extend(win.norms[1:])
        windows.extend(win.windows)
        start = float(win.times[-1])
        f = win.final
        T0 = windows[-1].T
    return SolutionTrajectory(np.array(times), tuple(fields), tuple(windows), np.array(norms))


def low_regularity_solve(config):
    if config.mode != "low_regularity":
        raise ModeError("low_regularity_solve needs mode='low_regularity'")
    if config.t_max is None:
        return picard_solve(config)
    return global_solve(config)


def solve(config):
    """Single window when t_max is unset, otherwise global continuation."""
    if config.t_max is None:
        return picard_solve(config)
    return global_solve(config)


def data_lipschitz_constant(config, pairs=20, seed=0):
    """max ||u[f1] - u[f2]|| / ||f1 - f2||_{FL^1} over random data in B_{R/2}, at a common T."""
    rng = np.random.default_rng(seed)
    grid = config.grid
    base = forward_fourier(config.f).values
    ref = picard_solve(config)
    T = ref.windows[0].T
    worst = 0.0
    for _ in range(pairs):
        data = []
        for _ in range(2):
            noise = rng.normal(size=grid.shape) + 1j * rng.normal(size=grid.shape)
            F = base * (1 + 0.5 * noise * np.exp(-np.abs(grid.points(FREQUENCY)).sum(axis=-1)))
            F *= rng.uniform(0.1, 1.0) * (config.R / 2) / lp_norm(SampledField(grid, F, FREQUENCY), 1)
            axes = tuple(range(grid.d))
            vals = sfft.fftshift(sfft.ifftn(sfft.ifftshift(F, axes=axes), axes=axes), axes=axes) / grid.h**grid.d
            data.append(SampledField(grid, vals, SPACE))
        u1 = picard_solve(config, f=data[0], T=T)
        u2 = picard_solve(config, f=data[1], T=T)
        if u1.windows[0].T != T or u2.windows[0].T != T:
            raise NonContractionError("data pairs required different step sizes")
        num = max(
            _norm(config, forward_fourier(a).values - forward_fourier(b).values)
            for a, b in zip(u1.fields, u2.fields)
        )
        den = lp_norm(forward_fourier(data[0] - data[1]), 1)
        worst = max(worst, num / den)
    return worst
