"""Measure-type potentials through exact or semi-analytic Fourier transforms."""

import threading
import warnings
from dataclasses import dataclass, field
from math import gamma

import numpy as np
from scipy import interpolate, special

from .errors import ConfigError, InterpolationWarning, ParameterError, StructuralError
from .gabor import _lattice_indices, slice_norms
from .grid import FREQUENCY, SPACE, GridSpec, SampledField, bandlimited_eval, forward_fourier, inverse_fourier


def sphere_area(d):
    """Surface area of the unit sphere in R^d."""
    return 2 * np.pi ** (d / 2) / gamma(d / 2)


def _radial_xi(xi, d):
    xi = np.asarray(xi, dtype=float)
    if d == 1 and (xi.ndim == 0 or xi.shape[-1] != 1):
        xi = xi[..., None]
    return np.linalg.norm(xi, axis=-1)


@dataclass(frozen=True)
class Envelope:
    """Bounded time profile a(t): constant c, or a0 + a1 sin(2 pi omega t)."""

    kind: str = "const"
    params: tuple = (1.0,)

    def __post_init__(self):
        if self.kind == "const" and len(self.params) != 1:
            raise ParameterError("constant envelope takes one parameter")
        if self.kind == "sinusoid" and len(self.params) != 3:
            raise ParameterError("sinusoid envelope takes (a0, a1, omega)")
        if self.kind not in ("const", "sinusoid"):
            raise ParameterError(f"unknown envelope kind {self.kind!r}")

    def __call__(self, t):
        if self.kind == "const":
            return complex(self.params[0])
        a0, a1, om = self.params
        return complex(a0 + a1 * np.sin(2 * np.pi * om * t))

    def sup(self):
        if self.kind == "const":
            return abs(self.params[0])
        a0, a1, _ = self.params
        return abs(a0) + abs(a1)

    def to_config(self):
        return {"kind": self.kind, "params": [_cnum(p) for p in self.params]}


def _cnum(z):
    z = complex(z)
    return z.real if z.imag == 0 else [z.real, z.imag]


class Potential:
    """Common interface: exact transform ft, sampling on grids and the product V u."""

    d = 1
    envelope = Envelope()

    def ft(self, xi):
        raise NotImplementedError

    def check_grid(self, grid):
        if grid.d != self.d:
            raise StructuralError("potential and grid dimensions differ")

    def membership(self, p):
        """True/False if V in W^{p,1} is known, None if undecided."""
        return None

    def threshold(self):
        """Critical exponent p_c with membership iff p > p_c, or None."""
        return None

    def space_samples(self, grid):
        with self._lock:
            cached = self._space_cache.get(grid)
        if cached is None:
            cached = inverse_fourier(to_frequency(self, grid))
            with self._lock:
                self._space_cache[grid] = cached
        return cached

    def multiply(self, t, u):
        """Space-domain samples of a(t) V u via transform-multiply-transform."""
        if u.domain != SPACE:
            raise StructuralError("multiply expects a space-domain field")
        V = self.space_samples(u.grid)
        return u.with_values(self.envelope(t) * V.values * u.values)

    def to_config(self):
        raise ConfigError(f"{type(self).__name__} cannot be serialized")


def _init_caches(obj):
    object.__setattr__(obj, "_lock", threading.Lock())
    object.__setattr__(obj, "_space_cache", {})


@dataclass(frozen=True, eq=False)
class DiracComb(Potential):
    """sum_j w_j delta_{x_j}."""

    points: np.ndarray
    weights: np.ndarray
    envelope: Envelope = Envelope()

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        w = np.atleast_1d(np.asarray(self.weights, dtype=complex))
        if len(pts) != len(w) or len(w) == 0:
            raise ParameterError("need one weight per point and at least one point")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)
        _init_caches(self)

    @property
    def d(self):
        return self.points.shape[1]

    def ft(self, xi):
        xi = np.asarray(xi, dtype=float)
        if self.d == 1 and (xi.ndim == 0 or xi.shape[-1] != 1):
            xi = xi[..., None]
        out = np.zeros(xi.shape[:-1], dtype=complex)
        for p, w in zip(self.points, self.weights):
            out += w * np.exp(-2j * np.pi * (xi @ p))
        return out

    def check_grid(self, grid):
        super().check_grid(grid)
        if np.any(np.abs(self.points) >= grid.L / 2):
            raise StructuralError("Dirac points must lie inside the grid")

    def membership(self, p):
        return bool(np.isinf(p))

    def multiply(self, t, u):
        """FT(V u)(xi) = sum_j w_j u(x_j) exp(-2 pi i xi.x_j), back in space."""
        if u.domain != SPACE:
            raise StructuralError("multiply expects a space-domain field")
        g = u.grid
        self.check_grid(g)
        vals = _point_values(u, self.points)
        xi = g.points(FREQUENCY)
        F = np.zeros(g.shape, dtype=complex)
        for p, w, v in zip(self.points, self.weights, vals):
            F += w * v * np.exp(-2j * np.pi * (xi @ p))
        return inverse_fourier(SampledField(g, self.envelope(t) * F, FREQUENCY))

    def to_config(self):
        return {
            "variant": "dirac_comb",
            "points": self.points.tolist(),
            "weights": [_cnum(w) for w in self.weights],
            "envelope": self.envelope.to_config(),
        }


def _point_values(u, points):
    """u at the given points: exact at grid nodes, band-limited interpolation otherwise."""
    g = u.grid
    idx = (points + g.L / 2) / g.h
    on_grid = np.all(np.abs(idx - np.round(idx)) < 1e-9, axis=-1)
    out = np.empty(len(points), dtype=complex)
    if on_grid.any():
        ii = np.round(idx[on_grid]).astype(int) % g.N
        out[on_grid] = u.values[tuple(ii.T)]
    if (~on_grid).any():
        out[~on_grid] = bandlimited_eval(u, points[~on_grid])
        est = _interpolation_error_estimate(u)
        if est > 1e-8:
            warnings.warn(
                f"off-grid Dirac point: band-limited interpolation error estimate {est:.2e}",
                InterpolationWarning,
                stacklevel=3,
            )
    return out


def _interpolation_error_estimate(u):
    """Spectral mass in the outer tenth of the band, relative to the total."""
    g = u.grid
    F = np.abs(forward_fourier(u).values)
    xi = np.abs(g.points(FREQUENCY)).max(axis=-1)
    outer = xi >= 0.9 * g.N / (2 * g.L)
    total = F.sum()
    return float(F[outer].sum() / total) if total > 0 else 0.0


@dataclass(frozen=True, eq=False)
class SphereShell(Potential):
    """Uniform measure on the sphere of radius r in R^d (d = 2, 3) with the given total mass.

    The default mass is the surface area, i.e. the plain surface measure.
    """

    radius: float = 1.0
    mass: float = None
    d: int = 3
    envelope: Envelope = Envelope()

    def __post_init__(self):
        if self.d not in (2, 3):
            raise ParameterError("sphere shells are implemented for d = 2 and 3")
        if not self.radius > 0:
            raise ParameterError("radius must be positive")
        if self.mass is None:
            object.__setattr__(self, "mass", sphere_area(self.d) * self.radius ** (self.d - 1))
        _init_caches(self)

    def ft(self, xi):
        rho = _radial_xi(xi, self.d)
        z = 2 * np.pi * self.radius * rho
        if self.d == 3:
            return self.mass * np.sinc(z / np.pi)
        return self.mass * special.j0(z)

    def leading_term(self, xi):
        """2 |xi|^(-(d-1)/2) cos(2 pi (|xi| - (d-1)/8)), the unit-sphere asymptotics."""
        rho = _radial_xi(xi, self.d)
        return 2 * rho ** (-(self.d - 1) / 2) * np.cos(2 * np.pi * (rho - (self.d - 1) / 8))

    def check_grid(self, grid):
        super().check_grid(grid)
        if self.radius >= grid.L / 2:
            raise StructuralError("sphere does not fit inside the grid")

    def threshold(self):
        return 2 * self.d / (self.d - 1)

    def membership(self, p):
        return bool(p > self.threshold())

    def to_config(self):
        return {"variant": "sphere_shell", "radius": self.radius, "mass": self.mass,
                "d": self.d, "envelope": self.envelope.to_config()}


def _radial_kernel(z, d):
    """Average of exp(-i z w.e) over the unit sphere of R^d."""
    if d == 1:
        return np.cos(z)
    if d == 2:
        return special.j0(z)
    if d == 3:
        return np.sinc(z / np.pi)
    nu = d / 2 - 1
    zs = np.where(z == 0, 1.0, z)
    val = gamma(d / 2) * (zs / 2) ** (-nu) * special.jv(nu, zs)
    return np.where(z == 0, 1.0, val)


def coulomb_ft_quadrature(rho, alpha, R, d, nodes=16):
    """Radial transform of |x|^(-alpha) 1_{|x|<R} by composite Gauss-Legendre quadrature.

    Substituting r = R s^(1/(d - alpha)) removes the weight r^(d-1-alpha); panels
    follow a uniform partition in r (about four per oscillation) with geometric
    refinement towards the origin.
    """
    rho = np.atleast_1d(np.asarray(rho, dtype=float))
    beta = d - alpha
    gl_x, gl_w = np.polynomial.legendre.leggauss(nodes)
    K = int(max(8, np.ceil(4 * rho.max() * R)))
    r_edges = np.concatenate([R * np.geomspace(1e-14, 1.0 / K, 30)[:-1], R * np.arange(1, K + 1) / K])
    r_edges = np.concatenate([[0.0], r_edges])
    s_edges = (r_edges / R) ** beta
    a, b = s_edges[:-1], s_edges[1:]
    s = (0.5 * (b - a)[:, None] * gl_x[None] + 0.5 * (a + b)[:, None]).ravel()
    w = (0.5 * (b - a)[:, None] * gl_w[None]).ravel()
    r = R * s ** (1.0 / beta)
    pref = sphere_area(d) * R**beta / beta if d > 1 else 2 * R**beta / beta
    out = np.empty(rho.shape)
    for i0 in range(0, rho.size, 64):
        blk = rho[i0:i0 + 64]
        out[i0:i0 + 64] = pref * (_radial_kernel(2 * np.pi * blk[:, None] * r[None], d) @ w)
    return out


@dataclass(frozen=True, eq=False)
class CroppedCoulomb(Potential):
    """|x|^(-alpha) on the ball of radius R, alpha in (0, d)."""

    alpha: float = 1.0
    R: float = 1.0
    d: int = 3
    envelope: Envelope = Envelope()
    _table: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if not 0 < self.alpha < self.d:
            raise ParameterError(f"alpha must lie in (0, d) for local integrability, got {self.alpha}")
        if not self.R > 0:
            raise ParameterError("R must be positive")
        _init_caches(self)

    def _spline(self, rho_max):
        with self._lock:
            tab = self._table.get("spline")
        if tab is None or tab[0] < rho_max:
            top = max(rho_max, 8.0 / self.R) * 1.05
            step = 1.0 / (128 * self.R)
            grid = np.arange(0, top + 4 * step, step)
            vals = coulomb_ft_quadrature(grid, self.alpha, self.R, self.d)
            tab = (top, interpolate.CubicSpline(grid, vals))
            with self._lock:
                self._table["spline"] = tab
        return tab[1]

    def ft(self, xi):
        rho = _radial_xi(xi, self.d)
        if rho.size <= 256:
            return coulomb_ft_quadrature(rho.ravel(), self.alpha, self.R, self.d).reshape(rho.shape)
        return self._spline(float(rho.max()))(rho)

    def check_grid(self, grid):
        super().check_grid(grid)
        if self.R >= grid.L / 2:
            raise StructuralError("ball does not fit inside the grid")

    def threshold(self):
        return self.d / (self.d - self.alpha)

    def membership(self, p):
        return bool(p > self.threshold())

    def to_config(self):
        return {"variant": "cropped_coulomb", "alpha": self.alpha, "R": self.R, "d": self.d,
                "envelope": self.envelope.to_config()}


@dataclass(frozen=True, eq=False)
class DensityField(Potential):
    """A potential given by its samples on a grid."""

    field: SampledField
    envelope: Envelope = Envelope()

    def __post_init__(self):
        if self.field.domain != SPACE:
            raise StructuralError("density potentials are given in space")
        _init_caches(self)

    @property
    def d(self):
        return self.field.grid.d

    def ft(self, xi):
        raise ParameterError("density potentials only have grid transforms; use to_frequency")

    def multiply(self, t, u):
        if u.grid != self.field.grid:
            raise StructuralError("field and potential live on different grids")
        return u.with_values(self.envelope(t) * self.field.values * u.values)


def modulated(base, envelope):
    """The potential a(t) V(x) built from a time-independent base potential."""
    if isinstance(base, DiracComb):
        return DiracComb(base.points, base.weights, envelope)
    if isinstance(base, SphereShell):
        return SphereShell(base.radius, base.mass, base.d, envelope)
    if isinstance(base, CroppedCoulomb):
        return CroppedCoulomb(base.alpha, base.R, base.d, envelope)
    if isinstance(base, DensityField):
        return DensityField(base.field, envelope)
    raise ParameterError("unknown base potential")


def to_frequency(potential, grid):
    """V^ sampled on the frequency grid."""
    potential.check_grid(grid)
    if isinstance(potential, DensityField):
        if potential.field.grid != grid:
            raise StructuralError("density potential lives on a different grid")
        return forward_fourier(potential.field)
    return SampledField(grid, potential.ft(grid.points(FREQUENCY)), FREQUENCY)


def multiply(potential, t, u):
    return potential.multiply(t, u)


def sphere_ft_asymptotic_check(potential, xi_range=(5.0, 20.0), n=4001):
    """Scaled residual |V^ - leading| |xi|^((d+1)/2) over the range, split at the midpoint.

    Returns a dict with the maxima over the lower and upper halves of the
    range; bounded (non-growing) residuals have upper <= 2 lower.
    """
    if not isinstance(potential, SphereShell):
        raise ParameterError("the asymptotic check applies to sphere shells")
    rho = np.linspace(xi_range[0], xi_range[1], n)
    xi = np.zeros((n, potential.d))
    xi[:, 0] = rho
    resid = np.abs(potential.ft(xi) - potential.leading_term(xi)) * rho ** ((potential.d + 1) / 2)
    mid = 0.5 * (xi_range[0] + xi_range[1])
    lower = float(resid[rho <= mid].max())
    upper = float(resid[rho > mid].max())
    return {"max_scaled_residual": float(resid.max()), "lower_half_max": lower,
            "upper_half_max": upper, "growth_ratio": upper / lower if lower > 0 else None}


def coulomb_decay_exponent(potential, rho_range=(4.0, 64.0), bins=40):
    """Slope of the upper envelope of |V^| in log-log coordinates."""
    from .gabor import fit_loglog

    edges = np.geomspace(rho_range[0], rho_range[1], bins + 1)
    centers, peaks = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        rr = np.linspace(a, max(b, a + 1.0 / potential.R), 64)
        xi = np.zeros((rr.size, potential.d))
        xi[:, 0] = rr
        peaks.append(np.abs(potential.ft(xi)).max())
        centers.append(np.sqrt(a * b))
    return fit_loglog(np.array(centers), np.array(peaks)).slope


def _is_radial(potential):
    if isinstance(potential, (SphereShell, CroppedCoulomb)):
        return True
    if isinstance(potential, DiracComb):
        return len(potential.points) == 1 and not np.any(potential.points)
    return False


def amalgam_wp1_norm(potential, grid, window, p, dx=0.25, taper=None):
    """Discrete |V|_{W^{p,1}} = int ||V_g V(x, .)||_{L^p} dx from the space samples.

    Radial potentials (with the radial Gaussian window) are integrated along a
    ray with the shell measure; others over the full lattice. With `taper` set,
    the outer fraction of the band is rolled off smoothly before inversion so
    that truncation ringing does not spread the potential across the box.
    """
    if taper:
        from .propagator import band_taper

        spectrum = to_frequency(potential, grid).values * band_taper(grid, taper)
        V = inverse_fourier(SampledField(grid, spectrum, FREQUENCY))
    else:
        V = potential.space_samples(grid)
    g = grid
    stride = max(1, int(round(dx / g.h)))
    if _is_radial(potential) and window.kind == "gaussian":
        k = np.arange(0, g.N // 2, stride)
        centers = np.full((k.size, g.d), g.N // 2)
        centers[:, 0] += k
        r = k * g.h
        vals = slice_norms(V, window, centers, p=p, pad=2)
        shell = sphere_area(g.d) * r ** (g.d - 1) if g.d > 1 else 2.0 * np.ones_like(r)
        integrand = shell * vals
        if g.d == 1:
            integrand[0] *= 0.5
        return float(np.trapezoid(integrand, r) if g.d > 1 else np.sum(integrand) * stride * g.h)
    centers = _lattice_indices(g, stride)
    vals = slice_norms(V, window, centers, p=p, pad=2)
    return float(np.sum(vals) * (stride * g.h) ** g.d)


def amalgam_W_p1_estimate(potential, grid, window, p, dx=0.25, taper=0.5):
    """W^{p,1} estimate with its drift when the frequency band doubles (N -> 2N at fixed L).

    Reports the expected membership for variants with a known threshold and
    flags exponents within 0.05 of the threshold as inconclusive.
    """
    p = float(p)
    if not p >= 1:
        raise ParameterError("p must lie in [1, inf]")
    n0 = amalgam_wp1_norm(potential, grid, window, p, dx, taper)
    fine = GridSpec(grid.d, 2 * grid.N, grid.L)
    n1 = amalgam_wp1_norm(potential, fine, window, p, dx, taper)
    pc = potential.threshold()
    inconclusive = pc is not None and abs(p - pc) < 0.05
    return {
        "norm": n0,
        "norm_refined": n1,
        "drift": abs(n1 - n0) / n0,
        "expected_member": potential.membership(p),
        "threshold": pc,
        "inconclusive": bool(inconclusive),
    }


def amalgam_bound_w_inf1(potential, window, grid=None):
    """Upper bound for sup_t |V(t)|_{W^{inf,1}} used by the step-size rule."""
    env = potential.envelope.sup()
    if isinstance(potential, DiracComb):
        return env * float(np.sum(np.abs(potential.weights))) * window.l1_norm
    if grid is None:
        raise ParameterError("a grid is needed to estimate this potential's norm")
    return env * amalgam_wp1_norm(potential, grid, window, np.inf)


def potential_from_config(cfg, d):
    try:
        env_cfg = cfg.get("envelope", {"kind": "const", "params": [1.0]})
        params = tuple(complex(*p) if isinstance(p, list) else p for p in env_cfg.get("params", [1.0]))
        env = Envelope(env_cfg.get("kind", "const"), params)
        variant = cfg["variant"]
        if variant == "dirac_comb":
            w = [complex(*x) if isinstance(x, list) else x for x in cfg["weights"]]
            pts = np.asarray(cfg["points"], dtype=float).reshape(len(w), d)
            return DiracComb(pts, np.array(w), env)
        if variant == "sphere_shell":
            return SphereShell(cfg.get("radius", 1.0), cfg.get("mass"), cfg.get("d", d), env)
        if variant == "cropped_coulomb":
            return CroppedCoulomb(cfg["alpha"], cfg.get("R", 1.0), cfg.get("d", d), env)
        if variant == "zero":
            return None
    except KeyError as exc:
        raise ConfigError(f"potential block is missing key {exc.args[0]!r}") from None
    except (ParameterError, TypeError, ValueError) as exc:
        raise ConfigError(f"potential block: {exc}") from None
    raise ConfigError(f"unknown potential variant {cfg.get('variant')!r}")
