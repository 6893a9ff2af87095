"""Free propagators exp(2 pi i t mu(D)), fundamental solutions and decay scans."""

import threading
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import AliasingWarning, DiagnosticError, ParameterError, StructuralError
from .gabor import (
    amalgam_sup,
    fit_loglog,
    fresnel_norms,
    gaussian_window,
    slice_norms,
    _lattice_indices,
)
from .grid import FREQUENCY, SPACE, GridSpec, SampledField, forward_fourier, inverse_fourier
from .symbols import SmoothedSymbol


def multiplier_aliasing_fraction(symbol, grid, t):
    """Fraction of frequency modes whose group displacement |t d_j mu| exceeds L/2."""
    g = symbol.sample_grad(grid.points(FREQUENCY))
    return float(np.mean(np.max(np.abs(t * g), axis=-1) > grid.L / 2))


def _warn_aliasing(symbol, grid, t):
    frac = multiplier_aliasing_fraction(symbol, grid, t)
    if frac > 0.01:
        warnings.warn(
            f"group displacement exceeds half the domain on {100 * frac:.1f}% of modes at t={t:g}",
            AliasingWarning,
            stacklevel=3,
        )
    return frac


class MultiplierPropagator:
    """U(t) = exp(2 pi i t mu(D)) on a fixed grid with a per-t multiplier cache."""

    def __init__(self, symbol, grid, workers=None):
        if symbol.d != grid.d:
            raise StructuralError("symbol and grid dimensions differ")
        # homogeneous symbols are continuous at the origin for m > 1 and are
        # sampled directly; an explicitly smoothed symbol is honoured as given
        self.symbol = symbol
        self.grid = grid
        self.workers = workers
        self._mu = self.symbol.sample_mu(grid.points(FREQUENCY))
        self._cache = {}
        self._lock = threading.Lock()

    @property
    def mu_values(self):
        return self._mu

    def multiplier(self, t):
        t = float(t)
        with self._lock:
            mult = self._cache.get(t)
        if mult is None:
            mult = np.exp(2j * np.pi * t * self._mu)
            mult.flags.writeable = False
            with self._lock:
                self._cache.setdefault(t, mult)
        return mult

    def apply(self, t, f, check=True):
        if f.grid != self.grid:
            raise StructuralError("field lives on a different grid")
        if f.domain != SPACE:
            raise StructuralError("apply expects a space-domain field")
        if check and t != 0:
            _warn_aliasing(self.symbol, self.grid, abs(t))
        F = forward_fourier(f, self.workers)
        return inverse_fourier(F.with_values(F.values * self.multiplier(t)), self.workers)


def band_taper(grid, fraction):
    """Smooth radial-in-each-axis taper equal to 1 except on the outer fraction of the band."""
    from .symbols import smooth_step

    xi = np.abs(grid.frequency_axis()) / (grid.N / (2 * grid.L))
    u = (xi - (1 - fraction)) / fraction
    prof = smooth_step(u)[0]
    out = np.ones(grid.shape)
    for ax in range(grid.d):
        shp = [1] * grid.d
        shp[ax] = grid.N
        out = out * prof.reshape(shp)
    return out


def fundamental_solution(symbol, t, grid, taper=None, check=True):
    """E(t, .) as the inverse transform of the sampled multiplier.

    taper, if given, is the band fraction over which the multiplier is rolled
    off smoothly; this suppresses the endpoint ripple of the hard band edge.
    """
    if not t > 0:
        raise ParameterError(f"t must be positive, got {t}")
    if symbol.d != grid.d:
        raise StructuralError("symbol and grid dimensions differ")
    if check:
        _warn_aliasing(symbol, grid, t)
    mult = np.exp(2j * np.pi * t * symbol.sample_mu(grid.points(FREQUENCY)))
    if taper:
        mult = mult * band_taper(grid, taper)
    return inverse_fourier(SampledField(grid, mult, FREQUENCY))


def gradient_cube_constant(symbol, n=201):
    """max_j |d_j mu| over the cube [-1, 1]^d; the group displacement scales as K B^(m-1)."""
    base = symbol.base if isinstance(symbol, SmoothedSymbol) else symbol
    s = np.linspace(-1, 1, n if base.d == 1 else (n if base.d == 2 else 41))
    mesh = np.meshgrid(*([s] * base.d), indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=-1)
    return float(np.max(np.abs(base.sample_grad(pts))))


def scan_grid(symbol, t, N, safety=0.45):
    """Grid with N points per axis whose band keeps t |d_j mu| <= safety L (no wrap-around)."""
    K = gradient_cube_constant(symbol)
    m = symbol.m
    L = (t * K * (N / 2) ** (m - 1) / safety) ** (1.0 / m)
    return GridSpec(symbol.d, N, L)


def upsample(f, factor):
    """Exact trigonometric upsampling by zero-padding the spectrum."""
    if factor == 1:
        return f
    g = f.grid
    F = forward_fourier(f).values
    big = GridSpec(g.d, g.N * factor, g.L)
    pad = (big.N - g.N) // 2
    Fb = np.pad(F, [(pad, pad)] * g.d)
    return inverse_fourier(SampledField(big, Fb, FREQUENCY))


def resolve_for_window(f, window, max_step_ratio=1 / 6):
    """Upsample until h <= width * max_step_ratio."""
    factor = 1
    while f.grid.h / factor > window.width * max_step_ratio:
        factor *= 2
    return upsample(f, factor)


def kernel_amalgam_norm(symbol, t, N, window, safety=0.45, pad=2, p=1.0):
    """Discrete sup_y ||g(. - y) E(t)||_{FL^p} on the no-wrap grid for t.

    Returns (norm, grid). The coarse scan step scales with the self-similar
    length t^(1/m) once that exceeds the window width.
    """
    grid = scan_grid(symbol, t, N, safety)
    E = fundamental_solution(symbol, t, grid, check=False)
    E = resolve_for_window(E, window)
    step = max(0.5 * window.width, t ** (1.0 / symbol.m) / 8)
    coarse = max(1, int(round(step / E.grid.h)))
    ray = getattr(symbol, "kind", None) == "radial_power" and window.kind == "gaussian"
    val, _ = amalgam_sup(E, window, p=p, coarse=coarse, pad=pad, ray=ray)
    return val, grid


@dataclass(frozen=True)
class DecayScan:
    t: np.ndarray
    norms: np.ndarray
    extents: np.ndarray
    points: int
    small_fit: object
    large_fit: object

    def rows(self):
        return [
            {"t": float(t), "L": float(L), "N": self.points, "norm": float(n)}
            for t, L, n in zip(self.t, self.extents, self.norms)
        ]


def _fit_range(t, norms, lo, hi):
    sel = (t >= lo * (1 - 1e-9)) & (t <= hi * (1 + 1e-9))
    if sel.sum() < 2:
        return None
    return fit_loglog(t[sel], norms[sel])


def dispersive_decay_scan(symbol, t_list, N, window=None, small=(1e-2, 1e-1), large=(10.0, 100.0),
                          safety=0.45, pad=2):
    """Discrete W^{1,inf} norms of E(t) with least-squares slopes on two t-ranges.

    Each t gets its own extent L(t) so that no group displacement wraps around
    the periodic domain; this makes the discrete problem exactly self-similar.
    """
    t_arr = np.asarray(sorted(float(t) for t in t_list))
    if t_arr.size == 0:
        raise ParameterError("t_list is empty")
    if np.any(t_arr <= 0):
        raise ParameterError("times must be positive")
    if window is None:
        window = gaussian_window(1.0, symbol.d)
    norms, extents = [], []
    for t in t_arr:
        val, grid = kernel_amalgam_norm(symbol, t, N, window, safety, pad)
        norms.append(val)
        extents.append(grid.L)
    norms = np.array(norms)
    small_fit = _fit_range(t_arr, norms, *small)
    large_fit = _fit_range(t_arr, norms, *large)
    return DecayScan(t_arr, norms, np.array(extents), N, small_fit, large_fit)


def self_similarity_error(symbol, t, grid, ref_grid, taper=0.2):
    """Relative L^2 error of E(t, x) vs t^(-d/m) E_mu(t^(-1/m) x) over the central half.

    E_mu is computed independently on ref_grid and evaluated off-grid by
    trigonometric interpolation.
    """
    from .grid import bandlimited_eval

    d, m = symbol.d, symbol.m
    E = fundamental_solution(symbol, t, grid, taper=taper)
    Emu = fundamental_solution(symbol, 1.0, ref_grid, taper=taper)
    pts = grid.points(SPACE).reshape(-1, d)
    central = np.all(np.abs(pts) < grid.L / 4, axis=-1)
    x = pts[central]
    y = x * t ** (-1.0 / m)
    if np.any(np.abs(y) >= ref_grid.L / 4):
        raise StructuralError("reference grid does not cover the rescaled central region")
    pred = t ** (-d / m) * bandlimited_eval(Emu, y)
    got = E.values.reshape(-1)[central]
    return float(np.linalg.norm(got - pred) / np.linalg.norm(pred))


def operator_norm_check(symbol, t_list, probes, N, window=None, safety=0.45):
    """max over probes of |U(t) f|_{W^{1,inf}} / (max(t^(-d/m), t^(-2d/m)) |f|_{W^{inf,1}}) per t.

    probes are callables x -> values (shape (..., d) -> (...)), or ("dirac", points)
    tuples giving exact discrete Dirac combs. Returns a list of per-t maxima.
    """
    if window is None:
        window = gaussian_window(1.0, symbol.d)
    d, m = symbol.d, symbol.m
    out = []
    for t in t_list:
        grid = scan_grid(symbol, t, N, safety)
        grid = GridSpec(d, N, max(grid.L, 16 * window.width))
        prop = MultiplierPropagator(symbol, grid)
        best = 0.0
        for probe in probes:
            f = _probe_field(probe, grid)
            w_in = _w_inf1(f, window)
            u = resolve_for_window(prop.apply(t, f, check=False), window)
            step = max(0.5 * window.width, t ** (1.0 / m) / 8)
            val, _ = amalgam_sup(u, window, 1.0, coarse=max(1, int(round(step / u.grid.h))))
            best = max(best, val / (max(t ** (-d / m), t ** (-2 * d / m)) * w_in))
        out.append(best)
    return out


def _probe_field(probe, grid):
    if isinstance(probe, tuple) and probe[0] == "dirac":
        pts = np.atleast_2d(probe[1])
        F = np.zeros(grid.shape, dtype=complex)
        xi = grid.points(FREQUENCY)
        for p in pts:
            F += np.exp(-2j * np.pi * (xi @ p))
        return inverse_fourier(SampledField(grid, F, FREQUENCY))
    return SampledField(grid, probe(grid.points(SPACE)), SPACE)


def _w_inf1(f, window):
    """Discrete |f|_{W^{inf,1}} = int sup_xi |V_g f(x, xi)| dx over the full lattice."""
    f = resolve_for_window(f, window)
    g = f.grid
    centers = _lattice_indices(g, 1)
    sup = slice_norms(f, window, centers, p=np.inf)
    return float(np.sum(sup) * g.h**g.d)


def interpolated_multiplier_norms(symbol, p, t_list, window=None, dx=0.25):
    """Discrete |exp(2 pi i t mu)|_{M^{p,inf}} for each t, from analytic slices.

    The extent grows like t^(-1/(m-1)) so the x-support of each xi-slice fits.
    """
    if window is None:
        window = gaussian_window(1.0, symbol.d)
    p = float(p)
    out = []
    for t in t_list:
        reach = (1.0 / (window.width * t * symbol.m)) ** (1.0 / (symbol.m - 1))
        L = max(16.0 * window.width, 6.0 * reach)
        stream = fresnel_norms(symbol, window, L, dx=dx, t=t, ps=(p,))
        out.append(stream.modulation_norm(p, np.inf))
    return np.array(out)


def interpolated_multiplier_bound_check(symbol, p, t_list, window=None):
    """Small-t log-log slope of |F_t|_{M^{p,inf}}."""
    t_arr = np.asarray(t_list, dtype=float)
    norms = interpolated_multiplier_norms(symbol, p, t_arr, window)
    if t_arr.size < 2:
        raise DiagnosticError("need at least two times for a slope")
    return fit_loglog(t_arr, norms).slope, norms
