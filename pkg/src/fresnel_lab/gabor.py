"""Short-time Fourier transforms, mixed-norm estimators and phase-space regions.

V_g f(x, xi) = F(f conj(T_x g))(xi). Two discretizations are provided:

* grid STFTs of a SampledField, either over the full periodic grid
  (xi step 1/L) or over zero-padded patches covering the window support
  (xi step 1/(nfft h), much cheaper when the window is narrow);
* analytic slices of a Fresnel field exp(2 pi i t mu), synthesized directly on
  a locally adapted patch around each lattice point and demodulated by the
  local frequency, so arbitrarily large phase-space extents are reachable
  without a global grid.
"""

from dataclasses import dataclass, field
from math import gamma

import numpy as np
import scipy.fft as sfft
from scipy import integrate

from .errors import DiagnosticError, ParameterError, StructuralError
from .grid import SPACE, SampledField, forward_fourier

_TRUNCATION = 1e-17


# -- windows ----------------------------------------------------------------------


@dataclass(frozen=True)
class Window:
    """Analysis window: Gaussian exp(-pi |y|^2 / sigma^2) or a smooth bump of radius rho."""

    kind: str
    width: float
    d: int = 1
    l1_norm: float = field(init=False)

    def __post_init__(self):
        if self.kind not in ("gaussian", "bump"):
            raise ParameterError(f"unknown window kind {self.kind!r}")
        if not self.width > 0:
            raise ParameterError("window width must be positive")
        object.__setattr__(self, "l1_norm", self._l1())

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        if self.d == 1 and (y.ndim == 0 or y.shape[-1] != 1):
            y = y[..., None]
        r2 = np.sum(y**2, axis=-1) / self.width**2
        if self.kind == "gaussian":
            return np.exp(-np.pi * r2)
        inside = r2 < 1
        out = np.zeros(r2.shape)
        out[inside] = np.exp(1.0 - 1.0 / (1.0 - r2[inside]))
        return out

    def radius(self, tol=_TRUNCATION):
        """Radius beyond which the window is below tol (exact support for bumps)."""
        if self.kind == "bump":
            return self.width
        return self.width * np.sqrt(np.log(1.0 / tol) / np.pi)

    def bandwidth(self, tol=_TRUNCATION):
        """Frequency beyond which |g^| / |g|_1 stays below tol along an axis."""
        if self.kind == "gaussian":
            return np.sqrt(np.log(1.0 / tol) / np.pi) / self.width
        return _bump_bandwidth(tol) / self.width

    def fourier(self, eta):
        if self.kind != "gaussian":
            raise ParameterError("closed-form transform only for Gaussian windows")
        eta = np.asarray(eta, dtype=float)
        if self.d == 1 and (eta.ndim == 0 or eta.shape[-1] != 1):
            eta = eta[..., None]
        return self.width**self.d * np.exp(-np.pi * self.width**2 * np.sum(eta**2, axis=-1))

    def _l1(self):
        if self.kind == "gaussian":
            return self.width**self.d
        prof = lambda r: np.exp(1.0 - 1.0 / (1.0 - r**2)) * r ** (self.d - 1)
        val, _ = integrate.quad(prof, 0, 1, epsabs=1e-15, epsrel=1e-13, limit=200)
        area = 2 * np.pi ** (self.d / 2) / gamma(self.d / 2)
        if self.d == 1:
            area = 2.0
        return float(area * val * self.width**self.d)

    def to_config(self):
        key = "sigma" if self.kind == "gaussian" else "rho"
        return {"kind": self.kind, key: self.width}


def gaussian_window(sigma=1.0, d=1):
    return Window("gaussian", float(sigma), int(d))


def bump_window(rho=1.0, d=1):
    return Window("bump", float(rho), int(d))


def window_from_config(cfg, d):
    kind = cfg.get("kind", "gaussian")
    if kind == "gaussian":
        return gaussian_window(cfg.get("sigma", 1.0), d)
    if kind == "bump":
        return bump_window(cfg.get("rho", 1.0), d)
    raise ParameterError(f"unknown window kind {kind!r}")


_BUMP_BW = {}


def _bump_bandwidth(tol):
    if tol not in _BUMP_BW:
        n, span = 1 << 16, 8.0
        y = (np.arange(n) - n // 2) * (span / n)
        g = bump_window(1.0)(y)
        G = np.abs(np.fft.fftshift(np.fft.fft(np.fft.ifftshift(g)))) * (span / n)
        eta = (np.arange(n) - n // 2) / span
        above = np.abs(eta[G > tol * G.max()])
        _BUMP_BW[tol] = float(above.max()) if above.size else 1.0
    return _BUMP_BW[tol]


# -- fits ------------------------------------------------------------------------------


@dataclass(frozen=True)
class FitReport:
    slope: float
    intercept: float
    npoints: int
    residual: float

    def to_dict(self):
        return {"slope": self.slope, "intercept": self.intercept,
                "npoints": self.npoints, "residual": self.residual}


def fit_loglog(x, y, min_points=2):
    """Least-squares line through (log x, log y)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    keep = (x > 0) & (y > 0) & np.isfinite(x) & np.isfinite(y)
    if keep.sum() < min_points:
        raise DiagnosticError(f"only {int(keep.sum())} usable points, need {min_points}")
    lx, ly = np.log(x[keep]), np.log(y[keep])
    A = np.stack([lx, np.ones_like(lx)], axis=1)
    coef, *_ = np.linalg.lstsq(A, ly, rcond=None)
    res = ly - A @ coef
    return FitReport(float(coef[0]), float(coef[1]), int(keep.sum()), float(np.sqrt(np.mean(res**2))))


# -- grid STFT --------------------------------------------------------------------------


@dataclass(frozen=True)
class PhaseSpacePortrait:
    """V_g f sampled at lattice points x (shape (nx, d)) and a common xi lattice.

    values has shape (nx,) + (n_xi,)*d; dx and dxi are the lattice steps.
    """

    x: np.ndarray
    xi_axis: np.ndarray
    values: np.ndarray
    dx: float
    dxi: float
    window: Window

    @property
    def d(self):
        return self.x.shape[1]

    @property
    def magnitudes(self):
        return np.abs(self.values)

    def xi_points(self):
        mesh = np.meshgrid(*([self.xi_axis] * self.d), indexing="ij")
        return np.stack(mesh, axis=-1)


def _lattice_indices(grid, stride):
    idx1 = np.arange(0, grid.N, stride)
    mesh = np.meshgrid(*([idx1] * grid.d), indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


def _patch_plan(grid, window, pad, mode):
    """Offsets and FFT length of a patch STFT; None means use the full grid."""
    if mode not in ("auto", "full", "local"):
        raise ParameterError(f"unknown STFT mode {mode!r}")
    if mode == "full":
        return None
    M = int(np.ceil(window.radius() / grid.h))
    nfft = sfft.next_fast_len(int(pad * (2 * M + 1)))
    if 2 * M + 1 >= grid.N or nfft >= grid.N:
        if mode == "local":
            raise StructuralError("window patch does not fit inside the grid")
        return None
    return M, nfft


def stft_batches(f, window, centers, pad=4, mode="auto", batch_elems=1 << 22):
    """Yield (centers_batch, values) with values shaped (b,) + (n_xi,)*d.

    centers are integer grid indices of shape (n, d); the xi lattice is given
    by stft_xi_axis with the same arguments. Patch transforms read the field
    periodically, so for windows that straddle the boundary their phases
    differ from the full-grid transform, which uses in-domain coordinates.
    """
    g = f.grid
    if window.d != g.d:
        raise StructuralError("window and field dimensions differ")
    if f.domain != SPACE:
        raise StructuralError("stft expects a space-domain field")
    centers = np.atleast_2d(np.asarray(centers, dtype=int))
    plan = _patch_plan(g, window, pad, mode)
    d, N, h = g.d, g.N, g.h
    vals = f.values
    if plan is None:
        axes = tuple(range(1, d + 1))
        g0 = window(g.points(SPACE))
        if not np.any(g0):
            raise ParameterError("window samples are all zero")
        b = max(1, batch_elems // g.size)
        for s in range(0, len(centers), b):
            cb = centers[s:s + b]
            prod = np.empty((len(cb),) + g.shape, dtype=complex)
            for i, c in enumerate(cb):
                shifted = np.roll(g0, tuple(int(ci) - N // 2 for ci in c), axis=tuple(range(d)))
                prod[i] = vals * np.conj(shifted)
            out = sfft.fftshift(sfft.fftn(sfft.ifftshift(prod, axes=axes), axes=axes), axes=axes)
            yield cb, out * h**d
        return
    M, nfft = plan
    offs = np.arange(-M, M + 1)
    omesh = np.meshgrid(*([offs] * d), indexing="ij")
    opts = np.stack(omesh, axis=-1) * h
    gw = window(opts)
    if not np.any(gw):
        raise ParameterError("window samples are all zero")
    xi1 = (np.arange(nfft) - nfft // 2) / (nfft * h)
    b = max(1, batch_elems // nfft**d)
    dest = offs % nfft
    axes = tuple(range(1, d + 1))
    for s in range(0, len(centers), b):
        cb = centers[s:s + b]
        idx = tuple(
            (cb[:, j].reshape((-1,) + (1,) * d) + omesh[j][None]) % N for j in range(d)
        )
        rows = vals[idx] * np.conj(gw)[None]
        buf = np.zeros((len(cb),) + (nfft,) * d, dtype=complex)
        buf[np.ix_(np.arange(len(cb)), *([dest] * d))] = rows
        out = sfft.fftshift(sfft.fftn(buf, axes=axes), axes=axes) * h**d
        # phase exp(-2 pi i xi . x_c) restores the absolute position of the patch
        xc = -g.L / 2 + cb * h
        phase = np.ones((len(cb),) + (nfft,) * d, dtype=complex)
        for j in range(d):
            shp = [len(cb)] + [1] * d
            shp[j + 1] = nfft
            phase = phase * np.exp(-2j * np.pi * xc[:, j][:, None] * xi1[None, :]).reshape(shp)
        yield cb, out * phase


def stft_xi_axis(grid, window, pad=4, mode="auto"):
    plan = _patch_plan(grid, window, pad, mode)
    if plan is None:
        return grid.frequency_axis()
    _, nfft = plan
    return (np.arange(nfft) - nfft // 2) / (nfft * grid.h)


def stft(f, window, x_stride=1, pad=4, mode="auto"):
    """Dense portrait on the lattice of every x_stride-th grid point."""
    if int(x_stride) != x_stride or x_stride < 1:
        raise ParameterError("x_stride must be a positive integer")
    g = f.grid
    centers = _lattice_indices(g, int(x_stride))
    xi = stft_xi_axis(g, window, pad, mode)
    out = np.empty((len(centers),) + (xi.size,) * g.d, dtype=complex)
    pos = 0
    for cb, vals in stft_batches(f, window, centers, pad, mode):
        out[pos:pos + len(cb)] = vals
        pos += len(cb)
    x = -g.L / 2 + centers * g.h
    return PhaseSpacePortrait(x, xi, out, x_stride * g.h, float(xi[1] - xi[0]), window)


def slice_norms(f, window, centers, p=1.0, pad=4, mode="auto"):
    """||V_g f(x, .)||_{L^p} for each lattice centre (xi-integration only)."""
    xi = stft_xi_axis(f.grid, window, pad, mode)
    cell = float(xi[1] - xi[0]) ** f.grid.d
    out = []
    for _, vals in stft_batches(f, window, centers, pad, mode):
        a = np.abs(vals).reshape(len(vals), -1)
        out.append(_lp(a, p, cell, axis=1))
    return np.concatenate(out)


def _lp(a, p, cell, axis):
    if np.isinf(p):
        return a.max(axis=axis)
    return (cell * np.sum(a**p, axis=axis)) ** (1.0 / p)


def amalgam_sup(f, window, p=1.0, coarse=None, refine=2, pad=4, mode="auto", ray=False):
    """sup_x ||V_g f(x, .)||_{L^p}: coarse lattice scan, then local refinement.

    ray=True scans only the non-negative first axis, which suffices for radial
    f and radial windows. Returns (value, x_argmax).
    """
    g = f.grid
    if coarse is None:
        coarse = max(1, int(round(0.25 * window.width / g.h)))
    if ray:
        k = np.arange(0, g.N // 2, coarse)
        centers = np.full((k.size, g.d), g.N // 2)
        centers[:, 0] += k
    else:
        centers = _lattice_indices(g, coarse)
    vals = slice_norms(f, window, centers, p, pad, mode)
    best = np.argsort(vals)[::-1][:refine]
    best_val, best_c = float(vals[best[0]]), centers[best[0]]
    if coarse > 1:
        local = np.arange(-coarse + 1, coarse)
        if ray:
            offs = np.zeros((local.size, g.d), dtype=int)
            offs[:, 0] = local
        else:
            mesh = np.meshgrid(*([local] * g.d), indexing="ij")
            offs = np.stack([m.ravel() for m in mesh], axis=-1)
        cand = np.concatenate([(centers[b] + offs) % g.N for b in best])
        fine = slice_norms(f, window, cand, p, pad, mode)
        k = int(np.argmax(fine))
        if fine[k] > best_val:
            best_val, best_c = float(fine[k]), cand[k]
    return best_val, -g.L / 2 + best_c * g.h


def stacked_amalgam_sup(values, grid, window, p=1.0, pad=2):
    """sup_x ||V_g u_k(x, .)||_{L^p} for a stack of 1-D fields, every grid point a centre.

    values has shape (k, N). Returns an array of k suprema.
    """
    if grid.d != 1:
        raise StructuralError("stacked scans are implemented for d = 1")
    values = np.atleast_2d(values)
    plan = _patch_plan(grid, window, pad, "auto")
    N, h = grid.N, grid.h
    if plan is None:
        M, nfft = N // 2, N
        offs = np.arange(-N // 2, N // 2)
    else:
        M, nfft = plan
        offs = np.arange(-M, M + 1)
    gw = np.conj(window(offs[:, None] * h))
    idx = (np.arange(N)[:, None] + offs[None]) % N
    cell = 1.0 / (nfft * h)
    out = np.empty(len(values))
    for k, row in enumerate(values):
        buf = np.zeros((N, nfft), dtype=complex)
        buf[:, offs % nfft] = row[idx] * gw[None]
        a = np.abs(sfft.fft(buf, axis=1)) * h
        out[k] = _lp(a, p, cell, axis=1).max()
    return out


# -- mixed norms of dense portraits ------------------------------------------------------


def _check_pq(p, q):
    for v in (p, q):
        if not float(v) >= 1:
            raise ParameterError(f"exponents must lie in [1, inf], got {v}")
    return float(p), float(q)


def modulation_norm(portrait, p, q):
    """Inner L^p over x (cell dx^d), outer L^q over xi (cell dxi^d)."""
    p, q = _check_pq(p, q)
    d = portrait.d
    a = np.abs(portrait.values).reshape(len(portrait.values), -1)
    inner = _lp(a, p, portrait.dx**d, axis=0)
    return float(_lp(inner, q, portrait.dxi**d, axis=0))


def amalgam_norm(portrait, p, q):
    """Inner L^p over xi, outer L^q over x."""
    p, q = _check_pq(p, q)
    d = portrait.d
    a = np.abs(portrait.values).reshape(len(portrait.values), -1)
    inner = _lp(a, p, portrait.dxi**d, axis=1)
    return float(_lp(inner, q, portrait.dx**d, axis=0))


def slice_integrals(portrait, p=1.0):
    """Per-x values of ||V(x, .)||_{L^p}."""
    a = np.abs(portrait.values).reshape(len(portrait.values), -1)
    return _lp(a, float(p), portrait.dxi**portrait.d, axis=1)


# -- analytic Fresnel slices ---------------------------------------------------------------


@dataclass
class SliceStream:
    """Streaming mixed-norm accumulator for slices on a common xi lattice.

    Slices may start at different xi offsets; lo/hi bound the global xi index
    per axis. Keeps per-xi sums for M^{p,.} and per-x slice norms for W^{p,.}.
    """

    d: int
    dx: float
    dxi: float
    lo: np.ndarray
    hi: np.ndarray
    ps: tuple = (1.0,)
    xs: list = field(default_factory=list)
    slice_lp: dict = field(default_factory=dict)
    xi_sums: dict = field(default_factory=dict)

    def __post_init__(self):
        shape = tuple(int(h - l) for l, h in zip(self.lo, self.hi))
        for p in self.ps:
            self.slice_lp[p] = []
            self.xi_sums[p] = np.zeros(shape)

    def add(self, x, k0, values):
        a = np.abs(values)
        sl = tuple(slice(int(k - l), int(k - l) + n) for k, l, n in zip(k0, self.lo, a.shape))
        self.xs.append(np.asarray(x, dtype=float))
        for p in self.ps:
            if np.isinf(p):
                self.slice_lp[p].append(float(a.max()))
                np.maximum(self.xi_sums[p][sl], a, out=self.xi_sums[p][sl])
            else:
                ap = a**p
                self.slice_lp[p].append(float((self.dxi**self.d * ap.sum()) ** (1 / p)))
                self.xi_sums[p][sl] += ap * self.dx**self.d

    def modulation_norm(self, p, q):
        p, q = _check_pq(p, q)
        acc = self.xi_sums[p]
        inner = acc if np.isinf(p) else acc ** (1 / p)
        return float(_lp(inner.ravel(), q, self.dxi**self.d, axis=0))

    def amalgam_norm(self, p, q):
        p, q = _check_pq(p, q)
        vals = np.asarray(self.slice_lp[p])
        return float(_lp(vals, q, self.dx**self.d, axis=0))

    def x_points(self):
        return np.array(self.xs)

    def slice_norms(self, p):
        return np.asarray(self.slice_lp[p])


def _patch_bandwidth(symbol, x, t, radius, center):
    """Max over the patch of |t grad mu(y) - center| per axis (sampled, with margin)."""
    d = symbol.d
    s = np.linspace(-radius, radius, 65)
    mesh = np.meshgrid(*([s] * d), indexing="ij")
    pts = x + np.stack([m.ravel() for m in mesh], axis=-1)
    dev = np.abs(t * symbol.sample_grad(pts) - center)
    return 1.1 * dev.max(axis=0) + 1e-12


def fresnel_slices(symbol, window, x_points, t=1.0, xi_step=None, tol=_TRUNCATION):
    """Yield (x, k0, values) with V_g F(x, xi_step * (k0 + k)) for F = exp(2 pi i t mu).

    Each slice is computed from samples of F on a patch around x whose spacing
    resolves the local bandwidth after demodulating by the rounded local
    frequency. xi_step defaults to 1/(2 * patch width).
    """
    d = symbol.d
    if window.d != d:
        raise StructuralError("window and symbol dimensions differ")
    R = window.radius(tol)
    if xi_step is None:
        xi_step = 1.0 / (4 * R)
    period = 1.0 / xi_step
    if period < 2 * R:
        raise ParameterError("xi_step too coarse: the patch would overlap its periodic image")
    wb = window.bandwidth(tol)
    for x in np.atleast_2d(np.asarray(x_points, dtype=float)):
        kc = np.round(t * symbol.sample_grad(x[None])[0] / xi_step).astype(np.int64)
        c = kc * xi_step
        band = _patch_bandwidth(symbol, x, t, R, c) + wb
        nfft = [sfft.next_fast_len(int(np.ceil(2 * bj * period)) + 1) for bj in band]
        hs = [period / n for n in nfft]
        axes1 = []
        for j in range(d):
            M = int(np.floor(R / hs[j]))
            axes1.append(np.arange(-M, M + 1))
        mesh = np.meshgrid(*axes1, indexing="ij")
        offs = np.stack([mesh[j] * hs[j] for j in range(d)], axis=-1)
        # phase relative to the centre keeps the exponent small
        phase = t * (symbol.sample_mu(x + offs) - symbol.sample_mu(x[None])[0]) - offs @ c
        samples = np.exp(2j * np.pi * phase) * window(offs)
        buf = np.zeros(tuple(nfft), dtype=complex)
        buf[np.ix_(*[a % n for a, n in zip(axes1, nfft)])] = samples
        out = sfft.fftshift(sfft.fftn(buf)) * np.prod(hs)
        # restore exp(2 pi i t mu(x)) and exp(-2 pi i xi . x) phases
        ks = [np.arange(n) - n // 2 for n in nfft]
        ph = np.exp(2j * np.pi * t * symbol.sample_mu(x[None])[0])
        for j in range(d):
            shp = [1] * d
            shp[j] = nfft[j]
            ph = ph * np.exp(-2j * np.pi * ks[j] * xi_step * x[j]).reshape(shp)
        ph = ph * np.exp(-2j * np.pi * float(c @ x))
        # fold back the demodulated centre: global index of xi = kc + k
        k0 = tuple(int(kc[j] - nfft[j] // 2) for j in range(d))
        yield x, k0, out * ph


def fresnel_lattice(L, dx, d):
    """Lattice points of [-L/2, L/2)^d with step dx, as shape (n, d)."""
    n = int(round(L / dx))
    ax = -L / 2 + dx * np.arange(n)
    mesh = np.meshgrid(*([ax] * d), indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


def fresnel_norms(symbol, window, L, dx=0.25, t=1.0, xi_step=None, ps=(1.0,)):
    """Stream analytic slices of exp(2 pi i t mu) over [-L/2, L/2)^d into a SliceStream."""
    d = symbol.d
    R = window.radius()
    if xi_step is None:
        xi_step = 1.0 / (4 * R)
    pts = fresnel_lattice(L, dx, d)
    # bounds of the global xi index range from a cheap pre-pass
    lo = np.full(d, np.iinfo(np.int64).max)
    hi = np.full(d, np.iinfo(np.int64).min)
    period = 1.0 / xi_step
    wb = window.bandwidth()
    for x in pts:
        kc = np.round(t * symbol.sample_grad(x[None])[0] / xi_step).astype(np.int64)
        band = _patch_bandwidth(symbol, x, t, R, kc * xi_step) + wb
        half = np.array([(sfft.next_fast_len(int(np.ceil(2 * b * period)) + 1) + 1) // 2 + 1 for b in band])
        lo = np.minimum(lo, kc - half)
        hi = np.maximum(hi, kc + half)
    stream = SliceStream(d, dx, xi_step, lo, hi, tuple(float(p) for p in ps))
    for x, k0, vals in fresnel_slices(symbol, window, pts, t, xi_step):
        stream.add(x, k0, vals)
    return stream


# -- regions and decay fits ---------------------------------------------------------------


def region_partition(portrait, symbol, A):
    """Boolean mask, True on the near-diagonal region |xi - grad mu~(x)| <= A |x|^(m-2)."""
    if symbol.d != portrait.d:
        raise StructuralError("symbol and portrait dimensions differ")
    if not A > 0:
        raise ParameterError("A must be positive")
    grad = symbol.grad(portrait.x)
    xi = portrait.xi_points().reshape(-1, portrait.d)
    dist = np.linalg.norm(xi[None, :, :] - grad[:, None, :], axis=-1)
    r = np.linalg.norm(portrait.x, axis=-1)
    thresh = A * r ** (symbol.m - 2)
    mask = dist <= thresh[:, None]
    return mask.reshape(portrait.values.shape)


def omega2_sup_measure(symbol, A, x_points, dx, xi_points):
    """max over the given xi of the x-measure of {x : |xi - grad mu~(x)| <= A |x|^(m-2)}."""
    x_points = np.atleast_2d(x_points)
    grad = symbol.grad(x_points)
    r = np.linalg.norm(x_points, axis=-1)
    thresh = A * r ** (symbol.m - 2)
    xi_points = np.atleast_2d(np.asarray(xi_points, dtype=float))
    if symbol.d == 1 and xi_points.shape[0] == 1 and xi_points.shape[1] != 1:
        xi_points = xi_points.T
    best = 0.0
    cell = dx ** symbol.d
    for s in range(0, len(xi_points), 256):
        blk = xi_points[s:s + 256]
        dist = np.linalg.norm(blk[:, None, :] - grad[None], axis=-1)
        meas = cell * np.sum(dist <= thresh[None], axis=1)
        best = max(best, float(meas.max()))
    return best


def decay_exponent_fit(portrait, symbol, A, floor=1e-12, min_points=50, x_limit=None):
    """Slope of log|V| against log<xi - grad mu~(x)> on the far region above the floor.

    x_limit, if given, keeps only centres with max_j |x_j| <= x_limit; windows
    reaching the periodic boundary see the seam of the sampled function.
    """
    near = region_partition(portrait, symbol, A)
    grad = symbol.grad(portrait.x)
    xi = portrait.xi_points().reshape(-1, portrait.d)
    dist = np.linalg.norm(xi[None, :, :] - grad[:, None, :], axis=-1).reshape(portrait.values.shape)
    mag = np.abs(portrait.values)
    use = (~near) & (mag > floor)
    if x_limit is not None:
        inside = np.max(np.abs(portrait.x), axis=-1) <= x_limit
        use &= inside.reshape((-1,) + (1,) * portrait.d)
    if use.sum() < min_points:
        raise DiagnosticError(f"only {int(use.sum())} usable points in the far region, need {min_points}")
    return fit_loglog(np.sqrt(1 + dist[use] ** 2), mag[use], min_points)


# -- scaling and window checks ----------------------------------------------------------------


def dilate(f, lam):
    """Band-limited resampling of x -> f(lam x) on the same grid.

    f is read as zero outside the domain; the periodic interpolant would
    otherwise fold copies of f back in when |lam| > 1.
    """
    g = f.grid
    F = forward_fourier(f).values
    xi = g.frequency_axis()
    pts = g.points(SPACE).reshape(-1, g.d) * lam
    outside = np.any((pts < -g.L / 2) | (pts >= g.L / 2), axis=-1)
    out = np.empty(len(pts), dtype=complex)
    for s in range(0, len(pts), 256):
        blk = pts[s:s + 256]
        ph = np.exp(2j * np.pi * blk[:, 0][:, None] * xi[None, :])
        val = np.tensordot(ph, F, axes=([1], [0]))
        for ax in range(1, g.d):
            ph = np.exp(2j * np.pi * blk[:, ax][:, None] * xi[None, :])
            val = np.einsum("bk,bk...->b...", ph, val)
        out[s:s + 256] = val * g.dxi**g.d
    out[outside] = 0.0
    return SampledField(g, out, SPACE)


def dilation_scaling_check(f, window, lambdas, p, q, x_stride=1, pad=4):
    """Ratios |f_lam|_{M^{p,q}} / (C |lam|^(-d(1/p - 1/q + 1)) (1 + lam^2)^(d/2)).

    C is twice the lam = 1 value, so the lam = 1 row is 1/2.
    """
    p, q = _check_pq(p, q)
    d = f.grid.d

    def envelope(lam):
        return abs(lam) ** (-d * (1 / p - 1 / q + 1)) * (1 + lam**2) ** (d / 2)

    base = modulation_norm(stft(f, window, x_stride, pad), p, q)
    C = 2 * base / envelope(1.0)
    rows = []
    for lam in lambdas:
        if lam == 0:
            raise ParameterError("dilation factor must be non-zero")
        fl = f if lam == 1 else dilate(f, lam)
        val = modulation_norm(stft(fl, window, x_stride, pad), p, q)
        rows.append({"lambda": float(lam), "norm": val, "ratio": val / (C * envelope(lam))})
    return rows


def window_swap_equivalence(f, g1, g2, p, q, x_stride=1, pad=4):
    """Ratio of modulation-norm estimates computed with two windows."""
    n1 = modulation_norm(stft(f, g1, x_stride, pad), p, q)
    n2 = modulation_norm(stft(f, g2, x_stride, pad), p, q)
    return n1 / n2
