"""Homogeneous dispersion symbols, their near-origin smoothing and Fresnel fields."""

import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import AliasingWarning, ConfigError, DomainError, ParameterError
from .grid import SPACE, SampledField

KINDS = ("radial_power", "quadratic_form", "anisotropic_power", "custom")


def _as_points(x, d):
    x = np.asarray(x, dtype=float)
    if d == 1 and (x.ndim == 0 or x.shape[-1] != 1):
        x = x[..., None]
    if x.shape[-1] != d:
        raise ParameterError(f"points must have trailing dimension {d}, got shape {x.shape}")
    return x


@dataclass(frozen=True)
class HomogeneousSymbol:
    """A real symbol with mu(lam x) = lam^m mu(x) for lam > 0.

    Use the constructors radial_power, quadratic_form, anisotropic_power and
    custom_symbol rather than instantiating directly.
    """

    kind: str
    m: float
    d: int
    Q: Optional[np.ndarray] = field(default=None, compare=False)
    signs: Optional[tuple] = None
    profile: Optional[Callable] = field(default=None, compare=False)

    # -- public evaluation, refusing the origin --------------------------------

    def mu(self, x):
        x = self._checked(x)
        return self._mu(x)

    def grad(self, x):
        x = self._checked(x)
        return self._grad(x)

    def hess(self, x):
        x = self._checked(x)
        return self._hess(x)

    # -- sampling on grids: the origin takes its limiting value ----------------

    def sample_mu(self, x):
        x = _as_points(x, self.d)
        r = np.linalg.norm(x, axis=-1)
        out = np.zeros(r.shape)
        nz = r > 0
        out[nz] = self._mu(x[nz])
        return out

    def sample_grad(self, x):
        x = _as_points(x, self.d)
        r = np.linalg.norm(x, axis=-1)
        out = np.zeros(x.shape)
        nz = r > 0
        out[nz] = self._grad(x[nz])
        return out

    def _checked(self, x):
        x = _as_points(x, self.d)
        if np.any(np.linalg.norm(x, axis=-1) == 0):
            raise DomainError("homogeneous symbols are not evaluated at the origin; smooth them first")
        return x

    # -- kind-specific formulas ------------------------------------------------

    def _mu(self, x):
        if self.kind == "radial_power":
            return np.linalg.norm(x, axis=-1) ** self.m
        if self.kind == "quadratic_form":
            return 0.5 * np.einsum("...i,ij,...j->...", x, self.Q, x)
        if self.kind == "anisotropic_power":
            return np.sum(np.asarray(self.signs) * np.abs(x) ** self.m, axis=-1)
        r = np.linalg.norm(x, axis=-1)
        return r**self.m * self.profile(x / r[..., None])

    def _grad(self, x):
        if self.kind == "radial_power":
            r = np.linalg.norm(x, axis=-1)
            return (self.m * r ** (self.m - 2))[..., None] * x
        if self.kind == "quadratic_form":
            return x @ self.Q.T
        if self.kind == "anisotropic_power":
            return np.asarray(self.signs) * self.m * np.sign(x) * np.abs(x) ** (self.m - 1)
        return _fd_grad(self._mu, x)

    def _hess(self, x):
        d = self.d
        if self.kind == "radial_power":
            r = np.linalg.norm(x, axis=-1)
            u = x / r[..., None]
            outer = u[..., :, None] * u[..., None, :]
            scale = (self.m * r ** (self.m - 2))[..., None, None]
            return scale * (np.eye(d) + (self.m - 2) * outer)
        if self.kind == "quadratic_form":
            return np.broadcast_to(self.Q, x.shape[:-1] + (d, d)).copy()
        if self.kind == "anisotropic_power":
            diag = np.asarray(self.signs) * self.m * (self.m - 1) * np.abs(x) ** (self.m - 2)
            return diag[..., :, None] * np.eye(d)
        return _fd_hess(self._mu, x)

    def to_config(self):
        if self.kind == "radial_power":
            return {"kind": self.kind, "m": self.m, "d": self.d}
        if self.kind == "quadratic_form":
            return {"kind": self.kind, "Q": np.asarray(self.Q).tolist()}
        if self.kind == "anisotropic_power":
            return {"kind": self.kind, "m": self.m, "signs": list(self.signs)}
        raise ConfigError("custom symbols carry a Python callable and cannot be serialized")


def radial_power(m, d=1):
    """mu(x) = |x|^m."""
    if not m > 1:
        raise ParameterError(f"degree must exceed 1, got {m}")
    return HomogeneousSymbol("radial_power", float(m), int(d))


def quadratic_form(Q):
    """mu(x) = Qx.x / 2 for a symmetric invertible matrix Q."""
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    if Q.shape[0] != Q.shape[1] or not np.allclose(Q, Q.T):
        raise ParameterError("Q must be a symmetric square matrix")
    if abs(np.linalg.det(Q)) < 1e-14:
        raise ParameterError("Q must be invertible")
    Q = Q.copy()
    Q.flags.writeable = False
    return HomogeneousSymbol("quadratic_form", 2.0, Q.shape[0], Q=Q)


def anisotropic_power(m, signs):
    """mu(x) = sum_j s_j |x_j|^m with s_j = +-1 and m even."""
    signs = tuple(int(s) for s in signs)
    if any(s not in (-1, 1) for s in signs):
        raise ParameterError("signs must be +1 or -1")
    if m < 2 or int(m) != m or int(m) % 2:
        raise ParameterError(f"anisotropic powers need an even integer degree, got {m}")
    return HomogeneousSymbol("anisotropic_power", float(m), len(signs), signs=signs)


def custom_symbol(profile, m, d):
    """mu(x) = |x|^m profile(x/|x|); profile acts on unit vectors of shape (..., d).

    Derivatives come from Richardson-extrapolated central differences.
    """
    if not m > 1:
        raise ParameterError(f"degree must exceed 1, got {m}")
    return HomogeneousSymbol("custom", float(m), int(d), profile=profile)


def symbol_from_config(cfg):
    try:
        kind = cfg["kind"]
        if kind == "radial_power":
            return radial_power(cfg["m"], cfg.get("d", 1))
        if kind == "quadratic_form":
            return quadratic_form(cfg["Q"])
        if kind == "anisotropic_power":
            return anisotropic_power(cfg["m"], cfg["signs"])
    except KeyError as exc:
        raise ConfigError(f"symbol block is missing key {exc.args[0]!r}") from None
    except ParameterError as exc:
        raise ConfigError(f"symbol block: {exc}") from None
    raise ConfigError(f"unknown symbol kind {cfg.get('kind')!r}")


# -- finite differences for custom symbols -------------------------------------


def _fd_grad(f, x):
    r = np.linalg.norm(x, axis=-1)
    step = 1e-5 * np.maximum(1.0, r)
    d = x.shape[-1]
    out = np.empty(x.shape)
    for j in range(d):
        e = np.zeros(d)
        e[j] = 1.0

        def central(hh):
            return (f(x + hh[..., None] * e) - f(x - hh[..., None] * e)) / (2 * hh)

        out[..., j] = (4 * central(step / 2) - central(step)) / 3
    return out


def _fd_hess(f, x):
    # a larger step than the gradient keeps roundoff in second differences small
    r = np.linalg.norm(x, axis=-1)
    step = 1e-3 * np.maximum(1.0, r)
    d = x.shape[-1]
    out = np.empty(x.shape + (d,))
    eye = np.eye(d)

    def second(i, j, hh):
        hi = hh[..., None] * eye[i]
        hj = hh[..., None] * eye[j]
        if i == j:
            return (f(x + hi) - 2 * f(x) + f(x - hi)) / hh**2
        return (f(x + hi + hj) - f(x + hi - hj) - f(x - hi + hj) + f(x - hi - hj)) / (4 * hh**2)

    for i in range(d):
        for j in range(i, d):
            val = (4 * second(i, j, step / 2) - second(i, j, step)) / 3
            out[..., i, j] = val
            out[..., j, i] = val
    return out


# -- smooth cutoff ---------------------------------------------------------------


def _exp_decay(u):
    """exp(-1/u) for u > 0 and 0 otherwise, with its first two derivatives."""
    u = np.asarray(u, dtype=float)
    pos = u > 0
    us = np.where(pos, u, 1.0)
    f = np.where(pos, np.exp(-1.0 / us), 0.0)
    f1 = np.where(pos, f / us**2, 0.0)
    f2 = np.where(pos, f * (1.0 / us**4 - 2.0 / us**3), 0.0)
    return f, f1, f2


def smooth_step(u):
    """C-infinity step psi: 1 for u <= 0, 0 for u >= 1. Returns psi, psi', psi''."""
    a, a1, a2 = _exp_decay(1.0 - np.asarray(u, dtype=float))
    b, b1, b2 = _exp_decay(u)
    a1 = -a1
    s, s1, s2 = a + b, a1 + b1, a2 + b2
    psi = a / s
    n = a1 * b - a * b1
    n1 = a2 * b - a * b2
    psi1 = n / s**2
    psi2 = (n1 * s - 2 * n * s1) / s**3
    return psi, psi1, psi2


def _sphere_average(symbol, radius):
    d = symbol.d
    if d == 1:
        pts = np.array([[radius], [-radius]])
    elif d == 2:
        th = 2 * np.pi * (np.arange(512) + 0.5) / 512
        pts = radius * np.stack([np.cos(th), np.sin(th)], axis=-1)
    else:
        n = 4000
        k = np.arange(n) + 0.5
        z = 1 - 2 * k / n
        phi = np.pi * (1 + 5**0.5) * k
        rho = np.sqrt(1 - z**2)
        pts = radius * np.stack([rho * np.cos(phi), rho * np.sin(phi), z], axis=-1)
    return float(np.mean(symbol.mu(pts)))


@dataclass(frozen=True)
class SmoothedSymbol:
    """mu~ = chi q + (1 - chi) mu, equal to mu outside the ball of the cutoff radius.

    chi(x) = psi(2|x|/r - 1) is 1 on |x| <= r/2 and 0 on |x| >= r; q is the
    constant average of mu over the sphere |x| = r.
    """

    base: HomogeneousSymbol
    radius: float = 1.0
    level: float = field(init=False)

    def __post_init__(self):
        if not 0 < self.radius <= 1:
            raise ParameterError(f"cutoff radius must lie in (0, 1], got {self.radius}")
        object.__setattr__(self, "level", _sphere_average(self.base, self.radius))

    @property
    def m(self):
        return self.base.m

    @property
    def d(self):
        return self.base.d

    def _parts(self, x):
        x = _as_points(x, self.d)
        r = np.linalg.norm(x, axis=-1)
        u = 2 * r / self.radius - 1
        psi, psi1, psi2 = smooth_step(u)
        outer = r > self.radius / 2
        return x, r, psi, psi1, psi2, outer

    def mu(self, x):
        x, r, chi, _, _, outer = self._parts(x)
        base = np.zeros(r.shape)
        base[outer] = self.base._mu(x[outer])
        return chi * self.level + (1 - chi) * base

    def grad(self, x):
        x, r, chi, psi1, _, outer = self._parts(x)
        g = np.zeros(x.shape)
        base = np.zeros(r.shape)
        g[outer] = self.base._grad(x[outer])
        base[outer] = self.base._mu(x[outer])
        rs = np.where(r > 0, r, 1.0)
        dchi = (psi1 * 2 / self.radius / rs)[..., None] * x
        return (1 - chi)[..., None] * g + (self.level - base)[..., None] * dchi

    def hess(self, x):
        x, r, chi, psi1, psi2, outer = self._parts(x)
        d = self.d
        g = np.zeros(x.shape)
        H = np.zeros(x.shape + (d,))
        base = np.zeros(r.shape)
        g[outer] = self.base._grad(x[outer])
        H[outer] = self.base._hess(x[outer])
        base[outer] = self.base._mu(x[outer])
        rs = np.where(r > 0, r, 1.0)
        u = x / rs[..., None]
        k = 2 / self.radius
        dchi = (psi1 * k)[..., None] * u
        uu = u[..., :, None] * u[..., None, :]
        d2chi = (psi2 * k**2)[..., None, None] * uu + (psi1 * k / rs)[..., None, None] * (np.eye(d) - uu)
        cross = dchi[..., :, None] * g[..., None, :]
        return (
            (1 - chi)[..., None, None] * H
            + (self.level - base)[..., None, None] * d2chi
            - cross
            - np.swapaxes(cross, -1, -2)
        )

    sample_mu = mu
    sample_grad = grad


# -- validation checks --------------------------------------------------------------


def _nonempty(samples, d):
    samples = _as_points(samples, d)
    if samples.size == 0:
        raise ParameterError("sample set is empty")
    return samples.reshape(-1, d)


def check_euler_identity(symbol, samples):
    """max |H(x) x - (m-1) grad(x)| / |grad(x)| over the samples."""
    x = _nonempty(samples, symbol.d)
    H = symbol.hess(x)
    g = symbol.grad(x)
    res = np.einsum("nij,nj->ni", H, x) - (symbol.m - 1) * g
    return float(np.max(np.linalg.norm(res, axis=-1) / np.linalg.norm(g, axis=-1)))


def check_gradient_lower_bound(symbol, samples):
    """min |grad(x)| / |x|^(m-1) over the samples."""
    x = _nonempty(samples, symbol.d)
    r = np.linalg.norm(x, axis=-1)
    return float(np.min(np.linalg.norm(symbol.grad(x), axis=-1) / r ** (symbol.m - 1)))


def check_homogeneity(symbol, samples, scales=(0.5, 2.0, 10.0)):
    """Max relative homogeneity defect of mu and of its gradient."""
    x = _nonempty(samples, symbol.d)
    worst_mu = worst_grad = 0.0
    mu0 = symbol.mu(x)
    g0 = symbol.grad(x)
    for lam in scales:
        dm = np.abs(symbol.mu(lam * x) - lam**symbol.m * mu0) / (lam**symbol.m * (1 + np.abs(mu0)))
        gl = symbol.grad(lam * x)
        dg = np.linalg.norm(gl - lam ** (symbol.m - 1) * g0, axis=-1) / (
            lam ** (symbol.m - 1) * np.linalg.norm(g0, axis=-1)
        )
        worst_mu = max(worst_mu, float(dm.max()))
        worst_grad = max(worst_grad, float(dg.max()))
    return worst_mu, worst_grad


def nondegeneracy_margin(symbol, samples):
    """min |det Hessian| over the samples projected to the unit sphere."""
    x = _nonempty(samples, symbol.d)
    x = x / np.linalg.norm(x, axis=-1, keepdims=True)
    return float(np.min(np.abs(np.linalg.det(symbol.hess(x)))))


def unit_vectors(n, d, rng):
    v = rng.standard_normal((n, d))
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def _cone_directions(axis, half_angle, n, rng, merged):
    axis = np.asarray(axis, dtype=float).ravel()
    axis = axis / np.linalg.norm(axis)
    d = axis.size
    if d == 1:
        dirs = np.tile(axis, (n, 1))
    elif d == 2:
        base = np.arctan2(axis[1], axis[0])
        th = base + rng.uniform(-half_angle, half_angle, n)
        dirs = np.stack([np.cos(th), np.sin(th)], axis=-1)
    else:
        cos_t = rng.uniform(np.cos(half_angle), 1.0, n)
        sin_t = np.sqrt(1 - cos_t**2)
        phi = rng.uniform(0, 2 * np.pi, n)
        local = np.stack([sin_t * np.cos(phi), sin_t * np.sin(phi), cos_t], axis=-1)
        # rotate e_3 onto the axis by a Householder reflection
        e3 = np.array([0.0, 0.0, 1.0])
        v = e3 - axis
        if np.linalg.norm(v) < 1e-14:
            dirs = local
        else:
            v = v / np.linalg.norm(v)
            dirs = local - 2 * np.outer(local @ v, v)
    if merged:
        flip = rng.random(n) < 0.5
        dirs[flip] *= -1
    return dirs


def cone_separation_ratio(symbol, axis, half_angle, pair_samples, seed=0,
                          radius_range=(1e-2, 1e2), merged=False):
    """Sampled infimum of |grad(x) - grad(y)| / (|x - y| (|x|^(m-2) + |y|^(m-2))).

    Pairs are drawn from the cone of the given axis and half-angle with
    log-uniform radii. merged=True also draws from the opposite cone.
    """
    if not 0 <= half_angle < np.pi / 2:
        raise ParameterError("half-angle must lie in [0, pi/2)")
    n = int(pair_samples)
    if n < 1:
        raise ParameterError("need at least one pair")
    rng = np.random.default_rng(seed)
    lo, hi = np.log(radius_range[0]), np.log(radius_range[1])
    pts = []
    for _ in range(2):
        r = np.exp(rng.uniform(lo, hi, n))
        pts.append(r[:, None] * _cone_directions(axis, half_angle, n, rng, merged))
    x, y = pts
    sep = np.linalg.norm(x - y, axis=-1)
    keep = sep > 1e-12 * np.maximum(np.linalg.norm(x, axis=-1), np.linalg.norm(y, axis=-1))
    if not keep.any():
        raise ParameterError("all sampled pairs are degenerate")
    x, y, sep = x[keep], y[keep], sep[keep]
    m = symbol.m
    num = np.linalg.norm(symbol.grad(x) - symbol.grad(y), axis=-1)
    den = sep * (np.linalg.norm(x, axis=-1) ** (m - 2) + np.linalg.norm(y, axis=-1) ** (m - 2))
    return float(np.min(num / den))


# -- Fresnel fields -----------------------------------------------------------------


def aliasing_fraction(symbol, grid, t=1.0):
    """Fraction of grid points whose local frequency t*grad(mu) exceeds Nyquist on some axis."""
    nyq = grid.N / (2 * grid.L)
    g = symbol.sample_grad(grid.points(SPACE))
    over = np.max(np.abs(t * g), axis=-1) > nyq
    return float(np.mean(over))


def fresnel_field(symbol, grid, t=1.0):
    """Samples of exp(2 pi i t mu(x)); warns when more than 1% of points alias."""
    if not t > 0:
        raise ParameterError(f"t must be positive, got {t}")
    if symbol.d != grid.d:
        raise ParameterError("symbol and grid dimensions differ")
    frac = aliasing_fraction(symbol, grid, t)
    if frac > 0.01:
        warnings.warn(
            f"local frequency exceeds the grid Nyquist limit on {100 * frac:.1f}% of points",
            AliasingWarning,
            stacklevel=2,
        )
    phase = t * symbol.sample_mu(grid.points(SPACE))
    return SampledField(grid, np.exp(2j * np.pi * phase), SPACE)


def a_m_seminorm(symbol, alpha, samples):
    """Sampled sup of <x>^(|alpha| - m) |d^alpha mu~(x)| for |alpha| <= 2."""
    alpha = tuple(int(a) for a in np.atleast_1d(alpha))
    if len(alpha) != symbol.d or min(alpha) < 0:
        raise ParameterError("multi-index must have one non-negative entry per dimension")
    order = sum(alpha)
    if order > 2:
        raise ParameterError("only derivatives up to order 2 are supported")
    x = _nonempty(samples, symbol.d)
    if order == 0:
        vals = symbol.mu(x)
    elif order == 1:
        vals = symbol.grad(x)[:, alpha.index(1)]
    else:
        idx = [j for j, a in enumerate(alpha) for _ in range(a)]
        vals = symbol.hess(x)[:, idx[0], idx[1]]
    weight = (1 + np.sum(x**2, axis=-1)) ** ((order - symbol.m) / 2)
    return float(np.max(weight * np.abs(vals)))


def hessian_bound_constant(symbol, n_samples=4000, seed=0):
    """Sampled max of |Hess mu(x + z)| over |x| = 1, |z| <= 1 (spectral norm)."""
    rng = np.random.default_rng(seed)
    d = symbol.d
    x = unit_vectors(n_samples, d, rng)
    z = unit_vectors(n_samples, d, rng) * rng.random((n_samples, 1)) ** (1.0 / d)
    # include the collinear extreme point x + x = 2x
    pts = np.concatenate([x + z, 2 * x])
    pts = pts[np.linalg.norm(pts, axis=-1) > 1e-9]
    H = symbol.hess(pts)
    return float(np.max(np.linalg.norm(H, ord=2, axis=(-2, -1))))


def calibrated_A(symbol, **kw):
    """Region constant A = 2 C with C bounding the Hessian near the unit sphere."""
    base = symbol.base if isinstance(symbol, SmoothedSymbol) else symbol
    return 2.0 * hessian_bound_constant(base, **kw)
