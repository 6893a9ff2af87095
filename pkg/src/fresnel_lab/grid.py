"""Uniform periodic grids, sampled fields and continuum-normalized FFTs.

The transform convention is f^(xi) = int exp(-2 pi i xi.x) f(x) dx. On a grid
with N points per axis over [-L/2, L/2)^d the discrete transform is scaled by
h^d so that sampled Gaussians map to sampled Gaussians.
"""

import struct
from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft

from .errors import ParameterError, StructuralError

SPACE = "space"
FREQUENCY = "frequency"
_DOMAIN_CODES = {SPACE: 0, FREQUENCY: 1}
_MAGIC = b"FLDF"
_HEADER = struct.Struct("<4sIIdI")


@dataclass(frozen=True)
class GridSpec:
    """Cube [-L/2, L/2)^d sampled with N points per axis."""

    d: int
    N: int
    L: float

    def __post_init__(self):
        if int(self.d) != self.d or not 1 <= self.d <= 3:
            raise ParameterError(f"dimension must be 1, 2 or 3, got {self.d}")
        if int(self.N) != self.N or self.N < 2 or self.N % 2:
            raise ParameterError(f"points per axis must be a positive even integer, got {self.N}")
        if not self.L > 0:
            raise ParameterError(f"extent must be positive, got {self.L}")
        object.__setattr__(self, "d", int(self.d))
        object.__setattr__(self, "N", int(self.N))
        object.__setattr__(self, "L", float(self.L))

    @property
    def h(self):
        return self.L / self.N

    @property
    def dxi(self):
        return 1.0 / self.L

    @property
    def shape(self):
        return (self.N,) * self.d

    @property
    def size(self):
        return self.N**self.d

    def axis(self):
        """Space coordinates x_j = -L/2 + j h."""
        return -self.L / 2 + self.h * np.arange(self.N)

    def frequency_axis(self):
        """Frequency coordinates (k - N/2)/L."""
        return (np.arange(self.N) - self.N // 2) / self.L

    def points(self, domain=SPACE):
        """Coordinates as an array of shape (N,)*d + (d,)."""
        ax = self.axis() if domain == SPACE else self.frequency_axis()
        mesh = np.meshgrid(*([ax] * self.d), indexing="ij")
        return np.stack(mesh, axis=-1)

    def dual(self):
        """The grid on which the frequency samples live, viewed as a space grid."""
        return GridSpec(self.d, self.N, self.N / self.L)

    def to_dict(self):
        return {"d": self.d, "N": self.N, "L": self.L}


@dataclass(frozen=True)
class SampledField:
    """Complex samples on a grid, tagged with the domain they live in."""

    grid: GridSpec
    values: np.ndarray
    domain: str = SPACE

    def __post_init__(self):
        if self.domain not in _DOMAIN_CODES:
            raise StructuralError(f"unknown domain tag {self.domain!r}")
        vals = np.asarray(self.values, dtype=complex)
        if vals.size != self.grid.size:
            raise StructuralError(
                f"field has {vals.size} values, grid needs {self.grid.size}"
            )
        vals = np.array(vals.reshape(self.grid.shape), dtype=complex)
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    def with_values(self, values):
        return SampledField(self.grid, values, self.domain)

    def __add__(self, other):
        _check_compatible(self, other)
        return self.with_values(self.values + other.values)

    def __sub__(self, other):
        _check_compatible(self, other)
        return self.with_values(self.values - other.values)

    def __mul__(self, scalar):
        return self.with_values(self.values * scalar)

    __rmul__ = __mul__


def _check_compatible(a, b):
    if a.grid != b.grid or a.domain != b.domain:
        raise StructuralError("fields live on different grids or domains")


def field_from_function(grid, func, domain=SPACE):
    """Sample func(points) where points has shape (..., d)."""
    return SampledField(grid, func(grid.points(domain)), domain)


def forward_fourier(f, workers=None):
    if f.domain != SPACE:
        raise StructuralError("forward_fourier expects a space-domain field")
    g = f.grid
    axes = tuple(range(g.d))
    out = sfft.fftshift(sfft.fftn(sfft.ifftshift(f.values, axes=axes), axes=axes, workers=workers), axes=axes)
    return SampledField(g, out * g.h**g.d, FREQUENCY)


def inverse_fourier(F, workers=None):
    if F.domain != FREQUENCY:
        raise StructuralError("inverse_fourier expects a frequency-domain field")
    g = F.grid
    axes = tuple(range(g.d))
    out = sfft.fftshift(sfft.ifftn(sfft.ifftshift(F.values, axes=axes), axes=axes, workers=workers), axes=axes)
    return SampledField(g, out / g.h**g.d, SPACE)


def lp_norm(f, p):
    """Riemann-sum L^p norm; cell volume h^d in space and L^-d in frequency."""
    p = float(p)
    if not p >= 1:
        raise ParameterError(f"p must lie in [1, inf], got {p}")
    a = np.abs(f.values)
    if np.isinf(p):
        return float(a.max())
    cell = f.grid.h**f.grid.d if f.domain == SPACE else f.grid.dxi**f.grid.d
    return float((cell * np.sum(a**p)) ** (1.0 / p))


def bandlimited_eval(f, points):
    """Evaluate the trigonometric interpolant of a space field at arbitrary points.

    points has shape (n, d). Exact at grid points, spectrally accurate
    for resolved fields.
    """
    if f.domain != SPACE:
        raise StructuralError("bandlimited_eval expects a space-domain field")
    g = f.grid
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[1] != g.d:
        raise StructuralError("point dimension does not match the grid")
    F = forward_fourier(f).values
    xi = g.frequency_axis()
    out = np.empty(len(pts), dtype=complex)
    for i, p in enumerate(pts):
        val = F
        # contract one axis at a time with the phase vector
        for ax in range(g.d):
            phase = np.exp(2j * np.pi * xi * p[ax])
            val = np.tensordot(phase, val, axes=([0], [0]))
        out[i] = val * g.dxi**g.d
    return out


def write_field(path, f):
    with open(path, "wb") as fh:
        fh.write(field_to_bytes(f))


def field_to_bytes(f):
    """Binary dump: little-endian header then interleaved (re, im) float64."""
    g = f.grid
    header = _HEADER.pack(_MAGIC, g.d, g.N, g.L, _DOMAIN_CODES[f.domain])
    data = np.empty(2 * g.size, dtype="<f8")
    flat = f.values.ravel()
    data[0::2] = flat.real
    data[1::2] = flat.imag
    return header + data.tobytes()


def field_from_bytes(buf):
    if len(buf) < _HEADER.size:
        raise StructuralError("truncated field header")
    magic, d, N, L, code = _HEADER.unpack_from(buf)
    if magic != _MAGIC:
        raise StructuralError("not a field dump")
    domain = {v: k for k, v in _DOMAIN_CODES.items()}.get(code)
    if domain is None:
        raise StructuralError(f"unknown domain code {code}")
    g = GridSpec(d, N, L)
    data = np.frombuffer(buf, dtype="<f8", offset=_HEADER.size)
    if data.size != 2 * g.size:
        raise StructuralError("field dump has the wrong payload length")
    return SampledField(g, data[0::2] + 1j * data[1::2], domain)


def read_field(path):
    with open(path, "rb") as fh:
        return field_from_bytes(fh.read())


def slice_to_csv(f, axis=0, index=None):
    """CSV text of a 1-d slice through the grid centre along one axis."""
    g = f.grid
    coords = g.axis() if f.domain == SPACE else g.frequency_axis()
    center = g.N // 2 if index is None else index
    sl = [center] * g.d
    sl[axis] = slice(None)
    vals = f.values[tuple(sl)]
    lines = ["coordinate,re,im,abs"]
    for c, v in zip(coords, vals):
        lines.append(f"{c:.17g},{v.real:.17g},{v.imag:.17g},{abs(v):.17g}")
    return "\n".join(lines) + "\n"
