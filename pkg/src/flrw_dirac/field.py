"""Discrete 4-spinor fields on a periodic grid.

Fields live on a uniform torus of period L (1 or 3 spatial dimensions) with
the component axis first: data.shape == (4, n) or (4, n, n, n).  Derivatives
are spectral; the odd-derivative multiplier zeroes the unpaired Nyquist mode
so that differentiation commutes with complex conjugation and is exactly
antisymmetric on the grid.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .gamma import BASIS, apply

__all__ = [
    "Grid",
    "SpinorField",
    "BilinearDensities",
    "l2_norm_sq",
    "sobolev_norm",
    "spectral_derivative",
    "bilinear_densities",
    "gamma2_bilinear",
    "majorana_defect",
    "cone_mass",
    "support_radius",
    "save_snapshot",
    "load_snapshot",
]

SNAPSHOT_MAGIC = b"FDRC"
SNAPSHOT_VERSION = 1
_HEADER = struct.Struct("<4sIII dd")

MAX_SOBOLEV_ORDER = 6


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid: n points per axis on [-L/2, L/2)."""

    dim: int
    n: int
    box_length: float

    def __post_init__(self):
        if self.dim not in (1, 3):
            raise ValueError("dim must be 1 or 3")
        if self.n < 8 or (self.n & (self.n - 1)) != 0:
            raise ValueError("n must be a power of two >= 8")
        if not self.box_length > 0:
            raise ValueError("box_length must be positive")

    @property
    def h(self) -> float:
        return self.box_length / self.n

    @property
    def spatial_axes(self) -> tuple[int, ...]:
        return tuple(range(1, self.dim + 1))

    @property
    def cell_volume(self) -> float:
        return self.h**self.dim

    def axis_coordinates(self) -> np.ndarray:
        """Grid coordinates along one axis, centered on 0."""
        return -0.5 * self.box_length + self.h * np.arange(self.n)

    def coordinate_arrays(self) -> tuple[np.ndarray, ...]:
        """Coordinates broadcastable against the spatial part of the data."""
        x = self.axis_coordinates()
        if self.dim == 1:
            return (x,)
        return (
            x[:, None, None],
            x[None, :, None],
            x[None, None, :],
        )


@lru_cache(maxsize=32)
def _wavenumbers(grid: Grid) -> tuple[np.ndarray, ...]:
    """Angular wavenumbers per axis, shaped to broadcast over the data."""
    k = 2.0 * np.pi * np.fft.fftfreq(grid.n, d=grid.h)
    if grid.dim == 1:
        return (k,)
    return (k[:, None, None], k[None, :, None], k[None, None, :])


@lru_cache(maxsize=32)
def _derivative_wavenumbers(grid: Grid) -> tuple[np.ndarray, ...]:
    """Wavenumbers with the Nyquist mode removed (odd-derivative symbol)."""
    k = 2.0 * np.pi * np.fft.fftfreq(grid.n, d=grid.h)
    k = k.copy()
    k[grid.n // 2] = 0.0
    if grid.dim == 1:
        return (k,)
    return (k[:, None, None], k[None, :, None], k[None, None, :])


@lru_cache(maxsize=32)
def _k_squared(grid: Grid) -> np.ndarray:
    ks = _wavenumbers(grid)
    out = np.zeros((grid.n,) * grid.dim)
    for k in ks:
        out = out + k**2
    return out


@dataclass(frozen=True)
class SpinorField:
    """A 4-spinor field sampled on a grid at one instant."""

    grid: Grid
    data: np.ndarray
    time: float

    def __post_init__(self):
        expected = (4,) + (self.grid.n,) * self.grid.dim
        if self.data.shape != expected:
            raise ValueError(f"data shape {self.data.shape} != {expected}")
        if self.time <= 0:
            raise ValueError("field time must be positive")

    def with_data(self, data: np.ndarray, time: float | None = None) -> "SpinorField":
        return SpinorField(self.grid, data, self.time if time is None else time)

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.data.view(float))))


@dataclass(frozen=True)
class BilinearDensities:
    """Pointwise real densities built from the field."""

    xi: np.ndarray  # |psi1|^2 + |psi2|^2 - |psi3|^2 - |psi4|^2
    eta: np.ndarray  # 2 Im(psi1 conj(psi3)) + 2 Im(psi2 conj(psi4))
    rho2: np.ndarray  # xi^2 + eta^2
    abs2: np.ndarray  # |psi|^2


def l2_norm_sq(f: SpinorField) -> float:
    """Grid quadrature of the squared L2 norm."""
    return float(np.sum(np.abs(f.data) ** 2)) * f.grid.cell_volume


def sobolev_norm(f: SpinorField, k: int) -> float:
    """H_k norm via the exact Fourier symbol (1 + |xi|^2)**k.

    Normalized so that k = 0 reproduces sqrt(l2_norm_sq).
    """
    if not 0 <= k <= MAX_SOBOLEV_ORDER:
        raise ValueError(f"k must be in [0, {MAX_SOBOLEV_ORDER}]")
    hat = np.fft.fftn(f.data, axes=f.grid.spatial_axes)
    weight = (1.0 + _k_squared(f.grid)) ** k
    total = np.sum(weight * np.abs(hat) ** 2)
    norm_sq = total * f.grid.cell_volume / f.grid.n**f.grid.dim
    return float(np.sqrt(norm_sq))


def spectral_derivative(f: SpinorField, axis: int) -> SpinorField:
    """Partial derivative along a spatial axis (1-based), evaluated spectrally."""
    if not 1 <= axis <= f.grid.dim:
        raise ValueError(f"axis {axis} out of range for dim {f.grid.dim}")
    ks = _derivative_wavenumbers(f.grid)
    hat = np.fft.fftn(f.data, axes=f.grid.spatial_axes)
    hat *= 1j * ks[axis - 1]
    out = np.fft.ifftn(hat, axes=f.grid.spatial_axes)
    return f.with_data(out)


def bilinear_densities(f: SpinorField) -> BilinearDensities:
    p = f.data
    xi = (
        np.abs(p[0]) ** 2 + np.abs(p[1]) ** 2 - np.abs(p[2]) ** 2 - np.abs(p[3]) ** 2
    )
    eta = 2.0 * np.imag(p[0] * np.conj(p[2])) + 2.0 * np.imag(p[1] * np.conj(p[3]))
    abs2 = np.sum(np.abs(p) ** 2, axis=0)
    return BilinearDensities(xi=xi, eta=eta, rho2=xi**2 + eta**2, abs2=abs2)


def gamma2_bilinear(f: SpinorField) -> complex:
    """Grid quadrature of the transpose bilinear sum(psi^T g2 psi) dx.

    Note the plain transpose (no conjugation); the result is complex.
    """
    g2psi = apply(BASIS.g2, f.data)
    return complex(np.sum(f.data * g2psi) * f.grid.cell_volume)


def majorana_defect(f: SpinorField, z: complex) -> float:
    """Integral of |psi - z g2 conj(psi)|^2 for a unit phase z."""
    if abs(abs(z) - 1.0) > 1e-12:
        raise ValueError("z must lie on the unit circle")
    w = f.data - z * apply(BASIS.g2, np.conj(f.data))
    return float(np.sum(np.abs(w) ** 2)) * f.grid.cell_volume


def _torus_distance_sq(grid: Grid, center) -> np.ndarray:
    """Squared distance to `center` in the torus metric."""
    L = grid.box_length
    coords = grid.coordinate_arrays()
    out = np.zeros((grid.n,) * grid.dim)
    for j, x in enumerate(coords):
        d = np.mod(x - center[j] + 0.5 * L, L) - 0.5 * L
        out = out + d**2
    return out


def cone_mass(f, cone, cosmo, margin: float = 0.0) -> float:
    """L2 mass outside the cone's slice at the field's time.

    `margin` inflates the slice radius (used for cones around an initially
    extended support).  Distances are taken in the torus metric; once the
    inflated radius reaches half the box the outside set is empty.
    """
    from .spacetime import cone_radius  # local import to keep modules light

    radius = cone_radius(cone, cosmo, f.time) + margin
    dist_sq = _torus_distance_sq(f.grid, cone.apex_x)
    outside = dist_sq > radius**2
    dens = np.sum(np.abs(f.data) ** 2, axis=0)
    return float(np.sum(dens[outside])) * f.grid.cell_volume


def support_radius(f: SpinorField, center, mass_fraction: float = 1e-5) -> float:
    """Smallest torus radius around `center` holding all but `mass_fraction`
    of the L2 mass."""
    dist_sq = _torus_distance_sq(f.grid, center)
    dens = (np.sum(np.abs(f.data) ** 2, axis=0)).ravel()
    order = np.argsort(dist_sq.ravel())
    cum = np.cumsum(dens[order])
    total = cum[-1]
    if total == 0.0:
        return 0.0
    idx = np.searchsorted(cum, (1.0 - mass_fraction) * total)
    idx = min(idx, len(cum) - 1)
    return float(np.sqrt(dist_sq.ravel()[order[idx]]))


def save_snapshot(f: SpinorField, path) -> None:
    """Write the field in the binary snapshot format.

    Layout (little endian): magic "FDRC", u32 version, u32 dim, u32 n,
    f64 box length, f64 time, then 4*n**dim complex values as (re, im)
    f64 pairs, component-major.
    """
    header = _HEADER.pack(
        SNAPSHOT_MAGIC,
        SNAPSHOT_VERSION,
        f.grid.dim,
        f.grid.n,
        f.grid.box_length,
        f.time,
    )
    payload = np.ascontiguousarray(f.data, dtype="<c16").tobytes()
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload)


def load_snapshot(path) -> SpinorField:
    with open(path, "rb") as fh:
        raw = fh.read(_HEADER.size)
        magic, version, dim, n, L, time = _HEADER.unpack(raw)
        if magic != SNAPSHOT_MAGIC:
            raise ValueError("not a spinor snapshot file")
        if version != SNAPSHOT_VERSION:
            raise ValueError(f"unsupported snapshot version {version}")
        grid = Grid(dim=dim, n=n, box_length=L)
        count = 4 * n**dim
        data = np.frombuffer(fh.read(count * 16), dtype="<c16", count=count)
    data = data.astype(complex).reshape((4,) + (n,) * dim)
    return SpinorField(grid=grid, data=data, time=time)
