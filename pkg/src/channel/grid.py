"""
Channel geometry and spectral bookkeeping.

The channel is T x I x T with T = [0, 2*pi) periodic in x and z and
I = [-1, 1] bounded by walls in y. Fields are stored per Fourier mode
(k1, k3) as complex y-profiles on a uniform wall-normal grid.

Layout conventions:
- physical arrays have shape (nx, ny, nz), ordered (x, y, z)
- spectral data has shape (nx, nz, ny) in FFT index order
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Mapping, Protocol

import numpy as np
from scipy.integrate import trapezoid

PERIOD = 2.0 * np.pi
TORUS_AREA = PERIOD * PERIOD
HERMITIAN_TOL = 1e-10


class GridError(ValueError):
    """Bad grid sizes or arrays that do not match a grid."""


class NonHermitianError(GridError):
    """Spectral data that does not represent a real physical field."""


class HasSpacing(Protocol):
    @property
    def h(self) -> float: ...


def _is_power_of_two(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class ModeIndex:
    k1: int
    k3: int

    @property
    def eta2(self) -> float:
        return float(self.k1 * self.k1 + self.k3 * self.k3)

    @property
    def eta(self) -> float:
        return float(np.sqrt(self.eta2))

    def conjugate(self) -> "ModeIndex":
        return ModeIndex(-self.k1, -self.k3)


@dataclass(frozen=True, eq=False)
class Grid:
    """Channel discretization: Fourier in x and z, uniform points in y."""
    nx: int
    ny: int
    nz: int
    y: np.ndarray

    @property
    def h(self) -> float:
        return 2.0 / (self.ny - 1)

    @property
    def hx(self) -> float:
        return PERIOD / self.nx

    @property
    def hz(self) -> float:
        return PERIOD / self.nz

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.nx, self.ny, self.nz)

    @property
    def spectral_shape(self) -> tuple[int, int, int]:
        return (self.nx, self.nz, self.ny)

    @property
    def x(self) -> np.ndarray:
        return np.arange(self.nx) * self.hx

    @property
    def z(self) -> np.ndarray:
        return np.arange(self.nz) * self.hz

    @property
    def k1(self) -> np.ndarray:
        return np.fft.fftfreq(self.nx, d=1.0 / self.nx).astype(int)

    @property
    def k3(self) -> np.ndarray:
        return np.fft.fftfreq(self.nz, d=1.0 / self.nz).astype(int)

    @property
    def eta2(self) -> np.ndarray:
        """(nx, nz) array of k1^2 + k3^2."""
        return (self.k1[:, None] ** 2 + self.k3[None, :] ** 2).astype(float)

    def index(self, mode: ModeIndex) -> tuple[int, int]:
        if abs(mode.k1) > self.nx // 2 or abs(mode.k3) > self.nz // 2:
            raise GridError(f"mode {mode} outside grid {self.nx}x{self.nz}")
        return (mode.k1 % self.nx, mode.k3 % self.nz)

    def modes(self) -> Iterator[ModeIndex]:
        for k1 in self.k1:
            for k3 in self.k3:
                yield ModeIndex(int(k1), int(k3))

    def retained_mask(self, dealias_on: bool = True) -> np.ndarray:
        """Boolean (nx, nz) mask of evolved modes.

        Nyquist wavenumbers have no real-valued derivative and are never kept.
        """
        k1 = self.k1[:, None]
        k3 = self.k3[None, :]
        mask = (k1 != -(self.nx // 2)) & (k3 != -(self.nz // 2))
        if dealias_on:
            mask &= dealias_mask(self.nx, self.nz)
        return mask

    def mesh(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return np.meshgrid(self.x, self.y, self.z, indexing="ij")


def make_grid(nx: int, ny: int, nz: int) -> Grid:
    if not _is_power_of_two(nx) or nx < 8:
        raise GridError(f"nx must be a power of two >= 8, got {nx}")
    if not _is_power_of_two(nz) or nz < 8:
        raise GridError(f"nz must be a power of two >= 8, got {nz}")
    if ny < 17:
        raise GridError(f"ny must be >= 17, got {ny}")
    if ny % 2 == 0:
        raise GridError(f"ny must be odd so that y=0 is a grid point, got {ny}")
    y = np.linspace(-1.0, 1.0, ny)
    y.setflags(write=False)
    return Grid(nx=nx, ny=ny, nz=nz, y=y)


def dealias_mask(nx: int, nz: int) -> np.ndarray:
    k1 = np.fft.fftfreq(nx, d=1.0 / nx)[:, None]
    k3 = np.fft.fftfreq(nz, d=1.0 / nz)[None, :]
    return (np.abs(k1) <= nx / 3.0) & (np.abs(k3) <= nz / 3.0)


@dataclass(frozen=True, eq=False)
class SpecField:
    """Scalar field stored per Fourier mode as complex y-profiles."""
    data: np.ndarray

    def __post_init__(self) -> None:
        arr = np.array(self.data, dtype=np.complex128)
        if arr.ndim != 3:
            raise GridError(f"spectral data must be 3D, got shape {arr.shape}")
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @classmethod
    def zeros(cls, grid: Grid) -> "SpecField":
        return cls(np.zeros(grid.spectral_shape, dtype=np.complex128))

    @classmethod
    def from_modes(cls, grid: Grid, modes: Mapping[ModeIndex, np.ndarray]) -> "SpecField":
        data = np.zeros(grid.spectral_shape, dtype=np.complex128)
        for mode, profile in modes.items():
            data[grid.index(mode)] = np.broadcast_to(profile, (grid.ny,))
        return cls(data)

    @property
    def nx(self) -> int:
        return self.data.shape[0]

    @property
    def nz(self) -> int:
        return self.data.shape[1]

    @property
    def ny(self) -> int:
        return self.data.shape[2]

    def profile(self, mode: ModeIndex) -> np.ndarray:
        return self.data[mode.k1 % self.nx, mode.k3 % self.nz].copy()

    def with_profile(self, mode: ModeIndex, profile: np.ndarray) -> "SpecField":
        data = self.data.copy()
        data[mode.k1 % self.nx, mode.k3 % self.nz] = profile
        return SpecField(data)

    def masked(self, mask: np.ndarray) -> "SpecField":
        return SpecField(self.data * mask[:, :, None])

    def conjugate_partner(self) -> np.ndarray:
        """Array whose entry at (k1, k3) is conj of the entry at (-k1, -k3)."""
        flipped = np.flip(self.data, axis=(0, 1))
        return np.conj(np.roll(flipped, 1, axis=(0, 1)))

    def hermitian_part(self) -> "SpecField":
        return SpecField(0.5 * (self.data + self.conjugate_partner()))

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.data)))

    def __add__(self, other: "SpecField") -> "SpecField":
        return SpecField(self.data + other.data)

    def __sub__(self, other: "SpecField") -> "SpecField":
        return SpecField(self.data - other.data)

    def __mul__(self, scalar: complex) -> "SpecField":
        return SpecField(self.data * scalar)

    __rmul__ = __mul__

    def __neg__(self) -> "SpecField":
        return SpecField(-self.data)


def integrate_y(values: np.ndarray, grid: HasSpacing, axis: int = -1) -> np.ndarray:
    return trapezoid(values, dx=grid.h, axis=axis)


def mode_energy(field: SpecField, grid: Grid) -> np.ndarray:
    """(nx, nz) array of |T|^2 * int |f^{k1,k3}|^2 dy."""
    return TORUS_AREA * integrate_y(np.abs(field.data) ** 2, grid)


def field_energy(field: SpecField, grid: Grid) -> float:
    return float(np.sum(mode_energy(field, grid)))


def physical_energy(values: np.ndarray, grid: Grid) -> float:
    """int |f|^2 dx dy dz on the physical grid."""
    planes = np.sum(np.abs(values) ** 2, axis=(0, 2)) * grid.hx * grid.hz
    return float(integrate_y(planes, grid))


def _check_physical(values: np.ndarray, grid: Grid) -> None:
    if values.shape != grid.shape:
        raise GridError(f"array shape {values.shape} does not match grid {grid.shape}")


def transform_to_spectral(values: np.ndarray, grid: Grid) -> SpecField:
    values = np.asarray(values)
    _check_physical(values, grid)
    hat = np.fft.fft2(values, axes=(0, 2)) / (grid.nx * grid.nz)
    return SpecField(np.transpose(hat, (0, 2, 1)))


def transform_to_physical(field: SpecField, grid: Grid) -> np.ndarray:
    if field.data.shape != grid.spectral_shape:
        raise GridError(
            f"spectral shape {field.data.shape} does not match grid {grid.spectral_shape}"
        )
    values = np.fft.ifft2(np.transpose(field.data, (0, 2, 1)), axes=(0, 2)) * (grid.nx * grid.nz)
    residual = float(np.max(np.abs(values.imag))) if values.size else 0.0
    scale = max(1.0, float(np.max(np.abs(values.real))) if values.size else 0.0)
    if residual > HERMITIAN_TOL * scale:
        raise NonHermitianError(
            f"imaginary residual {residual:.3e} exceeds {HERMITIAN_TOL:.0e} (scale {scale:.3e})"
        )
    return np.ascontiguousarray(values.real)


def ddy(profile: np.ndarray, grid: HasSpacing, axis: int = -1) -> np.ndarray:
    """Wall-normal derivative: centered in the interior, one-sided second order at walls."""
    f = np.moveaxis(np.asarray(profile), axis, -1)
    h = grid.h
    out = np.empty(f.shape, dtype=np.result_type(f.dtype, np.float64))
    out[..., 1:-1] = (f[..., 2:] - f[..., :-2]) / (2.0 * h)
    out[..., 0] = (-3.0 * f[..., 0] + 4.0 * f[..., 1] - f[..., 2]) / (2.0 * h)
    out[..., -1] = (3.0 * f[..., -1] - 4.0 * f[..., -2] + f[..., -3]) / (2.0 * h)
    return np.moveaxis(out, -1, axis)


def d2y(profile: np.ndarray, grid: HasSpacing, axis: int = -1) -> np.ndarray:
    """Second wall-normal derivative; wall rows use the (2, -5, 4, -1) stencil."""
    f = np.moveaxis(np.asarray(profile), axis, -1)
    h2 = grid.h * grid.h
    out = np.empty(f.shape, dtype=np.result_type(f.dtype, np.float64))
    out[..., 1:-1] = (f[..., 2:] - 2.0 * f[..., 1:-1] + f[..., :-2]) / h2
    out[..., 0] = (2.0 * f[..., 0] - 5.0 * f[..., 1] + 4.0 * f[..., 2] - f[..., 3]) / h2
    out[..., -1] = (2.0 * f[..., -1] - 5.0 * f[..., -2] + 4.0 * f[..., -3] - f[..., -4]) / h2
    return np.moveaxis(out, -1, axis)


def dealias(field: SpecField) -> SpecField:
    return field.masked(dealias_mask(field.nx, field.nz))


def derivative_wavenumbers(n: int) -> np.ndarray:
    """FFT-ordered wavenumbers with the Nyquist entry zeroed."""
    k = np.fft.fftfreq(n, d=1.0 / n)
    k[n // 2] = 0.0
    return k


def spectral_dx(field: SpecField, grid: Grid) -> SpecField:
    return SpecField(field.data * (1j * derivative_wavenumbers(grid.nx))[:, None, None])


def spectral_dz(field: SpecField, grid: Grid) -> SpecField:
    return SpecField(field.data * (1j * derivative_wavenumbers(grid.nz))[None, :, None])


def spectral_dy(field: SpecField, grid: Grid) -> SpecField:
    return SpecField(ddy(field.data, grid))
