"""
Test functions on the strip I x T = [-1, 1] x [0, 2*pi) and their norms.

Values are stored as (ny, nz) arrays. y-derivatives use the simulator's
finite differences; z-derivatives are spectral.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..channel.grid import PERIOD, ddy, integrate_y

CONSTRAINT_TOL = 1e-12


class InequalityError(ValueError):
    """Base class for inequality-lab input errors."""


class ConstraintError(InequalityError):
    """A declared or required constraint does not hold."""


class ZeroFunctionError(InequalityError):
    """Ratio requested for an identically zero function."""


@dataclass(frozen=True, eq=False)
class StripGrid:
    ny: int
    nz: int

    def __post_init__(self) -> None:
        if self.ny < 5 or self.ny % 2 == 0:
            raise InequalityError(f"ny must be odd and >= 5, got {self.ny}")
        if self.nz < 4 or self.nz % 2:
            raise InequalityError(f"nz must be even and >= 4, got {self.nz}")

    @property
    def h(self) -> float:
        return 2.0 / (self.ny - 1)

    @property
    def hz(self) -> float:
        return PERIOD / self.nz

    @property
    def y(self) -> np.ndarray:
        return np.linspace(-1.0, 1.0, self.ny)

    @property
    def z(self) -> np.ndarray:
        return np.arange(self.nz) * self.hz

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.y, self.z, indexing="ij")

    def refined(self) -> "StripGrid":
        return StripGrid(2 * self.ny - 1, 2 * self.nz)


@dataclass(frozen=True)
class IntervalGrid:
    """Uniform points on I = [-1, 1]."""
    ny: int

    @property
    def h(self) -> float:
        return 2.0 / (self.ny - 1)

    @property
    def y(self) -> np.ndarray:
        return np.linspace(-1.0, 1.0, self.ny)


def integrate(values: np.ndarray, grid: StripGrid) -> float:
    """Trapezoid in y, rectangle (exact for trig polynomials) in z."""
    return float(integrate_y(np.sum(values, axis=-1) * grid.hz, grid))


def dz(values: np.ndarray, grid: StripGrid, order: int = 1) -> np.ndarray:
    k = np.fft.rfftfreq(grid.nz, d=1.0 / grid.nz)
    if order % 2:
        k = k.copy()
        k[-1] = 0.0
    hat = np.fft.rfft(values, axis=-1) * (1j * k) ** order
    return np.fft.irfft(hat, n=grid.nz, axis=-1)


def dy(values: np.ndarray, grid: StripGrid) -> np.ndarray:
    return ddy(values, grid, axis=0)


@dataclass(frozen=True, eq=False)
class TestFunction2D:
    """Function on I x T with declared constraints."""
    __test__ = False

    values: np.ndarray
    grid: StripGrid
    dirichlet_y: bool = True
    zero_z_mean: bool = True

    def __post_init__(self) -> None:
        arr = np.array(self.values, dtype=np.float64)
        if arr.shape != (self.grid.ny, self.grid.nz):
            raise InequalityError(
                f"values shape {arr.shape} does not match grid ({self.grid.ny}, {self.grid.nz})"
            )
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)
        scale = max(float(np.max(np.abs(arr))), 1.0)
        if self.dirichlet_y and np.max(np.abs(arr[[0, -1]])) > CONSTRAINT_TOL * scale:
            raise ConstraintError("declared dirichlet_y but f(+-1, z) != 0")
        if self.zero_z_mean and np.max(np.abs(arr.mean(axis=1))) > CONSTRAINT_TOL * scale:
            raise ConstraintError("declared zero_z_mean but int f dz != 0")

    @classmethod
    def create(
        cls,
        values: np.ndarray,
        grid: StripGrid,
        dirichlet_y: bool = True,
        zero_z_mean: bool = True,
    ) -> "TestFunction2D":
        """Build a function after projecting the values onto the constraints."""
        arr = np.array(values, dtype=np.float64)
        if zero_z_mean:
            arr = arr - arr.mean(axis=1, keepdims=True)
        if dirichlet_y:
            arr[0] = 0.0
            arr[-1] = 0.0
        return cls(arr, grid, dirichlet_y, zero_z_mean)

    def scaled(self, alpha: float) -> "TestFunction2D":
        return TestFunction2D(alpha * self.values, self.grid, self.dirichlet_y, self.zero_z_mean)

    def is_zero(self) -> bool:
        return not np.any(self.values)

    def dy(self) -> np.ndarray:
        return dy(self.values, self.grid)

    def dz(self) -> np.ndarray:
        return dz(self.values, self.grid)

    def lp(self, p: float) -> float:
        return integrate(np.abs(self.values) ** p, self.grid) ** (1.0 / p)

    def grad_sq(self) -> float:
        """||grad f||_{L2}^2."""
        return integrate(self.dy() ** 2 + self.dz() ** 2, self.grid)

    def dy_sq(self) -> float:
        return integrate(self.dy() ** 2, self.grid)

    def dz_grad_sq(self) -> float:
        """||d/dz grad f||_{L2}^2."""
        fz = self.dz()
        return integrate(dy(fz, self.grid) ** 2 + dz(self.values, self.grid, order=2) ** 2, self.grid)

    def zero_mode_profile(self) -> np.ndarray:
        """f_(0,0)(y): the z-average."""
        return self.values.mean(axis=1)


def sine_profile(grid_y: np.ndarray, m: int) -> np.ndarray:
    return np.sin(m * np.pi * (grid_y + 1.0) / 2.0)


def random_admissible(
    grid: StripGrid,
    rng: np.random.Generator,
    modes_y: int = 8,
    modes_z: int = 6,
    decay: float = 2.0,
) -> TestFunction2D:
    """Random sine series in y times zero-mean trig polynomial in z."""
    y, z = grid.y, grid.z
    values = np.zeros((grid.ny, grid.nz))
    modes_z = min(modes_z, grid.nz // 2 - 1)
    for m in range(1, modes_y + 1):
        sy = sine_profile(y, m)
        for k in range(1, modes_z + 1):
            scale = (m * m + k * k) ** (-decay / 2.0)
            a, b = rng.standard_normal(2) * scale
            values += np.outer(sy, a * np.cos(k * z) + b * np.sin(k * z))
    return TestFunction2D.create(values, grid)


def random_dirichlet_profile(
    y: np.ndarray,
    rng: np.random.Generator,
    modes: int = 8,
    decay: float = 2.0,
) -> np.ndarray:
    coeffs = rng.standard_normal(modes) * np.arange(1, modes + 1, dtype=float) ** (-decay)
    profile = sum(c * sine_profile(y, m) for m, c in enumerate(coeffs, start=1))
    profile = np.asarray(profile, dtype=float)
    profile[0] = profile[-1] = 0.0
    return profile
