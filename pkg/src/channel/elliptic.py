"""
Per-mode boundary-value solves in y.

- chemoattractant Helmholtz problem (D2 - eta^2 - 1) c = -n, c(+-1) = 0
- Dirichlet inversion of the Laplacian for u2
- div-curl reconstruction of u1, u3 from (u2, omega2)

All operators are tridiagonal on the uniform y grid. Factorizations are
batched over Fourier modes and cached.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .grid import Grid, HasSpacing, ModeIndex, SpecField, ddy, integrate_y


class EllipticError(ValueError):
    """Solve requested for a mode where the operator is not defined."""


class SingularOperatorError(RuntimeError):
    """Zero pivot met while factoring a tridiagonal operator."""


PIVOT_TOL = 1e-300


class TridiagonalFactorization:
    """Thomas factorization of a batch of tridiagonal systems.

    Arrays have shape (m, n): m independent systems of size n. Row i reads
    lower[i] x[i-1] + diag[i] x[i] + upper[i] x[i+1]; lower[:, 0] and
    upper[:, -1] are ignored.
    """

    def __init__(self, lower: np.ndarray, diag: np.ndarray, upper: np.ndarray):
        diag = np.atleast_2d(diag)
        lower = np.broadcast_to(lower, diag.shape)
        upper = np.broadcast_to(upper, diag.shape)
        dtype = np.result_type(lower, diag, upper, np.float64)
        m, n = diag.shape
        beta = np.empty((m, n), dtype=dtype)
        gamma = np.zeros((m, n), dtype=dtype)
        beta[:, 0] = diag[:, 0]
        for i in range(1, n):
            if np.any(np.abs(beta[:, i - 1]) < PIVOT_TOL):
                raise SingularOperatorError(f"zero pivot at row {i - 1}")
            gamma[:, i - 1] = upper[:, i - 1] / beta[:, i - 1]
            beta[:, i] = diag[:, i] - lower[:, i] * gamma[:, i - 1]
        if np.any(np.abs(beta[:, -1]) < PIVOT_TOL):
            raise SingularOperatorError(f"zero pivot at row {n - 1}")
        self.lower = np.array(lower, dtype=dtype)
        self.beta = beta
        self.gamma = gamma
        self.shape = (m, n)

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        rhs = np.asarray(rhs)
        squeeze = rhs.ndim == 1
        b = np.atleast_2d(rhs)
        if b.shape != self.shape:
            raise ValueError(f"rhs shape {b.shape} does not match factorization {self.shape}")
        x = np.empty(self.shape, dtype=np.result_type(b.dtype, self.beta.dtype))
        n = self.shape[1]
        x[:, 0] = b[:, 0] / self.beta[:, 0]
        for i in range(1, n):
            x[:, i] = (b[:, i] - self.lower[:, i] * x[:, i - 1]) / self.beta[:, i]
        for i in range(n - 2, -1, -1):
            x[:, i] -= self.gamma[:, i] * x[:, i + 1]
        return x[0] if squeeze else x


def helmholtz_bands(ny: int, h: float, eta2: np.ndarray, shift: float) -> tuple[np.ndarray, ...]:
    """Bands of (D2 - eta^2 - shift) with identity wall rows, one system per eta2 entry."""
    eta2 = np.atleast_1d(np.asarray(eta2, dtype=float))
    m = eta2.size
    inv_h2 = 1.0 / (h * h)
    lower = np.full((m, ny), inv_h2)
    upper = np.full((m, ny), inv_h2)
    diag = np.empty((m, ny))
    diag[:] = (-2.0 * inv_h2 - eta2 - shift)[:, None]
    diag[:, 0] = diag[:, -1] = 1.0
    upper[:, 0] = 0.0
    lower[:, -1] = 0.0
    return lower, diag, upper


@lru_cache(maxsize=256)
def _helmholtz_factor(ny: int, h: float, eta2: float, shift: float) -> TridiagonalFactorization:
    return TridiagonalFactorization(*helmholtz_bands(ny, h, np.array([eta2]), shift))


@dataclass(frozen=True)
class HelmholtzOperator:
    """(D2 - eta^2 - shift) with homogeneous Dirichlet rows for one mode."""
    mode: ModeIndex
    shift: float
    ny: int
    h: float

    def __post_init__(self) -> None:
        if self.shift < 0:
            raise EllipticError(f"shift must be nonnegative, got {self.shift}")
        if self.shift == 0 and self.mode.eta2 == 0:
            raise EllipticError("Laplacian inversion is undefined for mode (0, 0)")

    @property
    def factorization(self) -> TridiagonalFactorization:
        return _helmholtz_factor(self.ny, self.h, self.mode.eta2, float(self.shift))

    def solve(self, rhs: np.ndarray, walls: tuple[complex, complex] = (0.0, 0.0)) -> np.ndarray:
        b = np.array(rhs, dtype=np.result_type(rhs, np.float64), copy=True)
        b[0], b[-1] = walls
        return self.factorization.solve(b)


def _check_profile(profile: np.ndarray, grid: Grid) -> np.ndarray:
    profile = np.asarray(profile)
    if profile.shape != (grid.ny,):
        raise EllipticError(f"profile length {profile.shape} does not match ny={grid.ny}")
    return profile


def solve_chemo(n_mode: np.ndarray, mode: ModeIndex, grid: Grid) -> np.ndarray:
    n_mode = _check_profile(n_mode, grid)
    op = HelmholtzOperator(mode, 1.0, grid.ny, grid.h)
    return op.solve(-n_mode)


def solve_u2_from_laplacian(q_mode: np.ndarray, mode: ModeIndex, grid: Grid) -> np.ndarray:
    q_mode = _check_profile(q_mode, grid)
    if mode.eta2 == 0:
        raise EllipticError("u2 is not recovered from its Laplacian at mode (0, 0)")
    op = HelmholtzOperator(mode, 0.0, grid.ny, grid.h)
    return op.solve(q_mode)


def reconstruct_u1_u3(
    u2_mode: np.ndarray,
    omega2_mode: np.ndarray,
    mode: ModeIndex,
    grid: Grid,
) -> tuple[np.ndarray, np.ndarray]:
    """Solve i k1 u1 + i k3 u3 = -D u2 and i k3 u1 - i k1 u3 = omega2 pointwise in y."""
    if mode.eta2 == 0:
        raise EllipticError("div-curl reconstruction needs eta > 0")
    u2_mode = _check_profile(u2_mode, grid)
    omega2_mode = _check_profile(omega2_mode, grid)
    du2 = ddy(u2_mode, grid)
    u1 = 1j * (mode.k1 * du2 - mode.k3 * omega2_mode) / mode.eta2
    u3 = 1j * (mode.k3 * du2 + mode.k1 * omega2_mode) / mode.eta2
    return u1, u3


@lru_cache(maxsize=32)
def _field_factor(nx: int, ny: int, nz: int, shift: float) -> TridiagonalFactorization:
    k1 = np.fft.fftfreq(nx, d=1.0 / nx)
    k3 = np.fft.fftfreq(nz, d=1.0 / nz)
    eta2 = (k1[:, None] ** 2 + k3[None, :] ** 2).ravel()
    if shift == 0:
        # mode (0, 0) gets a dummy shift; callers zero its result
        eta2 = eta2.copy()
        eta2[0] = 1.0
    return TridiagonalFactorization(*helmholtz_bands(ny, 2.0 / (ny - 1), eta2, shift))


def _solve_field(rhs: np.ndarray, grid: Grid, shift: float) -> np.ndarray:
    b = rhs.reshape(grid.nx * grid.nz, grid.ny).copy()
    b[:, 0] = 0.0
    b[:, -1] = 0.0
    out = _field_factor(grid.nx, grid.ny, grid.nz, float(shift)).solve(b)
    return out.reshape(grid.spectral_shape)


def chemo_field(n: SpecField, grid: Grid) -> SpecField:
    """c for every mode at once."""
    return SpecField(_solve_field(-n.data, grid, 1.0))


def u2_field(delta_u2: SpecField, grid: Grid) -> SpecField:
    """u2 from its Laplacian for every eta > 0 mode; mode (0, 0) is zero."""
    data = _solve_field(delta_u2.data, grid, 0.0)
    data[0, 0] = 0.0
    return SpecField(data)


def reconstruct_field(u2: SpecField, omega2: SpecField, grid: Grid) -> tuple[SpecField, SpecField]:
    """(u1, u3) for every eta > 0 mode; mode (0, 0) is left zero."""
    eta2 = grid.eta2.copy()
    eta2[0, 0] = 1.0
    k1 = grid.k1[:, None, None].astype(float)
    k3 = grid.k3[None, :, None].astype(float)
    du2 = ddy(u2.data, grid)
    u1 = 1j * (k1 * du2 - k3 * omega2.data) / eta2[:, :, None]
    u3 = 1j * (k3 * du2 + k1 * omega2.data) / eta2[:, :, None]
    u1[0, 0] = 0.0
    u3[0, 0] = 0.0
    return SpecField(u1), SpecField(u3)


def _profile_norm(values: np.ndarray, grid: HasSpacing) -> np.ndarray:
    return np.sqrt(integrate_y(np.abs(values) ** 2, grid))


def measure_elliptic_bound(grid: Grid, trials: int, rng: np.random.Generator) -> float:
    """Largest (||Lap c|| + ||grad c||) / ||n|| over random data and all modes.

    The Laplacian of c is taken as the discrete operator applied to c, which
    equals c - n away from the walls.
    """
    k1 = grid.k1[:, None, None].astype(float)
    k3 = grid.k3[None, :, None].astype(float)
    worst = 0.0
    for _ in range(trials):
        data = rng.standard_normal(grid.spectral_shape) + 1j * rng.standard_normal(grid.spectral_shape)
        data[..., 0] = 0.0
        data[..., -1] = 0.0
        n = SpecField(data)
        c = chemo_field(n, grid).data
        lap = c - n.data
        lap[..., 0] = lap[..., -1] = 0.0
        grad2 = np.abs(ddy(c, grid)) ** 2 + (k1 ** 2 + k3 ** 2) * np.abs(c) ** 2
        lhs = _profile_norm(lap, grid) + np.sqrt(integrate_y(grad2, grid))
        rhs = _profile_norm(n.data, grid)
        worst = max(worst, float(np.max(lhs / rhs)))
    return worst
