"""
Evolution of the doubly averaged velocity profiles u1_(0,0) and u3_(0,0).

The (omega2, Lap u2) formulation only carries eta > 0 modes. On the (0,0)
slice u2 vanishes and the averaged pressure gradient is zero on the torus,
so both profiles obey a heat equation with Dirichlet walls; u1 is forced by
the averaged density.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .elliptic import TridiagonalFactorization
from .grid import Grid, HasSpacing, integrate_y
from .models import Params


@dataclass(frozen=True, eq=False)
class MeanProfiles:
    u1_00: np.ndarray
    u3_00: np.ndarray

    @classmethod
    def zeros(cls, grid: Grid) -> "MeanProfiles":
        return cls(np.zeros(grid.ny), np.zeros(grid.ny))

    def norms(self, grid: HasSpacing) -> tuple[float, float]:
        return (
            float(np.sqrt(integrate_y(self.u1_00 ** 2, grid))),
            float(np.sqrt(integrate_y(self.u3_00 ** 2, grid))),
        )


@lru_cache(maxsize=64)
def _heat_factor(ny: int, h: float, nu_dt: float) -> TridiagonalFactorization:
    off = -0.5 * nu_dt / (h * h)
    lower = np.full((1, ny), off)
    upper = np.full((1, ny), off)
    diag = np.full((1, ny), 1.0 + nu_dt / (h * h))
    diag[0, 0] = diag[0, -1] = 1.0
    upper[0, 0] = 0.0
    lower[0, -1] = 0.0
    return TridiagonalFactorization(lower, diag, upper)


def _explicit_half(u: np.ndarray, nu_dt: float, h: float) -> np.ndarray:
    out = np.zeros_like(u)
    out[1:-1] = u[1:-1] + 0.5 * nu_dt * (u[2:] - 2.0 * u[1:-1] + u[:-2]) / (h * h)
    return out


def heat_step(u: np.ndarray, forcing: np.ndarray, grid: Grid, nu_dt: float, dt: float) -> np.ndarray:
    """Crank-Nicolson step of u_t = nu u_yy + forcing with u(+-1) = 0."""
    rhs = _explicit_half(u, nu_dt, grid.h) + dt * forcing
    rhs[0] = rhs[-1] = 0.0
    return _heat_factor(grid.ny, grid.h, nu_dt).solve(rhs)


def step(
    mean: MeanProfiles,
    n_00: np.ndarray,
    u2_00_forcing: np.ndarray,
    grid: Grid,
    params: Params,
    dt: float,
) -> MeanProfiles:
    nu_dt = dt / params.A
    forcing = np.asarray(n_00, dtype=float) / params.A - np.asarray(u2_00_forcing, dtype=float)
    u1 = heat_step(np.asarray(mean.u1_00, dtype=float), forcing, grid, nu_dt, dt)
    u3 = heat_step(np.asarray(mean.u3_00, dtype=float), np.zeros(grid.ny), grid, nu_dt, dt)
    return MeanProfiles(u1, u3)
