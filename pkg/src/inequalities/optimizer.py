"""
Lower bounds on the sharp constant of ||f||_3 <= C ||f||_1^(1/3) ||grad f||_2^(2/3)
on I x T by projected gradient ascent.

The ascent runs over coefficients of a basis that satisfies both
constraints exactly (sine series in y times zero-mean trig polynomials in
z), optionally augmented with a seed function. Iterates are normalized and
a backtracking line search keeps the ratio non-decreasing.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..logging_config import get_logger
from .functions import StripGrid, TestFunction2D, dz, sine_profile
from .functions import dy as strip_dy
from .ratios import THEOREM_MASS_BOUND, gn_l3_ratio

logger = get_logger("cpks.inequalities")

MAX_BACKTRACKS = 40
MIN_IMPROVEMENT = 1e-12


@dataclass
class CStarEstimate:
    value: float
    restarts: list[float]
    history: list[float]
    ny: int
    nz: int
    best_function: TestFunction2D | None = field(default=None, repr=False)

    @property
    def admissible_mass(self) -> float:
        """Mass threshold 1/C^3 implied by the estimate."""
        return 1.0 / self.value ** 3

    @property
    def theorem_mass_bound(self) -> float:
        return THEOREM_MASS_BOUND

    def to_dict(self) -> dict[str, object]:
        return {
            "cstar_lower_bound": self.value,
            "admissible_mass": self.admissible_mass,
            "theorem_mass_bound": self.theorem_mass_bound,
            "restarts": self.restarts,
            "iterations": len(self.history) - 1,
            "resolution": [self.ny, self.nz],
        }


class _Basis:
    def __init__(self, grid: StripGrid, modes_y: int, modes_z: int, seed: TestFunction2D | None):
        y, z = grid.y, grid.z
        modes_z = min(modes_z, grid.nz // 2 - 1)
        columns = []
        for m in range(1, modes_y + 1):
            sy = sine_profile(y, m)
            sy[0] = sy[-1] = 0.0
            for k in range(1, modes_z + 1):
                columns.append(np.outer(sy, np.cos(k * z)))
                columns.append(np.outer(sy, np.sin(k * z)))
        if seed is not None:
            columns.append(seed.values / np.max(np.abs(seed.values)))
        self.grid = grid
        self.size = len(columns)
        self.modes = [(m, k) for m in range(1, modes_y + 1) for k in range(1, modes_z + 1) for _ in (0, 1)]
        self.values = np.stack([col.ravel() for col in columns], axis=1)
        self.dy = np.stack([strip_dy(col, grid).ravel() for col in columns], axis=1)
        self.dz = np.stack([dz(col, grid).ravel() for col in columns], axis=1)
        wy = np.full(grid.ny, grid.h)
        wy[0] = wy[-1] = 0.5 * grid.h
        self.weights = np.repeat(wy, grid.nz) * grid.hz
        wdy = self.dy * self.weights[:, None]
        wdz = self.dz * self.weights[:, None]
        self.stiffness = self.dy.T @ wdy + self.dz.T @ wdz

    def function(self, coeffs: np.ndarray) -> np.ndarray:
        return (self.values @ coeffs).reshape(self.grid.ny, self.grid.nz)

    def log_ratio(self, coeffs: np.ndarray) -> float:
        f = self.values @ coeffs
        i3 = float(np.sum(self.weights * np.abs(f) ** 3))
        i1 = float(np.sum(self.weights * np.abs(f)))
        g = float(coeffs @ self.stiffness @ coeffs)
        if i3 <= 0 or i1 <= 0 or g <= 0:
            return -np.inf
        return (np.log(i3) - np.log(i1) - np.log(g)) / 3.0

    def gradient(self, coeffs: np.ndarray) -> np.ndarray:
        f = self.values @ coeffs
        w = self.weights
        i3 = float(np.sum(w * np.abs(f) ** 3))
        i1 = float(np.sum(w * np.abs(f)))
        kc = self.stiffness @ coeffs
        g = float(coeffs @ kc)
        d3 = self.values.T @ (3.0 * w * np.abs(f) * f) / i3
        d1 = self.values.T @ (w * np.sign(f)) / i1
        return (d3 - d1 - 2.0 * kc / g) / 3.0


def _ascend(basis: _Basis, coeffs: np.ndarray, iterations: int, step: float) -> tuple[np.ndarray, list[float]]:
    c = coeffs / np.linalg.norm(coeffs)
    value = basis.log_ratio(c)
    history = [float(np.exp(value))]
    for it in range(iterations):
        grad = basis.gradient(c)
        grad -= (grad @ c) * c
        if not np.all(np.isfinite(grad)) or np.linalg.norm(grad) == 0:
            break
        s = step
        accepted = False
        for _ in range(MAX_BACKTRACKS):
            trial = c + s * grad
            trial /= np.linalg.norm(trial)
            trial_value = basis.log_ratio(trial)
            if trial_value > value:
                accepted = True
                break
            s *= 0.5
        if not accepted or trial_value - value < MIN_IMPROVEMENT:
            if accepted:
                c, value = trial, trial_value
                history.append(float(np.exp(value)))
            break
        c, value = trial, trial_value
        step = 2.0 * s
        history.append(float(np.exp(value)))
        if it % 50 == 0:
            logger.debug_with("ascent progress", iteration=it, ratio=history[-1], step=s)
    return c, history


def estimate_cstar(
    resolution: tuple[int, int] | StripGrid = (65, 32),
    iterations: int = 200,
    restarts: int = 5,
    seed: int = 0,
    initial: TestFunction2D | None = None,
    modes_y: int = 8,
    modes_z: int = 4,
    step: float = 0.1,
) -> CStarEstimate:
    """Best gn_l3_ratio found over `restarts` ascents; a lower bound on C*."""
    grid = resolution if isinstance(resolution, StripGrid) else StripGrid(*resolution)
    if initial is not None and (initial.grid.ny, initial.grid.nz) != (grid.ny, grid.nz):
        raise ValueError("initial function lives on a different grid")
    rng = np.random.default_rng(seed)
    basis = _Basis(grid, modes_y, modes_z, initial)
    decay = np.array([(m * m + k * k) ** -1.0 for m, k in basis.modes])

    best: tuple[float, list[float], TestFunction2D] | None = None
    finals: list[float] = []
    for r in range(max(restarts, 1)):
        if r == 0 and initial is not None:
            c0 = np.zeros(basis.size)
            c0[-1] = 1.0
        else:
            c0 = np.zeros(basis.size)
            c0[: decay.size] = rng.standard_normal(decay.size) * decay
        coeffs, history = _ascend(basis, c0, iterations, step)
        f = TestFunction2D.create(basis.function(coeffs), grid)
        value = gn_l3_ratio(f)
        finals.append(value)
        if best is None or value > best[0]:
            best = (value, history, f)

    assert best is not None
    estimate = CStarEstimate(
        value=best[0],
        restarts=finals,
        history=best[1],
        ny=grid.ny,
        nz=grid.nz,
        best_function=best[2],
    )
    logger.info_with(
        "sharp constant estimate",
        cstar=estimate.value,
        admissible_mass=estimate.admissible_mass,
        ny=grid.ny,
        nz=grid.nz,
    )
    return estimate
