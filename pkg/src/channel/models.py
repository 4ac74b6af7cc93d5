"""
Data models for the coupled chemotaxis / channel-flow simulation.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from enum import Enum
from typing import Any

import numpy as np

from .grid import Grid, SpecField


class ParamsError(ValueError):
    """Invalid simulation parameters."""


@dataclass(frozen=True)
class Params:
    """Run parameters in rescaled time t -> t/A."""
    A: float
    dt: float
    t_end: float
    a: float = 0.0
    dealias_on: bool = True
    linear_only: bool = False
    fluid_forcing: bool = True

    def __post_init__(self) -> None:
        if not self.A > 0:
            raise ParamsError(f"A must be positive, got {self.A}")
        if not self.dt > 0:
            raise ParamsError(f"dt must be positive, got {self.dt}")
        if not self.t_end >= 0:
            raise ParamsError(f"t_end must be nonnegative, got {self.t_end}")
        if not self.a >= 0:
            raise ParamsError(f"a must be nonnegative, got {self.a}")

    @property
    def weight_rate(self) -> float:
        """a * A^(-1/3), the exponent rate of the diagnostic weight."""
        return self.a * self.A ** (-1.0 / 3.0)

    def replace(self, **changes: Any) -> "Params":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)


def _frozen_profile(values: np.ndarray) -> np.ndarray:
    arr = np.array(values, dtype=np.float64)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class State:
    """Prognostic variables at one instant."""
    t: float
    n: SpecField
    omega2: SpecField
    delta_u2: SpecField
    mean_u1: np.ndarray
    mean_u3: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "mean_u1", _frozen_profile(self.mean_u1))
        object.__setattr__(self, "mean_u3", _frozen_profile(self.mean_u3))

    @classmethod
    def zeros(cls, grid: Grid, t: float = 0.0) -> "State":
        return cls(
            t=t,
            n=SpecField.zeros(grid),
            omega2=SpecField.zeros(grid),
            delta_u2=SpecField.zeros(grid),
            mean_u1=np.zeros(grid.ny),
            mean_u3=np.zeros(grid.ny),
        )

    def replace(self, **changes: Any) -> "State":
        return dataclasses.replace(self, **changes)

    def is_finite(self) -> bool:
        return (
            self.n.is_finite()
            and self.omega2.is_finite()
            and self.delta_u2.is_finite()
            and bool(np.all(np.isfinite(self.mean_u1)))
            and bool(np.all(np.isfinite(self.mean_u3)))
        )

    def first_nonfinite(self) -> str | None:
        for name in ("n", "omega2", "delta_u2"):
            if not getattr(self, name).is_finite():
                return name
        for name in ("mean_u1", "mean_u3"):
            if not np.all(np.isfinite(getattr(self, name))):
                return name
        return None


@dataclass(frozen=True, eq=False)
class DerivedFields:
    """Fields reconstructed from a State: chemoattractant and full velocity."""
    c: SpecField
    u1: SpecField
    u2: SpecField
    u3: SpecField


class RunStatus(Enum):
    COMPLETED = "completed"
    BLOWUP_DETECTED = "blowup_detected"
    STEP_REJECTED = "step_rejected"


class BlowupDetected(RuntimeError):
    def __init__(self, t: float, reason: str, value: float):
        self.t = t
        self.reason = reason
        self.value = value
        super().__init__(f"blow-up detected at t={t:.6g}: {reason} = {value:.6g}")


class StepRejected(RuntimeError):
    def __init__(self, t: float, dt: float, suggested_dt: float, reason: str = "stability"):
        self.t = t
        self.dt = dt
        self.suggested_dt = suggested_dt
        self.reason = reason
        super().__init__(
            f"step rejected at t={t:.6g}: dt={dt:.3e} exceeds {reason} bound, "
            f"suggested dt={suggested_dt:.3e}"
        )


@dataclass
class RunResult:
    status: RunStatus
    state: State
    steps: int
    dt: float
    message: str = ""
    event_t: float | None = None
    clip_events: int = 0
    rejections: int = 0
    extra: dict[str, Any] = field(default_factory=dict)

    @property
    def completed(self) -> bool:
        return self.status == RunStatus.COMPLETED
