"""Channel simulator: geometry, elliptic solves, time stepping and diagnostics."""
from .grid import Grid, ModeIndex, SpecField, make_grid
from .models import DerivedFields, Params, RunResult, RunStatus, State

__all__ = [
    "Grid",
    "ModeIndex",
    "SpecField",
    "make_grid",
    "DerivedFields",
    "Params",
    "RunResult",
    "RunStatus",
    "State",
]
