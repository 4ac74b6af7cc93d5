"""
Randomized verification suites over the ratio functionals.

Each trial draws its own generator from ``seed + trial`` so any single row
can be reproduced in isolation.
"""
from __future__ import annotations

import csv
from collections.abc import Callable, Iterator
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..channel.grid import make_grid
from ..logging_config import get_logger
from .functions import (
    InequalityError,
    StripGrid,
    random_admissible,
    random_dirichlet_profile,
)
from .optimizer import estimate_cstar
from .ratios import (
    NashVariant,
    gn_l3_ratio,
    l3_embedding_ratio,
    l3_embedding_slack,
    nash_ratio,
    product_trace_ratio,
    sup_gradient_ratios,
)

logger = get_logger("cpks.inequalities")

SUITES = ("l3-embedding", "gn-l3", "product-trace", "sup-gradient", "nash", "cstar")
CSV_HEADER = ("operation", "seed", "resolution", "ratio")


@dataclass(frozen=True)
class SuiteRow:
    operation: str
    seed: int
    resolution: str
    ratio: float

    def as_csv(self) -> list[str]:
        return [self.operation, str(self.seed), self.resolution, format(self.ratio, ".17g")]


@dataclass
class SuiteReport:
    name: str
    rows: list[SuiteRow]
    bound: float | None = None

    def by_operation(self) -> dict[str, list[float]]:
        grouped: dict[str, list[float]] = {}
        for row in self.rows:
            grouped.setdefault(row.operation, []).append(row.ratio)
        return grouped

    def maxima(self) -> dict[str, float]:
        return {op: max(values) for op, values in self.by_operation().items()}

    @property
    def within_bound(self) -> bool:
        if self.bound is None:
            return True
        return all(row.ratio <= self.bound for row in self.rows if row.operation == "l3_embedding_ratio")


def _label(grid: StripGrid) -> str:
    return f"{grid.ny}x{grid.nz}"


def _l3_embedding(grid: StripGrid, trial_seed: int) -> Iterator[SuiteRow]:
    f = random_admissible(grid, np.random.default_rng(trial_seed))
    yield SuiteRow("l3_embedding_ratio", trial_seed, _label(grid), l3_embedding_ratio(f))


def _gn_l3(grid: StripGrid, trial_seed: int) -> Iterator[SuiteRow]:
    f = random_admissible(grid, np.random.default_rng(trial_seed))
    yield SuiteRow("gn_l3_ratio", trial_seed, _label(grid), gn_l3_ratio(f))


def _product_trace(grid: StripGrid, trial_seed: int) -> Iterator[SuiteRow]:
    rng = np.random.default_rng(trial_seed)
    f1 = random_admissible(grid, rng)
    f2 = random_admissible(grid, rng)
    yield SuiteRow("product_trace_ratio", trial_seed, _label(grid), product_trace_ratio(f1, f2))


def _sup_gradient(grid: StripGrid, trial_seed: int) -> Iterator[SuiteRow]:
    f = random_admissible(grid, np.random.default_rng(trial_seed))
    for eps, ratio in sup_gradient_ratios(f).items():
        yield SuiteRow(f"sup_gradient_ratio[eps={eps:g}]", trial_seed, _label(grid), ratio)


def _nash(grid: StripGrid, trial_seed: int) -> Iterator[SuiteRow]:
    rng = np.random.default_rng(trial_seed)
    profile = random_dirichlet_profile(grid.y, rng)
    yield SuiteRow("nash_ratio[1d-interval]", trial_seed, str(grid.ny), nash_ratio(profile, NashVariant.INTERVAL))

    f = random_admissible(grid, rng)
    yield SuiteRow("nash_ratio[2d-strip]", trial_seed, _label(grid), nash_ratio(f, NashVariant.STRIP))

    channel = make_grid(16, 33, 16)
    prof = random_dirichlet_profile(channel.y, rng)
    x, _, z = channel.mesh()
    modulation = 1.0 + 0.5 * rng.uniform(-1.0, 1.0) * np.cos(x + rng.uniform(0, 2 * np.pi)) * np.cos(z)
    values = modulation * prof[None, :, None]
    res = f"{channel.nx}x{channel.ny}x{channel.nz}"
    yield SuiteRow("nash_ratio[3d-channel]", trial_seed, res, nash_ratio(values, NashVariant.CHANNEL, channel))


def _cstar(grid: StripGrid, trial_seed: int) -> Iterator[SuiteRow]:
    estimate = estimate_cstar(grid, iterations=100, restarts=1, seed=trial_seed)
    yield SuiteRow("estimate_cstar", trial_seed, _label(grid), estimate.value)


_RUNNERS: dict[str, Callable[[StripGrid, int], Iterator[SuiteRow]]] = {
    "l3-embedding": _l3_embedding,
    "gn-l3": _gn_l3,
    "product-trace": _product_trace,
    "sup-gradient": _sup_gradient,
    "nash": _nash,
    "cstar": _cstar,
}


def run_suite(
    name: str,
    trials: int = 100,
    seed: int = 0,
    resolution: tuple[int, int] = (129, 64),
) -> SuiteReport:
    """Run one named suite, or every suite for ``name == "all"``."""
    names = SUITES if name == "all" else (name,)
    unknown = [n for n in names if n not in _RUNNERS]
    if unknown:
        raise InequalityError(f"unknown suite {unknown[0]!r}; choose from {', '.join(SUITES)} or all")
    if trials < 1:
        raise InequalityError("trials must be positive")
    grid = StripGrid(*resolution)
    rows: list[SuiteRow] = []
    for suite_name in names:
        runner = _RUNNERS[suite_name]
        for trial in range(trials):
            rows.extend(runner(grid, seed + trial))
        logger.info_with("suite finished", suite=suite_name, trials=trials, ny=grid.ny, nz=grid.nz)
    report = SuiteReport(name=name, rows=rows, bound=l3_embedding_slack(grid))
    if not report.within_bound:
        logger.warning_with("l3 embedding bound exceeded", bound=report.bound, max=report.maxima().get("l3_embedding_ratio"))
    return report


def write_csv(report: SuiteReport, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(CSV_HEADER)
        for row in report.rows:
            writer.writerow(row.as_csv())
    return path
