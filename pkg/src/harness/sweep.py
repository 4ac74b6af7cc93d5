"""
Parameter sweeps over (A, M) or any dotted config key.

Rows run as independent processes; each writes its own run directory and
a failing row is recorded as "failed" without stopping the others.
"""
from __future__ import annotations

import asyncio
import csv
import itertools
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from ..logging_config import get_logger
from .config import ConfigError, RunConfig, from_flat, to_flat
from .experiment import run_experiment

logger = get_logger("cpks.sweep")

AXIS_ALIASES = {"A": "params.A", "M": "initial.mass"}
SWEEP_COLUMNS = ("A", "M", "status", "linf_ratio", "decay_rate", "e_sup", "t_stop", "error")
SWEEP_CSV = "sweep.csv"


@dataclass(frozen=True)
class SweepRow:
    A: float
    M: float
    status: str
    linf_ratio: float | None = None
    decay_rate: float | None = None
    e_sup: float | None = None
    t_stop: float | None = None
    error: str = ""

    def as_csv(self) -> list[str]:
        def fmt(value: Any) -> str:
            if value is None:
                return ""
            if isinstance(value, float):
                return format(value, ".17g")
            return str(value)

        return [fmt(getattr(self, name)) for name in SWEEP_COLUMNS]


def parse_axis(text: str) -> tuple[str, list[float]]:
    """'A=1e3,1e4' -> ('params.A', [1000.0, 10000.0])."""
    if "=" not in text:
        raise ConfigError(f"axis {text!r} must look like NAME=v1,v2,...")
    name, _, values = text.partition("=")
    name = AXIS_ALIASES.get(name.strip(), name.strip())
    try:
        parsed = [float(v) for v in values.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"axis {text!r} has a non-numeric value") from exc
    if not parsed:
        raise ConfigError(f"axis {text!r} is empty")
    return name, parsed


def worker_count(requested: int | None, rows: int) -> int:
    limit = requested or os.cpu_count() or 1
    env = os.environ.get("CPKS_THREADS")
    if env:
        try:
            limit = min(limit, max(int(env), 1))
        except ValueError:
            logger.warning_with("ignoring non-integer CPKS_THREADS", value=env)
    return max(1, min(limit, rows))


def expand(base: RunConfig, axes: dict[str, list[float]], directory: Path) -> list[RunConfig]:
    names = list(axes)
    flat_base = to_flat(base)
    configs = []
    for i, combo in enumerate(itertools.product(*(axes[n] for n in names))):
        flat = dict(flat_base)
        flat.update(zip(names, combo))
        flat["output.directory"] = str(directory / f"row_{i:03d}")
        configs.append(from_flat(flat))
    return configs


def _run_row(flat: dict[str, Any]) -> SweepRow:
    config = from_flat(flat)
    report = run_experiment(config)
    summary = report.summary
    return SweepRow(
        A=config.params.A,
        M=config.initial.mass,
        status=summary["status"],
        linf_ratio=summary["linf"]["ratio"],
        decay_rate=summary["decay_rates"]["n_nonzero"],
        e_sup=summary["e"]["sup"],
        t_stop=summary["t_stop"],
    )


async def run_sweep(
    base: RunConfig,
    axes: dict[str, list[float]],
    directory: str | Path | None = None,
    workers: int | None = None,
) -> list[SweepRow]:
    if not axes or any(not values for values in axes.values()):
        raise ConfigError("sweep needs at least one nonempty axis")
    out = Path(directory if directory is not None else base.output.directory)
    out.mkdir(parents=True, exist_ok=True)
    configs = expand(base, axes, out)
    n_workers = worker_count(workers, len(configs))
    logger.info_with("sweep started", rows=len(configs), workers=n_workers, directory=str(out))

    loop = asyncio.get_running_loop()
    with ProcessPoolExecutor(max_workers=n_workers) as pool:
        futures = [loop.run_in_executor(pool, _run_row, to_flat(c)) for c in configs]
        outcomes = await asyncio.gather(*futures, return_exceptions=True)

    rows: list[SweepRow] = []
    for config, outcome in zip(configs, outcomes):
        if isinstance(outcome, BaseException):
            logger.error_with(
                "sweep row failed", A=config.params.A, M=config.initial.mass,
                directory=config.output.directory, error=str(outcome),
            )
            rows.append(SweepRow(A=config.params.A, M=config.initial.mass, status="failed", error=str(outcome)))
        else:
            rows.append(outcome)

    write_sweep_csv(rows, out / SWEEP_CSV)
    logger.info_with("sweep finished", rows=len(rows), failed=sum(r.status == "failed" for r in rows))
    return rows


def write_sweep_csv(rows: list[SweepRow], path: Path) -> Path:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(SWEEP_COLUMNS)
        for row in rows:
            writer.writerow(row.as_csv())
    return path
