"""
Single experiment: build the initial state, run the stepper with the
diagnostics hooks attached, and write timeseries.csv and summary.json.
"""
from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from ..channel.diagnostics import (
    DecayFitError,
    NormLedger,
    detect_blowup,
    fit_decay_rate,
    update_ledger,
)
from ..channel.dynamics import default_time_step, derive, run
from ..channel.grid import Grid
from ..channel.models import BlowupDetected, Params, RunResult, State
from ..logging_config import get_logger
from .checkpoint import save_checkpoint
from .config import RunConfig, dump_config
from .presets import build_initial, smallness_product

logger = get_logger("cpks.harness")

TIMESERIES = "timeseries.csv"
SUMMARY = "summary.json"
MASS_MONOTONE_TOL = 1e-12


class ExperimentError(RuntimeError):
    """Output could not be written."""


@dataclass
class ExperimentReport:
    config: RunConfig
    params: Params
    result: RunResult
    ledger: NormLedger
    summary: dict[str, Any]
    directory: Path
    checkpoints: list[Path] = field(default_factory=list)

    @property
    def timeseries_path(self) -> Path:
        return self.directory / TIMESERIES

    @property
    def summary_path(self) -> Path:
        return self.directory / SUMMARY


def resolve_params(config: RunConfig, grid: Grid) -> tuple[Params, State]:
    """Params with dt filled in, and the initial state it was derived from."""
    provisional = config.params.build(dt=config.params.dt or 1.0)
    initial = build_initial(config.initial, grid, provisional, seed=config.seed)
    if config.params.dt is not None:
        return provisional, initial
    dt = default_time_step(initial, grid, provisional)
    logger.info_with("time step chosen from initial state", dt=dt)
    return config.params.build(dt=dt), initial


def _finite(value: float | None) -> float | None:
    if value is None or not math.isfinite(value):
        return None
    return float(value)


def _first_at_or_after(times: list[float], values: list[float], t: float) -> float | None:
    for ti, vi in zip(times, values):
        if ti >= t:
            return vi
    return None


def _decay_rate(times: list[float], values: list[float]) -> float | None:
    try:
        return fit_decay_rate(times, values)
    except DecayFitError:
        return None


def build_summary(
    result: RunResult,
    ledger: NormLedger,
    params: Params,
    smallness: float,
    wall_time: float,
) -> dict[str, Any]:
    t = ledger.t
    s = ledger.series
    mass = s["mass"]
    m0 = mass[0]
    early = [abs(m - m0) / m0 for ti, m in zip(t, mass) if ti <= 1.0] if m0 else []
    monotone = all(b <= a + MASS_MONOTONE_TOL * abs(m0) for a, b in zip(mass, mass[1:]))
    linf = s["linf_n"]
    after_start = [i for i, ti in enumerate(t) if ti > t[0]] or [0]

    return {
        "status": result.status.value,
        "message": result.message,
        "event_t": result.event_t,
        "t_stop": result.state.t,
        "steps": result.steps,
        "dt": result.dt,
        "rejections": result.rejections,
        "A": params.A,
        "a": params.a,
        "mass": {
            "M0": m0,
            "final": mass[-1],
            "drift_t_le_1": max(early) if early else None,
            "monotone": monotone,
        },
        "linf": {
            "initial": linf[0],
            "sup": _finite(max(linf)),
            "ratio": _finite(max(linf) / linf[0]) if linf[0] else None,
        },
        "e": {
            "final": _finite(s["e"][-1]),
            "at_t1": _finite(_first_at_or_after(t, s["e"], 1.0)),
            "sup": _finite(max(s["e"])),
        },
        "decay_rates": {
            "n_nonzero": _decay_rate(t, s["n_nonzero"]),
            "u1_zero": _decay_rate(t, s["u1_zero"]),
        },
        "smallness_product": smallness,
        "clip_events": result.clip_events,
        "wall_residuals": {
            "u2_wall_max": max(s["u2_wall"][i] for i in after_start),
            "du2_wall_max": max(s["du2_wall"][i] for i in after_start),
        },
        "samples": len(t),
        "wall_time_s": wall_time,
    }


def write_timeseries(ledger: NormLedger, path: Path) -> Path:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(ledger.columns)
        for row in ledger.rows():
            writer.writerow([format(v, ".17g") for v in row])
    return path


def run_experiment(config: RunConfig, directory: str | Path | None = None) -> ExperimentReport:
    out = Path(directory if directory is not None else config.output.directory)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ExperimentError(f"cannot create output directory {out}: {exc}") from exc

    grid = config.grid.build()
    params, initial = resolve_params(config, grid)
    smallness = smallness_product(initial, grid, params.A)
    ledger = NormLedger(grid, params, track_modes=config.output.track_mode_indices())
    thresholds = config.blowup.build()
    checkpoints: list[Path] = []
    initial_linf: list[float] = []

    def diagnostics_hook(state: State) -> None:
        derived = derive(state, grid, params)
        update_ledger(ledger, state, derived, grid, params)
        if not initial_linf:
            initial_linf.append(ledger.last("linf_n"))
        health = detect_blowup(state, derived, thresholds, grid, initial_linf[0], params.dealias_on)
        if not health.healthy:
            value = health.tail_fraction if health.reason == "spectral_tail" else health.linf
            raise BlowupDetected(state.t, health.reason, value)

    def checkpoint_hook(state: State) -> None:
        every = config.output.checkpoint_every
        if every and len(ledger) % every == 0:
            path = out / f"state_{len(checkpoints):04d}.cpks"
            checkpoints.append(save_checkpoint(state, path, params))

    started = time.perf_counter()
    result = run(
        initial,
        grid,
        params,
        hooks=(diagnostics_hook, checkpoint_hook),
        cadence=config.output.cadence,
        max_rejections=config.params.max_rejections,
    )
    wall_time = time.perf_counter() - started
    if config.output.checkpoint_every and result.state.is_finite():
        checkpoints.append(save_checkpoint(result.state, out / "final.cpks", params))

    summary = build_summary(result, ledger, params, smallness, wall_time)
    try:
        write_timeseries(ledger, out / TIMESERIES)
        with open(out / SUMMARY, "w") as f:
            json.dump(summary, f, indent=2)
        dump_config(config, out / "config.yaml")
    except OSError as exc:
        raise ExperimentError(f"cannot write outputs to {out}: {exc}") from exc

    logger.info_with(
        "experiment finished", directory=str(out), status=result.status.value,
        samples=len(ledger), e_final=summary["e"]["final"],
    )
    return ExperimentReport(config, params, result, ledger, summary, out, checkpoints)
