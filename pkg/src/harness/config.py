"""
Run configuration: pydantic models loaded from flat dotted-key YAML files.

    grid.nx: 32
    params.A: 1.0e4
    initial.preset: gaussian_bump
    initial.mass: 0.3

Keys are split on dots into a nested mapping and validated against RunConfig.
Unknown keys are errors. See docs/CONFIG.md for the full grammar.
"""
from __future__ import annotations

from pathlib import Path
from typing import Any, Literal

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from ..channel.diagnostics import BlowupThresholds
from ..channel.grid import Grid, ModeIndex, make_grid
from ..channel.models import Params


class ConfigError(ValueError):
    """Invalid or unreadable run configuration."""


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class GridSettings(_Section):
    nx: int = Field(32, ge=8)
    ny: int = Field(65, ge=17)
    nz: int = Field(32, ge=8)

    def build(self) -> Grid:
        return make_grid(self.nx, self.ny, self.nz)


class ParamsSettings(_Section):
    A: float = Field(1.0e4, gt=0)
    a: float = Field(0.1, ge=0)
    dt: float | None = Field(None, gt=0)
    t_end: float = Field(10.0, ge=0)
    dealias_on: bool = True
    linear_only: bool = False
    fluid_forcing: bool = True
    max_rejections: int = Field(4, ge=0)

    def build(self, dt: float | None = None) -> Params:
        step = dt if dt is not None else self.dt
        if step is None:
            raise ConfigError("params.dt is unset; resolve it from the initial state first")
        return Params(
            A=self.A,
            dt=step,
            t_end=self.t_end,
            a=self.a,
            dealias_on=self.dealias_on,
            linear_only=self.linear_only,
            fluid_forcing=self.fluid_forcing,
        )


Preset = Literal["gaussian_bump", "stripe", "single_mode", "restart"]


class InitialSettings(_Section):
    preset: Preset = "gaussian_bump"
    mass: float = Field(0.3, gt=0)
    center: tuple[float, float, float] = (3.141592653589793, 0.0, 3.141592653589793)
    width: float = Field(0.15, gt=0)
    y_stretch: float = Field(1.0, gt=0)
    velocity_amplitude: float = Field(0.0, ge=0)
    vorticity_amplitude: float | None = Field(None, ge=0)
    velocity_modes: list[tuple[int, int]] = Field(default_factory=lambda: [(1, 0), (0, 1)])
    smallness: float | None = Field(None, ge=0)
    stripe_delta: float = Field(0.1, ge=0, lt=1)
    noise: float = Field(0.0, ge=0, lt=1)
    stripe_mode: tuple[int, int] = (1, 1)
    mode: tuple[int, int] = (1, 1)
    n_amplitude: float = Field(1.0, ge=0)
    path: str | None = None

    @model_validator(mode="after")
    def _restart_needs_path(self) -> "InitialSettings":
        if self.preset == "restart" and not self.path:
            raise ValueError("initial.path is required for the restart preset")
        return self

    def velocity_mode_indices(self) -> list[ModeIndex]:
        return [ModeIndex(k1, k3) for k1, k3 in self.velocity_modes]


class OutputSettings(_Section):
    directory: str = "runs/default"
    cadence: int = Field(10, ge=1)
    checkpoint_every: int = Field(0, ge=0)
    track_modes: list[tuple[int, int]] = Field(default_factory=list)

    def track_mode_indices(self) -> list[ModeIndex]:
        return [ModeIndex(k1, k3) for k1, k3 in self.track_modes]


class BlowupSettings(_Section):
    threshold_abs: float = Field(1.0e6, gt=0)
    growth_factor: float = Field(100.0, gt=1)
    tail_frac: float = Field(0.2, gt=0, le=1)

    def build(self) -> BlowupThresholds:
        return BlowupThresholds(self.threshold_abs, self.growth_factor, self.tail_frac)


class RunConfig(_Section):
    grid: GridSettings = Field(default_factory=GridSettings)
    params: ParamsSettings = Field(default_factory=ParamsSettings)
    initial: InitialSettings = Field(default_factory=InitialSettings)
    output: OutputSettings = Field(default_factory=OutputSettings)
    blowup: BlowupSettings = Field(default_factory=BlowupSettings)
    seed: int = Field(0, ge=0)

    def with_overrides(self, **flat: Any) -> "RunConfig":
        """Copy with dotted-key overrides, e.g. ``{"params.A": 1e3}``."""
        merged = to_flat(self)
        merged.update(flat)
        return from_flat(merged)


def _unflatten(flat: dict[str, Any]) -> dict[str, Any]:
    nested: dict[str, Any] = {}
    for key, value in flat.items():
        if not isinstance(key, str) or not key:
            raise ConfigError(f"config keys must be non-empty strings, got {key!r}")
        parts = key.split(".")
        node = nested
        for part in parts[:-1]:
            child = node.setdefault(part, {})
            if not isinstance(child, dict):
                raise ConfigError(f"key {key!r} conflicts with scalar {part!r}")
            node = child
        if parts[-1] in node and isinstance(node[parts[-1]], dict):
            raise ConfigError(f"key {key!r} conflicts with section {parts[-1]!r}")
        node[parts[-1]] = value
    return nested


def _flatten(nested: dict[str, Any], prefix: str = "") -> dict[str, Any]:
    flat: dict[str, Any] = {}
    for key, value in nested.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            flat.update(_flatten(value, name + "."))
        else:
            flat[name] = value
    return flat


def _error_keys(exc: ValidationError) -> str:
    parts = []
    for err in exc.errors():
        key = ".".join(str(p) for p in err["loc"])
        parts.append(f"{key}: {err['msg']}")
    return "; ".join(parts)


def from_flat(flat: dict[str, Any]) -> RunConfig:
    try:
        return RunConfig.model_validate(_unflatten(flat))
    except ValidationError as exc:
        raise ConfigError(f"invalid configuration: {_error_keys(exc)}") from exc


def to_flat(config: RunConfig) -> dict[str, Any]:
    return _flatten(config.model_dump(mode="json"))


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        with open(path, "r") as f:
            data = yaml.safe_load(f)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed YAML in {path}: {exc}") from exc
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping of dotted keys")
    return from_flat(data)


def dump_config(config: RunConfig, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        yaml.safe_dump(to_flat(config), f, default_flow_style=False, sort_keys=False)
    return path
