"""
Mode projections, weighted space-time norms, energy E(t), mass and L^inf
tracking, decay-rate fitting and blow-up detection.

Norm conventions: for a mode profile g, ||g||^2 = |T|^2 * int |g|^2 dy, so
summing over modes reproduces the physical L^2 norm (Parseval). The X_a and
Y_a norms sum over k1 != 0 only and carry the weight exp(a A^(-1/3) t).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.integrate import trapezoid

from ..logging_config import get_logger
from .grid import (
    TORUS_AREA,
    Grid,
    ModeIndex,
    SpecField,
    ddy,
    integrate_y,
    mode_energy,
    transform_to_physical,
    transform_to_spectral,
)
from .models import DerivedFields, Params, State

logger = get_logger("cpks.diagnostics")

PROJECTION_TOL = 1e-12
LP_EXPONENTS = (2, 4, 8)


class ProjectionError(ValueError):
    """Projection applied to data outside its domain."""


class DecayFitError(ValueError):
    """Series cannot be fitted by an exponential on the requested window."""


# -- projections -------------------------------------------------------------

def project_x_zero(f: SpecField) -> SpecField:
    """P0 f: the x-average, i.e. the k1 = 0 modes."""
    data = np.zeros_like(f.data)
    data[0] = f.data[0]
    return SpecField(data)


def project_x_nonzero(f: SpecField) -> SpecField:
    data = f.data.copy()
    data[0] = 0.0
    return SpecField(data)


def _require_x_zero(f0: SpecField) -> None:
    total = float(np.sum(np.abs(f0.data) ** 2))
    off = float(np.sum(np.abs(f0.data[1:]) ** 2))
    if off > PROJECTION_TOL * max(total, np.finfo(float).tiny):
        raise ProjectionError(f"input carries k1 != 0 energy ({off:.3e} of {total:.3e})")


def project_00(f0: SpecField) -> np.ndarray:
    """f_(0,0): the x- and z-average profile of an x-averaged field."""
    _require_x_zero(f0)
    return f0.data[0, 0].copy()


def project_0neq(f0: SpecField) -> SpecField:
    """f_(0,!=) = f0 - f_(0,0)."""
    _require_x_zero(f0)
    data = np.zeros_like(f0.data)
    data[0] = f0.data[0]
    data[0, 0] = 0.0
    return SpecField(data)


def x_average_of_product(f: SpecField, g: SpecField, grid: Grid) -> SpecField:
    """(f g)_0 computed through a physical-space product."""
    prod = transform_to_physical(f, grid) * transform_to_physical(g, grid)
    return project_x_zero(transform_to_spectral(prod, grid))


def split_product_zero_mode(f: SpecField, g: SpecField, grid: Grid) -> tuple[SpecField, SpecField]:
    """(f g)_0 = f0 g0 + (f_!= g_!=)_0; returns the two parts."""
    zero_part = x_average_of_product(project_x_zero(f), project_x_zero(g), grid)
    nonzero_part = x_average_of_product(project_x_nonzero(f), project_x_nonzero(g), grid)
    return zero_part, nonzero_part


# -- physical-space norms ----------------------------------------------------

def lp_norm(values: np.ndarray, grid: Grid, p: float) -> float:
    planes = np.sum(np.abs(values) ** p, axis=(0, 2)) * grid.hx * grid.hz
    return float(integrate_y(planes, grid)) ** (1.0 / p)


def total_mass(n: SpecField, grid: Grid) -> float:
    return float(TORUS_AREA * integrate_y(n.data[0, 0].real, grid))


def wall_flux(n: SpecField, grid: Grid, params: Params) -> float:
    """Outward diffusive mass flux through both walls."""
    slope = ddy(n.data[0, 0].real, grid)
    return float(-(TORUS_AREA / params.A) * (slope[-1] - slope[0]))


# -- weighted norms ----------------------------------------------------------

def _profile_sq(values: np.ndarray, grid: Grid) -> np.ndarray:
    return TORUS_AREA * integrate_y(np.abs(values) ** 2, grid)


def ya_terms(f: np.ndarray, grid: Grid, params: Params) -> tuple[np.ndarray, np.ndarray]:
    """Per-mode (integrand, sup terms) of the Y_a norm for spectral data f."""
    k1 = grid.k1[:, None].astype(float)
    eta2 = grid.eta2
    f2 = _profile_sq(f, grid)
    df2 = _profile_sq(ddy(f, grid), grid)
    integrand = df2 / params.A + ((k1 ** 2 / params.A) ** (1.0 / 3.0) + eta2 / params.A) * f2
    return integrand, f2[None]


def xa_terms(u2: np.ndarray, q: np.ndarray, grid: Grid, params: Params) -> tuple[np.ndarray, np.ndarray]:
    """Per-mode (integrand, sup terms) of the X_a norm; q is the Laplacian of u2."""
    k1 = np.abs(grid.k1[:, None].astype(float))
    eta2 = grid.eta2
    eta = np.sqrt(eta2)
    grad2 = _profile_sq(ddy(u2, grid), grid) + eta2 * _profile_sq(u2, grid)
    q2 = _profile_sq(q, grid)
    dq2 = _profile_sq(ddy(q, grid), grid)
    integrand = eta * k1 * grad2 + eta2 * q2 / params.A + dq2 * params.A ** -1.5
    sups = np.stack([eta2 * grad2, q2 * params.A ** -0.5])
    return integrand, sups


class WeightedNorm:
    """Running X_a / Y_a accumulator.

    L2-in-time parts advance by one trapezoid panel per sample; Linf-in-time
    parts are running maxima. Only k1 != 0 modes enter the total.
    """

    def __init__(self, grid: Grid, n_sup: int, keep_history: bool = False):
        shape = (grid.nx, grid.nz)
        self.integral = np.zeros(shape)
        self.sups = np.zeros((n_sup,) + shape)
        self._nonzero = np.ones(shape, dtype=bool)
        self._nonzero[0] = False
        self._prev: tuple[float, np.ndarray] | None = None
        self.history: list[tuple[float, np.ndarray, np.ndarray]] | None = [] if keep_history else None

    def add(self, t: float, weight: float, integrand: np.ndarray, sup_terms: np.ndarray) -> None:
        g = weight * integrand
        s = weight * sup_terms
        if self._prev is not None:
            t_prev, g_prev = self._prev
            self.integral = self.integral + 0.5 * (t - t_prev) * (g_prev + g)
        self._prev = (t, g)
        self.sups = np.maximum(self.sups, s)
        if self.history is not None:
            self.history.append((t, g, s))

    def squared(self) -> float:
        per_mode = self.integral + self.sups.sum(axis=0)
        return float(np.sum(per_mode[self._nonzero]))

    def value(self) -> float:
        return float(np.sqrt(self.squared()))

    def value_from_history(self) -> float:
        if not self.history:
            return 0.0
        times = np.array([h[0] for h in self.history])
        g = np.stack([h[1] for h in self.history])
        s = np.stack([h[2] for h in self.history])
        integral = trapezoid(g, x=times, axis=0) if len(times) > 1 else np.zeros_like(g[0])
        per_mode = integral + s.max(axis=0).sum(axis=0)
        return float(np.sqrt(np.sum(per_mode[self._nonzero])))


# -- ledger ------------------------------------------------------------------

BASE_SERIES = (
    "mass",
    "wall_flux",
    "linf_n",
    "e",
    "xa_u2",
    "ya_n",
    "ya_dxomega2",
    "n_nonzero",
    "u1_zero",
    "u1_mean",
    "l2_n",
    "l4_n",
    "l8_n",
    "u2_wall",
    "du2_wall",
)

TRACKED_FIELDS = ("n", "omega2", "u2")


def _mode_key(name: str, mode: ModeIndex) -> str:
    return f"energy_{name}_{mode.k1}_{mode.k3}"


@dataclass
class NormLedger:
    grid: Grid
    params: Params
    track_modes: Sequence[ModeIndex] = ()
    keep_history: bool = False
    t: list[float] = field(default_factory=list)
    series: dict[str, list[float]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.track_modes = tuple(self.track_modes)
        for mode in self.track_modes:
            self.grid.index(mode)
        names = list(BASE_SERIES)
        for mode in self.track_modes:
            names.extend(_mode_key(f, mode) for f in TRACKED_FIELDS)
        self.series = {name: [] for name in names}
        self.ya_n = WeightedNorm(self.grid, 1, self.keep_history)
        self.ya_dxomega2 = WeightedNorm(self.grid, 1, self.keep_history)
        self.xa_u2 = WeightedNorm(self.grid, 2, self.keep_history)

    @property
    def columns(self) -> list[str]:
        return ["t", *self.series.keys()]

    def __len__(self) -> int:
        return len(self.t)

    def last(self, name: str) -> float:
        return self.series[name][-1]

    def rows(self) -> Iterable[list[float]]:
        for i, t in enumerate(self.t):
            yield [t, *(values[i] for values in self.series.values())]

    def energy(self) -> float:
        return self.ya_dxomega2.value() + self.ya_n.value() + self.xa_u2.value()

    def energy_from_history(self) -> float:
        """E recomputed from the stored samples instead of the running accumulators."""
        if not self.keep_history:
            raise ValueError("ledger was created without keep_history")
        return (
            self.ya_dxomega2.value_from_history()
            + self.ya_n.value_from_history()
            + self.xa_u2.value_from_history()
        )


def update_ledger(
    ledger: NormLedger,
    state: State,
    derived: DerivedFields,
    grid: Grid,
    params: Params,
) -> NormLedger:
    t = float(state.t)
    if ledger.t and t < ledger.t[-1]:
        raise ValueError(f"ledger times must be monotone: {t} after {ledger.t[-1]}")

    weight = float(np.exp(2.0 * params.weight_rate * t))
    integrand, sups = ya_terms(state.n.data, grid, params)
    ledger.ya_n.add(t, weight, integrand, sups)
    dx_omega = 1j * grid.k1[:, None, None] * state.omega2.data
    integrand, sups = ya_terms(dx_omega, grid, params)
    ledger.ya_dxomega2.add(t, weight, integrand, sups)
    integrand, sups = xa_terms(derived.u2.data, state.delta_u2.data, grid, params)
    ledger.xa_u2.add(t, weight, integrand, sups)

    n_phys = transform_to_physical(state.n, grid)
    n_energy = mode_energy(state.n, grid)
    u1_energy = mode_energy(derived.u1, grid)
    u2 = derived.u2.data
    slopes = np.stack([
        (-3.0 * u2[..., 0] + 4.0 * u2[..., 1] - u2[..., 2]) / (2.0 * grid.h),
        (3.0 * u2[..., -1] - 4.0 * u2[..., -2] + u2[..., -3]) / (2.0 * grid.h),
    ])

    values = {
        "mass": total_mass(state.n, grid),
        "wall_flux": wall_flux(state.n, grid, params),
        "linf_n": float(np.max(np.abs(n_phys))),
        "e": ledger.energy(),
        "xa_u2": ledger.xa_u2.value(),
        "ya_n": ledger.ya_n.value(),
        "ya_dxomega2": ledger.ya_dxomega2.value(),
        "n_nonzero": float(np.sqrt(np.sum(n_energy[1:]))),
        "u1_zero": float(np.sqrt(np.sum(u1_energy[0]))),
        "u1_mean": float(np.sqrt(u1_energy[0, 0])),
        "u2_wall": float(np.max(np.abs(u2[..., [0, -1]]))),
        "du2_wall": float(np.max(np.abs(slopes))),
    }
    for p in LP_EXPONENTS:
        values[f"l{p}_n"] = lp_norm(n_phys, grid, p)

    fields = {"n": state.n, "omega2": state.omega2, "u2": derived.u2}
    for mode in ledger.track_modes:
        idx = grid.index(mode)
        for name in TRACKED_FIELDS:
            profile = fields[name].data[idx]
            values[_mode_key(name, mode)] = float(np.sqrt(_profile_sq(profile, grid)))

    ledger.t.append(t)
    for name, series in ledger.series.items():
        series.append(values[name])
    return ledger


# -- decay fitting -----------------------------------------------------------

def default_fit_window(times: np.ndarray, values: np.ndarray) -> tuple[float, float]:
    """From the first sample after the peak that is 10% below it, to the end."""
    peak = int(np.argmax(values))
    below = np.nonzero(values[peak:] <= 0.9 * values[peak])[0]
    start = peak + int(below[0]) if below.size else peak
    return float(times[start]), float(times[-1])


def fit_decay_rate(
    times: Sequence[float],
    values: Sequence[float],
    window: tuple[float, float] | None = None,
) -> float:
    """Least-squares decay rate: minus the slope of log(value) against t."""
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    if t.shape != v.shape or t.ndim != 1:
        raise DecayFitError("times and values must be 1D arrays of equal length")
    if window is None:
        if np.any(v <= 0):
            raise DecayFitError("series has nonpositive values")
        window = default_fit_window(t, v)
    lo, hi = window
    sel = (t >= lo) & (t <= hi)
    if np.count_nonzero(sel) < 2:
        raise DecayFitError(f"fewer than two samples in window [{lo}, {hi}]")
    if np.any(v[sel] <= 0) or not np.all(np.isfinite(v[sel])):
        raise DecayFitError("series has nonpositive or nonfinite values in the fit window")
    slope, _ = np.polyfit(t[sel], np.log(v[sel]), 1)
    return float(-slope)


# -- blow-up detection -------------------------------------------------------

@dataclass(frozen=True)
class BlowupThresholds:
    threshold_abs: float = 1e6
    growth_factor: float = 100.0
    tail_frac: float = 0.2


@dataclass(frozen=True)
class HealthReport:
    healthy: bool
    reason: str
    linf: float
    tail_fraction: float

    @property
    def status(self) -> str:
        return "healthy" if self.healthy else "blowup"


def spectral_tail_fraction(n: SpecField, grid: Grid, dealias_on: bool = True) -> float:
    """Share of n's energy held by the top third of the retained wavenumbers."""
    energy = mode_energy(n, grid)
    mask = grid.retained_mask(dealias_on)
    total = float(np.sum(energy[mask]))
    if total == 0.0 or not np.isfinite(total):
        return 0.0 if total == 0.0 else 1.0
    k1 = np.abs(grid.k1)[:, None]
    k3 = np.abs(grid.k3)[None, :]
    k1_max = max(int(np.max(np.where(mask, k1, 0))), 1)
    k3_max = max(int(np.max(np.where(mask, k3, 0))), 1)
    tail = mask & ((k1 > 2.0 * k1_max / 3.0) | (k3 > 2.0 * k3_max / 3.0))
    return float(np.sum(energy[tail]) / total)


def detect_blowup(
    state: State,
    derived: DerivedFields,
    thresholds: BlowupThresholds,
    grid: Grid,
    initial_linf: float | None = None,
    dealias_on: bool = True,
) -> HealthReport:
    if not state.is_finite() or not all(
        f.is_finite() for f in (derived.c, derived.u1, derived.u2, derived.u3)
    ):
        return HealthReport(False, "nonfinite", float("nan"), float("nan"))
    linf = float(np.max(np.abs(transform_to_physical(state.n, grid))))
    tail = spectral_tail_fraction(state.n, grid, dealias_on)
    if linf > thresholds.threshold_abs:
        return HealthReport(False, "linf_abs", linf, tail)
    if initial_linf and linf > thresholds.growth_factor * initial_linf:
        return HealthReport(False, "linf_growth", linf, tail)
    if tail > thresholds.tail_frac:
        return HealthReport(False, "spectral_tail", linf, tail)
    return HealthReport(True, "", linf, tail)
