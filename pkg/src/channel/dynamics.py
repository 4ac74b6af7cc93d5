"""
Right-hand sides and IMEX time stepping for the rescaled system

    n_t + y n_x - (1/A) Lap n       = -(1/A) div(u n) - (1/A) div(n grad c)
    w_t + y w_x - (1/A) Lap w       = -u2_z + (1/A) n_z              (w = omega2)
    q_t + y q_x - (1/A) Lap q       = -(1/A) n_xy                    (q = Lap u2)

with n = c = w = 0 and u2 = u2_y = 0 at y = +-1.

Diffusion and the Couette tilt i k1 y are Crank-Nicolson; coupling and
nonlinear terms are Adams-Bashforth 2 (Euler on the first step). The
clamped conditions on u2 are closed with an influence matrix: the wall
values of q act as multipliers at the new time level.
"""
from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np

from ..logging_config import get_logger
from . import meanflow
from .elliptic import TridiagonalFactorization, chemo_field, reconstruct_field, u2_field
from .grid import (
    Grid,
    ModeIndex,
    SpecField,
    d2y,
    dealias,
    spectral_dx,
    spectral_dy,
    spectral_dz,
    transform_to_physical,
    transform_to_spectral,
)
from .models import (
    BlowupDetected,
    DerivedFields,
    Params,
    RunResult,
    RunStatus,
    State,
    StepRejected,
)

logger = get_logger("cpks.dynamics")

CLIP_REL_TOL = 1e-8
MAX_DEFAULT_DT = 0.01

Hook = Callable[[State], None]


def derive(state: State, grid: Grid, params: Params) -> DerivedFields:
    c = chemo_field(state.n, grid)
    u2 = u2_field(state.delta_u2, grid)
    u1, u3 = reconstruct_field(u2, state.omega2, grid)
    origin = ModeIndex(0, 0)
    u1 = u1.with_profile(origin, state.mean_u1)
    u3 = u3.with_profile(origin, state.mean_u3)
    return DerivedFields(c=c, u1=u1, u2=u2, u3=u3)


def couette_tilt(field: SpecField, grid: Grid) -> SpecField:
    """-i k1 y f for every mode."""
    factor = -1j * grid.k1[:, None, None] * grid.y[None, None, :]
    return SpecField(field.data * factor)


@dataclass(frozen=True, eq=False)
class PhysicalFields:
    n: np.ndarray
    cx: np.ndarray
    cy: np.ndarray
    cz: np.ndarray
    u1: np.ndarray
    u2: np.ndarray
    u3: np.ndarray


def physical_fields(state: State, derived: DerivedFields, grid: Grid, params: Params) -> PhysicalFields:
    def phys(f: SpecField) -> np.ndarray:
        return transform_to_physical(dealias(f) if params.dealias_on else f, grid)

    c = derived.c
    return PhysicalFields(
        n=phys(state.n),
        cx=phys(spectral_dx(c, grid)),
        cy=phys(spectral_dy(c, grid)),
        cz=phys(spectral_dz(c, grid)),
        u1=phys(derived.u1),
        u2=phys(derived.u2),
        u3=phys(derived.u3),
    )


@dataclass(frozen=True)
class FluxResult:
    tendency: SpecField
    clipped: bool
    n_min: float
    n_max: float


def transport_flux(fields: PhysicalFields, grid: Grid, params: Params) -> FluxResult:
    """-(1/A) [div(u n) + div(n grad c)], products in physical space."""
    n = fields.n
    n_min = float(n.min())
    n_max = float(n.max())
    clipped = n_min < -CLIP_REL_TOL * max(n_max, 0.0)
    n_chem = np.maximum(n, 0.0) if clipped else n

    f1 = transform_to_spectral(fields.u1 * n + n_chem * fields.cx, grid)
    f2 = transform_to_spectral(fields.u2 * n + n_chem * fields.cy, grid)
    f3 = transform_to_spectral(fields.u3 * n + n_chem * fields.cz, grid)
    div = spectral_dx(f1, grid) + spectral_dy(f2, grid) + spectral_dz(f3, grid)
    if params.dealias_on:
        div = dealias(div)
    return FluxResult(div * (-1.0 / params.A), clipped, n_min, n_max)


def rhs_n(
    state: State,
    derived: DerivedFields,
    grid: Grid,
    params: Params,
    couette: bool = True,
) -> SpecField:
    """Explicit tendency of n; diffusion is excluded."""
    tendency = SpecField.zeros(grid)
    if not params.linear_only:
        tendency = transport_flux(physical_fields(state, derived, grid, params), grid, params).tendency
    if couette:
        tendency = tendency + couette_tilt(state.n, grid)
    return tendency


def rhs_omega2(
    state: State,
    derived: DerivedFields,
    grid: Grid,
    params: Params,
    couette: bool = True,
) -> SpecField:
    tendency = -spectral_dz(derived.u2, grid)
    if params.fluid_forcing:
        tendency = tendency + spectral_dz(state.n, grid) * (1.0 / params.A)
    if couette:
        tendency = tendency + couette_tilt(state.omega2, grid)
    return tendency


def rhs_delta_u2(state: State, grid: Grid, params: Params, couette: bool = True) -> SpecField:
    tendency = SpecField.zeros(grid)
    if params.fluid_forcing:
        tendency = spectral_dx(spectral_dy(state.n, grid), grid) * (-1.0 / params.A)
    if couette:
        tendency = tendency + couette_tilt(state.delta_u2, grid)
    return tendency.with_profile(ModeIndex(0, 0), np.zeros(grid.ny))


def stability_bound(fields: PhysicalFields, grid: Grid, params: Params) -> float:
    """Largest dt the explicit transport and chemotaxis terms tolerate."""
    h = min(grid.h, grid.hx, grid.hz)
    grad_c = float(np.max(np.sqrt(fields.cx ** 2 + fields.cy ** 2 + fields.cz ** 2)))
    speed = float(np.max(np.sqrt(fields.u1 ** 2 + fields.u2 ** 2 + fields.u3 ** 2)))
    n_max = float(np.max(np.abs(fields.n)))
    bounds = [np.inf]
    if grad_c > 0:
        bounds.append(params.A * h / grad_c)
    if n_max > 0:
        bounds.append(params.A / n_max)
    if speed > 0:
        bounds.append(params.A * h / speed)
    return float(min(bounds))


def default_time_step(state: State, grid: Grid, params: Params) -> float:
    derived = derive(state, grid, params)
    speed = 0.0
    for comp in (derived.u1, derived.u2, derived.u3):
        speed = max(speed, float(np.max(np.abs(transform_to_physical(comp, grid)))))
    candidates = [0.5 * params.A * grid.h ** 2, MAX_DEFAULT_DT]
    if speed > 0:
        candidates.append(0.1 * grid.h / speed)
    return float(min(candidates))


def _wall_slopes(u: np.ndarray, h: float) -> np.ndarray:
    """(..., 2) array of one-sided d/dy at y = -1 and y = +1."""
    lo = (-3.0 * u[..., 0] + 4.0 * u[..., 1] - u[..., 2]) / (2.0 * h)
    hi = (3.0 * u[..., -1] - 4.0 * u[..., -2] + u[..., -3]) / (2.0 * h)
    return np.stack([lo, hi], axis=-1)


class ImexStepper:
    """Crank-Nicolson / Adams-Bashforth stepper holding factorizations and history."""

    def __init__(self, grid: Grid, params: Params):
        self.grid = grid
        self.params = params
        self.dt = params.dt
        self.mask = grid.retained_mask(params.dealias_on)
        self.steps = 0
        self.clip_events = 0
        self.t0: float | None = None
        self._history: tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray] | None = None
        self._build_operators()

    def _build_operators(self) -> None:
        grid, p = self.grid, self.params
        m, ny, h = grid.nx * grid.nz, grid.ny, grid.h
        nu = 1.0 / p.A
        r = 0.5 * self.dt
        k1 = np.repeat(grid.k1.astype(float), grid.nz)
        eta2 = grid.eta2.ravel()

        off = np.full((m, ny), -r * nu / (h * h), dtype=np.complex128)
        diag = 1.0 + r * (2.0 * nu / (h * h) + nu * eta2[:, None] + 1j * k1[:, None] * grid.y[None, :])
        diag = diag.astype(np.complex128)
        diag[:, 0] = diag[:, -1] = 1.0
        lower = off.copy()
        upper = off.copy()
        upper[:, 0] = 0.0
        lower[:, -1] = 0.0
        self._dirichlet = TridiagonalFactorization(lower, diag, upper)

        # wall values of q enter the new level with full weight
        lower_q = lower.copy()
        upper_q = upper.copy()
        lower_q[:, 1] *= 2.0
        upper_q[:, -2] *= 2.0
        self._clamped = TridiagonalFactorization(lower_q, diag, upper_q)

        unit = np.zeros((m, ny), dtype=np.complex128)
        unit[:, 0] = 1.0
        self._q_lo = self._clamped.solve(unit)
        unit[:, 0] = 0.0
        unit[:, -1] = 1.0
        self._q_hi = self._clamped.solve(unit)
        self._u_lo = self._invert_laplacian(self._q_lo)
        self._u_hi = self._invert_laplacian(self._q_hi)

        slopes_lo = _wall_slopes(self._u_lo, h)
        slopes_hi = _wall_slopes(self._u_hi, h)
        a, b = slopes_lo[:, 0], slopes_hi[:, 0]
        c, d = slopes_lo[:, 1], slopes_hi[:, 1]
        det = a * d - b * c
        active = self.mask.ravel() & (eta2 > 0)
        if np.any(np.abs(det[active]) == 0):
            raise RuntimeError("influence matrix is singular")
        safe = np.where(active, det, 1.0)
        inv = np.empty((m, 2, 2), dtype=np.complex128)
        inv[:, 0, 0] = d / safe
        inv[:, 0, 1] = -b / safe
        inv[:, 1, 0] = -c / safe
        inv[:, 1, 1] = a / safe
        inv[~active] = 0.0
        self._influence_inv = inv
        self._nu_r = nu * r
        self._k1y = k1[:, None] * grid.y[None, :]
        self._eta2 = eta2

    def _invert_laplacian(self, q: np.ndarray) -> np.ndarray:
        grid = self.grid
        u = u2_field(SpecField(q.reshape(grid.spectral_shape)), grid)
        return u.data.reshape(grid.nx * grid.nz, grid.ny)

    def _explicit_half(self, f: np.ndarray) -> np.ndarray:
        """(I + dt/2 L) f on interior rows; wall rows zero."""
        h2 = self.grid.h ** 2
        out = np.zeros_like(f)
        inner = f[:, 1:-1]
        lap = (f[:, 2:] - 2.0 * inner + f[:, :-2]) / h2 - self._eta2[:, None] * inner
        out[:, 1:-1] = inner + self._nu_r * lap - 0.5 * self.dt * 1j * self._k1y[:, 1:-1] * inner
        return out

    def _flat(self, data: np.ndarray) -> np.ndarray:
        return data.reshape(self.grid.nx * self.grid.nz, self.grid.ny)

    def _solve_dirichlet(self, f: np.ndarray, forcing: np.ndarray) -> np.ndarray:
        rhs = self._explicit_half(self._flat(f)) + self.dt * self._flat(forcing)
        rhs[:, 0] = rhs[:, -1] = 0.0
        return self._dirichlet.solve(rhs).reshape(self.grid.spectral_shape)

    def _solve_clamped(self, q: np.ndarray, forcing: np.ndarray) -> np.ndarray:
        grid = self.grid
        q_old = self._flat(q).copy()
        q_old[:, 0] = q_old[:, -1] = 0.0
        rhs = self._explicit_half(q_old) + self.dt * self._flat(forcing)
        rhs[:, 0] = rhs[:, -1] = 0.0
        q_p = self._clamped.solve(rhs)
        u_p = self._invert_laplacian(q_p)
        g = _wall_slopes(u_p, grid.h)
        coef = -np.einsum("mij,mj->mi", self._influence_inv, g)
        q_new = q_p + coef[:, 0:1] * self._q_lo + coef[:, 1:2] * self._q_hi
        u_new = u_p + coef[:, 0:1] * self._u_lo + coef[:, 1:2] * self._u_hi
        # store the wall Laplacian of the clamped u2 in the wall rows
        lap_walls = d2y(u_new, grid)
        q_new[:, 0] = lap_walls[:, 0]
        q_new[:, -1] = lap_walls[:, -1]
        q_new[0] = 0.0
        return q_new.reshape(grid.spectral_shape)

    def _apply_mask(self, data: np.ndarray) -> SpecField:
        return SpecField(data * self.mask[:, :, None]).hermitian_part()

    def step(self, state: State) -> State:
        grid, p = self.grid, self.params
        if self.t0 is None:
            self.t0 = state.t
        bad = state.first_nonfinite()
        if bad is not None:
            raise BlowupDetected(state.t, f"nonfinite {bad}", float("nan"))

        derived = derive(state, grid, p)
        if p.linear_only:
            n_forcing = np.zeros(grid.spectral_shape, dtype=np.complex128)
        else:
            fields = physical_fields(state, derived, grid, p)
            bound = stability_bound(fields, grid, p)
            if self.dt > bound:
                raise StepRejected(state.t, self.dt, 0.5 * bound)
            flux = transport_flux(fields, grid, p)
            if flux.clipped:
                self.clip_events += 1
                # later clips are counted and reported with the run result
                log = logger.warning_with if self.clip_events == 1 else logger.debug_with
                log(
                    "negative density clipped in chemotactic flux",
                    t=state.t, n_min=flux.n_min, n_max=flux.n_max,
                )
            n_forcing = flux.tendency.data

        w_forcing = rhs_omega2(state, derived, grid, p, couette=False).data
        q_forcing = rhs_delta_u2(state, grid, p, couette=False).data
        n00 = state.n.data[0, 0].real.copy()
        current = (n_forcing, w_forcing, q_forcing, n00)
        if self._history is None:
            combined = current
        else:
            combined = tuple(1.5 * c - 0.5 * h for c, h in zip(current, self._history))
        self._history = current

        n_new = self._apply_mask(self._solve_dirichlet(state.n.data, combined[0]))
        w_new = self._apply_mask(self._solve_dirichlet(state.omega2.data, combined[1]))
        q_new = self._apply_mask(self._solve_clamped(state.delta_u2.data, combined[2]))

        n00_forcing = combined[3] if p.fluid_forcing else np.zeros(grid.ny)
        mean = meanflow.step(
            meanflow.MeanProfiles(state.mean_u1, state.mean_u3),
            n00_forcing,
            np.zeros(grid.ny),
            grid,
            p,
            self.dt,
        )

        t_new = self.t0 + (self.steps + 1) * self.dt
        new_state = State(
            t=t_new,
            n=n_new,
            omega2=w_new,
            delta_u2=q_new,
            mean_u1=mean.u1_00,
            mean_u3=mean.u3_00,
        )
        bad = new_state.first_nonfinite()
        if bad is not None:
            raise BlowupDetected(t_new, f"nonfinite {bad}", float("nan"))
        self.steps += 1
        return new_state


def step_imex(state: State, grid: Grid, params: Params) -> State:
    """One self-starting step (Euler for the explicit part)."""
    return ImexStepper(grid, params).step(state)


def wall_residuals(derived: DerivedFields, grid: Grid) -> tuple[float, float]:
    """Max |u2| and max |d u2/dy| over both walls and all modes."""
    u2 = derived.u2.data
    value = float(np.max(np.abs(u2[..., [0, -1]])))
    slope = float(np.max(np.abs(_wall_slopes(u2, grid.h))))
    return value, slope


def run(
    initial: State,
    grid: Grid,
    params: Params,
    hooks: Iterable[Hook] = (),
    cadence: int = 1,
    max_rejections: int = 0,
) -> RunResult:
    """Step from `initial` to params.t_end, calling hooks every `cadence` steps.

    Hooks may raise BlowupDetected to stop the run. A rejected step is
    retried with the suggested dt up to `max_rejections` times.
    """
    if cadence < 1:
        raise ValueError(f"cadence must be >= 1, got {cadence}")
    hooks = list(hooks)
    started = time.perf_counter()
    stepper = ImexStepper(grid, params)
    state = initial
    steps = 0
    last_sampled = -1
    rejections = 0
    clip_events = 0

    def sample(s: State) -> None:
        for hook in hooks:
            hook(s)

    logger.info_with(
        "run started", A=params.A, dt=params.dt, t_end=params.t_end,
        grid=f"{grid.nx}x{grid.ny}x{grid.nz}", linear_only=params.linear_only,
    )

    def finish(status: RunStatus, message: str = "", event_t: float | None = None) -> RunResult:
        result = RunResult(
            status=status,
            state=state,
            steps=steps,
            dt=stepper.dt,
            message=message,
            event_t=event_t,
            clip_events=clip_events + stepper.clip_events,
            rejections=rejections,
        )
        log = logger.info_with if status == RunStatus.COMPLETED else logger.warning_with
        log(
            "run finished", status=status.value, steps=steps, t=state.t,
            clip_events=result.clip_events, rejections=rejections,
            wall_s=time.perf_counter() - started,
        )
        return result

    try:
        sample(state)
        last_sampled = 0
        while state.t < params.t_end - 1e-9 * stepper.dt:
            try:
                state = stepper.step(state)
            except StepRejected as exc:
                if rejections >= max_rejections:
                    raise
                rejections += 1
                clip_events += stepper.clip_events
                logger.warning_with(
                    "step rejected, retrying", t=exc.t, dt=exc.dt, suggested_dt=exc.suggested_dt,
                )
                stepper = ImexStepper(grid, params.replace(dt=exc.suggested_dt))
                continue
            steps += 1
            if steps % cadence == 0:
                sample(state)
                last_sampled = steps
        if last_sampled != steps:
            sample(state)
    except BlowupDetected as exc:
        logger.warning_with("blow-up detected", t=exc.t, reason=exc.reason, value=exc.value)
        return finish(RunStatus.BLOWUP_DETECTED, str(exc), exc.t)
    except StepRejected as exc:
        logger.warning_with("step rejected", t=exc.t, dt=exc.dt, suggested_dt=exc.suggested_dt)
        return finish(RunStatus.STEP_REJECTED, str(exc), exc.t)
    return finish(RunStatus.COMPLETED)
