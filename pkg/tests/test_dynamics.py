import logging
import sys
from pathlib import Path

import numpy as np
import pytest
from scipy.linalg import expm

sys.path.insert(0, str(Path(__file__).parent.parent))

from src.channel.dynamics import (
    ImexStepper,
    couette_tilt,
    default_time_step,
    derive,
    rhs_delta_u2,
    rhs_n,
    rhs_omega2,
    run,
    step_imex,
    wall_residuals,
)
from src.channel.grid import ModeIndex, SpecField, make_grid, mode_energy
from src.channel.models import BlowupDetected, Params, RunStatus, State
from src.harness.config import InitialSettings
from src.harness.presets import single_mode_density, velocity_perturbation


@pytest.fixture
def grid():
    return make_grid(8, 33, 8)


def sine(grid):
    s = np.sin(0.5 * np.pi * (grid.y + 1.0))
    s[0] = s[-1] = 0.0
    return s


def shear_state(grid, params, modes, amplitude=1e-3):
    omega2, delta_u2 = velocity_perturbation(modes, amplitude, 0.0, grid, params)
    return State.zeros(grid).replace(omega2=omega2, delta_u2=delta_u2)


class TestTendencies:
    def test_couette_tilt(self, grid):
        f = SpecField.from_modes(grid, {ModeIndex(2, 1): np.ones(grid.ny)})
        tilted = couette_tilt(f, grid)
        np.testing.assert_allclose(tilted.profile(ModeIndex(2, 1)), -2j * grid.y)
        assert not np.any(couette_tilt(SpecField.from_modes(grid, {ModeIndex(0, 1): np.ones(grid.ny)}), grid).data)

    def test_zero_state_has_zero_tendencies(self, grid):
        params = Params(A=100.0, dt=0.1, t_end=1.0)
        state = State.zeros(grid)
        derived = derive(state, grid, params)
        for tendency in (
            rhs_n(state, derived, grid, params),
            rhs_omega2(state, derived, grid, params),
            rhs_delta_u2(state, grid, params),
        ):
            assert not np.any(tendency.data)

    def test_fluid_forcing_switch(self, grid):
        params = Params(A=100.0, dt=0.1, t_end=1.0, fluid_forcing=False)
        n = single_mode_density(InitialSettings(preset="single_mode", mode=(1, 1)), grid, params)
        state = State.zeros(grid).replace(n=n)
        derived = derive(state, grid, params)
        assert not np.any(rhs_delta_u2(state, grid, params, couette=False).data)
        assert not np.any(rhs_omega2(state, derived, grid, params, couette=False).data)
        forced = params.replace(fluid_forcing=True)
        assert np.any(rhs_delta_u2(state, grid, forced, couette=False).data)

    def test_chemotactic_flux_of_wall_normal_profile(self):
        fine = make_grid(8, 129, 8)
        params = Params(A=2.0, dt=0.01, t_end=1.0)
        origin = ModeIndex(0, 0)
        mu = (4.0 / fine.h ** 2) * np.sin(0.25 * np.pi * fine.h) ** 2
        profile = np.cos(0.5 * np.pi * fine.y)
        profile[0] = profile[-1] = 0.0
        # (d_yy - 1) c = -n has c = cos(pi y / 2) exactly on the grid
        state = State.zeros(fine).replace(n=SpecField.from_modes(fine, {origin: (mu + 1.0) * profile}))
        derived = derive(state, fine, params)
        np.testing.assert_allclose(derived.c.profile(origin).real, profile, atol=1e-10)
        tendency = rhs_n(state, derived, fine, params, couette=False).profile(origin)
        # -(1/A) d_y(n d_y c) = (mu + 1) (pi^2 / 4) cos(pi y) / A
        expected = (mu + 1.0) * 0.25 * np.pi ** 2 * np.cos(np.pi * fine.y) / params.A
        np.testing.assert_allclose(tendency.real, expected, atol=1e-2 * np.max(np.abs(expected)))
        assert np.max(np.abs(tendency.imag)) < 1e-12

    def test_default_time_step_is_capped(self, grid):
        params = Params(A=1e4, dt=1.0, t_end=1.0)
        dt = default_time_step(State.zeros(grid), grid, params)
        assert 0.0 < dt <= 0.01


class TestImexStepper:
    def test_vorticity_decays_by_cn_factor(self, grid):
        params = Params(A=10.0, dt=0.5, t_end=5.0, linear_only=True)
        mode = ModeIndex(0, 1)
        s = sine(grid)
        state = State.zeros(grid).replace(
            omega2=SpecField.from_modes(grid, {mode: s, mode.conjugate(): s}),
        )
        stepper = ImexStepper(grid, params)
        for _ in range(8):
            state = stepper.step(state)
        mu = (4.0 / grid.h ** 2) * np.sin(0.25 * np.pi * grid.h) ** 2
        lam = -(mu + mode.eta2) / params.A
        g = (1.0 + 0.5 * params.dt * lam) / (1.0 - 0.5 * params.dt * lam)
        np.testing.assert_allclose(state.omega2.profile(mode).real, g ** 8 * s, atol=1e-12)
        assert state.t == pytest.approx(4.0)

    def test_local_error_is_third_order(self, grid):
        mode = ModeIndex(1, 0)
        nu = 1.0 / 100.0
        y = grid.y[1:-1]
        m = y.size
        h2 = grid.h ** 2
        lap = (np.diag(np.full(m, -2.0)) + np.diag(np.ones(m - 1), 1) + np.diag(np.ones(m - 1), -1)) / h2
        generator = nu * (lap - mode.eta2 * np.eye(m)) - 1j * mode.k1 * np.diag(y)
        s = sine(grid)
        errors = []
        for dt in (0.1, 0.05):
            params = Params(A=100.0, dt=dt, t_end=1.0, linear_only=True)
            state = State.zeros(grid).replace(
                omega2=SpecField.from_modes(grid, {mode: s, mode.conjugate(): s}),
            )
            stepped = step_imex(state, grid, params).omega2.profile(mode)
            exact = expm(dt * generator) @ s[1:-1]
            errors.append(np.max(np.abs(stepped[1:-1] - exact)))
        assert 6.5 < errors[0] / errors[1] < 9.5

    def test_linear_mode_energy_never_grows(self, grid):
        params = Params(A=100.0, dt=0.1, t_end=2.0, linear_only=True)
        mode = ModeIndex(1, 0)
        s = sine(grid)
        state = State.zeros(grid).replace(n=SpecField.from_modes(grid, {mode: s, mode.conjugate(): s}))
        stepper = ImexStepper(grid, params)
        index = grid.index(mode)
        energies = [mode_energy(state.n, grid)[index]]
        for _ in range(20):
            state = stepper.step(state)
            energies.append(mode_energy(state.n, grid)[index])
        assert np.all(np.diff(energies) <= 1e-12 * energies[0])
        assert energies[-1] < 0.95 * energies[0]

    def test_u2_stays_clamped(self, grid):
        params = Params(A=100.0, dt=0.1, t_end=1.0, linear_only=True)
        state = shear_state(grid, params, [ModeIndex(1, 1), ModeIndex(1, 0), ModeIndex(0, 2)])
        stepper = ImexStepper(grid, params)
        for _ in range(5):
            state = stepper.step(state)
        derived = derive(state, grid, params)
        value, slope = wall_residuals(derived, grid)
        scale = float(np.max(np.abs(derived.u2.data)))
        assert scale > 0
        assert value == 0.0
        assert slope < 1e-9 * scale

    def test_lift_up_grows_vorticity(self, grid):
        params = Params(A=1.0e4, dt=1.0, t_end=20.0, linear_only=True)
        mode = ModeIndex(0, 1)
        state = shear_state(grid, params, [mode], amplitude=1.0)
        u2_initial = float(np.max(np.abs(derive(state, grid, params).u2.data)))
        stepper = ImexStepper(grid, params)
        for _ in range(20):
            state = stepper.step(state)
        ratio = float(np.max(np.abs(state.omega2.data))) / u2_initial
        assert 0.85 * 20 < ratio < 1.02 * 20

    def test_nonfinite_input_is_reported(self, grid):
        params = Params(A=100.0, dt=0.1, t_end=1.0)
        bad = np.full(grid.ny, np.nan)
        state = State.zeros(grid).replace(mean_u1=bad)
        with pytest.raises(BlowupDetected):
            ImexStepper(grid, params).step(state)


class TestRun:
    def test_zero_duration(self, grid):
        params = Params(A=100.0, dt=0.1, t_end=0.0)
        calls = []
        result = run(State.zeros(grid), grid, params, hooks=[calls.append])
        assert result.status == RunStatus.COMPLETED
        assert result.steps == 0
        assert len(calls) == 1

    def test_cadence(self, grid):
        params = Params(A=100.0, dt=0.25, t_end=2.5, linear_only=True)
        calls = []
        result = run(State.zeros(grid), grid, params, hooks=[calls.append], cadence=3)
        assert result.completed
        assert result.steps == 10
        assert [s.t for s in calls] == pytest.approx([0.0, 0.75, 1.5, 2.25, 2.5])

    def test_bad_cadence(self, grid):
        with pytest.raises(ValueError):
            run(State.zeros(grid), grid, Params(A=1.0, dt=0.1, t_end=1.0), cadence=0)

    def test_hook_can_stop_the_run(self, grid):
        params = Params(A=100.0, dt=0.25, t_end=2.5, linear_only=True)

        def hook(state):
            if state.t > 1.0:
                raise BlowupDetected(state.t, "linf_abs", 1e9)

        result = run(State.zeros(grid), grid, params, hooks=[hook])
        assert result.status == RunStatus.BLOWUP_DETECTED
        assert result.event_t == pytest.approx(1.25)
        assert "linf_abs" in result.message

    def test_large_step_is_rejected(self, grid):
        params = Params(A=1.0, dt=1.0, t_end=5.0)
        n = single_mode_density(
            InitialSettings(preset="single_mode", mode=(1, 1), n_amplitude=100.0), grid, params,
        )
        result = run(State.zeros(grid).replace(n=n), grid, params)
        assert result.status == RunStatus.STEP_REJECTED
        assert result.steps == 0
        assert result.event_t == 0.0

    def test_clipping_warns_once_and_counts(self, grid, caplog):
        params = Params(A=100.0, dt=0.1, t_end=0.5)
        mode = ModeIndex(1, 0)
        s = 0.1 * sine(grid)
        # n = 0.2 sin(pi (y+1)/2) cos(x) is negative on half the box
        state = State.zeros(grid).replace(n=SpecField.from_modes(grid, {mode: s, mode.conjugate(): s}))
        with caplog.at_level(logging.DEBUG, logger="cpks"):
            result = run(state, grid, params)
        assert result.completed
        assert result.clip_events == result.steps == 5
        clips = [r for r in caplog.records if r.getMessage() == "negative density clipped in chemotactic flux"]
        assert len(clips) == 5
        assert [r.levelno for r in clips].count(logging.WARNING) == 1
        finished = [r for r in caplog.records if r.getMessage() == "run finished"]
        assert finished[-1].fields["clip_events"] == 5
