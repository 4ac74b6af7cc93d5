import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent.parent))

from src.channel.diagnostics import (
    BlowupThresholds,
    DecayFitError,
    NormLedger,
    ProjectionError,
    WeightedNorm,
    detect_blowup,
    fit_decay_rate,
    lp_norm,
    project_00,
    project_0neq,
    project_x_nonzero,
    project_x_zero,
    spectral_tail_fraction,
    split_product_zero_mode,
    total_mass,
    update_ledger,
    wall_flux,
    x_average_of_product,
    ya_terms,
)
from src.channel.dynamics import derive
from src.channel.grid import TORUS_AREA, ModeIndex, SpecField, make_grid, transform_to_spectral
from src.channel.models import Params, State
from src.harness.presets import random_state


@pytest.fixture
def grid():
    return make_grid(16, 33, 16)


@pytest.fixture
def params():
    return Params(A=100.0, dt=0.1, t_end=1.0, a=0.1)


def random_field(grid, seed):
    rng = np.random.default_rng(seed)
    return transform_to_spectral(rng.standard_normal(grid.shape), grid)


def mean_density(grid, profile):
    return SpecField.from_modes(grid, {ModeIndex(0, 0): profile})


class TestProjections:
    def test_zero_and_nonzero_parts_add_up(self, grid):
        f = random_field(grid, 0)
        total = project_x_zero(f) + project_x_nonzero(f)
        np.testing.assert_array_equal(total.data, f.data)
        assert not np.any(project_x_nonzero(f).data[0])

    def test_z_split_of_x_average(self, grid):
        f0 = project_x_zero(random_field(grid, 1))
        np.testing.assert_array_equal(project_00(f0), f0.data[0, 0])
        rest = project_0neq(f0)
        assert not np.any(rest.data[0, 0])
        np.testing.assert_array_equal(rest.data[0, 1:], f0.data[0, 1:])

    def test_requires_x_average(self, grid):
        f = random_field(grid, 2)
        with pytest.raises(ProjectionError):
            project_00(f)
        with pytest.raises(ProjectionError):
            project_0neq(f)

    def test_product_zero_mode_splits(self, grid):
        f = random_field(grid, 3)
        g = random_field(grid, 4)
        zero_part, nonzero_part = split_product_zero_mode(f, g, grid)
        whole = x_average_of_product(f, g, grid)
        np.testing.assert_allclose((zero_part + nonzero_part).data, whole.data, atol=1e-12)


class TestScalarDiagnostics:
    def test_mass_of_constant(self, grid):
        n = mean_density(grid, np.ones(grid.ny))
        assert total_mass(n, grid) == pytest.approx(2.0 * TORUS_AREA)

    def test_mass_ignores_fluctuations(self, grid):
        n = SpecField.from_modes(grid, {ModeIndex(1, 2): np.ones(grid.ny), ModeIndex(-1, -2): np.ones(grid.ny)})
        assert total_mass(n, grid) == 0.0

    def test_wall_flux_of_cosine(self, grid, params):
        n = mean_density(grid, np.cos(0.5 * np.pi * grid.y))
        flux = wall_flux(n, grid, params)
        assert flux > 0
        assert flux == pytest.approx(TORUS_AREA * np.pi / params.A, rel=1e-2)

    @pytest.mark.parametrize("p", [2, 4, 8])
    def test_lp_norm_of_constant(self, grid, p):
        assert lp_norm(np.ones(grid.shape), grid, p) == pytest.approx((2.0 * TORUS_AREA) ** (1.0 / p))

    def test_ya_terms_vanish_on_zero(self, grid, params):
        integrand, sups = ya_terms(np.zeros(grid.spectral_shape, dtype=complex), grid, params)
        assert not np.any(integrand)
        assert sups.shape == (1, grid.nx, grid.nz)


class TestWeightedNorm:
    def test_trapezoid_and_running_max(self):
        grid = make_grid(8, 17, 8)
        norm = WeightedNorm(grid, 1, keep_history=True)
        ones = np.ones((grid.nx, grid.nz))
        norm.add(0.0, 1.0, ones, 2.0 * ones[None])
        norm.add(1.0, 1.0, ones, ones[None])
        nonzero = (grid.nx - 1) * grid.nz
        assert norm.squared() == pytest.approx(3.0 * nonzero)
        assert norm.value() == pytest.approx(norm.value_from_history())


class TestNormLedger:
    def test_columns_include_tracked_modes(self, grid, params):
        ledger = NormLedger(grid, params, track_modes=[ModeIndex(1, 0)])
        assert ledger.columns[0] == "t"
        assert "energy_omega2_1_0" in ledger.columns
        assert "mass" in ledger.columns

    def test_rows_follow_samples(self, grid, params):
        ledger = NormLedger(grid, params, keep_history=True)
        state = random_state(grid, params, np.random.default_rng(0), scale=1e-2)
        for t in (0.0, 0.5, 1.0):
            s = state.replace(t=t)
            update_ledger(ledger, s, derive(s, grid, params), grid, params)
        assert len(ledger) == 3
        rows = list(ledger.rows())
        assert [r[0] for r in rows] == [0.0, 0.5, 1.0]
        assert ledger.last("mass") == pytest.approx(total_mass(state.n, grid))
        assert ledger.energy() == pytest.approx(ledger.energy_from_history(), rel=1e-12)
        assert ledger.series["e"][-1] >= ledger.series["e"][0]

    def test_weighted_norm_of_decaying_mode(self):
        small = make_grid(8, 17, 8)
        params = Params(A=8.0, dt=0.1, t_end=1.0, a=1.0)
        rate, decay = params.weight_rate, 2.0
        assert rate == pytest.approx(0.5)
        mode = ModeIndex(1, 0)
        profile = np.sin(0.5 * np.pi * (small.y + 1.0))
        profile[0] = profile[-1] = 0.0

        def density(t):
            p = np.exp(-decay * t) * profile
            return SpecField.from_modes(small, {mode: p, mode.conjugate(): p})

        start = State.zeros(small).replace(n=density(0.0))
        derived = derive(start, small, params)
        ledger = NormLedger(small, params, keep_history=True)
        for t in np.linspace(0.0, 1.0, 1001):
            update_ledger(ledger, start.replace(t=float(t), n=density(float(t))), derived, small, params)

        integrand, sups = ya_terms(start.n.data, small, params)
        index = small.index(mode)
        g = 2.0 * (rate - decay)
        # int_0^1 I0 e^{g t} dt plus the sup, attained at t = 0
        per_mode = integrand[index] * np.expm1(g) / g + sups[0][index]
        assert ledger.ya_n.squared() == pytest.approx(2.0 * per_mode, rel=1e-5)
        assert ledger.xa_u2.squared() == 0.0
        assert ledger.energy() == pytest.approx(np.sqrt(2.0 * per_mode), rel=1e-5)
        assert ledger.energy() == pytest.approx(ledger.energy_from_history(), rel=1e-12)

    def test_times_must_be_monotone(self, grid, params):
        ledger = NormLedger(grid, params)
        state = State.zeros(grid, t=1.0)
        update_ledger(ledger, state, derive(state, grid, params), grid, params)
        earlier = state.replace(t=0.5)
        with pytest.raises(ValueError):
            update_ledger(ledger, earlier, derive(earlier, grid, params), grid, params)

    def test_history_required_for_recompute(self, grid, params):
        with pytest.raises(ValueError):
            NormLedger(grid, params).energy_from_history()

    def test_unknown_tracked_mode(self, grid, params):
        with pytest.raises(ValueError):
            NormLedger(grid, params, track_modes=[ModeIndex(40, 0)])


class TestFitDecayRate:
    def test_exponential(self):
        t = np.linspace(0.0, 10.0, 51)
        assert fit_decay_rate(t, 3.0 * np.exp(-0.3 * t)) == pytest.approx(0.3)

    def test_window_after_transient(self):
        t = np.linspace(0.0, 10.0, 101)
        v = np.where(t < 2.0, 1.0 + t, 3.0 * np.exp(-0.5 * (t - 2.0)))
        assert fit_decay_rate(t, v, window=(5.0, 10.0)) == pytest.approx(0.5)

    def test_errors(self):
        with pytest.raises(DecayFitError):
            fit_decay_rate([0.0, 1.0], [1.0])
        with pytest.raises(DecayFitError):
            fit_decay_rate([0.0, 1.0, 2.0], [1.0, 0.0, 1.0])
        with pytest.raises(DecayFitError):
            fit_decay_rate([0.0, 1.0, 2.0], [1.0, 0.5, 0.25], window=(5.0, 6.0))


class TestBlowupDetection:
    def test_healthy_state(self, grid, params):
        state = random_state(grid, params, np.random.default_rng(1), scale=1e-2)
        report = detect_blowup(state, derive(state, grid, params), BlowupThresholds(), grid)
        assert report.healthy
        assert report.status == "healthy"

    def test_absolute_threshold(self, grid, params):
        n = mean_density(grid, np.cos(0.5 * np.pi * grid.y))
        state = State.zeros(grid).replace(n=n)
        report = detect_blowup(state, derive(state, grid, params), BlowupThresholds(threshold_abs=0.5), grid)
        assert not report.healthy
        assert report.reason == "linf_abs"
        assert report.linf == pytest.approx(1.0)

    def test_growth_threshold(self, grid, params):
        n = mean_density(grid, np.cos(0.5 * np.pi * grid.y))
        state = State.zeros(grid).replace(n=n)
        report = detect_blowup(state, derive(state, grid, params), BlowupThresholds(), grid, initial_linf=1e-3)
        assert report.reason == "linf_growth"

    def test_nonfinite(self, grid, params):
        clean = State.zeros(grid)
        state = clean.replace(mean_u1=np.full(grid.ny, np.inf))
        report = detect_blowup(state, derive(clean, grid, params), BlowupThresholds(), grid)
        assert report.reason == "nonfinite"

    def test_spectral_tail(self, grid):
        profile = np.cos(0.5 * np.pi * grid.y)
        low = SpecField.from_modes(grid, {ModeIndex(1, 1): profile, ModeIndex(-1, -1): profile})
        high = SpecField.from_modes(grid, {ModeIndex(5, 0): profile, ModeIndex(-5, 0): profile})
        assert spectral_tail_fraction(low, grid) == 0.0
        assert spectral_tail_fraction(high, grid) == pytest.approx(1.0)
        assert spectral_tail_fraction(SpecField.zeros(grid), grid) == 0.0
