import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent.parent))

from src.channel.diagnostics import total_mass
from src.channel.dynamics import derive
from src.channel.grid import ModeIndex, make_grid, transform_to_physical
from src.channel.models import Params, State
from src.harness.checkpoint import (
    HEADER,
    CheckpointError,
    load_checkpoint,
    read_header,
    save_checkpoint,
)
from src.harness.config import (
    ConfigError,
    InitialSettings,
    ParamsSettings,
    RunConfig,
    dump_config,
    from_flat,
    load_config,
    to_flat,
)
from src.harness.presets import (
    PresetError,
    build_initial,
    gaussian_bump_density,
    random_state,
    single_mode_density,
    smallness_product,
    velocity_perturbation,
)
from src.harness.sweep import SweepRow, expand, parse_axis, worker_count


@pytest.fixture
def grid():
    return make_grid(16, 33, 16)


@pytest.fixture
def params():
    return Params(A=100.0, dt=0.1, t_end=1.0)


class TestConfig:
    def test_defaults(self):
        config = RunConfig()
        assert config.grid.nx == 32
        assert config.params.A == 1.0e4
        assert config.initial.preset == "gaussian_bump"
        assert config.output.cadence == 10

    def test_flat_keys(self):
        config = from_flat({"grid.nx": 16, "params.A": 1e3, "initial.mass": 0.2, "seed": 3})
        assert config.grid.nx == 16
        assert config.params.A == 1e3
        assert config.initial.mass == 0.2
        assert config.seed == 3

    def test_flat_round_trip(self):
        config = from_flat({"output.track_modes": [[1, 0]], "initial.mode": [2, 1]})
        assert from_flat(to_flat(config)) == config
        assert config.output.track_mode_indices() == [ModeIndex(1, 0)]

    @pytest.mark.parametrize(
        "flat",
        [
            {"params.bogus": 1},
            {"grd.nx": 16},
            {"grid.nx": 4},
            {"params.A": -1.0},
            {"initial.preset": "volcano"},
            {"grid": 1, "grid.nx": 8},
        ],
    )
    def test_invalid(self, flat):
        with pytest.raises(ConfigError):
            from_flat(flat)

    def test_restart_needs_path(self):
        with pytest.raises(ConfigError):
            from_flat({"initial.preset": "restart"})

    def test_overrides(self):
        config = RunConfig().with_overrides(**{"params.A": 500.0})
        assert config.params.A == 500.0
        assert config.grid == RunConfig().grid

    def test_params_need_dt(self):
        with pytest.raises(ConfigError):
            ParamsSettings().build()
        assert ParamsSettings().build(dt=0.5).dt == 0.5

    def test_yaml_round_trip(self, tmp_path):
        config = from_flat({"grid.nx": 8, "params.t_end": 2.0, "initial.velocity_modes": [[1, 1]]})
        path = dump_config(config, tmp_path / "run" / "config.yaml")
        assert load_config(path) == config

    def test_bad_files(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "missing.yaml")
        broken = tmp_path / "broken.yaml"
        broken.write_text("grid.nx: [8\n")
        with pytest.raises(ConfigError):
            load_config(broken)
        listed = tmp_path / "list.yaml"
        listed.write_text("- 1\n- 2\n")
        with pytest.raises(ConfigError):
            load_config(listed)
        empty = tmp_path / "empty.yaml"
        empty.write_text("")
        assert load_config(empty) == RunConfig()

    def test_shipped_configs_load(self):
        configs = Path(__file__).parent.parent / "configs"
        for path in sorted(configs.glob("*.yaml")):
            load_config(path)


class TestPresets:
    @pytest.mark.parametrize("preset", ["gaussian_bump", "stripe"])
    def test_mass_is_normalized(self, grid, params, preset):
        settings = InitialSettings(preset=preset, mass=0.3)
        state = build_initial(settings, grid, params)
        assert total_mass(state.n, grid) == pytest.approx(0.3, abs=1e-10)

    def test_single_mode(self, grid, params):
        n = single_mode_density(InitialSettings(preset="single_mode", mode=(1, 2), n_amplitude=2.0), grid, params)
        profile = n.profile(ModeIndex(1, 2))
        assert profile[0] == 0.0 and profile[-1] == 0.0
        assert profile[grid.ny // 2] == pytest.approx(1.0)
        np.testing.assert_array_equal(n.profile(ModeIndex(-1, -2)), profile)

    @pytest.mark.parametrize("size", [16, 32])
    @pytest.mark.parametrize(
        "changes",
        [
            {"preset": "gaussian_bump"},
            {"preset": "gaussian_bump", "width": 0.5},
            {"preset": "gaussian_bump", "noise": 0.5},
            {"preset": "stripe", "stripe_delta": 0.9},
            {"preset": "stripe", "noise": 0.5},
            {"preset": "single_mode", "mode": (1, 2)},
        ],
    )
    def test_densities_are_nonnegative(self, params, size, changes):
        fine = make_grid(size, 33, size)
        n = transform_to_physical(build_initial(InitialSettings(**changes), fine, params, seed=7).n, fine)
        assert n.max() > 0
        assert n.min() >= -1e-10 * n.max()

    def test_noise_follows_seed(self, grid, params):
        settings = InitialSettings(noise=0.3)
        first = build_initial(settings, grid, params, seed=1)
        again = build_initial(settings, grid, params, seed=1)
        other = build_initial(settings, grid, params, seed=2)
        np.testing.assert_array_equal(first.n.data, again.n.data)
        assert np.max(np.abs(first.n.data - other.n.data)) > 0
        assert total_mass(first.n, grid) == pytest.approx(0.3, abs=1e-10)
        plain = build_initial(InitialSettings(), grid, params, seed=1)
        np.testing.assert_array_equal(plain.n.data, build_initial(InitialSettings(), grid, params, seed=2).n.data)

    def test_noise_needs_generator(self, grid, params):
        with pytest.raises(PresetError):
            gaussian_bump_density(InitialSettings(noise=0.1), grid, params)

    def test_unretained_mode(self, grid, params):
        with pytest.raises(PresetError):
            single_mode_density(InitialSettings(preset="single_mode", mode=(6, 0)), grid, params)

    def test_velocity_perturbation_profile(self, grid, params):
        mode = ModeIndex(1, 1)
        omega2, delta_u2 = velocity_perturbation([mode], 2e-3, 1e-3, grid, params)
        state = State.zeros(grid).replace(omega2=omega2, delta_u2=delta_u2)
        u2 = derive(state, grid, params).u2.profile(mode)
        np.testing.assert_allclose(u2.real, 2e-3 * (1.0 - grid.y ** 2) ** 2, atol=1e-12)
        np.testing.assert_allclose(omega2.profile(mode).real, 1e-3 * (1.0 - grid.y ** 2))

    def test_velocity_perturbation_rejects_origin(self, grid, params):
        with pytest.raises(PresetError):
            velocity_perturbation([ModeIndex(0, 0)], 1.0, 1.0, grid, params)

    def test_zero_velocity(self, grid, params):
        state = build_initial(InitialSettings(), grid, params)
        assert not np.any(state.omega2.data)
        assert not np.any(state.delta_u2.data)
        assert smallness_product(state, grid, params.A) == 0.0

    def test_smallness_rescaling(self, grid, params):
        settings = InitialSettings(velocity_amplitude=1e-3, smallness=0.5)
        state = build_initial(settings, grid, params)
        assert smallness_product(state, grid, params.A) == pytest.approx(0.5, rel=1e-10)

    def test_smallness_needs_velocity(self, grid, params):
        with pytest.raises(PresetError):
            build_initial(InitialSettings(smallness=0.5), grid, params)

    def test_restart(self, grid, params, tmp_path):
        original = random_state(grid, params, np.random.default_rng(0)).replace(t=2.5)
        path = save_checkpoint(original, tmp_path / "s.cpks", params)
        restored = build_initial(InitialSettings(preset="restart", path=str(path)), grid, params)
        assert restored.t == 2.5
        np.testing.assert_array_equal(restored.n.data, original.n.data)

    def test_random_state_walls(self, grid, params):
        state = random_state(grid, params, np.random.default_rng(1))
        assert state.is_finite()
        assert not np.any(state.n.data[..., [0, -1]])
        assert state.mean_u1[0] == 0.0


class TestCheckpoint:
    def test_round_trip_is_exact(self, grid, params, tmp_path):
        state = random_state(grid, params, np.random.default_rng(2)).replace(t=1.25)
        path = save_checkpoint(state, tmp_path / "ckpt" / "a.cpks", params)
        loaded = load_checkpoint(path, grid)
        assert loaded.t == state.t
        for name in ("n", "omega2", "delta_u2"):
            np.testing.assert_array_equal(getattr(loaded, name).data, getattr(state, name).data)
        np.testing.assert_array_equal(loaded.mean_u1, state.mean_u1)
        np.testing.assert_array_equal(loaded.mean_u3, state.mean_u3)
        assert not list(path.parent.glob("*.tmp"))

    def test_header(self, grid, params, tmp_path):
        path = save_checkpoint(State.zeros(grid, t=0.5), tmp_path / "h.cpks", params)
        version, nx, ny, nz, t, A, a = read_header(path)
        assert (version, nx, ny, nz) == (1, 16, 33, 16)
        assert (t, A, a) == (0.5, 100.0, 0.0)
        _, _, _, _, _, A, _ = read_header(save_checkpoint(State.zeros(grid), tmp_path / "p.cpks"))
        assert np.isnan(A)

    def test_bad_magic(self, grid, tmp_path):
        path = save_checkpoint(State.zeros(grid), tmp_path / "m.cpks")
        raw = bytearray(path.read_bytes())
        raw[:4] = b"NOPE"
        path.write_bytes(bytes(raw))
        with pytest.raises(CheckpointError, match="magic"):
            load_checkpoint(path)

    def test_truncated(self, grid, tmp_path):
        path = save_checkpoint(State.zeros(grid), tmp_path / "t.cpks")
        raw = path.read_bytes()
        path.write_bytes(raw[:-8])
        with pytest.raises(CheckpointError, match="payload"):
            load_checkpoint(path)
        path.write_bytes(raw[: HEADER.size - 1])
        with pytest.raises(CheckpointError, match="header"):
            load_checkpoint(path)

    def test_grid_mismatch(self, grid, tmp_path):
        path = save_checkpoint(State.zeros(grid), tmp_path / "g.cpks")
        with pytest.raises(CheckpointError, match="resampling"):
            load_checkpoint(path, make_grid(8, 33, 16))

    def test_missing(self, tmp_path):
        with pytest.raises(CheckpointError):
            load_checkpoint(tmp_path / "none.cpks")


class TestSweepHelpers:
    def test_parse_axis(self):
        assert parse_axis("A=1e3,1e4") == ("params.A", [1000.0, 10000.0])
        assert parse_axis("M=0.1") == ("initial.mass", [0.1])
        assert parse_axis("params.a=0,0.1,") == ("params.a", [0.0, 0.1])

    @pytest.mark.parametrize("text", ["A", "A=", "A=big"])
    def test_parse_axis_errors(self, text):
        with pytest.raises(ConfigError):
            parse_axis(text)

    def test_worker_count(self, monkeypatch):
        monkeypatch.setenv("CPKS_THREADS", "2")
        assert worker_count(8, 10) == 2
        assert worker_count(8, 1) == 1
        monkeypatch.setenv("CPKS_THREADS", "many")
        assert worker_count(3, 10) == 3
        monkeypatch.delenv("CPKS_THREADS")
        assert worker_count(3, 2) == 2

    def test_expand(self, tmp_path):
        base = from_flat({"grid.nx": 8})
        configs = expand(base, {"params.A": [1e2, 1e3], "initial.mass": [0.1, 0.2]}, tmp_path)
        assert len(configs) == 4
        assert [c.params.A for c in configs] == [1e2, 1e2, 1e3, 1e3]
        assert [c.initial.mass for c in configs] == [0.1, 0.2, 0.1, 0.2]
        assert configs[3].output.directory == str(tmp_path / "row_003")
        assert all(c.grid.nx == 8 for c in configs)

    def test_row_csv(self):
        row = SweepRow(A=100.0, M=0.3, status="failed", error="boom")
        assert row.as_csv() == ["100", "0.29999999999999999", "failed", "", "", "", "", "boom"]
