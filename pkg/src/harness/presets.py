"""
Initial-data presets.

Densities are built on the physical grid. Bumps and noisy stripes reach the
retained modes as the square of a half-band root, so they stay nonnegative;
a plain stripe is already band-limited. Both are rescaled to the requested
total mass. The single-mode preset rides on a cos(pi y / 2) background of
the same amplitude. Bump and stripe profiles may carry seeded
multiplicative noise. Velocity perturbations are placed directly on
Fourier modes as wall-clamped profiles.
"""
from __future__ import annotations

from collections.abc import Callable, Iterable

import numpy as np

from ..channel.dynamics import derive
from ..channel.diagnostics import total_mass
from ..channel.grid import (
    PERIOD,
    Grid,
    ModeIndex,
    SpecField,
    d2y,
    mode_energy,
    transform_to_physical,
    transform_to_spectral,
)
from ..channel.models import Params, State
from ..logging_config import get_logger
from .checkpoint import load_checkpoint
from .config import InitialSettings

logger = get_logger("cpks.harness")


class PresetError(ValueError):
    """Preset parameters that cannot produce a valid initial state."""


def _wrapped(coord: np.ndarray, center: float) -> np.ndarray:
    return (coord - center + np.pi) % PERIOD - np.pi


def _retained(field: SpecField, grid: Grid, params: Params) -> SpecField:
    return field.masked(grid.retained_mask(params.dealias_on)).hermitian_part()


def _half_band_mask(grid: Grid, params: Params) -> np.ndarray:
    """Modes whose pairwise products stay inside the retained set."""
    mask = grid.retained_mask(params.dealias_on)
    k1 = np.abs(grid.k1)[:, None]
    k3 = np.abs(grid.k3)[None, :]
    k1_half = int(np.max(np.where(mask, k1, 0))) // 2
    k3_half = int(np.max(np.where(mask, k3, 0))) // 2
    return (k1 <= k1_half) & (k3 <= k3_half)


def nonnegative_density(values: np.ndarray, grid: Grid, params: Params) -> SpecField:
    """Retained-mode density g^2, with g the half-band projection of sqrt(values).

    g^2 is nonnegative on the grid and its modes fill exactly the retained set.
    """
    if np.any(values < 0):
        raise PresetError("density values must be nonnegative")
    root = transform_to_spectral(np.sqrt(values), grid).masked(_half_band_mask(grid, params))
    g = transform_to_physical(root.hermitian_part(), grid)
    return _retained(transform_to_spectral(g * g, grid), grid, params)


def _normalize_mass(n: SpecField, grid: Grid, mass: float) -> SpecField:
    current = total_mass(n, grid)
    if not current > 0:
        raise PresetError(f"density has nonpositive mass {current:.3e} before normalization")
    return n * (mass / current)


def _perturbed(values: np.ndarray, settings: InitialSettings, rng: np.random.Generator | None) -> np.ndarray:
    """values * (1 + noise * xi) with xi uniform on [-1, 1] per grid point."""
    if settings.noise == 0.0:
        return values
    if rng is None:
        raise PresetError("initial.noise needs a random generator")
    return values * (1.0 + settings.noise * rng.uniform(-1.0, 1.0, values.shape))


def gaussian_bump_density(
    settings: InitialSettings, grid: Grid, params: Params, rng: np.random.Generator | None = None,
) -> SpecField:
    x, y, z = grid.mesh()
    cx, cy, cz = settings.center
    r2 = _wrapped(x, cx) ** 2 + settings.y_stretch * (y - cy) ** 2 + _wrapped(z, cz) ** 2
    values = np.exp(-r2 / settings.width ** 2) * (1.0 - y ** 2)
    values = _perturbed(values, settings, rng)
    return _normalize_mass(nonnegative_density(values, grid, params), grid, settings.mass)


def stripe_density(
    settings: InitialSettings, grid: Grid, params: Params, rng: np.random.Generator | None = None,
) -> SpecField:
    x, y, z = grid.mesh()
    k1, k3 = settings.stripe_mode
    values = np.cos(0.5 * np.pi * y) * (1.0 + settings.stripe_delta * np.cos(k1 * x + k3 * z))
    if settings.noise > 0.0:
        n = nonnegative_density(_perturbed(values, settings, rng), grid, params)
    else:
        n = _retained(transform_to_spectral(values, grid), grid, params)
    return _normalize_mass(n, grid, settings.mass)


def single_mode_density(
    settings: InitialSettings, grid: Grid, params: Params, rng: np.random.Generator | None = None,
) -> SpecField:
    mode = ModeIndex(*settings.mode)
    _check_mode(mode, grid, params)
    background = settings.n_amplitude * np.cos(0.5 * np.pi * grid.y)
    background[0] = background[-1] = 0.0
    # n = amp cos(pi y/2) (1 + cos(k1 x + k3 z)) >= 0
    profile = 0.5 * background
    return SpecField.from_modes(
        grid, {ModeIndex(0, 0): background, mode: profile, mode.conjugate(): profile},
    )


def _check_mode(mode: ModeIndex, grid: Grid, params: Params) -> None:
    idx = grid.index(mode)
    if not grid.retained_mask(params.dealias_on)[idx]:
        raise PresetError(f"mode ({mode.k1}, {mode.k3}) is outside the retained set")


def velocity_perturbation(
    modes: Iterable[ModeIndex],
    amplitude: float,
    vorticity: float,
    grid: Grid,
    params: Params,
) -> tuple[SpecField, SpecField]:
    """(omega2, delta_u2) with u2 = amp (1-y^2)^2 and omega2 = vort (1-y^2) on each mode pair."""
    y = grid.y
    u2_profile = amplitude * (1.0 - y ** 2) ** 2
    w_profile = vorticity * (1.0 - y ** 2)
    omega = np.zeros(grid.spectral_shape, dtype=np.complex128)
    q = np.zeros(grid.spectral_shape, dtype=np.complex128)
    for mode in modes:
        if mode.k1 == 0 and mode.k3 == 0:
            raise PresetError("velocity perturbation cannot sit on the (0, 0) mode")
        _check_mode(mode, grid, params)
        q_profile = d2y(u2_profile, grid) - mode.eta2 * u2_profile
        for m in (mode, mode.conjugate()):
            omega[grid.index(m)] = w_profile
            q[grid.index(m)] = q_profile
    return SpecField(omega), SpecField(q)


def random_state(grid: Grid, params: Params, rng: np.random.Generator, scale: float = 1.0) -> State:
    """Smooth random prognostic fields on the retained modes, zero at the walls."""
    envelope = (1.0 - grid.y ** 2)

    def field() -> SpecField:
        raw = rng.standard_normal(grid.spectral_shape) + 1j * rng.standard_normal(grid.spectral_shape)
        decay = 1.0 / (1.0 + grid.eta2)[:, :, None]
        return _retained(SpecField(scale * raw * decay * envelope), grid, params)

    mean = scale * rng.standard_normal(2)[:, None] * envelope
    return State(t=0.0, n=field(), omega2=field(), delta_u2=field(), mean_u1=mean[0], mean_u3=mean[1])


def smallness_product(state: State, grid: Grid, A: float) -> float:
    """A (||u2_0|| + ||u3_0||) over the x-averaged velocity."""
    derived = derive(state, grid, Params(A=A, dt=1.0, t_end=0.0))
    u2_zero = float(np.sqrt(np.sum(mode_energy(derived.u2, grid)[0])))
    u3_zero = float(np.sqrt(np.sum(mode_energy(derived.u3, grid)[0])))
    return A * (u2_zero + u3_zero)


_DENSITIES: dict[str, Callable[[InitialSettings, Grid, Params, np.random.Generator], SpecField]] = {
    "gaussian_bump": gaussian_bump_density,
    "stripe": stripe_density,
    "single_mode": single_mode_density,
}


def build_initial(settings: InitialSettings, grid: Grid, params: Params, seed: int = 0) -> State:
    """Initial state for a preset; `seed` drives the density noise."""
    if settings.preset == "restart":
        if not settings.path:
            raise PresetError("restart preset needs a checkpoint path")
        state = load_checkpoint(settings.path, grid)
        logger.info_with("restarted from checkpoint", path=settings.path, t=state.t)
        return state
    try:
        density = _DENSITIES[settings.preset]
    except KeyError:
        raise PresetError(f"unknown preset {settings.preset!r}") from None

    n = density(settings, grid, params, np.random.default_rng(seed))
    vorticity = settings.velocity_amplitude if settings.vorticity_amplitude is None else settings.vorticity_amplitude
    omega2, delta_u2 = velocity_perturbation(
        settings.velocity_mode_indices(), settings.velocity_amplitude, vorticity, grid, params,
    )
    state = State(
        t=0.0,
        n=n,
        omega2=omega2,
        delta_u2=delta_u2,
        mean_u1=np.zeros(grid.ny),
        mean_u3=np.zeros(grid.ny),
    )
    if settings.smallness is not None:
        product = smallness_product(state, grid, params.A)
        if product > 0:
            scale = settings.smallness / product
            state = state.replace(omega2=omega2 * scale, delta_u2=delta_u2 * scale)
        elif settings.smallness > 0:
            raise PresetError("cannot rescale a zero velocity perturbation to a positive smallness target")
    return state
