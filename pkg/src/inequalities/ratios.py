"""
Ratio functionals for the interpolation inequalities on I x T and the channel.

Each ratio is homogeneous of degree zero in its arguments, so it measures
the constant of the inequality for one test function.
"""
from __future__ import annotations

from enum import Enum

import numpy as np

from ..channel.grid import Grid, ddy, derivative_wavenumbers, integrate_y
from .functions import (
    ConstraintError,
    InequalityError,
    IntervalGrid,
    StripGrid,
    TestFunction2D,
    ZeroFunctionError,
    integrate,
)

L3_EMBEDDING_CONSTANT = 9.0 / 4.0
THEOREM_MASS_BOUND = 4.0 / 9.0
_ALL_EPSILONS = (0.25, 0.5, 1.0)


def _require(f: TestFunction2D, dirichlet: bool = False, zero_mean: bool = False) -> None:
    if dirichlet and not f.dirichlet_y:
        raise ConstraintError("function must vanish at y = +-1")
    if zero_mean and not f.zero_z_mean:
        raise ConstraintError("function must have zero z-mean")
    if f.is_zero():
        raise ZeroFunctionError("ratio undefined for the zero function")


def gn_l3_ratio(f: TestFunction2D) -> float:
    """||f||_3 / (||f||_1^(1/3) ||grad f||_2^(2/3))."""
    _require(f, dirichlet=True, zero_mean=True)
    return f.lp(3) / (f.lp(1) ** (1.0 / 3.0) * f.grad_sq() ** (1.0 / 3.0))


def l3_embedding_ratio(f: TestFunction2D) -> float:
    """||f||_3^3 / (||f||_1 ||grad f||_2^2); bounded by 9/4."""
    _require(f, dirichlet=True, zero_mean=True)
    return integrate(np.abs(f.values) ** 3, f.grid) / (f.lp(1) * f.grad_sq())


def l3_embedding_slack(grid: StripGrid) -> float:
    """Bound used for discrete checks of the 9/4 embedding."""
    return L3_EMBEDDING_CONSTANT * (1.0 + 5.0 * grid.h)


class ProductForm(Enum):
    GENERAL = "general"
    DIRICHLET = "dirichlet"


def product_trace_ratio(
    f1: TestFunction2D,
    f2: TestFunction2D,
    form: ProductForm | None = None,
) -> float:
    """||(f1 f2)_(0,0)|| over ||f1|| (||f2||^(1/2) ||d_y f2||^(1/2) [+ ||f2||]).

    The lower-order term is dropped when f2 vanishes at the walls, unless a
    form is forced.
    """
    if f1.is_zero() or f2.is_zero():
        raise ZeroFunctionError("ratio undefined for zero inputs")
    if form is None:
        form = ProductForm.DIRICHLET if f2.dirichlet_y else ProductForm.GENERAL
    if form == ProductForm.DIRICHLET and not f2.dirichlet_y:
        raise ConstraintError("dirichlet form needs f2 to vanish at y = +-1")
    grid = f1.grid
    profile = (f1.values * f2.values).mean(axis=1)
    lhs = np.sqrt(2.0 * np.pi * float(integrate_y(profile ** 2, grid)))
    n1 = f1.lp(2)
    n2 = f2.lp(2)
    interp = np.sqrt(n2 * np.sqrt(f2.dy_sq()))
    rhs = n1 * (interp + (n2 if form == ProductForm.GENERAL else 0.0))
    if rhs == 0.0:
        raise ZeroFunctionError("right-hand side vanishes")
    return float(lhs / rhs)


def sup_gradient_ratio(f: TestFunction2D, eps: float) -> float:
    """||f||_inf / (||grad f||^(1-eps) ||d_z grad f||^eps) for zero z-mean f."""
    if not 0.0 < eps <= 1.0:
        raise InequalityError(f"eps must lie in (0, 1], got {eps}")
    _require(f, zero_mean=True)
    grad = np.sqrt(f.grad_sq())
    dz_grad = np.sqrt(f.dz_grad_sq())
    return float(np.max(np.abs(f.values)) / (grad ** (1.0 - eps) * dz_grad ** eps))


def sup_gradient_ratios(f: TestFunction2D) -> dict[float, float]:
    return {eps: sup_gradient_ratio(f, eps) for eps in _ALL_EPSILONS}


class NashVariant(Enum):
    INTERVAL = "1d-interval"
    STRIP = "2d-strip"
    CHANNEL = "3d-channel"

    @property
    def theta(self) -> float:
        return {
            NashVariant.INTERVAL: 2.0 / 3.0,
            NashVariant.STRIP: 0.5,
            NashVariant.CHANNEL: 0.4,
        }[self]


def _nash_interval(f: np.ndarray) -> tuple[float, float, float]:
    spacing = IntervalGrid(f.size)
    l1 = float(integrate_y(np.abs(f), spacing))
    l2 = float(np.sqrt(integrate_y(f ** 2, spacing)))
    grad = float(np.sqrt(integrate_y(ddy(f, spacing) ** 2, spacing)))
    return l1, l2, grad


def _nash_channel(f: np.ndarray, grid: Grid) -> tuple[float, float, float]:
    cell = grid.hx * grid.hz

    def integral(values: np.ndarray) -> float:
        return float(integrate_y(np.sum(values, axis=(0, 2)) * cell, grid))

    kx = derivative_wavenumbers(grid.nx)[:, None, None]
    kz = derivative_wavenumbers(grid.nz)[None, None, :]
    hat = np.fft.fft2(f, axes=(0, 2))
    fx = np.fft.ifft2(1j * kx * hat, axes=(0, 2)).real
    fz = np.fft.ifft2(1j * kz * hat, axes=(0, 2)).real
    fy = ddy(f, grid, axis=1)
    l1 = integral(np.abs(f))
    l2 = np.sqrt(integral(f ** 2))
    grad = np.sqrt(integral(fx ** 2 + fy ** 2 + fz ** 2))
    return l1, float(l2), float(grad)


def nash_ratio(
    f: np.ndarray | TestFunction2D,
    variant: NashVariant,
    grid: StripGrid | Grid | None = None,
) -> float:
    """||f||_2 / (||f||_1^theta ||grad f||_2^(1-theta)), Dirichlet in y.

    INTERVAL takes a 1D profile sampled uniformly on y in [-1, 1],
    STRIP a TestFunction2D, CHANNEL a physical (nx, ny, nz) array on a Grid.
    """
    if variant == NashVariant.STRIP:
        if not isinstance(f, TestFunction2D):
            raise InequalityError("strip variant expects a TestFunction2D")
        _require(f, dirichlet=True)
        l1, l2, grad = f.lp(1), f.lp(2), float(np.sqrt(f.grad_sq()))
    else:
        arr = np.asarray(f, dtype=float)
        if variant == NashVariant.INTERVAL:
            if arr.ndim != 1:
                raise InequalityError("interval variant expects a 1D profile")
            walls = arr[[0, -1]]
            l1, l2, grad = _nash_interval(arr)
        else:
            if not isinstance(grid, Grid) or arr.shape != grid.shape:
                raise InequalityError("channel variant expects an array matching a channel Grid")
            walls = arr[:, [0, -1], :]
            l1, l2, grad = _nash_channel(arr, grid)
        if not np.any(arr):
            raise ZeroFunctionError("ratio undefined for the zero function")
        if np.max(np.abs(walls)) > 1e-12 * max(float(np.max(np.abs(arr))), 1.0):
            raise ConstraintError("function must vanish at y = +-1")
    theta = variant.theta
    return float(l2 / (l1 ** theta * grad ** (1.0 - theta)))
