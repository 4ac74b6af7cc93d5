"""Numerical checks of the interpolation inequalities and the sharp L3 constant."""
from .functions import ConstraintError, StripGrid, TestFunction2D, ZeroFunctionError
from .optimizer import CStarEstimate, estimate_cstar
from .ratios import (
    NashVariant,
    ProductForm,
    gn_l3_ratio,
    l3_embedding_ratio,
    nash_ratio,
    product_trace_ratio,
    sup_gradient_ratio,
)
from .suite import SUITES, run_suite, write_csv

__all__ = [
    "ConstraintError",
    "StripGrid",
    "TestFunction2D",
    "ZeroFunctionError",
    "CStarEstimate",
    "estimate_cstar",
    "NashVariant",
    "ProductForm",
    "gn_l3_ratio",
    "l3_embedding_ratio",
    "nash_ratio",
    "product_trace_ratio",
    "sup_gradient_ratio",
    "SUITES",
    "run_suite",
    "write_csv",
]
