"""Statistical and model-implied hedging-ratio models."""

from .interface import HedgeModel, FitResult, CP_CLASSES
from .ols import ols_qr, regression_xy, gross_return
from .baseline import ZeroHedge, BsDeltaHedge, FixedHedge
from .sensitivity import LinearHedge, parse_sensitivities
from .hull_white import HullWhiteHedge
from .semilinear import SemiLinearHedge
from .heston_implied import (
    HestonAdjustedHedge,
    DeltaVegaNeutralHedge,
    heston_adjusted_delta,
    delta_vega_neutral,
)
from .factory import create_hedger, load_hedger, display_name

__all__ = [
    "HedgeModel",
    "FitResult",
    "CP_CLASSES",
    "ols_qr",
    "regression_xy",
    "gross_return",
    "ZeroHedge",
    "BsDeltaHedge",
    "FixedHedge",
    "LinearHedge",
    "parse_sensitivities",
    "HullWhiteHedge",
    "SemiLinearHedge",
    "HestonAdjustedHedge",
    "DeltaVegaNeutralHedge",
    "heston_adjusted_delta",
    "delta_vega_neutral",
    "create_hedger",
    "load_hedger",
    "display_name",
]
