"""Hedges that need no fitting: zero, BS Delta and fixed multiples of it."""

from typing import Any, Dict

import numpy as np
import pandas as pd

from src.errors import ParameterError
from .interface import HedgeModel, FitResult


class ZeroHedge(HedgeModel):
    """Holds no underlying. Baseline for ratio-to-zero diagnostics."""

    variant = "zero"

    def __init__(self, name: str = "zero"):
        super().__init__(name)

    def fit(self, train: pd.DataFrame) -> Dict[str, FitResult]:
        return self.fits

    def hedge_ratio(self, table: pd.DataFrame) -> np.ndarray:
        return np.zeros(len(table))


class BsDeltaHedge(HedgeModel):
    """BS Delta at the contract's implied vol, as stored in delta_bs."""

    variant = "bs_delta"

    def __init__(self, name: str = "bs_delta"):
        super().__init__(name)

    def fit(self, train: pd.DataFrame) -> Dict[str, FitResult]:
        return self.fits

    def hedge_ratio(self, table: pd.DataFrame) -> np.ndarray:
        return table['delta_bs'].to_numpy(dtype=float).copy()


class FixedHedge(HedgeModel):
    """f_call * delta_bs for calls, f_put * delta_bs for puts."""

    variant = "fixed"

    def __init__(self, name: str = "fixed", f_call: float = 0.9, f_put: float = 1.1):
        super().__init__(name)
        if not (f_call > 0 and f_put > 0):
            raise ParameterError(f"fixed factors must be > 0, got {f_call}, {f_put}")
        self.f_call = float(f_call)
        self.f_put = float(f_put)

    def params(self) -> Dict[str, Any]:
        return {'f_call': self.f_call, 'f_put': self.f_put}

    def fit(self, train: pd.DataFrame) -> Dict[str, FitResult]:
        return self.fits

    def hedge_ratio(self, table: pd.DataFrame) -> np.ndarray:
        put = table['cp_flag'].to_numpy() == 1
        factor = np.where(put, self.f_put, self.f_call)
        return factor * table['delta_bs'].to_numpy(dtype=float)
