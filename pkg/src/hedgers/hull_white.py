"""Hull-White minimum-variance delta and its relaxed variant.

delta = delta_BS + Vega_BS / (sqrt(tau) S) (a + b delta_BS + c delta_BS^2).
The relaxed model estimates the delta_BS coefficient instead of fixing it at one.
"""

from typing import Any, Dict

import numpy as np
import pandas as pd

from .interface import HedgeModel, FitResult, CP_CLASSES
from .ols import class_rows, ols_qr, regression_xy


class HullWhiteHedge(HedgeModel):

    variant = "hull_white"
    requires_fit = True

    def __init__(self, name: str = "hull_white", relaxed: bool = False):
        super().__init__(name)
        self.relaxed = bool(relaxed)

    @property
    def coefficient_names(self):
        names = ['a', 'b', 'c']
        return (['delta'] + names) if self.relaxed else names

    def params(self) -> Dict[str, Any]:
        return {'relaxed': self.relaxed}

    def _regressors(self, table: pd.DataFrame) -> np.ndarray:
        delta = table['delta_bs'].to_numpy(dtype=float)
        scale = table['vega_bs'].to_numpy(dtype=float) / (
            np.sqrt(table['tau'].to_numpy(dtype=float)) * table['S0'].to_numpy(dtype=float))
        cols = [scale, scale * delta, scale * delta ** 2]
        if self.relaxed:
            cols.insert(0, delta)
        return np.column_stack(cols)

    def fit(self, train: pd.DataFrame) -> Dict[str, FitResult]:
        self.fits = {}
        for cls, flag in CP_CLASSES.items():
            rows = class_rows(train, flag)
            if rows.empty:
                continue
            x, y = regression_xy(rows)
            design = self._regressors(rows) * x[:, None]
            target = y if self.relaxed else y - rows['delta_bs'].to_numpy(dtype=float) * x
            self.fits[cls] = ols_qr(design, target, self.coefficient_names, model=self.name)
        return self.fits

    def hedge_ratio(self, table: pd.DataFrame) -> np.ndarray:
        self._require_fit(table)
        if self.relaxed:
            ratio = np.zeros(len(table))
        else:
            ratio = table['delta_bs'].to_numpy(dtype=float).copy()
        regressors = self._regressors(table)
        for cls, flag in CP_CLASSES.items():
            mask = table['cp_flag'].to_numpy() == flag
            if mask.any():
                ratio[mask] += regressors[mask] @ self.fits[cls].coefficients
        return ratio
