"""Linear regressions of the hedging ratio on BS sensitivities.

delta = a delta_BS + b Vega_BS + c Vanna_BS + d Gamma_BS, fitted per cp class
by minimizing sum (delta x - y)^2. A model without delta in its roster name
keeps delta_BS with its coefficient fixed at one.
"""

from typing import Any, Dict, List, Sequence

import numpy as np
import pandas as pd

from src.errors import ParameterError
from .interface import HedgeModel, FitResult, CP_CLASSES
from .ols import class_rows, ols_qr, regression_xy

SENSITIVITY_COLUMNS = {
    'delta': 'delta_bs',
    'vega': 'vega_bs',
    'gamma': 'gamma_bs',
    'vanna': 'vanna_bs',
}


def parse_sensitivities(name: str) -> List[str]:
    """'delta_vega_vanna' -> ['delta', 'vega', 'vanna']."""
    parts = [p for p in name.lower().split('_') if p]
    unknown = [p for p in parts if p not in SENSITIVITY_COLUMNS]
    if not parts or unknown or len(set(parts)) != len(parts):
        raise ParameterError(f"Not a sensitivity model name: {name!r}")
    return parts


class LinearHedge(HedgeModel):
    """Sensitivity regression, intercept off unless requested."""

    variant = "linear"
    requires_fit = True

    def __init__(self, name: str, sensitivities: Sequence[str] = None, intercept: bool = False):
        super().__init__(name)
        self.sensitivities = list(sensitivities) if sensitivities else parse_sensitivities(name)
        for s in self.sensitivities:
            if s not in SENSITIVITY_COLUMNS:
                raise ParameterError(f"Unknown sensitivity {s!r}")
        self.intercept = bool(intercept)

    @property
    def forces_delta(self) -> bool:
        """True when delta_BS enters with coefficient one."""
        return 'delta' not in self.sensitivities

    @property
    def coefficient_names(self) -> List[str]:
        return self.sensitivities + (['intercept'] if self.intercept else [])

    def params(self) -> Dict[str, Any]:
        return {'sensitivities': self.sensitivities, 'intercept': self.intercept}

    def _regressors(self, table: pd.DataFrame) -> np.ndarray:
        """Sensitivities per row (n, p); the intercept column is ones."""
        cols = [table[SENSITIVITY_COLUMNS[s]].to_numpy(dtype=float) for s in self.sensitivities]
        if self.intercept:
            cols.append(np.ones(len(table)))
        return np.column_stack(cols)

    def _offset(self, table: pd.DataFrame) -> np.ndarray:
        if self.forces_delta:
            return table['delta_bs'].to_numpy(dtype=float).copy()
        return np.zeros(len(table))

    def fit(self, train: pd.DataFrame) -> Dict[str, FitResult]:
        self.fits = {}
        for cls, flag in CP_CLASSES.items():
            rows = class_rows(train, flag)
            if rows.empty:
                continue
            x, y = regression_xy(rows)
            design = self._regressors(rows) * x[:, None]
            target = y - self._offset(rows) * x
            self.fits[cls] = ols_qr(design, target, self.coefficient_names, model=self.name)
        return self.fits

    def hedge_ratio(self, table: pd.DataFrame) -> np.ndarray:
        self._require_fit(table)
        ratio = self._offset(table)
        regressors = self._regressors(table)
        for cls, flag in CP_CLASSES.items():
            mask = table['cp_flag'].to_numpy() == flag
            if mask.any():
                ratio[mask] = ratio[mask] + regressors[mask] @ self.fits[cls].coefficients
        return ratio
