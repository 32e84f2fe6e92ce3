"""Hedges implied by the Heston model that generated the data."""

from dataclasses import asdict
from typing import Any, Dict, Optional

import numpy as np
import pandas as pd

from src.errors import InputError
from src.pricer import heston_delta_vega
from src.simkit import HestonParams
from .interface import HedgeModel, FitResult


def _model_greeks(params: HestonParams, table: pd.DataFrame) -> tuple[np.ndarray, np.ndarray]:
    """delta_hs and nu_hs from the table, recomputed from Y0 when absent."""
    if 'Y0' not in table.columns or table['Y0'].isna().any():
        raise InputError("Heston hedges need the variance state Y0 on every sample")
    if {'delta_hs', 'nu_hs'} <= set(table.columns):
        return table['delta_hs'].to_numpy(dtype=float), table['nu_hs'].to_numpy(dtype=float)
    kind = table['cp_flag'].to_numpy() == 1
    delta, nu = heston_delta_vega(
        params,
        table['S0'].to_numpy(dtype=float),
        table['Y0'].to_numpy(dtype=float),
        table['strike'].to_numpy(dtype=float),
        table['tau'].to_numpy(dtype=float),
        table['r'].to_numpy(dtype=float),
        kind,
    )
    return np.asarray(delta, dtype=float), np.asarray(nu, dtype=float)


def heston_adjusted_delta(table: pd.DataFrame, params: HestonParams) -> np.ndarray:
    """delta_HS + nu_HS rho sigma_Y / S0."""
    delta, nu = _model_greeks(params, table)
    return delta + nu * params.rho * params.sigma_y / table['S0'].to_numpy(dtype=float)


def delta_vega_neutral(table: pd.DataFrame, params: HestonParams) -> tuple[np.ndarray, np.ndarray]:
    """Units of underlying and of the one-month ATM call that cancel model Vega.

    Returns:
        (delta_HS - eta delta_HS_atm, eta) with eta = nu_HS / nu_HS_atm
    """
    missing = [c for c in ('delta_hs_atm', 'nu_hs_atm', 'C0_atm', 'C1_atm') if c not in table.columns]
    if missing:
        raise InputError(f"Delta-Vega-neutral hedge needs ATM columns: {missing}")
    delta, nu = _model_greeks(params, table)
    eta = nu / table['nu_hs_atm'].to_numpy(dtype=float)
    return delta - eta * table['delta_hs_atm'].to_numpy(dtype=float), eta


class _HestonHedge(HedgeModel):

    def __init__(self, name: str, params: Optional[HestonParams] = None):
        super().__init__(name)
        self.heston = params or HestonParams()

    def params(self) -> Dict[str, Any]:
        return {'heston': asdict(self.heston)}

    def fit(self, train: pd.DataFrame) -> Dict[str, FitResult]:
        return self.fits


class HestonAdjustedHedge(_HestonHedge):

    variant = "heston_adjusted"

    def __init__(self, name: str = "heston_adjusted", params: Optional[HestonParams] = None):
        super().__init__(name, params)

    def hedge_ratio(self, table: pd.DataFrame) -> np.ndarray:
        return heston_adjusted_delta(table, self.heston)


class DeltaVegaNeutralHedge(_HestonHedge):
    """Two-instrument hedge: underlying plus the one-month ATM call."""

    variant = "delta_vega_neutral"
    instruments = 2

    def __init__(self, name: str = "delta_vega_neutral", params: Optional[HestonParams] = None):
        super().__init__(name, params)

    def hedge_ratio(self, table: pd.DataFrame) -> np.ndarray:
        return delta_vega_neutral(table, self.heston)[0]

    def positions(self, table: pd.DataFrame) -> tuple[np.ndarray, Optional[np.ndarray]]:
        return delta_vega_neutral(table, self.heston)
