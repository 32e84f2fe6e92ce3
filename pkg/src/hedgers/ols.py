"""Least squares by QR decomposition, and the one-period regression variables."""

from typing import Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import scipy.linalg

from src.errors import FitError
from .interface import FitResult

RANK_TOLERANCE = 1e-10


def gross_return(table: pd.DataFrame) -> np.ndarray:
    """R = 1 + r_onr * delta_t per row."""
    return 1.0 + table['r_onr'].to_numpy(dtype=float) * table['delta_t'].to_numpy(dtype=float)


def regression_xy(table: pd.DataFrame) -> Tuple[np.ndarray, np.ndarray]:
    """x = 100 (S1/S0 - R) and y = 100/S0 (C1 - R C0).

    The normalized hedged value of a ratio delta is delta * x - y.
    """
    S0 = table['S0'].to_numpy(dtype=float)
    R = gross_return(table)
    x = 100.0 * (table['S1'].to_numpy(dtype=float) / S0 - R)
    y = 100.0 / S0 * (table['C1'].to_numpy(dtype=float) - R * table['C0'].to_numpy(dtype=float))
    return x, y


def ols_qr(X: np.ndarray, y: np.ndarray, names: Sequence[str],
           model: Optional[str] = None) -> FitResult:
    """OLS without implicit intercept.

    Rank is checked with a column-pivoted QR; coefficients come from the
    triangular solve R b = Q'y and standard errors from s^2 (X'X)^-1 with
    s^2 = SSE / (n - p).

    Args:
        X: Design matrix (n, p)
        y: Target (n,)
        names: Column names, used in errors and reports
        model: Model name for error messages

    Raises:
        FitError: Too few samples, non-finite data or rank-deficient design
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, p = X.shape
    if n < 2 * p:
        raise FitError(f"need at least {2 * p} samples for {p} coefficients, got {n}", model=model)
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise FitError("design or target contains non-finite values", model=model)

    _, r_piv, pivot = scipy.linalg.qr(X, mode='economic', pivoting=True)
    diag = np.abs(np.diag(r_piv))
    rank = int(np.sum(diag > RANK_TOLERANCE * max(diag[0], 1e-300))) if p else 0
    if rank < p:
        collinear = [names[i] for i in pivot[rank:]]
        raise FitError("rank-deficient design", model=model, columns=collinear)

    q, r = np.linalg.qr(X, mode='reduced')
    coefficients = scipy.linalg.solve_triangular(r, q.T @ y)
    residuals = y - X @ coefficients
    sse = float(residuals @ residuals)
    dof = n - p
    r_inv = scipy.linalg.solve_triangular(r, np.eye(p))
    covariance = (sse / dof) * (r_inv @ r_inv.T)
    standard_errors = np.sqrt(np.maximum(np.diag(covariance), 0.0))
    return FitResult(coefficients=coefficients, standard_errors=standard_errors,
                     residual_sse=sse, n_samples=n, names=list(names))


def class_rows(table: pd.DataFrame, flag: int) -> pd.DataFrame:
    return table.loc[table['cp_flag'].to_numpy() == flag]
