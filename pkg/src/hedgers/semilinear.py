"""Semi-linear benchmarks on moneyness and total implied vol.

kind 1: delta = a M + b sigma sqrt(tau) + c
kind 2: delta = N(a M + b sigma sqrt(tau) + c), minus one for puts
"""

from typing import Any, Dict

import numpy as np
import pandas as pd
from scipy.stats import norm

from src.errors import FitError, ParameterError
from .interface import HedgeModel, FitResult, CP_CLASSES
from .ols import class_rows, ols_qr, regression_xy

STEP_TOLERANCE = 1e-8
MAX_ITERATIONS = 200
INIT_CLIP = 1e-3
MIN_DAMPING = 2.0 ** -30

COEFFICIENT_NAMES = ['moneyness', 'total_vol', 'const']


def _features(table: pd.DataFrame) -> np.ndarray:
    return np.column_stack([
        table['moneyness'].to_numpy(dtype=float),
        table['sqrt_total_implied_variance'].to_numpy(dtype=float),
        np.ones(len(table)),
    ])


class SemiLinearHedge(HedgeModel):

    variant = "semilinear"
    requires_fit = True

    def __init__(self, name: str = None, kind: int = 1):
        if kind not in (1, 2):
            raise ParameterError(f"semilinear kind must be 1 or 2, got {kind}")
        super().__init__(name or f"semilinear_{kind}")
        self.kind = kind
        self.iterations: Dict[str, int] = {}

    def params(self) -> Dict[str, Any]:
        return {'kind': self.kind}

    def fit(self, train: pd.DataFrame) -> Dict[str, FitResult]:
        self.fits = {}
        for cls, flag in CP_CLASSES.items():
            rows = class_rows(train, flag)
            if rows.empty:
                continue
            x, y = regression_xy(rows)
            features = _features(rows)
            linear = ols_qr(features * x[:, None], y, COEFFICIENT_NAMES, model=self.name)
            if self.kind == 1:
                self.fits[cls] = linear
            else:
                self.fits[cls] = self._fit_probit(features, x, y, flag, linear.coefficients, cls)
        return self.fits

    def _fit_probit(self, features: np.ndarray, x: np.ndarray, y: np.ndarray, flag: int,
                    linear_coefficients: np.ndarray, cls: str) -> FitResult:
        """Damped Gauss-Newton on sum ((N(z) - flag) x - y)^2, z = features @ theta."""
        # Start from the kind-1 hedge pushed through the inverse normal
        start = np.clip(features @ linear_coefficients + flag, INIT_CLIP, 1.0 - INIT_CLIP)
        theta = ols_qr(features, norm.ppf(start), COEFFICIENT_NAMES, model=self.name).coefficients

        def residual(t):
            return (norm.cdf(features @ t) - flag) * x - y

        r = residual(theta)
        sse = float(r @ r)
        for iteration in range(1, MAX_ITERATIONS + 1):
            jacobian = (norm.pdf(features @ theta) * x)[:, None] * features
            step, *_ = np.linalg.lstsq(jacobian, -r, rcond=None)
            damping = 1.0
            while damping >= MIN_DAMPING:
                candidate = theta + damping * step
                r_new = residual(candidate)
                sse_new = float(r_new @ r_new)
                if sse_new <= sse:
                    break
                damping *= 0.5
            else:
                candidate, r_new, sse_new = theta, r, sse
            moved = float(np.linalg.norm(candidate - theta))
            theta, r, sse = candidate, r_new, sse_new
            if moved < STEP_TOLERANCE:
                self.iterations[cls] = iteration
                break
        else:
            raise FitError(f"Gauss-Newton did not converge in {MAX_ITERATIONS} iterations",
                           model=self.name, last_iterate=theta)

        n, p = features.shape
        jacobian = (norm.pdf(features @ theta) * x)[:, None] * features
        try:
            covariance = (sse / (n - p)) * np.linalg.inv(jacobian.T @ jacobian)
            standard_errors = np.sqrt(np.maximum(np.diag(covariance), 0.0))
        except np.linalg.LinAlgError:
            standard_errors = np.full(p, np.nan)
        return FitResult(coefficients=theta, standard_errors=standard_errors,
                         residual_sse=sse, n_samples=n, names=list(COEFFICIENT_NAMES))

    def hedge_ratio(self, table: pd.DataFrame) -> np.ndarray:
        self._require_fit(table)
        features = _features(table)
        flags = table['cp_flag'].to_numpy()
        ratio = np.zeros(len(table))
        for cls, flag in CP_CLASSES.items():
            mask = flags == flag
            if not mask.any():
                continue
            z = features[mask] @ self.fits[cls].coefficients
            ratio[mask] = z if self.kind == 1 else norm.cdf(z) - flag
        return ratio
