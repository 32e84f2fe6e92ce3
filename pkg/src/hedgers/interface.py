"""Abstract interface for hedging-ratio models."""

from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd

from src.errors import StateError

CP_CLASSES = {'calls': 0, 'puts': 1}


@dataclass
class FitResult:
    """Coefficients of one fitted class with their standard errors."""
    coefficients: np.ndarray
    standard_errors: np.ndarray
    residual_sse: float
    n_samples: int
    names: List[str] = field(default_factory=list)

    def __post_init__(self):
        self.coefficients = np.asarray(self.coefficients, dtype=float)
        self.standard_errors = np.asarray(self.standard_errors, dtype=float)
        if self.coefficients.shape != self.standard_errors.shape:
            raise ValueError("coefficients and standard_errors must have the same length")

    def to_dict(self) -> Dict[str, Any]:
        return {
            'names': list(self.names),
            'coefficients': self.coefficients.tolist(),
            'standard_errors': self.standard_errors.tolist(),
            'residual_sse': float(self.residual_sse),
            'n_samples': int(self.n_samples),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'FitResult':
        return cls(
            coefficients=np.array(data['coefficients'], dtype=float),
            standard_errors=np.array(data['standard_errors'], dtype=float),
            residual_sse=float(data['residual_sse']),
            n_samples=int(data['n_samples']),
            names=list(data.get('names', [])),
        )


class HedgeModel(ABC):
    """Base class for every non-neural hedging model.

    Subclasses set `variant` and implement fit() (may be a no-op) and
    hedge_ratio(). Fitted coefficients live in `fits`, keyed by cp class.
    """

    variant: str = ""
    requires_fit: bool = False
    instruments: int = 1  # 2 when the model also trades an ATM call

    def __init__(self, name: str):
        self.name = name
        self.fits: Dict[str, FitResult] = {}
        self.window_id: Optional[int] = None

    @abstractmethod
    def fit(self, train: pd.DataFrame) -> Dict[str, FitResult]:
        """Estimate coefficients per cp class on a normalized training table.

        Returns:
            Fitted classes, also stored in self.fits
        """
        pass

    @abstractmethod
    def hedge_ratio(self, table: pd.DataFrame) -> np.ndarray:
        """Hedging ratio for every row of a normalized table."""
        pass

    def positions(self, table: pd.DataFrame) -> tuple[np.ndarray, Optional[np.ndarray]]:
        """(underlying units, ATM-call units or None)."""
        return self.hedge_ratio(table), None

    def params(self) -> Dict[str, Any]:
        """Constructor settings recorded in the JSON document."""
        return {}

    def _require_fit(self, table: pd.DataFrame) -> None:
        if not self.requires_fit:
            return
        needed = {name for name, flag in CP_CLASSES.items() if (table['cp_flag'] == flag).any()}
        missing = needed - set(self.fits)
        if missing:
            raise StateError(f"not fitted for {sorted(missing)}", model=self.name)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'name': self.name,
            'variant': self.variant,
            'params': self.params(),
            'window_id': self.window_id,
            'fits': {cls: fit.to_dict() for cls, fit in self.fits.items()},
        }

    def coefficient_rows(self) -> List[Dict[str, Any]]:
        """Tidy rows (class, coefficient, estimate, standard error)."""
        rows = []
        for cls, fit in self.fits.items():
            for name, value, se in zip(fit.names, fit.coefficients, fit.standard_errors):
                rows.append({'model': self.name, 'window_id': self.window_id, 'cp_class': cls,
                             'coefficient': name, 'estimate': float(value), 'std_error': float(se),
                             'n_samples': fit.n_samples})
        return rows
