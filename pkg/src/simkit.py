"""Underlying price path simulation (Black-Scholes and Heston).

All randomness flows through path_rng(), a Philox counter-based generator
keyed by (master seed, path index), so paths can be produced in any order
or in parallel and still be bit-identical.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import pandas as pd

from src.errors import ParameterError, InputError

TRADING_DAYS = 253
DT_DAY = 1.0 / TRADING_DAYS


@dataclass(frozen=True)
class GbmParams:
    """Geometric Brownian motion parameters."""
    s0: float = 2000.0
    mu: float = 0.1
    sigma: float = 0.2

    def __post_init__(self):
        if not np.isfinite(self.s0) or self.s0 <= 0:
            raise ParameterError(f"GBM s0 must be positive, got {self.s0}")
        if not np.isfinite(self.sigma) or self.sigma < 0:
            raise ParameterError(f"GBM sigma must be non-negative, got {self.sigma}")
        if not np.isfinite(self.mu):
            raise ParameterError(f"GBM mu must be finite, got {self.mu}")


@dataclass(frozen=True)
class HestonParams:
    """Heston stochastic-volatility parameters (variance quantities per year)."""
    s0: float = 2000.0
    y0: float = 0.04
    theta: float = 0.04
    kappa: float = 5.0
    sigma_y: float = 0.3
    rho: float = -0.6

    def __post_init__(self):
        if not np.isfinite(self.s0) or self.s0 <= 0:
            raise ParameterError(f"Heston s0 must be positive, got {self.s0}")
        if self.y0 <= 0 or self.theta <= 0 or self.kappa <= 0:
            raise ParameterError(
                f"Heston y0, theta, kappa must be positive (y0={self.y0}, theta={self.theta}, kappa={self.kappa})"
            )
        if self.sigma_y < 0:
            raise ParameterError(f"Heston sigma_y must be non-negative, got {self.sigma_y}")
        if not -1.0 <= self.rho <= 1.0:
            raise ParameterError(f"Heston rho must lie in [-1, 1], got {self.rho}")


@dataclass
class PricePath:
    """A simulated underlying path sampled at trading-day boundaries.

    dates holds trading-day indices; a path branching off another continues
    its day numbering.
    """
    dates: np.ndarray
    spot: np.ndarray
    variance: Optional[np.ndarray] = None
    seed: int = 0
    steps_per_day: int = 1
    path_index: int = 0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.dates = np.asarray(self.dates, dtype=np.int64)
        self.spot = np.asarray(self.spot, dtype=float)
        if self.variance is not None:
            self.variance = np.asarray(self.variance, dtype=float)
        if len(self.spot) == 0 or len(self.dates) != len(self.spot):
            raise ParameterError("PricePath needs matching, non-empty dates and spot arrays")
        if np.any(np.diff(self.dates) <= 0):
            raise ParameterError("PricePath dates must be strictly increasing")
        if not np.all(self.spot > 0):
            raise ParameterError("PricePath spot must be strictly positive")
        if self.variance is not None:
            if len(self.variance) != len(self.spot):
                raise ParameterError("PricePath variance length must match spot")
            if np.any(self.variance < 0):
                raise ParameterError("PricePath variance must be non-negative")
        if self.steps_per_day < 1:
            raise ParameterError("steps_per_day must be positive")

    def __len__(self) -> int:
        return len(self.spot)

    @property
    def n_days(self) -> int:
        return len(self.spot) - 1

    def terminal_state(self) -> tuple[float, Optional[float]]:
        """Final (spot, variance), the starting point of a branching path."""
        var = None if self.variance is None else float(self.variance[-1])
        return float(self.spot[-1]), var

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            'day_index': self.dates,
            'spot': self.spot,
            'variance': self.variance if self.variance is not None else np.full(len(self.spot), np.nan),
        })

    def to_csv(self, path) -> None:
        self.to_frame().to_csv(path, index=False, float_format='%.17g')

    @classmethod
    def from_csv(cls, path, seed: int = 0, steps_per_day: int = 1) -> 'PricePath':
        """Read a path written by to_csv (empty variance column means GBM)."""
        try:
            frame = pd.read_csv(path)
        except (OSError, pd.errors.ParserError) as e:
            raise InputError(f"Cannot read path {path}: {e}") from e
        missing = {'day_index', 'spot', 'variance'} - set(frame.columns)
        if missing:
            raise InputError(f"Path file {path} lacks columns: {sorted(missing)}")
        variance = frame['variance'].to_numpy(dtype=float)
        variance = None if np.all(np.isnan(variance)) else variance
        return cls(frame['day_index'].to_numpy(), frame['spot'].to_numpy(dtype=float), variance,
                   seed=seed, steps_per_day=steps_per_day)


def path_rng(seed: int, path_index: int = 0) -> np.random.Generator:
    """Independent Philox stream for one path under a master seed."""
    if seed < 0 or path_index < 0:
        raise ParameterError("seed and path_index must be non-negative")
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, path_index])))


def _check_days(n_days: int) -> None:
    if int(n_days) != n_days or n_days < 1:
        raise ParameterError(f"n_days must be a positive integer, got {n_days}")


def simulate_gbm(params: GbmParams, n_days: int, seed: int,
                 path_index: int = 0, start_day: int = 0) -> PricePath:
    """Simulate a GBM path with the exact lognormal daily transition.

    Args:
        params: GBM parameters; s0 is the spot on start_day
        n_days: Number of daily steps (path holds n_days + 1 points)
        seed: Master seed
        path_index: Stream index under the master seed
        start_day: Trading-day index of the first point

    Returns:
        PricePath without variance
    """
    _check_days(n_days)
    rng = path_rng(seed, path_index)
    z = rng.standard_normal(n_days)
    log_steps = (params.mu - 0.5 * params.sigma ** 2) * DT_DAY + params.sigma * np.sqrt(DT_DAY) * z
    log_spot = np.log(params.s0) + np.concatenate(([0.0], np.cumsum(log_steps)))
    return PricePath(
        dates=np.arange(start_day, start_day + n_days + 1),
        spot=np.exp(log_spot),
        seed=seed,
        steps_per_day=1,
        path_index=path_index,
        meta={'model': 'bs', 'mu': params.mu, 'sigma': params.sigma},
    )


def simulate_gbm_paths(params: GbmParams, n_days: int, n_paths: int, seed: int,
                       batch_index: int = 0) -> np.ndarray:
    """Vectorized GBM batch; returns spots shaped (n_paths, n_days + 1)."""
    _check_days(n_days)
    rng = path_rng(seed, batch_index)
    z = rng.standard_normal((n_paths, n_days))
    log_steps = (params.mu - 0.5 * params.sigma ** 2) * DT_DAY + params.sigma * np.sqrt(DT_DAY) * z
    log_spot = np.log(params.s0) + np.concatenate((np.zeros((n_paths, 1)), np.cumsum(log_steps, axis=1)), axis=1)
    return np.exp(log_spot)


def _heston_days(params: HestonParams, s: np.ndarray, y: np.ndarray, n_days: int,
                 steps_per_day: int, scheme: str, rng: np.random.Generator):
    """Advance arrays of (spot, variance) over n_days; returns day-boundary arrays."""
    if scheme not in ("euler", "milstein"):
        raise ParameterError(f"Unknown Heston scheme {scheme!r}")
    dt = DT_DAY / steps_per_day
    sqrt_dt = np.sqrt(dt)
    rho_bar = np.sqrt(1.0 - params.rho ** 2)
    k, th, sy = params.kappa, params.theta, params.sigma_y

    log_s = np.log(s).astype(float)
    y = y.astype(float)
    spots = np.empty((len(log_s), n_days + 1))
    variances = np.empty((len(log_s), n_days + 1))
    spots[:, 0] = np.exp(log_s)
    variances[:, 0] = np.maximum(y, 0.0)

    for day in range(1, n_days + 1):
        for _ in range(steps_per_day):
            z1 = rng.standard_normal(len(log_s))
            z2 = rng.standard_normal(len(log_s))
            dw_y = sqrt_dt * z1
            dw_s = sqrt_dt * (params.rho * z1 + rho_bar * z2)
            y_pos = np.maximum(y, 0.0)
            sqrt_y = np.sqrt(y_pos)
            log_s = log_s - 0.5 * y_pos * dt + sqrt_y * dw_s
            if scheme == "euler":
                # Full truncation
                y = y + k * (th - y_pos) * dt + sy * sqrt_y * dw_y
            else:
                y = y_pos + k * (th - y_pos) * dt + sy * sqrt_y * dw_y + 0.25 * sy ** 2 * (dw_y ** 2 - dt)
                y = np.maximum(y, 0.0)
        spots[:, day] = np.exp(log_s)
        variances[:, day] = np.maximum(y, 0.0)
    return spots, variances


def simulate_heston(params: HestonParams, n_days: int, steps_per_day: int = 10,
                    scheme: str = "euler", seed: int = 0,
                    path_index: int = 0, start_day: int = 0) -> PricePath:
    """Simulate one Heston path with correlated Euler or Milstein substeps.

    The spot is advanced in logs. Euler uses full truncation; Milstein adds
    the 1/4 sigma_y^2 (dW^2 - dt) correction with absorption at zero. Stored
    day-boundary variances are the truncated values used for the next step.

    Args:
        params: Heston parameters; (s0, y0) is the state on start_day
        n_days: Number of trading days
        steps_per_day: Substeps per day
        scheme: 'euler' or 'milstein'
        seed: Master seed
        path_index: Stream index under the master seed
        start_day: Trading-day index of the first point

    Returns:
        PricePath with per-day variance
    """
    _check_days(n_days)
    if steps_per_day < 1:
        raise ParameterError("steps_per_day must be positive")
    rng = path_rng(seed, path_index)
    spots, variances = _heston_days(params, np.array([params.s0]), np.array([params.y0]),
                                    n_days, steps_per_day, scheme, rng)
    return PricePath(
        dates=np.arange(start_day, start_day + n_days + 1),
        spot=spots[0],
        variance=variances[0],
        seed=seed,
        steps_per_day=steps_per_day,
        path_index=path_index,
        meta={'model': 'heston', 'scheme': scheme},
    )


def simulate_heston_paths(params: HestonParams, n_days: int, n_paths: int, seed: int,
                          steps_per_day: int = 10, scheme: str = "euler",
                          batch_index: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized Heston batch for Monte-Carlo checks.

    Returns:
        (spots, variances), each shaped (n_paths, n_days + 1)
    """
    _check_days(n_days)
    rng = path_rng(seed, batch_index)
    return _heston_days(params, np.full(n_paths, params.s0), np.full(n_paths, params.y0),
                        n_days, steps_per_day, scheme, rng)
