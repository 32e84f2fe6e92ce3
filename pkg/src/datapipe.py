"""Sample tables: construction from simulated paths, cleaning, normalization,
window splitting and CSV interchange.

One row is one option on one day, observed again delta_t later.
"""

from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
import pandas as pd

from config import CleaningConfig
from sample_schema import PRICE_COLUMNS, REQUIRED_COLUMNS, ordered
from src.errors import ConfigurationError, InputError
from src.listings import TradingCalendar, STRIKE_STEP
from src.pricer import bs_greeks, bs_price, heston_price, heston_delta_vega, implied_vol_array
from src.rule_engine import CleaningReport, RuleEngine
from src.simkit import GbmParams, HestonParams, PricePath, TRADING_DAYS

ATM_TAU = 1.0 / 12.0
VARIANCE_FLOOR = 1e-10
NORMALIZED_SPOT = 100.0
# Build-time drop reasons reported under the cleaning rule they stand in for
PREFILTER_RULES = {'moneyness_prefilter': 'Moneyness Range', 'otm_prefilter': 'In The Money'}


def _intrinsic(S: np.ndarray, K: np.ndarray, put: np.ndarray) -> np.ndarray:
    return np.where(put, np.maximum(K - S, 0.0), np.maximum(S - K, 0.0))


def _sample_rows(path: PricePath, contracts: pd.DataFrame, horizon: int):
    """Expand (contract, live day) pairs whose horizon end is still live and on the path."""
    d0, d_end = int(path.dates[0]), int(path.dates[-1])
    first = np.maximum(contracts['first_day'].to_numpy(dtype=np.int64), d0)
    last = contracts['last_day'].to_numpy(dtype=np.int64)
    live_end = np.minimum(last, d_end)
    n_live = np.maximum(live_end - first + 1, 0)
    n_valid = np.maximum(np.minimum(last, d_end) - horizon - first + 1, 0)
    n_horizon = np.maximum(live_end - np.maximum(first, last - horizon + 1) + 1, 0)
    drops = {
        'horizon': int(n_horizon.sum()),
        'path_end': int((n_live - n_valid - n_horizon).sum()),
    }
    contract_idx = np.repeat(np.arange(len(contracts)), n_valid)
    starts = np.repeat(np.cumsum(n_valid) - n_valid, n_valid)
    day = first[contract_idx] + (np.arange(len(contract_idx)) - starts)
    return contract_idx, day, drops


def build_samples(path: PricePath, contracts: pd.DataFrame, model: Union[GbmParams, HestonParams],
                  horizon_days: int, r_onr: float, start_date, set_id: int = 0,
                  moneyness_range: Optional[Tuple[float, float]] = None,
                  otm_only: bool = False) -> pd.DataFrame:
    """Build the sample table of one path.

    Prices come from Black-Scholes at the model sigma (implied vol = sigma)
    or from the Heston pricer at the path variance (implied vol by
    inversion, NaN when the price is not invertible). A contract whose
    expiry falls inside the horizon contributes no row for that day; at
    expiry C1 is the payoff. Drop counts are stored in
    table.attrs['build_drops'].

    Args:
        path: Underlying path
        contracts: Universe listed on this path (generate_option_universe)
        model: GbmParams or HestonParams used to price
        horizon_days: Hedging period in trading days
        r_onr: Overnight rate
        start_date: Calendar date of day 0
        set_id: 0 for in-sample, 1..n for out-of-sample sets
        moneyness_range: Skip rows outside [low, high] before pricing
        otm_only: Skip in-the-money rows before pricing

    Returns:
        Sample table in original currency units (price_scale = 1)
    """
    if horizon_days < 1:
        raise ConfigurationError(f"horizon must be at least one day, got {horizon_days}")
    contract_idx, day, drops = _sample_rows(path, contracts, horizon_days)

    d0 = int(path.dates[0])
    S0 = path.spot[day - d0]
    S1 = path.spot[day - d0 + horizon_days]
    K = contracts['strike'].to_numpy(dtype=float)[contract_idx]
    put = (contracts['kind'].to_numpy() == 'put')[contract_idx]
    last = contracts['last_day'].to_numpy(dtype=np.int64)[contract_idx]
    moneyness = S0 / K

    keep = np.ones(len(day), dtype=bool)
    drops['moneyness_prefilter'] = 0
    drops['otm_prefilter'] = 0
    if moneyness_range is not None:
        outside = (moneyness < moneyness_range[0]) | (moneyness > moneyness_range[1])
        drops['moneyness_prefilter'] = int(outside.sum())
        keep &= ~outside
    if otm_only:
        itm = keep & np.where(put, moneyness < 1.0, moneyness > 1.0)
        drops['otm_prefilter'] = int(itm.sum())
        keep &= ~itm
    contract_idx, day, S0, S1, K, put, last, moneyness = (
        v[keep] for v in (contract_idx, day, S0, S1, K, put, last, moneyness)
    )

    tau0 = (last - day) / TRADING_DAYS
    tau1 = (last - day - horizon_days) / TRADING_DAYS
    live1 = tau1 > 0
    n = len(day)
    C1 = _intrinsic(S1, K, put)
    iv1 = np.full(n, np.nan)
    extra: Dict[str, np.ndarray] = {}

    if isinstance(model, HestonParams):
        Y0 = np.maximum(path.variance[day - d0], VARIANCE_FLOOR)
        Y1 = np.maximum(path.variance[day - d0 + horizon_days], VARIANCE_FLOOR)
        C0 = np.asarray(heston_price(model, S0, Y0, K, tau0, 0.0, put)) if n else np.empty(0)
        if np.any(live1):
            C1[live1] = heston_price(model, S1[live1], Y1[live1], K[live1], tau1[live1], 0.0, put[live1])
        iv0 = implied_vol_array(C0, S0, K, tau0, 0.0, put)
        if np.any(live1):
            iv1[live1] = implied_vol_array(C1[live1], S1[live1], K[live1], tau1[live1], 0.0, put[live1])
        if n:
            delta_hs, nu_hs = heston_delta_vega(model, S0, Y0, K, tau0, 0.0, put)
        else:
            delta_hs, nu_hs = np.empty(0), np.empty(0)
        extra = {'Y0': Y0, 'delta_hs': np.asarray(delta_hs), 'nu_hs': np.asarray(nu_hs)}
        extra.update(_atm_columns(model, path, day, horizon_days))
    else:
        sigma = model.sigma
        C0 = np.asarray(bs_price(S0, K, tau0, sigma, 0.0, put)) if n else np.empty(0)
        if np.any(live1):
            C1[live1] = bs_price(S1[live1], K[live1], tau1[live1], sigma, 0.0, put[live1])
        iv0 = np.full(n, sigma)
        iv1[live1] = sigma

    greeks = {name: np.full(n, np.nan) for name in ('delta_bs', 'vega_bs', 'gamma_bs', 'vanna_bs')}
    ok = np.isfinite(iv0) & (iv0 > 0)
    if np.any(ok):
        quote = bs_greeks(S0[ok], K[ok], tau0[ok], iv0[ok], 0.0, put[ok])
        greeks['delta_bs'][ok] = quote.delta
        greeks['vega_bs'][ok] = quote.vega
        greeks['gamma_bs'][ok] = quote.gamma
        greeks['vanna_bs'][ok] = quote.vanna

    calendar = TradingCalendar(start_date)
    table = pd.DataFrame({
        'index': np.arange(n, dtype=np.int64),
        'date': calendar.date_of(day).astype(str),
        'day': day.astype(np.int64),
        'set_id': np.full(n, set_id, dtype=np.int64),
        'contract_id': contracts['id'].to_numpy()[contract_idx],
        'expiry': contracts['expiry'].dt.strftime('%Y-%m-%d').to_numpy()[contract_idx],
        'sqrt_total_implied_variance': iv0 * np.sqrt(tau0),
        'moneyness': moneyness,
        **greeks,
        'implied_vol': iv0,
        'implied_vol_1': iv1,
        'S0': S0,
        'S1': S1,
        'C0': C0,
        'r_onr': np.full(n, r_onr),
        'cp_flag': put.astype(np.int64),
        'tau': tau0,
        'r': np.zeros(n),
        'strike': K,
        'delta_t': np.full(n, horizon_days / TRADING_DAYS),
        'price_scale': np.ones(n),
        **extra,
        'C1': C1,
    })
    table = table[ordered(table.columns)]
    table = table.sort_values(['day', 'contract_id'], kind='mergesort').reset_index(drop=True)
    table['index'] = np.arange(len(table), dtype=np.int64)
    table.attrs['build_drops'] = drops
    return table


def _atm_columns(model: HestonParams, path: PricePath, day: np.ndarray, horizon: int) -> Dict[str, np.ndarray]:
    """One-month ATM call per day, at the strike nearest spot."""
    if len(day) == 0:
        return {k: np.empty(0) for k in ('delta_hs_atm', 'nu_hs_atm', 'C0_atm', 'C1_atm')}
    d0 = int(path.dates[0])
    days, inverse = np.unique(day, return_inverse=True)
    S0 = path.spot[days - d0]
    S1 = path.spot[days - d0 + horizon]
    Y0 = np.maximum(path.variance[days - d0], VARIANCE_FLOOR)
    Y1 = np.maximum(path.variance[days - d0 + horizon], VARIANCE_FLOOR)
    K = np.round(S0 / STRIKE_STEP) * STRIKE_STEP
    tau1 = ATM_TAU - horizon / TRADING_DAYS
    C0 = np.asarray(heston_price(model, S0, Y0, K, ATM_TAU, 0.0, 'call'))
    C1 = np.asarray(heston_price(model, S1, Y1, K, tau1, 0.0, 'call'))
    delta, nu = heston_delta_vega(model, S0, Y0, K, ATM_TAU, 0.0, 'call')
    return {
        'delta_hs_atm': np.asarray(delta)[inverse],
        'nu_hs_atm': np.asarray(nu)[inverse],
        'C0_atm': C0[inverse],
        'C1_atm': C1[inverse],
    }


def clean(table: pd.DataFrame, rules: Union[RuleEngine, CleaningConfig],
          log_manager=None) -> Tuple[pd.DataFrame, CleaningReport]:
    """Remove rows failing any enabled cleaning rule.

    Args:
        table: Sample table
        rules: A configured RuleEngine, or the CleaningConfig to build one
        log_manager: Receives rule-level DEBUG events when building an engine

    Returns:
        (retained table, CleaningReport)
    """
    if isinstance(rules, CleaningConfig):
        from rules import setup_rules
        engine = RuleEngine(log_manager)
        setup_rules(engine, rules)
    else:
        engine = rules
    return engine.evaluate(table)


def normalize(table: pd.DataFrame) -> pd.DataFrame:
    """Rescale every row so S0 = 100.

    Prices and strike scale by 100/S0, Vega and nu with them, Gamma
    inversely; Delta, Vanna, moneyness and implied vol are scale free.
    price_scale tracks the original currency per normalized unit, so
    applying normalize twice equals applying it once.
    """
    if not np.all(table['S0'].to_numpy(dtype=float) > 0):
        raise InputError("normalize needs S0 > 0 on every row")
    out = table.copy()
    factor = NORMALIZED_SPOT / out['S0'].to_numpy(dtype=float)
    for column in PRICE_COLUMNS:
        if column in out.columns:
            out[column] = out[column].to_numpy(dtype=float) * factor
    out['S0'] = NORMALIZED_SPOT
    for column in ('vega_bs', 'nu_hs', 'nu_hs_atm'):
        if column in out.columns:
            out[column] = out[column].to_numpy(dtype=float) * factor
    if 'gamma_bs' in out.columns:
        out['gamma_bs'] = out['gamma_bs'].to_numpy(dtype=float) / factor
    scale = out['price_scale'].to_numpy(dtype=float) if 'price_scale' in out.columns else np.ones(len(out))
    out['price_scale'] = scale / factor
    return out


def bucket_moneyness(table: pd.DataFrame, low: float = 0.95, high: float = 1.05) -> Tuple[pd.DataFrame, pd.DataFrame]:
    """Split into near-the-money (low <= M <= high) and the rest."""
    m = table['moneyness'].to_numpy(dtype=float)
    near = (m >= low) & (m <= high)
    return table.loc[near].reset_index(drop=True), table.loc[~near].reset_index(drop=True)


@dataclass(frozen=True)
class WindowSplit:
    """Train/validation/test day ranges, each half-open [start, end)."""
    window_id: int
    train: Tuple[int, int]
    validation: Tuple[int, int]
    test: Tuple[int, int]
    test_sets: Tuple[int, ...] = ()

    def __post_init__(self):
        if not (self.train[0] < self.train[1] <= self.validation[0] < self.validation[1]
                <= self.test[0] < self.test[1]):
            raise ConfigurationError(f"Window {self.window_id} ranges are not chronological")

    def to_row(self) -> Dict:
        return {
            'window_id': self.window_id,
            'train_start': self.train[0], 'train_end': self.train[1],
            'val_start': self.validation[0], 'val_end': self.validation[1],
            'test_start': self.test[0], 'test_end': self.test[1],
            'test_sets': ";".join(str(s) for s in self.test_sets),
        }

    @classmethod
    def from_row(cls, row) -> 'WindowSplit':
        sets = str(row['test_sets']) if pd.notna(row['test_sets']) else ""
        return cls(
            window_id=int(row['window_id']),
            train=(int(row['train_start']), int(row['train_end'])),
            validation=(int(row['val_start']), int(row['val_end'])),
            test=(int(row['test_start']), int(row['test_end'])),
            test_sets=tuple(int(s) for s in sets.split(";") if s),
        )


def split_windows(table: pd.DataFrame, mode: str = "rolling", *,
                  train_days: int = 720, val_days: int = 180, test_days: int = 180, roll_days: int = 180,
                  in_sample_days: int = 450, sim_train_days: int = 360) -> List[WindowSplit]:
    """Chronological train/validation/test windows.

    rolling: 720/180/180-day windows shifted by 180 days.
    single: one window splitting the whole span 4:1:1.
    simulation: in-sample set 0 split at sim_train_days (360/90), tested on
        every out-of-sample set (set_id >= 1).

    Raises:
        ConfigurationError: Span too short or unknown mode
    """
    if table.empty:
        raise ConfigurationError("Cannot split an empty table")
    if mode == "simulation":
        in_sample = table.loc[table['set_id'] == 0]
        out_sample = table.loc[table['set_id'] > 0]
        if in_sample.empty or out_sample.empty:
            raise ConfigurationError("simulation split needs in-sample and out-of-sample sets")
        d0 = int(in_sample['day'].min())
        test_start = d0 + in_sample_days
        test = (test_start, max(test_start + 1, int(out_sample["day"].max()) + 1))
        sets = tuple(sorted(int(s) for s in out_sample['set_id'].unique()))
        return [WindowSplit(0, (d0, d0 + sim_train_days), (d0 + sim_train_days, d0 + in_sample_days), test, sets)]

    d0 = int(table['day'].min())
    span = int(table['day'].max()) - d0 + 1
    if mode == "rolling":
        window = train_days + val_days + test_days
        if span < window:
            raise ConfigurationError(f"rolling windows need {window} days, table spans {span}")
        count = (span - window) // roll_days + 1
        splits = []
        for w in range(count):
            start = d0 + w * roll_days
            splits.append(WindowSplit(
                w,
                (start, start + train_days),
                (start + train_days, start + train_days + val_days),
                (start + train_days + val_days, start + window),
            ))
        return splits
    if mode == "single":
        if span < 6:
            raise ConfigurationError(f"single split needs at least 6 days, table spans {span}")
        n_train = span * 4 // 6
        n_val = span // 6
        return [WindowSplit(0, (d0, d0 + n_train), (d0 + n_train, d0 + n_train + n_val),
                            (d0 + n_train + n_val, d0 + span))]
    raise ConfigurationError(f"Unknown split mode {mode!r}")


def window_tables(table: pd.DataFrame, split: WindowSplit) -> Tuple[pd.DataFrame, pd.DataFrame, pd.DataFrame]:
    """Rows of one window as (train, validation, test)."""
    day = table['day'].to_numpy()

    def between(bounds):
        return (day >= bounds[0]) & (day < bounds[1])

    if split.test_sets:
        in_sample = table['set_id'].to_numpy() == 0
        test_mask = np.isin(table['set_id'].to_numpy(), split.test_sets)
    else:
        in_sample = np.ones(len(table), dtype=bool)
        test_mask = between(split.test)
    return (
        table.loc[in_sample & between(split.train)].reset_index(drop=True),
        table.loc[in_sample & between(split.validation)].reset_index(drop=True),
        table.loc[test_mask].reset_index(drop=True),
    )


def write_samples(table: pd.DataFrame, path) -> None:
    table[ordered(table.columns)].to_csv(path, index=False, float_format='%.17g', encoding='utf-8')


def read_samples(path) -> pd.DataFrame:
    """Read samples.csv.

    Raises:
        InputError: Unreadable file, missing columns or non-numeric values
    """
    try:
        table = pd.read_csv(path, dtype={'contract_id': str, 'date': str, 'expiry': str}, encoding='utf-8')
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise InputError(f"Cannot read samples {path}: {e}") from e
    missing = [c for c in REQUIRED_COLUMNS if c not in table.columns]
    if missing:
        raise InputError(f"{path} lacks columns: {missing}")
    text_columns = {'contract_id', 'date', 'expiry'}
    for column in table.columns:
        if column in text_columns:
            continue
        try:
            table[column] = pd.to_numeric(table[column])
        except (ValueError, TypeError) as e:
            raise InputError(f"{path}: column {column} is not numeric") from e
    return table


def write_cleaning_report(report: CleaningReport, path) -> None:
    report.to_frame().to_csv(path, index=False, encoding='utf-8')


def write_windows(splits: List[WindowSplit], path) -> None:
    pd.DataFrame([s.to_row() for s in splits]).to_csv(path, index=False, encoding='utf-8')


def read_windows(path) -> List[WindowSplit]:
    try:
        frame = pd.read_csv(path, dtype={'test_sets': str})
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise InputError(f"Cannot read windows {path}: {e}") from e
    return [WindowSplit.from_row(row) for _, row in frame.iterrows()]


def drops_frame(drops: Dict[str, int]) -> pd.DataFrame:
    return pd.DataFrame([{'reason': k, 'count': v} for k, v in drops.items()], columns=['reason', 'count'])


def read_drops(path) -> Dict[str, int]:
    try:
        frame = pd.read_csv(path)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise InputError(f"Cannot read drop counts {path}: {e}") from e
    return {str(r): int(c) for r, c in zip(frame['reason'], frame['count'])}
