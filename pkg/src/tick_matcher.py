"""Tick-data ingestion: pair each option trade with its end-of-period price.

A trade at time t is matched to
- the volume-weighted underlying price at or before t, and
- the first trade of the same contract inside [t + delta_t, t + delta_t + tolerance].
Trades without a match inside the tolerance window are dropped and counted.
Trades sharing a timestamp are first aggregated into one volume-weighted trade.
"""

from typing import Dict, Tuple

import numpy as np
import pandas as pd

from sample_schema import ordered
from src.errors import InputError, ConfigurationError
from src.pricer import bs_greeks, implied_vol_array
from src.simkit import TRADING_DAYS

TRADE_COLUMNS = ('timestamp', 'contract_id', 'price', 'volume')
CONTRACT_COLUMNS = ('id', 'kind', 'strike', 'expiry')

HORIZONS = {
    '1h': (pd.Timedelta(hours=1), 1.0 / (TRADING_DAYS * 24)),
    '1d': (pd.offsets.BDay(1), 1.0 / TRADING_DAYS),
    '2d': (pd.offsets.BDay(2), 2.0 / TRADING_DAYS),
}


def read_trades(path) -> pd.DataFrame:
    """Read the generic tick CSV: timestamp (microseconds), contract id, price, volume."""
    try:
        trades = pd.read_csv(path, dtype={'contract_id': str})
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise InputError(f"Cannot read trades {path}: {e}") from e
    _require(trades, TRADE_COLUMNS, path)
    return trades


def read_contracts(path) -> pd.DataFrame:
    """Read contract metadata: id, kind (call/put), strike, expiry (ISO date)."""
    try:
        contracts = pd.read_csv(path, dtype={'id': str})
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise InputError(f"Cannot read contracts {path}: {e}") from e
    _require(contracts, CONTRACT_COLUMNS, path)
    if not contracts['kind'].isin(['call', 'put']).all():
        raise InputError(f"{path}: kind must be 'call' or 'put'")
    try:
        contracts['expiry'] = pd.to_datetime(contracts['expiry'])
        contracts['strike'] = pd.to_numeric(contracts['strike'])
    except (ValueError, TypeError) as e:
        raise InputError(f"{path}: bad strike or expiry: {e}") from e
    return contracts


def _require(frame: pd.DataFrame, columns, source) -> None:
    missing = [c for c in columns if c not in frame.columns]
    if missing:
        raise InputError(f"{source} lacks columns: {missing}")


def aggregate_simultaneous(trades: pd.DataFrame) -> pd.DataFrame:
    """Merge trades of one instrument at one timestamp into a VWAP trade."""
    weighted = trades.assign(notional=trades['price'] * trades['volume'])
    grouped = weighted.groupby(['contract_id', 'time'], sort=False, as_index=False).agg(
        notional=('notional', 'sum'), volume=('volume', 'sum'), price=('price', 'mean'))
    positive = grouped['volume'] > 0
    grouped.loc[positive, 'price'] = grouped.loc[positive, 'notional'] / grouped.loc[positive, 'volume']
    return grouped.drop(columns='notional').sort_values(['time', 'contract_id'], kind='mergesort')


def match_ticks(trades: pd.DataFrame, contracts: pd.DataFrame, horizon: str = '1d',
                tolerance_min: float = 6.0, underlying_id: str = 'UNDERLYING',
                r_onr: float = 0.0) -> Tuple[pd.DataFrame, Dict[str, int]]:
    """Build a sample table from trades.

    Args:
        trades: timestamp (µs since epoch), contract_id, price, volume; the
            underlying's ticks share the frame under underlying_id
        contracts: id, kind, strike, expiry
        horizon: '1h', '1d' or '2d' (day horizons skip weekends)
        tolerance_min: Matching tolerance window in minutes
        underlying_id: Contract id of the underlying's ticks
        r_onr: Overnight rate recorded on every sample

    Returns:
        (sample table in original units, drop counts)

    Raises:
        InputError: Unsorted timestamps, missing columns or unknown contracts
    """
    _require(trades, TRADE_COLUMNS, "trades")
    if horizon not in HORIZONS:
        raise ConfigurationError(f"Unknown tick horizon {horizon!r}")
    timestamps = pd.to_numeric(trades['timestamp'], errors='coerce')
    if timestamps.isna().any():
        raise InputError("trades contain non-numeric timestamps")
    if not timestamps.is_monotonic_increasing:
        raise InputError("trades must be sorted by timestamp")

    offset, delta_t = HORIZONS[horizon]
    tolerance = pd.Timedelta(minutes=tolerance_min)
    frame = trades.assign(time=pd.to_datetime(timestamps.astype('int64'), unit='us'),
                          contract_id=trades['contract_id'].astype(str))
    frame = aggregate_simultaneous(frame[['contract_id', 'time', 'price', 'volume']])

    underlying = frame.loc[frame['contract_id'] == underlying_id, ['time', 'price']].rename(columns={'price': 'spot'})
    options = frame.loc[frame['contract_id'] != underlying_id].reset_index(drop=True)
    drops = {'no_underlying': 0, 'no_next_trade': 0, 'unknown_contract': 0, 'expired': 0}
    if underlying.empty:
        raise InputError(f"No ticks for underlying id {underlying_id!r}")

    known = options['contract_id'].isin(contracts['id'].astype(str))
    drops['unknown_contract'] = int((~known).sum())
    options = options.loc[known]

    options = pd.merge_asof(options.sort_values('time'), underlying, on='time', direction='backward')
    missing_spot = options['spot'].isna()
    drops['no_underlying'] = int(missing_spot.sum())
    options = options.loc[~missing_spot].rename(columns={'spot': 'S0', 'price': 'C0'})

    options['target'] = options['time'] + offset
    later = frame.loc[frame['contract_id'] != underlying_id, ['contract_id', 'time', 'price']]
    later = later.rename(columns={'time': 'time_1', 'price': 'C1'}).sort_values('time_1')
    matched = pd.merge_asof(options.sort_values('target'), later, left_on='target', right_on='time_1',
                            by='contract_id', direction='forward', tolerance=tolerance,
                            allow_exact_matches=True)
    unmatched = matched['C1'].isna()
    drops['no_next_trade'] = int(unmatched.sum())
    matched = matched.loc[~unmatched]
    matched = pd.merge_asof(matched.sort_values('time_1'), underlying.rename(columns={'time': 'time_1', 'spot': 'S1'}),
                            on='time_1', direction='backward')

    meta = contracts.assign(id=contracts['id'].astype(str)).set_index('id')
    matched = matched.join(meta[['kind', 'strike', 'expiry']], on='contract_id')
    date0 = matched['time'].dt.normalize()
    date1 = matched['time_1'].dt.normalize()
    expiry = pd.to_datetime(matched['expiry']).dt.normalize()
    tau = np.busday_count(date0.to_numpy().astype('datetime64[D]'), expiry.to_numpy().astype('datetime64[D]')) / TRADING_DAYS
    tau1 = np.busday_count(date1.to_numpy().astype('datetime64[D]'), expiry.to_numpy().astype('datetime64[D]')) / TRADING_DAYS
    alive = tau > 0
    drops['expired'] = int((~alive).sum())
    matched = matched.loc[alive].reset_index(drop=True)
    date0 = date0.loc[alive].reset_index(drop=True)
    expiry = expiry.loc[alive].reset_index(drop=True)
    tau, tau1 = tau[alive], tau1[alive]

    put = (matched['kind'] == 'put').to_numpy()
    S0 = matched['S0'].to_numpy(dtype=float)
    S1 = matched['S1'].to_numpy(dtype=float)
    K = matched['strike'].to_numpy(dtype=float)
    C0 = matched['C0'].to_numpy(dtype=float)
    C1 = matched['C1'].to_numpy(dtype=float)
    iv0 = implied_vol_array(C0, S0, K, tau, 0.0, put)
    iv1 = np.full(len(matched), np.nan)
    live1 = tau1 > 0
    if np.any(live1):
        iv1[live1] = implied_vol_array(C1[live1], S1[live1], K[live1], tau1[live1], 0.0, put[live1])

    n = len(matched)
    greeks = {name: np.full(n, np.nan) for name in ('delta_bs', 'vega_bs', 'gamma_bs', 'vanna_bs')}
    ok = np.isfinite(iv0)
    if np.any(ok):
        quote = bs_greeks(S0[ok], K[ok], tau[ok], iv0[ok], 0.0, put[ok])
        greeks['delta_bs'][ok] = quote.delta
        greeks['vega_bs'][ok] = quote.vega
        greeks['gamma_bs'][ok] = quote.gamma
        greeks['vanna_bs'][ok] = quote.vanna

    dates = date0.reset_index(drop=True)
    first = dates.min().to_datetime64().astype('datetime64[D]') if n else None
    day = np.busday_count(first, dates.to_numpy().astype('datetime64[D]')) if n else np.empty(0, dtype=np.int64)
    table = pd.DataFrame({
        'index': np.arange(n, dtype=np.int64),
        'date': dates.dt.strftime('%Y-%m-%d'),
        'day': day.astype(np.int64),
        'set_id': np.zeros(n, dtype=np.int64),
        'contract_id': matched['contract_id'].to_numpy(),
        'expiry': expiry.reset_index(drop=True).dt.strftime('%Y-%m-%d') if n else pd.Series(dtype=str),
        'sqrt_total_implied_variance': iv0 * np.sqrt(tau),
        'moneyness': S0 / K if n else np.empty(0),
        **greeks,
        'implied_vol': iv0,
        'implied_vol_1': iv1,
        'S0': S0,
        'S1': S1,
        'C0': C0,
        'r_onr': np.full(n, r_onr),
        'cp_flag': put.astype(np.int64),
        'tau': tau,
        'r': np.zeros(n),
        'strike': K,
        'delta_t': np.full(n, delta_t),
        'price_scale': np.ones(n),
        'bid': np.full(n, np.nan),
        'ask': np.full(n, np.nan),
        'volume': matched['volume'].to_numpy(dtype=float),
        'C1': C1,
        'timestamp': matched['time'].astype('int64').to_numpy() // 1000,
        'timestamp_1': matched['time_1'].astype('int64').to_numpy() // 1000,
    })
    table = table.sort_values(['timestamp', 'contract_id'], kind='mergesort').reset_index(drop=True)
    table['index'] = np.arange(len(table), dtype=np.int64)
    return table[ordered(table.columns)], drops
