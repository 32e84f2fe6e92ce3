"""Listed option contracts along a simulated path.

Listing follows the exchange rules for monthly index options:
- Twelve monthly expiries are listed at all times, each expiring on the
  fourth Friday of its month. When a month expires, a new twelfth month opens.
- A fresh month lists the two strikes bracketing spot (strike step 5), plus
  a third one beyond the nearest strike when spot sits within 1.0 of it.
- When spot closes through the highest or lowest listed strike of a month,
  the ladder extends to cover it.
Trading happens on weekdays only; there is no holiday table.
"""

import copy
import math
from dataclasses import dataclass, field
from datetime import date, timedelta
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from src.errors import ParameterError
from src.simkit import PricePath

STRIKE_STEP = 5.0
CLOSENESS = 1.0  # Third-strike threshold, 20% of the step
N_MONTHS = 12


def fourth_friday(year: int, month: int) -> date:
    """Fourth Friday of the given month."""
    first = date(year, month, 1)
    offset = (4 - first.weekday()) % 7
    return first + timedelta(days=offset + 21)


def next_expiries(on: date, count: int = N_MONTHS) -> List[date]:
    """The next `count` fourth Fridays strictly after `on`."""
    expiries: List[date] = []
    year, month = on.year, on.month
    while len(expiries) < count:
        expiry = fourth_friday(year, month)
        if expiry > on:
            expiries.append(expiry)
        month += 1
        if month > 12:
            year, month = year + 1, 1
    return expiries


@dataclass(frozen=True)
class OptionContract:
    """A listed European option."""
    id: str
    kind: str  # call | put
    strike: float
    expiry: date
    listing_date: date

    def __post_init__(self):
        if self.kind not in ("call", "put"):
            raise ParameterError(f"Unknown option kind {self.kind!r}")
        if self.strike <= 0 or not math.isclose(self.strike / STRIKE_STEP, round(self.strike / STRIKE_STEP)):
            raise ParameterError(f"Strike {self.strike} is not a positive multiple of {STRIKE_STEP}")
        if self.expiry != fourth_friday(self.expiry.year, self.expiry.month):
            raise ParameterError(f"Expiry {self.expiry} is not a fourth Friday")
        if not self.listing_date < self.expiry:
            raise ParameterError(f"Listing date {self.listing_date} must precede expiry {self.expiry}")


def _contract_id(kind: str, strike: float, expiry: date) -> str:
    return f"{kind[0].upper()}{expiry:%Y%m%d}K{int(round(strike))}"


@dataclass
class ListingState:
    """Active expiry months, their strike ladders and listed contracts."""
    ladders: Dict[date, List[float]] = field(default_factory=dict)  # expiry -> [lowest, highest]
    contracts: Dict[date, List[OptionContract]] = field(default_factory=dict)

    def active_months(self) -> List[date]:
        return sorted(self.ladders)

    def active_contracts(self) -> List[OptionContract]:
        return [c for expiry in self.active_months() for c in self.contracts[expiry]]

    def strikes(self, expiry: date) -> List[float]:
        lo, hi = self.ladders[expiry]
        n = int(round((hi - lo) / STRIKE_STEP))
        return [lo + i * STRIKE_STEP for i in range(n + 1)]

    def copy(self) -> 'ListingState':
        return copy.deepcopy(self)


def _list_strikes(state: ListingState, expiry: date, strikes, on: date) -> List[OptionContract]:
    new = []
    for strike in strikes:
        for kind in ("call", "put"):
            contract = OptionContract(_contract_id(kind, strike, expiry), kind, float(strike), expiry, on)
            state.contracts[expiry].append(contract)
            new.append(contract)
    return new


def opening_strikes(spot: float) -> List[float]:
    """Strikes listed when a new expiry month opens at `spot`."""
    lo = math.floor(spot / STRIKE_STEP) * STRIKE_STEP
    hi = lo + STRIKE_STEP
    strikes = [lo, hi]
    nearest = lo if spot - lo <= hi - spot else hi
    distance = abs(spot - nearest)
    if 0 < distance <= CLOSENESS:
        strikes.append(hi + STRIKE_STEP if nearest == hi else lo - STRIKE_STEP)
    return sorted(s for s in strikes if s > 0)


def evolve_listings(state: ListingState, spot: float, on: date) -> Tuple[ListingState, List[OptionContract]]:
    """Apply one trading day's close to the listing state.

    Months expiring on or before `on` retire (their contracts trade their
    final day on the expiry date itself), new months open until twelve
    expiries after `on` are listed, and existing ladders extend when spot
    closes beyond them. An empty state is the warm-up: all twelve months
    open against `spot`.

    Args:
        state: Current listing state (not modified)
        spot: Closing spot on `on`
        on: Trading date (weekday)

    Returns:
        (new state, contracts listed on this date)
    """
    if on.weekday() >= 5:
        raise ParameterError(f"{on} is not a weekday")
    state = state.copy()
    new: List[OptionContract] = []

    for expiry in [e for e in state.ladders if e <= on]:
        del state.ladders[expiry]
        del state.contracts[expiry]

    for expiry, (lo, hi) in state.ladders.items():
        extension = []
        if spot > hi:
            top = math.ceil(spot / STRIKE_STEP) * STRIKE_STEP
            extension = list(np.arange(hi + STRIKE_STEP, top + STRIKE_STEP / 2, STRIKE_STEP))
            state.ladders[expiry] = [lo, top]
        elif spot < lo:
            bottom = max(math.floor(spot / STRIKE_STEP) * STRIKE_STEP, STRIKE_STEP)
            extension = list(np.arange(bottom, lo - STRIKE_STEP / 2, STRIKE_STEP))
            state.ladders[expiry] = [bottom, hi]
        new.extend(_list_strikes(state, expiry, extension, on))

    for expiry in next_expiries(on):
        if expiry in state.ladders:
            continue
        strikes = opening_strikes(spot)
        state.ladders[expiry] = [strikes[0], strikes[-1]]
        state.contracts[expiry] = []
        new.extend(_list_strikes(state, expiry, strikes, on))

    return state, new


class TradingCalendar:
    """Weekday calendar mapping path day indices to dates.

    Day 0 is the first weekday on or after start_date.
    """

    def __init__(self, start_date):
        start = np.datetime64(pd.Timestamp(start_date).date(), 'D')
        self.origin = np.busday_offset(start, 0, roll='forward')

    def date_of(self, days) -> np.ndarray:
        return np.busday_offset(self.origin, np.asarray(days, dtype=np.int64), roll='forward')

    def day_of(self, dates) -> np.ndarray:
        return np.busday_count(self.origin, np.asarray(dates, dtype='datetime64[D]'))

    def as_date(self, day: int) -> date:
        return self.date_of(day).astype(object)


def generate_option_universe(path: PricePath, start_date,
                             initial_state: Optional[ListingState] = None
                             ) -> Tuple[pd.DataFrame, ListingState]:
    """List contracts along a path.

    Contracts already live in `initial_state` (the state at the end of the
    in-sample path) carry over onto a branching out-of-sample path.

    Args:
        path: Underlying path; path.dates index the weekday calendar
        start_date: Calendar date of day 0
        initial_state: Listing state to continue from

    Returns:
        (contracts frame with id, kind, strike, expiry, listing_date,
         first_day, last_day; final listing state)
    """
    calendar = TradingCalendar(start_date)
    state = initial_state.copy() if initial_state is not None else ListingState()
    contracts: Dict[str, OptionContract] = {c.id: c for c in state.active_contracts()}

    for day, spot in zip(path.dates, path.spot):
        state, new = evolve_listings(state, float(spot), calendar.as_date(int(day)))
        for contract in new:
            contracts[contract.id] = contract

    records = list(contracts.values())
    frame = pd.DataFrame({
        'id': [c.id for c in records],
        'kind': [c.kind for c in records],
        'strike': [c.strike for c in records],
        'expiry': pd.to_datetime([c.expiry for c in records]),
        'listing_date': pd.to_datetime([c.listing_date for c in records]),
    })
    if frame.empty:
        frame['first_day'] = pd.Series(dtype='int64')
        frame['last_day'] = pd.Series(dtype='int64')
        return frame, state
    listed = frame['listing_date'].to_numpy().astype('datetime64[D]')
    expiries = frame['expiry'].to_numpy().astype('datetime64[D]')
    frame['first_day'] = np.maximum(calendar.day_of(listed), int(path.dates[0]))
    frame['last_day'] = calendar.day_of(expiries)
    frame = frame.sort_values(['expiry', 'strike', 'kind']).reset_index(drop=True)
    return frame, state


def universe_to_csv(frame: pd.DataFrame, path) -> None:
    out = frame.copy()
    out['expiry'] = out['expiry'].dt.strftime('%Y-%m-%d')
    out['listing_date'] = out['listing_date'].dt.strftime('%Y-%m-%d')
    out.to_csv(path, index=False)
