"""Tests for the listing calendar and strike ladders."""

from datetime import date

import numpy as np
import pytest

from src.errors import ParameterError
from src.listings import (
    N_MONTHS, ListingState, OptionContract, TradingCalendar, evolve_listings, fourth_friday,
    generate_option_universe, next_expiries, opening_strikes,
)
from src.simkit import PricePath


def test_fourth_friday_known_dates():
    assert fourth_friday(2016, 1) == date(2016, 1, 22)
    assert fourth_friday(2018, 7) == date(2018, 7, 27)
    assert fourth_friday(2015, 5) == date(2015, 5, 22)


def test_next_expiries_are_strictly_after():
    expiries = next_expiries(date(2016, 1, 22))
    assert len(expiries) == N_MONTHS
    assert expiries[0] == date(2016, 2, 26)
    assert all(a < b for a, b in zip(expiries, expiries[1:]))
    assert next_expiries(date(2016, 1, 21))[0] == date(2016, 1, 22)


def test_opening_strikes():
    assert opening_strikes(2002.5) == [2000.0, 2005.0]
    assert opening_strikes(2000.5) == [1995.0, 2000.0, 2005.0]
    assert opening_strikes(2004.2) == [2000.0, 2005.0, 2010.0]
    assert opening_strikes(2000.0) == [2000.0, 2005.0]


def test_warm_up_lists_twelve_months():
    state, new = evolve_listings(ListingState(), 2002.5, date(2015, 1, 2))
    assert len(state.active_months()) == N_MONTHS
    assert len(new) == N_MONTHS * 2 * 2
    assert {c.kind for c in new} == {"call", "put"}


def test_ladder_extends_when_spot_closes_through_it():
    state, _ = evolve_listings(ListingState(), 2002.5, date(2015, 1, 2))
    state, new = evolve_listings(state, 2013.0, date(2015, 1, 5))
    expiry = state.active_months()[0]
    assert state.strikes(expiry) == [2000.0, 2005.0, 2010.0, 2015.0]
    assert sorted({c.strike for c in new}) == [2010.0, 2015.0]
    state, new = evolve_listings(state, 1991.0, date(2015, 1, 6))
    assert state.strikes(expiry)[0] == 1990.0
    assert sorted({c.strike for c in new}) == [1990.0, 1995.0]


def test_expired_month_is_replaced():
    state, _ = evolve_listings(ListingState(), 2002.5, date(2015, 1, 2))
    first = state.active_months()[0]
    assert first == date(2015, 1, 23)
    state, new = evolve_listings(state, 2002.5, first)
    assert first not in state.active_months()
    assert len(state.active_months()) == N_MONTHS
    assert {c.expiry for c in new} == {state.active_months()[-1]}


def test_evolve_does_not_modify_its_input():
    state, _ = evolve_listings(ListingState(), 2002.5, date(2015, 1, 2))
    before = state.copy()
    evolve_listings(state, 2100.0, date(2015, 1, 5))
    assert state.ladders == before.ladders


def test_weekend_is_rejected():
    with pytest.raises(ParameterError):
        evolve_listings(ListingState(), 2000.0, date(2015, 1, 3))


def test_contract_validation():
    with pytest.raises(ParameterError):
        OptionContract("x", "call", 2001.0, date(2016, 1, 22), date(2015, 1, 2))
    with pytest.raises(ParameterError):
        OptionContract("x", "call", 2000.0, date(2016, 1, 21), date(2015, 1, 2))
    with pytest.raises(ParameterError):
        OptionContract("x", "straddle", 2000.0, date(2016, 1, 22), date(2015, 1, 2))


def test_trading_calendar_skips_weekends():
    calendar = TradingCalendar("2015-01-03")
    assert calendar.as_date(0) == date(2015, 1, 5)
    assert calendar.as_date(5) == date(2015, 1, 12)
    assert int(calendar.day_of(np.array(['2015-01-12'], dtype='datetime64[D]'))[0]) == 5


def _path(spots, start_day=0):
    return PricePath(dates=np.arange(start_day, start_day + len(spots)), spot=np.asarray(spots, dtype=float))


def test_universe_columns_and_day_ranges():
    universe, state = generate_option_universe(_path([2002.5, 2008.0, 2011.0, 1996.0]), "2015-01-02")
    assert {'id', 'kind', 'strike', 'expiry', 'listing_date', 'first_day', 'last_day'} <= set(universe.columns)
    assert universe['id'].is_unique
    assert (universe['first_day'] <= universe['last_day']).all()
    assert universe['first_day'].min() == 0
    assert len(universe) == len(state.active_contracts())


def test_out_of_sample_universe_continues_listing_state():
    in_sample, state = generate_option_universe(_path([2002.5, 2008.0, 2011.0]), "2015-01-02")
    out_sample, _ = generate_option_universe(_path([2011.0, 2012.0], start_day=2), "2015-01-02",
                                             initial_state=state)
    assert set(in_sample['id']) <= set(out_sample['id'])
    assert out_sample['first_day'].min() == 2
