"""Tests for the cleaning rules and the rule engine."""

import numpy as np
import pandas as pd
import pytest

from config import CleaningConfig
from rules import (
    ImpliedVolRangeRule, InTheMoneyRule, LowBidRule, MaxCalendarTauRule, MinPriceRule, MoneynessRangeRule,
    NegativeTimeValueRule, ShortMaturityRule, setup_rules,
)
from src.datapipe import clean, normalize
from src.errors import InputError
from src.logging_system import LogManager, read_events
from src.rule_engine import RuleEngine


def _table():
    """One good call plus one row per failure."""
    rows = [
        # good call: M = 0.95, positive time value
        dict(S0=95.0, strike=100.0, C0=2.0, cp_flag=0, moneyness=0.95, implied_vol=0.2, tau=0.1),
        # moneyness 1.6 put (also out of the money)
        dict(S0=160.0, strike=100.0, C0=0.5, cp_flag=1, moneyness=1.6, implied_vol=0.3, tau=0.1),
        # negative time value call: intrinsic 2, price 1.5 (in the money too)
        dict(S0=102.0, strike=100.0, C0=1.5, cp_flag=0, moneyness=1.02, implied_vol=0.2, tau=0.1),
        # implied vol not invertible
        dict(S0=95.0, strike=100.0, C0=2.0, cp_flag=0, moneyness=0.95, implied_vol=np.nan, tau=0.1),
        # half a day to maturity
        dict(S0=95.0, strike=100.0, C0=0.3, cp_flag=0, moneyness=0.95, implied_vol=0.2, tau=0.5 / 253),
        # price below tick
        dict(S0=85.0, strike=100.0, C0=0.005, cp_flag=0, moneyness=0.85, implied_vol=0.2, tau=0.1),
        # in-the-money put
        dict(S0=95.0, strike=100.0, C0=6.0, cp_flag=1, moneyness=0.95, implied_vol=0.2, tau=0.1),
    ]
    table = pd.DataFrame(rows)
    table['date'] = '2018-07-02'
    table['expiry'] = '2018-09-28'
    return table


def _engine(cleaning=None, log_manager=None):
    engine = RuleEngine(log_manager)
    setup_rules(engine, cleaning or CleaningConfig())
    return engine


def test_default_rules_keep_only_the_good_row():
    retained, report = _engine().evaluate(_table())
    assert len(retained) == 1
    assert retained.iloc[0]['moneyness'] == 0.95 and retained.iloc[0]['C0'] == 2.0
    assert report.retained_calls == 1 and report.retained_puts == 0
    assert report.removed_total + report.retained == report.input_count == 7


def test_individual_rules():
    table = _table()
    assert MoneynessRangeRule(0.8, 1.5).condition(table).tolist() == [False, True, False, False, False, False, False]
    assert NegativeTimeValueRule().condition(table)[2]
    assert ImpliedVolRangeRule(0.01, 1.0).condition(table)[3]
    assert ShortMaturityRule().condition(table)[4]
    assert MinPriceRule(0.01).condition(table)[5]
    itm = InTheMoneyRule().condition(table)
    assert itm[2] and itm[6] and not itm[0] and not itm[1]


def test_min_price_compares_in_original_units():
    table = normalize(pd.DataFrame({'S0': [2000.0], 'C0': [0.1], 'strike': [2400.0]}))
    assert table['C0'].iloc[0] == pytest.approx(0.005)
    assert not MinPriceRule(0.01).condition(table)[0]


def test_cleaning_is_order_independent():
    table = _table()
    forward, _ = _engine().evaluate(table)
    engine = _engine()
    engine.rules.reverse()
    backward, report = engine.evaluate(table)
    pd.testing.assert_frame_equal(forward, backward)
    assert report.removed_total == 6


def test_cleaning_is_idempotent():
    once, _ = _engine().evaluate(_table())
    twice, report = _engine().evaluate(once)
    pd.testing.assert_frame_equal(once, twice)
    assert report.removed_total == 0


def test_disabled_rules_do_not_remove():
    retained, _ = _engine(CleaningConfig(moneyness=False, in_the_money=False)).evaluate(_table())
    assert 1.6 in retained['moneyness'].tolist()


def test_quote_rules():
    table = pd.DataFrame({'bid': [0.04, 1.0, 1.0], 'ask': [0.06, 2.5, 1.1], 'volume': [5.0, 5.0, 0.0],
                          'C1': [1.0, 1.0, np.nan]})
    assert LowBidRule(0.05).condition(table).tolist() == [True, False, False]
    engine = RuleEngine()
    cleaning = CleaningConfig(negative_time_value=False, short_maturity=False, moneyness=False,
                              implied_vol=False, min_price=False, in_the_money=False, quote_rules=True)
    setup_rules(engine, cleaning)
    retained, report = engine.evaluate(table)
    assert len(retained) == 0
    assert report.removed == {'Zero Volume': 1, 'Ask At Least Twice Bid': 1, 'Bid Below Minimum': 1,
                              'Missing Next Price': 0}


def test_calendar_tau_filter():
    table = pd.DataFrame({'date': ['2018-07-02', '2018-07-02'], 'expiry': ['2018-07-16', '2018-07-17']})
    assert MaxCalendarTauRule(14).condition(table).tolist() == [True, False]


def test_missing_column_is_an_input_error():
    with pytest.raises(InputError):
        _engine().evaluate(pd.DataFrame({'moneyness': [1.0]}))


def test_rule_events_are_logged_in_debug_mode(tmp_path):
    log_file = tmp_path / "events.jsonl"
    log_manager = LogManager(log_file=str(log_file), debug_mode=True, echo=False)
    clean(_table(), CleaningConfig(), log_manager)
    log_manager.flush()
    messages = [e['message'] for e in read_events(log_file)]
    assert "[Rule Applied] Moneyness Range" in messages
    moneyness = next(e for e in read_events(log_file) if e['message'] == "[Rule Applied] Moneyness Range")
    assert moneyness['conditions']['max'] == 1.6


def test_rule_toggles_and_status():
    engine = _engine(CleaningConfig(moneyness=False, quote_rules=False))
    status = {s['name']: s for s in engine.get_rule_status()}
    assert not status['Moneyness Range']['enabled']
    assert not status['Zero Volume']['enabled']
    assert status['Implied Vol Range']['enabled']

    engine.evaluate(_table())
    status = {s['name']: s for s in engine.get_rule_status()}
    assert status['Moneyness Range']['trigger_count'] == 0
    assert status['Negative Time Value']['trigger_count'] == 1

    engine.enable_rule('Moneyness Range')
    retained, report = engine.evaluate(_table())
    assert 1.6 not in retained['moneyness'].tolist()
    assert report.flagged['Moneyness Range'] == 1
    engine.disable_rule('Implied Vol Range')
    assert 'Implied Vol Range' not in engine.evaluate(_table())[1].removed


def test_prefiltered_rows_count_under_their_rule():
    _, report = _engine().evaluate(_table())
    before = report.removed['Moneyness Range']
    report.add_prefiltered('Moneyness Range', 5)
    report.add_prefiltered('In The Money', 0)
    assert report.removed['Moneyness Range'] == before + 5
    assert report.input_count == 12
    assert report.removed_total + report.retained == report.input_count
    frame = report.to_frame().set_index('rule')
    assert frame.loc['input', 'removed'] == 12
