"""Cleaning rules for deltabench sample tables.

Every rule flags rows to remove; the engine drops a row when any enabled rule
flags it. Rules read the table as built (before or after normalization):
price thresholds use price_scale to compare in original currency units.

Rule set:
- Negative time value (model or traded price below intrinsic value)
- Time to maturity below one trading day
- Moneyness S0/K outside [0.8, 1.5]
- Implied volatility outside [1%, 100%] or not invertible
- Price below the 0.01 tick
- In-the-money samples (calls keep M <= 1, puts keep M >= 1)
- Quote data only: zero volume, ask >= 2 * bid, bid below 0.05, no next price
- Optional: time to maturity of N calendar days or less
"""

import numpy as np
import pandas as pd

from config import CleaningConfig
from src.rule_engine import Rule, RuleEngine
from src.simkit import TRADING_DAYS


def _scaled(table: pd.DataFrame, column: str) -> np.ndarray:
    scale = table['price_scale'].to_numpy(dtype=float) if 'price_scale' in table.columns else 1.0
    return table[column].to_numpy(dtype=float) * scale


class NegativeTimeValueRule(Rule):
    """Price below intrinsic value."""
    columns = ('C0', 'S0', 'strike', 'cp_flag')

    def __init__(self):
        super().__init__("Negative Time Value")

    def condition(self, table):
        s = table['S0'].to_numpy(dtype=float)
        k = table['strike'].to_numpy(dtype=float)
        put = table['cp_flag'].to_numpy() == 1
        intrinsic = np.where(put, np.maximum(k - s, 0.0), np.maximum(s - k, 0.0))
        return table['C0'].to_numpy(dtype=float) - intrinsic < 0


class ShortMaturityRule(Rule):
    columns = ('tau',)

    def __init__(self):
        super().__init__("Maturity Below One Day")

    def condition(self, table):
        return table['tau'].to_numpy(dtype=float) < 1.0 / TRADING_DAYS - 1e-12


class MoneynessRangeRule(Rule):
    columns = ('moneyness',)

    def __init__(self, low: float, high: float):
        super().__init__("Moneyness Range")
        self.low = low
        self.high = high

    def condition(self, table):
        m = table['moneyness'].to_numpy(dtype=float)
        return ~((m >= self.low) & (m <= self.high))

    def get_conditions(self, table, mask):
        m = table['moneyness'].to_numpy(dtype=float)[mask]
        return {'flagged': int(mask.sum()), 'min': float(np.nanmin(m)), 'max': float(np.nanmax(m))}


class ImpliedVolRangeRule(Rule):
    """Implied vol outside range; NaN (failed inversion) is out of range."""
    columns = ('implied_vol',)

    def __init__(self, low: float, high: float):
        super().__init__("Implied Vol Range")
        self.low = low
        self.high = high

    def condition(self, table):
        iv = table['implied_vol'].to_numpy(dtype=float)
        return ~((iv >= self.low) & (iv <= self.high))


class MinPriceRule(Rule):
    columns = ('C0',)

    def __init__(self, tick: float):
        super().__init__("Price Below Tick")
        self.tick = tick

    def condition(self, table):
        return _scaled(table, 'C0') < self.tick


class InTheMoneyRule(Rule):
    columns = ('moneyness', 'cp_flag')

    def __init__(self):
        super().__init__("In The Money")

    def condition(self, table):
        m = table['moneyness'].to_numpy(dtype=float)
        put = table['cp_flag'].to_numpy() == 1
        return np.where(put, m < 1.0, m > 1.0)


class ZeroVolumeRule(Rule):
    columns = ('volume',)

    def __init__(self):
        super().__init__("Zero Volume")

    def condition(self, table):
        return ~(table['volume'].to_numpy(dtype=float) > 0)


class WideSpreadRule(Rule):
    columns = ('bid', 'ask')

    def __init__(self):
        super().__init__("Ask At Least Twice Bid")

    def condition(self, table):
        return table['ask'].to_numpy(dtype=float) >= 2.0 * table['bid'].to_numpy(dtype=float)


class LowBidRule(Rule):
    columns = ('bid',)

    def __init__(self, min_bid: float):
        super().__init__("Bid Below Minimum")
        self.min_bid = min_bid

    def condition(self, table):
        return _scaled(table, 'bid') < self.min_bid


class MissingNextPriceRule(Rule):
    columns = ('C1',)

    def __init__(self):
        super().__init__("Missing Next Price")

    def condition(self, table):
        return ~np.isfinite(table['C1'].to_numpy(dtype=float))


class MaxCalendarTauRule(Rule):
    """Time to maturity of N calendar days or less."""
    columns = ('date',)

    def __init__(self, days: float):
        super().__init__(f"Maturity Within {days:g} Calendar Days")
        self.days = days

    def condition(self, table):
        if 'expiry' in table.columns:
            remaining = (pd.to_datetime(table['expiry']) - pd.to_datetime(table['date'])).dt.days.to_numpy()
        else:
            remaining = table['tau'].to_numpy(dtype=float) * 365.0
        return remaining <= self.days


def setup_rules(engine: RuleEngine, cleaning: CleaningConfig) -> None:
    """Register the configured cleaning rules.

    Args:
        engine: RuleEngine instance to add rules to
        cleaning: Rule toggles and thresholds
    """
    toggled = [
        (NegativeTimeValueRule(), cleaning.negative_time_value),
        (ShortMaturityRule(), cleaning.short_maturity),
        (MoneynessRangeRule(cleaning.moneyness_low, cleaning.moneyness_high), cleaning.moneyness),
        (ImpliedVolRangeRule(cleaning.iv_low, cleaning.iv_high), cleaning.implied_vol),
        (MinPriceRule(cleaning.min_price_tick), cleaning.min_price),
        (InTheMoneyRule(), cleaning.in_the_money),
        (ZeroVolumeRule(), cleaning.quote_rules),
        (WideSpreadRule(), cleaning.quote_rules),
        (LowBidRule(cleaning.min_bid), cleaning.quote_rules),
        (MissingNextPriceRule(), cleaning.quote_rules),
    ]
    for rule, enabled in toggled:
        engine.add_rule(rule)
        if enabled:
            engine.enable_rule(rule.name)
        else:
            engine.disable_rule(rule.name)
    if cleaning.filter_tau_min_days > 0:
        engine.add_rule(MaxCalendarTauRule(cleaning.filter_tau_min_days))
