"""Sample table columns for deltabench.

This is the single source of truth for the samples.csv schema: column names,
sections and descriptions. Every module reading or writing sample tables
goes through these helpers.
"""

from typing import List, Optional

SAMPLE_SCHEMA = {
    'key': {
        'index': {'dtype': 'int64', 'description': 'Row identifier'},
        'date': {'dtype': 'str', 'description': 'Observation date (ISO)'},
        'day': {'dtype': 'int64', 'description': 'Trading-day index on the path'},
        'set_id': {'dtype': 'int64', 'description': 'Path set: 0 in-sample, 1..n out-of-sample'},
        'contract_id': {'dtype': 'str', 'description': 'Listed contract token'},
        'expiry': {'dtype': 'str', 'description': 'Expiry date (ISO)'},
    },
    'features': {
        'sqrt_total_implied_variance': {'dtype': 'float64', 'description': 'Implied vol times sqrt(tau)'},
        'moneyness': {'dtype': 'float64', 'description': 'M = S0 / K'},
        'delta_bs': {'dtype': 'float64', 'description': 'BS Delta at implied vol (put: N(d1) - 1)'},
        'vega_bs': {'dtype': 'float64', 'description': 'BS Vega per unit vol'},
        'gamma_bs': {'dtype': 'float64', 'description': 'BS Gamma'},
        'vanna_bs': {'dtype': 'float64', 'description': 'BS Vanna'},
    },
    'additional': {
        'implied_vol': {'dtype': 'float64', 'description': 'Implied volatility at t'},
        'implied_vol_1': {'dtype': 'float64', 'description': 'Implied volatility at t + delta_t'},
        'S0': {'dtype': 'float64', 'description': 'Underlying at t'},
        'S1': {'dtype': 'float64', 'description': 'Underlying at t + delta_t'},
        'C0': {'dtype': 'float64', 'description': 'Option price at t'},
        'r_onr': {'dtype': 'float64', 'description': 'Overnight rate'},
        'cp_flag': {'dtype': 'int64', 'description': '1 put, 0 call'},
        'tau': {'dtype': 'float64', 'description': 'Time to maturity in years'},
        'r': {'dtype': 'float64', 'description': 'Rate used for pricing'},
        'strike': {'dtype': 'float64', 'description': 'Strike price'},
        'delta_t': {'dtype': 'float64', 'description': 'Hedging period in years'},
        'price_scale': {'dtype': 'float64', 'description': 'Original currency per normalized unit'},
    },
    'model_implied': {
        'Y0': {'dtype': 'float64', 'description': 'Heston variance at t'},
        'delta_hs': {'dtype': 'float64', 'description': 'Heston Delta'},
        'nu_hs': {'dtype': 'float64', 'description': 'Heston sensitivity to variance'},
        'delta_hs_atm': {'dtype': 'float64', 'description': 'Heston Delta of the one-month ATM call'},
        'nu_hs_atm': {'dtype': 'float64', 'description': 'Heston variance sensitivity of the ATM call'},
        'C0_atm': {'dtype': 'float64', 'description': 'ATM call price at t'},
        'C1_atm': {'dtype': 'float64', 'description': 'ATM call price at t + delta_t'},
    },
    'quote': {
        'bid': {'dtype': 'float64', 'description': 'Best bid'},
        'ask': {'dtype': 'float64', 'description': 'Best ask'},
        'volume': {'dtype': 'float64', 'description': 'Traded volume'},
    },
    'target': {
        'C1': {'dtype': 'float64', 'description': 'Option price at t + delta_t'},
    },
}

# Columns expressed in currency, rescaled by normalization
PRICE_COLUMNS = ['S0', 'S1', 'C0', 'C1', 'strike', 'C0_atm', 'C1_atm', 'bid', 'ask']

# Required for every sample table regardless of origin
REQUIRED_COLUMNS = [
    'index', 'date', 'day', 'set_id', 'contract_id',
    'sqrt_total_implied_variance', 'moneyness', 'delta_bs', 'vega_bs', 'gamma_bs', 'vanna_bs',
    'implied_vol', 'S0', 'S1', 'C0', 'r_onr', 'cp_flag', 'tau', 'r', 'strike',
    'delta_t', 'price_scale', 'C1',
]


def get_columns(section: Optional[str] = None) -> List[str]:
    """Get column names, optionally restricted to one section.

    Args:
        section: 'key', 'features', 'additional', 'model_implied', 'quote', 'target'

    Returns:
        Column names in schema order
    """
    if section is None:
        return [name for cols in SAMPLE_SCHEMA.values() for name in cols]
    if section not in SAMPLE_SCHEMA:
        raise KeyError(f"Unknown schema section: {section}")
    return list(SAMPLE_SCHEMA[section].keys())


def ordered(columns) -> List[str]:
    """Order the given columns by schema position, unknown columns last."""
    known = get_columns()
    present = [c for c in known if c in columns]
    return present + sorted(c for c in columns if c not in known)
