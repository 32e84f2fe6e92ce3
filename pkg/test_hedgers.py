"""Tests for the statistical and model-implied hedging models."""

import json

import numpy as np
import pandas as pd
import pytest
from scipy.stats import norm

from src.errors import ConfigurationError, FitError, InputError, ParameterError, StateError
from src.hedgers import (
    DeltaVegaNeutralHedge, FitResult, FixedHedge, HullWhiteHedge, LinearHedge, SemiLinearHedge,
    create_hedger, delta_vega_neutral, display_name, heston_adjusted_delta, load_hedger, ols_qr,
    regression_xy,
)
from src.simkit import HestonParams


def _table(n=400, seed=0):
    """Normalized samples with random sensitivities and zero option P&L."""
    rng = np.random.default_rng(seed)
    flag = np.arange(n) % 2
    call_delta = rng.uniform(0.2, 0.8, n)
    tau = rng.uniform(0.05, 1.0, n)
    x = rng.normal(0.0, 1.2, n)
    return pd.DataFrame({
        'S0': 100.0,
        'S1': 100.0 + x,
        'C0': 2.0,
        'C1': 2.0,
        'r_onr': 0.0,
        'delta_t': 1.0 / 253,
        'cp_flag': flag,
        'delta_bs': np.where(flag == 1, call_delta - 1.0, call_delta),
        'vega_bs': rng.uniform(5.0, 20.0, n),
        'gamma_bs': rng.uniform(0.01, 0.05, n),
        'vanna_bs': rng.uniform(-0.5, 0.5, n),
        'tau': tau,
        'moneyness': rng.uniform(0.85, 1.2, n),
        'sqrt_total_implied_variance': 0.2 * np.sqrt(tau),
    })


def _with_ratio(table, ratio, noise=0.0, seed=1):
    """Set C1 so that ratio is the exact minimizer (plus optional noise)."""
    x, _ = regression_xy(table)
    eps = np.random.default_rng(seed).normal(0.0, noise, len(table)) if noise else 0.0
    return table.assign(C1=table['C0'] + ratio * x + eps)


def test_ols_recovers_exact_coefficients():
    rng = np.random.default_rng(4)
    X = rng.normal(size=(50, 3))
    beta = np.array([0.5, -1.0, 2.0])
    fit = ols_qr(X, X @ beta, ['a', 'b', 'c'])
    np.testing.assert_allclose(fit.coefficients, beta, atol=1e-10)
    assert fit.residual_sse < 1e-18
    assert fit.n_samples == 50


def test_ols_residuals_are_orthogonal_to_the_design():
    rng = np.random.default_rng(5)
    X = rng.normal(size=(80, 2))
    y = rng.normal(size=80)
    fit = ols_qr(X, y, ['a', 'b'])
    residuals = y - X @ fit.coefficients
    np.testing.assert_allclose(X.T @ residuals, 0.0, atol=1e-10)
    assert (fit.standard_errors > 0).all()


def test_ols_errors():
    rng = np.random.default_rng(6)
    X = rng.normal(size=(3, 2))
    with pytest.raises(FitError):
        ols_qr(X, np.ones(3), ['a', 'b'])
    a = rng.normal(size=20)
    design = np.column_stack([a, a, rng.normal(size=20)])
    with pytest.raises(FitError) as info:
        ols_qr(design, rng.normal(size=20), ['a1', 'a2', 'b'], model='delta_vega')
    assert len(info.value.columns) == 1 and info.value.columns[0] in ('a1', 'a2')
    assert info.value.exit_code == 3
    design[0, 2] = np.nan
    with pytest.raises(FitError):
        ols_qr(design[:, 1:], rng.normal(size=20), ['a', 'b'])


def test_sensitivity_regression_recovers_per_class_coefficients():
    table = _table()
    put = table['cp_flag'] == 1
    ratio = np.where(put, 1.05 * table['delta_bs'] + 0.02 * table['vega_bs'],
                     0.9 * table['delta_bs'] + 0.01 * table['vega_bs'])
    model = create_hedger('delta_vega')
    fits = model.fit(_with_ratio(table, ratio))
    np.testing.assert_allclose(fits['calls'].coefficients, [0.9, 0.01], atol=1e-10)
    np.testing.assert_allclose(fits['puts'].coefficients, [1.05, 0.02], atol=1e-10)
    np.testing.assert_allclose(model.hedge_ratio(table), ratio, atol=1e-10)


def test_nested_models_never_fit_worse():
    table = _with_ratio(_table(), 0.9 * _table()['delta_bs'], noise=0.05)
    previous = None
    for name in ('delta', 'delta_vega', 'delta_vega_vanna', 'delta_vega_vanna_gamma'):
        fits = create_hedger(name).fit(table)
        sse = {cls: fit.residual_sse for cls, fit in fits.items()}
        if previous:
            for cls in sse:
                assert sse[cls] <= previous[cls] + 1e-9
        previous = sse


def test_model_without_delta_keeps_bs_delta():
    table = _table()
    ratio = table['delta_bs'] - 0.015 * table['vega_bs']
    model = create_hedger('vega')
    assert isinstance(model, LinearHedge) and model.forces_delta
    model.fit(_with_ratio(table, ratio))
    np.testing.assert_allclose(model.fits['calls'].coefficients, [-0.015], atol=1e-10)
    np.testing.assert_allclose(model.hedge_ratio(table), ratio, atol=1e-10)


def test_intercept_is_optional():
    model = create_hedger('delta', intercept=True)
    assert model.coefficient_names == ['delta', 'intercept']
    fits = model.fit(_with_ratio(_table(), 0.95 * _table()['delta_bs'] + 0.01))
    np.testing.assert_allclose(fits['calls'].coefficients, [0.95, 0.01], atol=1e-10)


def test_fixed_hedge():
    table = pd.DataFrame({'cp_flag': [0, 1], 'delta_bs': [0.531, -0.4]})
    np.testing.assert_allclose(FixedHedge().hedge_ratio(table), [0.4779, -0.44])
    with pytest.raises(ParameterError):
        FixedHedge(f_call=0.0)


def test_hull_white_with_zero_coefficients_is_bs_delta():
    table = _table(20)
    model = HullWhiteHedge()
    zero = FitResult(np.zeros(3), np.zeros(3), 0.0, 10, ['a', 'b', 'c'])
    model.fits = {'calls': zero, 'puts': zero}
    np.testing.assert_array_equal(model.hedge_ratio(table), table['delta_bs'].to_numpy())


def test_hull_white_recovers_quadratic():
    table = _table()
    delta = table['delta_bs'].to_numpy()
    scale = table['vega_bs'].to_numpy() / (np.sqrt(table['tau'].to_numpy()) * 100.0)
    ratio = delta + scale * (-0.1 + 0.2 * delta + 0.05 * delta ** 2)
    strict = create_hedger('hull_white')
    strict.fit(_with_ratio(table, ratio))
    np.testing.assert_allclose(strict.fits['calls'].coefficients, [-0.1, 0.2, 0.05], atol=1e-8)
    relaxed = create_hedger('relaxed_hull_white')
    relaxed.fit(_with_ratio(table, ratio))
    np.testing.assert_allclose(relaxed.fits['puts'].coefficients, [1.0, -0.1, 0.2, 0.05], atol=1e-8)
    np.testing.assert_allclose(relaxed.hedge_ratio(table), ratio, atol=1e-8)


def test_semilinear_linear_kind():
    table = _table()
    ratio = (0.3 * table['moneyness'] + 0.5 * table['sqrt_total_implied_variance'] + 0.1).to_numpy()
    model = create_hedger('semilinear_1')
    model.fit(_with_ratio(table, ratio))
    np.testing.assert_allclose(model.fits['calls'].coefficients, [0.3, 0.5, 0.1], atol=1e-10)


def test_semilinear_probit_kind():
    table = _table()
    z = -1.2 * table['moneyness'] + 2.0 * table['sqrt_total_implied_variance'] + 1.5
    ratio = norm.cdf(z) - table['cp_flag']
    model = create_hedger('semilinear_2')
    model.fit(_with_ratio(table, ratio))
    for cls in ('calls', 'puts'):
        np.testing.assert_allclose(model.fits[cls].coefficients, [-1.2, 2.0, 1.5], atol=1e-5)
    np.testing.assert_allclose(model.hedge_ratio(table), ratio, atol=1e-6)
    puts = model.hedge_ratio(table)[table['cp_flag'] == 1]
    assert (puts < 0).all() and (puts > -1).all()
    with pytest.raises(ParameterError):
        SemiLinearHedge(kind=3)


def test_unfitted_model_raises_state_error():
    table = _table(20)
    model = create_hedger('delta')
    with pytest.raises(StateError):
        model.hedge_ratio(table)
    model.fit(table.loc[table['cp_flag'] == 0])
    assert model.hedge_ratio(table.loc[table['cp_flag'] == 0]).shape == (10,)
    with pytest.raises(StateError):
        model.hedge_ratio(table)


def _heston_table():
    return pd.DataFrame({
        'S0': [100.0, 100.0], 'Y0': [0.04, 0.05], 'cp_flag': [0, 1],
        'delta_hs': [0.55, -0.45], 'nu_hs': [20.0, 18.0],
        'delta_hs_atm': [0.52, 0.52], 'nu_hs_atm': [25.0, 25.0], 'C0_atm': [2.0, 2.0], 'C1_atm': [2.1, 2.1],
    })


def test_heston_adjusted_delta():
    params = HestonParams(rho=-0.7, sigma_y=0.4)
    table = _heston_table()
    expected = table['delta_hs'] + table['nu_hs'] * (-0.7) * 0.4 / 100.0
    np.testing.assert_allclose(heston_adjusted_delta(table, params), expected)
    with pytest.raises(InputError):
        heston_adjusted_delta(table.drop(columns='Y0'), params)


def test_delta_vega_neutral_positions():
    params = HestonParams()
    table = _heston_table()
    units, eta = delta_vega_neutral(table, params)
    np.testing.assert_allclose(eta, [0.8, 0.72])
    np.testing.assert_allclose(units, [0.55 - 0.8 * 0.52, -0.45 - 0.72 * 0.52])
    model = DeltaVegaNeutralHedge(params=params)
    assert model.instruments == 2
    underlying, atm = model.positions(table)
    np.testing.assert_allclose(atm, eta)
    with pytest.raises(InputError):
        delta_vega_neutral(table.drop(columns='C1_atm'), params)


def test_factory_errors_and_display_names():
    with pytest.raises(ConfigurationError):
        create_hedger('heston_adjusted')
    with pytest.raises(ConfigurationError):
        create_hedger('delta_theta')
    assert create_hedger('heston_adjusted', heston=HestonParams()).name == 'heston_adjusted'
    assert display_name('delta') == 'Delta-only'
    assert display_name('delta_vega_vanna') == 'Delta-Vega-Vanna'
    assert display_name('bs_delta') == 'BS Delta'
    assert display_name('hedgenet') == 'hedgenet'


def test_model_document_round_trip():
    table = _with_ratio(_table(), 0.9 * _table()['delta_bs'], noise=0.05)
    model = create_hedger('delta_gamma', intercept=True)
    model.window_id = 3
    model.fit(table)
    restored = load_hedger(json.loads(json.dumps(model.to_dict())))
    assert restored.window_id == 3 and restored.intercept
    np.testing.assert_array_equal(restored.hedge_ratio(table), model.hedge_ratio(table))
    rows = model.coefficient_rows()
    assert len(rows) == 2 * 3
    assert {r['coefficient'] for r in rows} == {'delta', 'gamma', 'intercept'}
    assert all(r['window_id'] == 3 and r['std_error'] > 0 for r in rows)
