"""Tests for Black-Scholes and Heston pricing, Greeks and implied volatility."""

import numpy as np
import pytest

from src.errors import InversionError, ParameterError
from src.pricer import (
    bs_greeks, bs_price, heston_delta_vega, heston_price, implied_vol, implied_vol_array, price_bounds,
)
from src.pricer import _gl_nodes, _u_max
from src.simkit import DT_DAY, HestonParams, path_rng, simulate_heston_paths


def _random_inputs(n=1000, seed=3):
    rng = np.random.default_rng(seed)
    S = rng.uniform(50.0, 150.0, n)
    K = S / rng.uniform(0.8, 1.5, n)
    tau = rng.uniform(0.02, 2.0, n)
    sigma = rng.uniform(0.05, 0.8, n)
    r = rng.uniform(0.0, 0.05, n)
    put = rng.integers(0, 2, n).astype(bool)
    return S, K, tau, sigma, r, put


def test_put_call_parity():
    S, K, tau, sigma, r, _ = _random_inputs()
    call = bs_price(S, K, tau, sigma, r, "call")
    put = bs_price(S, K, tau, sigma, r, "put")
    np.testing.assert_allclose(call - put, S - K * np.exp(-r * tau), atol=1e-9)


def test_scalar_inputs_give_floats():
    price = bs_price(100.0, 100.0, 0.5, 0.2)
    assert isinstance(price, float)
    assert price == pytest.approx(5.637197779701662, rel=1e-9)


def test_greeks_match_finite_differences():
    S, K, tau, sigma, r, put = _random_inputs()
    q = bs_greeks(S, K, tau, sigma, r, put)
    hs, hv = 1e-5 * S, 1e-5

    def price(s=S, v=sigma):
        return bs_price(s, K, tau, v, r, put)

    delta_fd = (price(s=S + hs) - price(s=S - hs)) / (2 * hs)
    gamma_fd = (price(s=S + hs) - 2 * price() + price(s=S - hs)) / hs ** 2
    vega_fd = (price(v=sigma + hv) - price(v=sigma - hv)) / (2 * hv)
    vanna_fd = ((bs_greeks(S + hs, K, tau, sigma, r, put).vega - bs_greeks(S - hs, K, tau, sigma, r, put).vega)
                / (2 * hs))

    np.testing.assert_allclose(q.delta, delta_fd, rtol=1e-5, atol=1e-7)
    np.testing.assert_allclose(q.vega, vega_fd, rtol=1e-5, atol=1e-6)
    np.testing.assert_allclose(q.gamma, gamma_fd, rtol=1e-4, atol=1e-6)
    np.testing.assert_allclose(q.vanna, vanna_fd, rtol=1e-5, atol=1e-6)


def test_put_delta_is_call_delta_minus_one():
    call = bs_greeks(100.0, 105.0, 0.25, 0.2, 0.0, "call")
    put = bs_greeks(100.0, 105.0, 0.25, 0.2, 0.0, "put")
    assert put.delta == pytest.approx(call.delta - 1.0)
    assert put.vega == pytest.approx(call.vega)
    assert put.gamma == pytest.approx(call.gamma)


def test_bs_price_matches_monte_carlo():
    rng = path_rng(17)
    n = 400_000
    z = rng.standard_normal(n)
    S0, r = 100.0, 0.0
    for moneyness in (0.85, 1.0, 1.15):
        for tau in (1 / 12, 0.5):
            K = S0 / moneyness
            ST = S0 * np.exp((r - 0.02) * tau + 0.2 * np.sqrt(tau) * z)
            for kind in ("call", "put"):
                payoff = np.maximum(ST - K, 0.0) if kind == "call" else np.maximum(K - ST, 0.0)
                se = payoff.std() / np.sqrt(n)
                assert abs(payoff.mean() - bs_price(S0, K, tau, 0.2, r, kind)) < 3.5 * se + 1e-10


def test_implied_vol_round_trip():
    S, K, tau, sigma, r, put = _random_inputs(200)
    prices = bs_price(S, K, tau, sigma, r, put)
    lower, _ = price_bounds(S, K, tau, r, put)
    keep = prices - lower > 1e-6
    recovered = implied_vol_array(prices[keep], S[keep], K[keep], tau[keep], r[keep], put[keep])
    np.testing.assert_allclose(bs_price(S[keep], K[keep], tau[keep], recovered, r[keep], put[keep]),
                               prices[keep], atol=1e-8)
    single = implied_vol(float(prices[0]), float(S[0]), float(K[0]), float(tau[0]), float(r[0]),
                         "put" if put[0] else "call")
    assert single.residual < 1e-8


def test_implied_vol_outside_bounds():
    with pytest.raises(InversionError):
        implied_vol(0.5, 100.0, 90.0, 0.5, 0.0, "call")
    with pytest.raises(InversionError):
        implied_vol(101.0, 100.0, 90.0, 0.5, 0.0, "call")
    out = implied_vol_array(np.array([0.5, 12.0]), 100.0, 90.0, 0.5, 0.0, "call")
    assert np.isnan(out[0]) and np.isfinite(out[1])


def test_out_of_domain_inputs():
    with pytest.raises(ParameterError):
        bs_price(100.0, 100.0, 0.0, 0.2)
    with pytest.raises(ParameterError):
        bs_price(100.0, -1.0, 0.5, 0.2)
    with pytest.raises(ParameterError):
        bs_price(np.nan, 100.0, 0.5, 0.2)
    with pytest.raises(ParameterError):
        heston_price(HestonParams(), 100.0, 0.0, 100.0, 0.5)


def test_heston_put_call_parity():
    params = HestonParams(s0=100.0)
    K = np.array([90.0, 100.0, 115.0])
    call = heston_price(params, 100.0, 0.04, K, 0.5, 0.01, "call")
    put = heston_price(params, 100.0, 0.04, K, 0.5, 0.01, "put")
    np.testing.assert_allclose(call - put, 100.0 - K * np.exp(-0.01 * 0.5), atol=1e-8)


def test_heston_without_vol_of_variance_is_black_scholes():
    params = HestonParams(s0=100.0, y0=0.04, theta=0.04, sigma_y=0.0)
    assert heston_price(params, 100.0, 0.04, 95.0, 0.5) == pytest.approx(bs_price(100.0, 95.0, 0.5, 0.2), rel=1e-12)


def test_heston_quadrature_is_close_to_black_scholes_for_small_vol_of_variance():
    params = HestonParams(s0=100.0, y0=0.04, theta=0.04, sigma_y=1e-3, rho=0.0)
    price = heston_price(params, 100.0, 0.04, 100.0, 0.5)
    assert price == pytest.approx(bs_price(100.0, 100.0, 0.5, 0.2), rel=1e-4)


def test_heston_quadrature_range():
    nodes, weights = _gl_nodes(float(_u_max(np.array([0.04]), np.array([1.0]), 0.04)[0]), 32)
    assert nodes.size == 128 and nodes.max() < 200.0
    assert weights.sum() == pytest.approx(200.0)
    short = float(_u_max(np.array([0.04]), np.array([DT_DAY]), 0.04)[0])
    assert 200.0 < short <= 6000.0
    params = HestonParams(s0=100.0)
    coarse = heston_price(params, 100.0, 0.04, 101.0, DT_DAY)
    fine = heston_price(params, 100.0, 0.04, 101.0, DT_DAY, nodes_per_panel=64)
    assert coarse == pytest.approx(fine, abs=1e-8)


def test_heston_delta_matches_finite_difference():
    params = HestonParams(s0=100.0)
    delta, nu = heston_delta_vega(params, 100.0, 0.04, 105.0, 0.25, 0.0, "call")
    h = 0.01
    fd = (heston_price(params, 100.0 + h, 0.04, 105.0, 0.25) - heston_price(params, 100.0 - h, 0.04, 105.0, 0.25)) / (2 * h)
    assert delta == pytest.approx(fd, rel=1e-5)
    assert nu > 0
    put_delta, put_nu = heston_delta_vega(params, 100.0, 0.04, 105.0, 0.25, 0.0, "put")
    assert put_delta == pytest.approx(delta - 1.0)
    assert put_nu == pytest.approx(nu)


def test_heston_price_matches_monte_carlo():
    params = HestonParams(s0=100.0)
    n_days = 63
    spots, _ = simulate_heston_paths(params, n_days, 20_000, seed=9, steps_per_day=4, scheme="milstein")
    terminal = spots[:, -1]
    tau = n_days * DT_DAY
    for K in (95.0, 105.0):
        payoff = np.maximum(terminal - K, 0.0)
        se = payoff.std() / np.sqrt(len(payoff))
        # Allow a small time-discretization bias on top of the sampling error
        assert abs(payoff.mean() - heston_price(params, 100.0, params.y0, K, tau)) < 3.0 * se + 0.02
