"""Tests for path simulation: reproducibility, GBM moments, Heston variance."""

import numpy as np
import pytest

from src.errors import ParameterError
from src.simkit import (
    DT_DAY, GbmParams, HestonParams, PricePath, path_rng, simulate_gbm, simulate_gbm_paths,
    simulate_heston, simulate_heston_paths,
)


def test_gbm_path_is_reproducible_per_seed_and_index():
    params = GbmParams()
    a = simulate_gbm(params, 60, seed=7, path_index=3)
    b = simulate_gbm(params, 60, seed=7, path_index=3)
    c = simulate_gbm(params, 60, seed=7, path_index=4)
    assert np.array_equal(a.spot, b.spot)
    assert not np.array_equal(a.spot, c.spot)


def test_path_streams_do_not_depend_on_generation_order():
    first = path_rng(1, 5).standard_normal(10)
    path_rng(1, 2).standard_normal(1000)
    again = path_rng(1, 5).standard_normal(10)
    assert np.array_equal(first, again)


def test_gbm_layout_and_start_day():
    path = simulate_gbm(GbmParams(s0=1500.0), 90, seed=1, start_day=450)
    assert len(path) == 91
    assert path.n_days == 90
    assert path.dates[0] == 450 and path.dates[-1] == 540
    assert path.spot[0] == pytest.approx(1500.0)
    assert path.variance is None


def test_gbm_without_volatility_grows_at_drift():
    path = simulate_gbm(GbmParams(s0=100.0, mu=0.1, sigma=0.0), 253, seed=1)
    assert path.spot[-1] == pytest.approx(100.0 * np.exp(0.1), rel=1e-12)


def test_gbm_log_return_moments():
    params = GbmParams(s0=2000.0, mu=0.1, sigma=0.2)
    spots = simulate_gbm_paths(params, 1, 200_000, seed=11)
    log_returns = np.log(spots[:, 1] / spots[:, 0])
    expected_mean = (params.mu - 0.5 * params.sigma ** 2) * DT_DAY
    expected_std = params.sigma * np.sqrt(DT_DAY)
    se = expected_std / np.sqrt(len(log_returns))
    assert abs(log_returns.mean() - expected_mean) < 4 * se
    assert log_returns.std() == pytest.approx(expected_std, rel=0.01)


@pytest.mark.parametrize("scheme", ["euler", "milstein"])
def test_heston_variance_never_negative(scheme):
    params = HestonParams(sigma_y=1.0, y0=0.01, theta=0.01)
    path = simulate_heston(params, 120, steps_per_day=5, scheme=scheme, seed=3)
    assert np.all(path.variance >= 0.0)
    assert np.all(path.spot > 0.0)


@pytest.mark.parametrize("scheme", ["euler", "milstein"])
def test_heston_without_vol_of_variance_stays_at_theta(scheme):
    params = HestonParams(y0=0.04, theta=0.04, sigma_y=0.0)
    path = simulate_heston(params, 20, steps_per_day=10, scheme=scheme, seed=2)
    np.testing.assert_allclose(path.variance, 0.04, rtol=1e-12)


def test_heston_spot_is_a_martingale():
    params = HestonParams()
    spots, variances = simulate_heston_paths(params, 5, 40_000, seed=5, steps_per_day=4)
    terminal = spots[:, -1]
    se = terminal.std() / np.sqrt(len(terminal))
    assert abs(terminal.mean() - params.s0) < 4 * se
    assert variances.shape == spots.shape


def test_heston_branch_continues_from_terminal_state():
    base = simulate_heston(HestonParams(), 30, steps_per_day=2, seed=1)
    spot, var = base.terminal_state()
    branch = simulate_heston(HestonParams(s0=spot, y0=max(var, 1e-10)), 10, steps_per_day=2,
                             seed=1, path_index=1, start_day=int(base.dates[-1]))
    assert branch.spot[0] == pytest.approx(spot)
    assert branch.dates[0] == base.dates[-1]


def test_invalid_parameters_are_rejected():
    with pytest.raises(ParameterError):
        GbmParams(s0=0.0)
    with pytest.raises(ParameterError):
        GbmParams(sigma=-0.1)
    with pytest.raises(ParameterError):
        HestonParams(rho=1.5)
    with pytest.raises(ParameterError):
        HestonParams(y0=0.0)
    with pytest.raises(ParameterError):
        simulate_gbm(GbmParams(), 0, seed=1)
    with pytest.raises(ParameterError):
        simulate_heston(HestonParams(), 5, scheme="exact")
    with pytest.raises(ParameterError):
        path_rng(-1)


def test_price_path_rejects_bad_arrays():
    with pytest.raises(ParameterError):
        PricePath(dates=[0, 1], spot=[100.0])
    with pytest.raises(ParameterError):
        PricePath(dates=[0, 0], spot=[100.0, 101.0])
    with pytest.raises(ParameterError):
        PricePath(dates=[0, 1], spot=[100.0, -1.0])


def test_price_path_csv(tmp_path):
    path = simulate_heston(HestonParams(), 10, steps_per_day=2, seed=4)
    target = tmp_path / "path.csv"
    path.to_csv(target)
    loaded = PricePath.from_csv(target)
    np.testing.assert_array_equal(loaded.dates, path.dates)
    np.testing.assert_allclose(loaded.spot, path.spot, rtol=0, atol=0)
    np.testing.assert_allclose(loaded.variance, path.variance, rtol=0, atol=0)
