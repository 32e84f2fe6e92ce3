"""Tests for HedgeNet: replication layer, backprop and training."""

import numpy as np
import pandas as pd
import pytest

from src.errors import ConfigurationError, InputError
from src.hedgenet import (
    NetConfig, Standardizer, TrainConfig, TrainedNet, default_l2_alpha, feature_matrix, grad_check, gradients,
    init_net, train, train_seeds,
)

R_ONR = 0.01
DT = 1.0 / 253


def _table(n=256, raw_ratio=0.6, seed=0):
    """Normalized samples whose option P&L is replicated exactly by raw_ratio - cp_flag."""
    rng = np.random.default_rng(seed)
    flag = np.arange(n) % 2
    tau = rng.uniform(0.05, 1.0, n)
    S1 = 100.0 + rng.normal(0.0, 1.2, n)
    R = 1.0 + R_ONR * DT
    C0 = rng.uniform(1.0, 5.0, n)
    delta = raw_ratio - flag
    return pd.DataFrame({
        'S0': 100.0, 'S1': S1, 'C0': C0, 'C1': delta * S1 + R * (C0 - delta * 100.0),
        'r_onr': R_ONR, 'delta_t': DT, 'cp_flag': flag, 'tau': tau,
        'moneyness': rng.uniform(0.85, 1.2, n), 'sqrt_total_implied_variance': 0.2 * np.sqrt(tau),
        'delta_bs': rng.uniform(0.1, 0.9, n) - flag, 'vega_bs': rng.uniform(5.0, 20.0, n),
        'vanna_bs': rng.uniform(-0.5, 0.5, n),
    })


def _constant_net(table, raw_ratio, hidden=(4,)):
    """Net whose output is raw_ratio everywhere."""
    net = init_net(table, NetConfig(hidden_layers=hidden), TrainConfig())
    net.weights[-1][:] = 0.0
    net.biases[-1][:] = raw_ratio
    return net


def test_zero_net_holds_no_underlying_for_calls():
    table = _table(10)
    net = _constant_net(table, 0.0)
    for W in net.weights:
        W[:] = 0.0
    delta, c1_hat = net.forward(table)
    call = table['cp_flag'] == 0
    R = 1.0 + R_ONR * DT
    np.testing.assert_allclose(c1_hat[call], R * table.loc[call, 'C0'])
    np.testing.assert_allclose(delta[~call], -1.0)


def test_replication_layer_known_row():
    row = pd.DataFrame({'S0': [100.0], 'S1': [98.223], 'C0': [2.002], 'C1': [1.130], 'r_onr': [0.01],
                        'delta_t': [DT], 'cp_flag': [0], 'tau': [0.1], 'moneyness': [1.0],
                        'sqrt_total_implied_variance': [0.06]})
    net = _constant_net(pd.concat([row, row.assign(moneyness=0.9)]), 0.531)
    delta, c1_hat = net.forward(row)
    assert delta[0] == pytest.approx(0.531)
    assert c1_hat[0] == pytest.approx(1.0564, abs=5e-5)


def test_put_ratio_is_shifted():
    table = _table(10)
    net = _constant_net(table, 0.3)
    ratio = net.hedge_ratio(table)
    np.testing.assert_allclose(ratio[table['cp_flag'] == 1], -0.7)
    np.testing.assert_allclose(ratio[table['cp_flag'] == 0], 0.3)
    assert net.positions(table)[1] is None


def test_standardizer_round_trip():
    features = feature_matrix(_table(), NetConfig('delta_vega_vanna_tau'))
    scaler = Standardizer.fit(features)
    np.testing.assert_allclose(scaler.inverse(scaler.transform(features)), features, rtol=0, atol=1e-12)
    standardized = scaler.transform(features)
    np.testing.assert_allclose(standardized.mean(axis=0), 0.0, atol=1e-12)
    np.testing.assert_allclose(standardized.std(axis=0), 1.0)

    constant = np.column_stack([features[:, 0], np.full(len(features), 3.0)])
    scaler = Standardizer.fit(constant)
    assert (scaler.std > 0).all()
    assert scaler.std[1] == 1.0
    np.testing.assert_allclose(scaler.transform(constant)[:, 1], 0.0)
    np.testing.assert_allclose(scaler.inverse(scaler.transform(constant)), constant, rtol=0, atol=1e-12)


def test_backprop_matches_finite_differences():
    table = _table(32, seed=2)
    net = init_net(table, NetConfig(hidden_layers=(6, 5)), TrainConfig(seed=3))
    # keep every output inside the clamp
    net.weights[-1] *= 0.05
    net.biases[-1][:] = 0.5
    assert grad_check(net, table, alpha=1e-3) < 1e-4


def test_l2_penalty_gradient():
    table = _table(32, seed=4)
    net = init_net(table, NetConfig(feature_set='delta_vega_vanna_tau'), TrainConfig(seed=5))
    plain_w, plain_b = gradients(net, table, alpha=0.0)
    reg_w, reg_b = gradients(net, table, alpha=0.01)
    for W, g0, g1 in zip(net.weights, plain_w, reg_w):
        np.testing.assert_allclose(g1 - g0, 0.02 * W, atol=1e-12)
    for g0, g1 in zip(plain_b, reg_b):
        np.testing.assert_array_equal(g0, g1)


def test_training_is_deterministic():
    table = _table(128)
    config = TrainConfig(learning_rate=1e-3, batch_size=32, epochs=5, l2_alpha=1e-4, seed=7)
    first = train(table, _table(64, seed=1), NetConfig(hidden_layers=(8,)), config)
    second = train(table, _table(64, seed=1), NetConfig(hidden_layers=(8,)), config)
    for a, b in zip(first.weights, second.weights):
        np.testing.assert_array_equal(a, b)
    assert first.history == second.history
    assert 1 <= first.best_epoch <= 5
    assert first.best_val_loss == min(first.history['val_loss'])


def test_training_learns_constant_ratio():
    net = train(_table(256), _table(128, seed=1), NetConfig(hidden_layers=(8,)),
                TrainConfig(learning_rate=1e-2, batch_size=32, epochs=200, l2_alpha=0.0, seed=1))
    test = _table(200, seed=9)
    assert np.abs(net.raw_ratio(test) - 0.6).mean() < 0.05


def test_seed_selection_keeps_lowest_validation_loss():
    config = TrainConfig(learning_rate=1e-3, batch_size=32, epochs=3, seed=11)
    net = train_seeds(_table(96), _table(48, seed=1), NetConfig(hidden_layers=(4,)), config, n_seeds=3)
    assert [r['seed'] for r in net.runs] == [11, 12, 13]
    assert net.best_val_loss == min(r['val_loss'] for r in net.runs)
    with pytest.raises(ConfigurationError):
        train_seeds(_table(96), _table(48), NetConfig(), config, n_seeds=0)


def test_training_input_errors():
    config = TrainConfig(epochs=1)
    with pytest.raises(ConfigurationError):
        train(_table(32), _table(0), NetConfig(), config)
    raw = _table(32).assign(S0=2000.0)
    with pytest.raises(InputError):
        train(raw, _table(16), NetConfig(), config)
    with pytest.raises(ConfigurationError):
        NetConfig(feature_set='delta_only')
    with pytest.raises(ConfigurationError):
        TrainConfig(l2_alpha=-1.0)


def test_default_l2_strengths():
    assert default_l2_alpha('tick', 'delta_vega_tau', '2d') == 0.1
    assert default_l2_alpha('bs', 'M_sigtau', '1d') == 1e-4
    assert default_l2_alpha('tick', 'M_sigtau', '1h') == 1e-5


def test_saved_net_reproduces_hedges(tmp_path):
    table = _table(64)
    net = train(table, _table(32, seed=1), NetConfig(feature_set='delta_vega_tau', hidden_layers=(5,)),
                TrainConfig(epochs=2, seed=2))
    net.window_id = 4
    net.save(tmp_path / "net.json")
    loaded = TrainedNet.load(tmp_path / "net.json")
    assert loaded.window_id == 4 and loaded.name == 'ann_delta_vega_tau'
    np.testing.assert_array_equal(loaded.hedge_ratio(table), net.hedge_ratio(table))
    with pytest.raises(InputError):
        TrainedNet.load(tmp_path / "missing.json")
