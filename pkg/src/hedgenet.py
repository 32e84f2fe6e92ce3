"""HedgeNet: a small fully connected network producing a clamped hedging ratio.

The trainable part maps standardized features to delta_raw in [0, 1]. A fixed
replication layer turns it into the end-of-period price estimate
    C1_hat = delta S1 + R (C0 - delta S0),   delta = delta_raw - cp_flag,
which is fitted to the observed C1 by mean squared error plus L2 on weights.
Training uses Adam on shuffled minibatches and keeps the parameter snapshot
with the smallest validation loss.
"""

import json
import time
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from src.errors import ConfigurationError, InputError, TrainingError
from src.hedgers.ols import gross_return

FEATURE_SETS = {
    'M_sigtau': ['moneyness', 'sqrt_total_implied_variance'],
    'delta_vega_tau': ['delta_bs', 'vega_bs', 'inv_sqrt_tau'],
    'delta_vega_vanna_tau': ['delta_bs', 'vega_bs', 'vanna_bs', 'inv_sqrt_tau'],
}

FEATURE_LABELS = {
    'M_sigtau': 'ANN(M; sigma sqrt(tau))',
    'delta_vega_tau': 'ANN(Delta; Vega; tau)',
    'delta_vega_vanna_tau': 'ANN(Delta; Vega; Vanna; tau)',
}

# L2 strength per (dataset, feature set, horizon); 'tick' holds the tick-data column
DEFAULT_L2_ALPHA = {
    ('bs', 'M_sigtau', '1d'): 1e-4, ('bs', 'M_sigtau', '2d'): 1e-4,
    ('bs', 'delta_vega_tau', '1d'): 1e-4, ('bs', 'delta_vega_tau', '2d'): 1e-3,
    ('bs', 'delta_vega_vanna_tau', '1d'): 1e-4, ('bs', 'delta_vega_vanna_tau', '2d'): 1e-3,
    ('heston', 'M_sigtau', '1d'): 1e-4, ('heston', 'M_sigtau', '2d'): 1e-4,
    ('heston', 'delta_vega_tau', '1d'): 1e-3, ('heston', 'delta_vega_tau', '2d'): 1e-3,
    ('heston', 'delta_vega_vanna_tau', '1d'): 1e-3, ('heston', 'delta_vega_vanna_tau', '2d'): 1e-3,
    ('tick', 'M_sigtau', '1h'): 1e-5, ('tick', 'M_sigtau', '1d'): 1e-2, ('tick', 'M_sigtau', '2d'): 1e-2,
    ('tick', 'delta_vega_tau', '1h'): 1e-3, ('tick', 'delta_vega_tau', '1d'): 1e-2,
    ('tick', 'delta_vega_tau', '2d'): 1e-1,
    ('tick', 'delta_vega_vanna_tau', '1h'): 1e-3, ('tick', 'delta_vega_vanna_tau', '1d'): 1e-3,
    ('tick', 'delta_vega_vanna_tau', '2d'): 1e-3,
}
FALLBACK_L2_ALPHA = 1e-4

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPSILON = 1e-7
STD_FLOOR = 1e-12
GRAD_CHECK_STEP = 1e-6
NORMALIZED_SPOT = 100.0


def default_l2_alpha(dataset: str, feature_set: str, horizon: str) -> float:
    """L2 strength tuned for the dataset, feature set and horizon ('1h', '1d', '2d')."""
    return DEFAULT_L2_ALPHA.get((dataset, feature_set, horizon), FALLBACK_L2_ALPHA)


@dataclass(frozen=True)
class NetConfig:
    feature_set: str = 'M_sigtau'
    hidden_layers: Tuple[int, ...] = (30, 30)

    def __post_init__(self):
        if self.feature_set not in FEATURE_SETS:
            raise ConfigurationError(
                f"Unknown feature set {self.feature_set!r}; expected one of {sorted(FEATURE_SETS)}")
        object.__setattr__(self, 'hidden_layers', tuple(int(w) for w in self.hidden_layers))
        if not self.hidden_layers or any(w <= 0 for w in self.hidden_layers):
            raise ConfigurationError(f"hidden layer widths must be positive, got {self.hidden_layers}")

    @property
    def feature_columns(self) -> List[str]:
        return FEATURE_SETS[self.feature_set] + ['cp_flag']

    @property
    def input_dim(self) -> int:
        return len(self.feature_columns)


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-4
    batch_size: int = 64
    epochs: int = 300
    l2_alpha: float = 1e-4
    seed: int = 1

    def __post_init__(self):
        if self.learning_rate <= 0 or self.batch_size <= 0 or self.epochs <= 0:
            raise ConfigurationError("learning_rate, batch_size and epochs must be positive")
        if self.l2_alpha < 0:
            raise ConfigurationError(f"l2_alpha must be >= 0, got {self.l2_alpha}")


@dataclass
class Standardizer:
    """Per-feature train-set mean and std; std is floored away from zero."""
    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, features: np.ndarray) -> 'Standardizer':
        mean = features.mean(axis=0)
        std = features.std(axis=0)
        std = np.where(std > STD_FLOOR, std, 1.0)
        return cls(mean=mean, std=std)

    def transform(self, features: np.ndarray) -> np.ndarray:
        return (features - self.mean) / self.std

    def inverse(self, standardized: np.ndarray) -> np.ndarray:
        return standardized * self.std + self.mean


def feature_matrix(table: pd.DataFrame, net_config: NetConfig) -> np.ndarray:
    """Raw (unstandardized) inputs; inv_sqrt_tau is 1 / sqrt(tau)."""
    cols = []
    for name in net_config.feature_columns:
        if name == 'inv_sqrt_tau':
            cols.append(1.0 / np.sqrt(table['tau'].to_numpy(dtype=float)))
        else:
            cols.append(table[name].to_numpy(dtype=float))
    return np.column_stack(cols) if cols else np.empty((len(table), 0))


def _check_normalized(table: pd.DataFrame) -> None:
    if len(table) and not np.allclose(table['S0'].to_numpy(dtype=float), NORMALIZED_SPOT, rtol=0, atol=1e-9):
        raise InputError("HedgeNet expects normalized samples (S0 = 100)")


@dataclass
class _Batch:
    """Standardized inputs and replication terms of a set of samples."""
    inputs: np.ndarray
    cp: np.ndarray
    S0: np.ndarray
    S1: np.ndarray
    C0: np.ndarray
    C1: np.ndarray
    R: np.ndarray

    def __len__(self):
        return len(self.C1)

    def take(self, idx: np.ndarray) -> '_Batch':
        return _Batch(*(getattr(self, f)[idx] for f in ('inputs', 'cp', 'S0', 'S1', 'C0', 'C1', 'R')))


def _make_batch(table: pd.DataFrame, net_config: NetConfig, standardizer: Standardizer) -> _Batch:
    _check_normalized(table)
    return _Batch(
        inputs=standardizer.transform(feature_matrix(table, net_config)),
        cp=table['cp_flag'].to_numpy(dtype=float),
        S0=table['S0'].to_numpy(dtype=float),
        S1=table['S1'].to_numpy(dtype=float),
        C0=table['C0'].to_numpy(dtype=float),
        C1=table['C1'].to_numpy(dtype=float),
        R=gross_return(table),
    )


def xavier_init(layer_sizes: Sequence[int], rng: np.random.Generator) -> Tuple[List[np.ndarray], List[np.ndarray]]:
    """Xavier-uniform weights in +-sqrt(6 / (fan_in + fan_out)), zero biases."""
    weights, biases = [], []
    for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return weights, biases


def _forward(weights: List[np.ndarray], biases: List[np.ndarray], inputs: np.ndarray):
    """Returns (pre-clamp output, hidden activations incl. inputs)."""
    activations = [inputs]
    h = inputs
    for W, b in zip(weights[:-1], biases[:-1]):
        h = np.maximum(h @ W + b, 0.0)
        activations.append(h)
    out = (h @ weights[-1] + biases[-1])[:, 0]
    return out, activations


def _replicate(delta: np.ndarray, batch: _Batch) -> np.ndarray:
    return delta * batch.S1 + batch.R * (batch.C0 - delta * batch.S0)


def _loss(weights, biases, batch: _Batch, alpha: float) -> float:
    out, _ = _forward(weights, biases, batch.inputs)
    delta = np.clip(out, 0.0, 1.0) - batch.cp
    error = _replicate(delta, batch) - batch.C1
    penalty = alpha * sum(float(np.sum(W * W)) for W in weights)
    return float(np.mean(error ** 2)) + penalty


def _gradients(weights, biases, batch: _Batch, alpha: float):
    """Backprop of mean squared replication error + alpha sum ||W||^2.

    Returns:
        (loss, weight grads, bias grads, dead count) where dead counts samples
        whose output sits outside the clamp's open interval
    """
    out, activations = _forward(weights, biases, batch.inputs)
    alive = (out > 0.0) & (out < 1.0)
    delta = np.clip(out, 0.0, 1.0) - batch.cp
    error = _replicate(delta, batch) - batch.C1
    n = len(batch)
    loss = float(np.mean(error ** 2)) + alpha * sum(float(np.sum(W * W)) for W in weights)

    grad_out = (2.0 / n) * error * (batch.S1 - batch.R * batch.S0) * alive
    upstream = grad_out[:, None]
    grad_w = [None] * len(weights)
    grad_b = [None] * len(biases)
    for layer in range(len(weights) - 1, -1, -1):
        a = activations[layer]
        grad_w[layer] = a.T @ upstream + 2.0 * alpha * weights[layer]
        grad_b[layer] = upstream.sum(axis=0)
        if layer > 0:
            upstream = (upstream @ weights[layer].T) * (activations[layer] > 0.0)
    return loss, grad_w, grad_b, int(n - alive.sum())


@dataclass
class TrainedNet:
    """Network parameters plus everything needed to reproduce its hedges."""
    config: NetConfig
    train_config: TrainConfig
    standardizer: Standardizer
    weights: List[np.ndarray]
    biases: List[np.ndarray]
    best_epoch: int = 0
    history: Dict[str, List[float]] = field(default_factory=lambda: {'train_loss': [], 'val_loss': []})
    dead_gradient_batches: int = 0
    runs: List[Dict[str, Any]] = field(default_factory=list)
    window_id: Optional[int] = None
    name: str = ''

    variant = 'hedgenet'
    instruments = 1

    def __post_init__(self):
        if not self.name:
            self.name = f"ann_{self.config.feature_set}"

    @property
    def best_val_loss(self) -> float:
        return self.history['val_loss'][self.best_epoch - 1] if self.best_epoch else float('nan')

    def raw_ratio(self, table: pd.DataFrame) -> np.ndarray:
        """delta_raw in [0, 1]."""
        _check_normalized(table)
        inputs = self.standardizer.transform(feature_matrix(table, self.config))
        out, _ = _forward(self.weights, self.biases, inputs)
        return np.clip(out, 0.0, 1.0)

    def hedge_ratio(self, table: pd.DataFrame) -> np.ndarray:
        """Effective delta: delta_raw - cp_flag, so puts lie in [-1, 0]."""
        return self.raw_ratio(table) - table['cp_flag'].to_numpy(dtype=float)

    def positions(self, table: pd.DataFrame):
        return self.hedge_ratio(table), None

    def forward(self, table: pd.DataFrame) -> Tuple[np.ndarray, np.ndarray]:
        """(effective delta, C1_hat) per row."""
        batch = _make_batch(table, self.config, self.standardizer)
        out, _ = _forward(self.weights, self.biases, batch.inputs)
        delta = np.clip(out, 0.0, 1.0) - batch.cp
        return delta, _replicate(delta, batch)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'name': self.name,
            'variant': self.variant,
            'window_id': self.window_id,
            'config': {'feature_set': self.config.feature_set, 'hidden_layers': list(self.config.hidden_layers)},
            'train_config': asdict(self.train_config),
            'standardizer': {'mean': self.standardizer.mean.tolist(), 'std': self.standardizer.std.tolist()},
            'weights': [W.tolist() for W in self.weights],
            'biases': [b.tolist() for b in self.biases],
            'best_epoch': self.best_epoch,
            'history': self.history,
            'dead_gradient_batches': self.dead_gradient_batches,
            'runs': self.runs,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'TrainedNet':
        return cls(
            config=NetConfig(data['config']['feature_set'], tuple(data['config']['hidden_layers'])),
            train_config=TrainConfig(**data['train_config']),
            standardizer=Standardizer(np.array(data['standardizer']['mean'], dtype=float),
                                      np.array(data['standardizer']['std'], dtype=float)),
            weights=[np.array(W, dtype=float) for W in data['weights']],
            biases=[np.array(b, dtype=float) for b in data['biases']],
            best_epoch=int(data['best_epoch']),
            history={k: list(v) for k, v in data['history'].items()},
            dead_gradient_batches=int(data.get('dead_gradient_batches', 0)),
            runs=list(data.get('runs', [])),
            window_id=data.get('window_id'),
            name=data.get('name', ''),
        )

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path) -> 'TrainedNet':
        try:
            return cls.from_dict(json.loads(Path(path).read_text()))
        except (OSError, ValueError, KeyError) as e:
            raise InputError(f"Cannot load network {path}: {e}") from e


class _Adam:
    def __init__(self, params: List[np.ndarray], learning_rate: float):
        self.lr = learning_rate
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params: List[np.ndarray], grads: List[np.ndarray]) -> None:
        self.t += 1
        c1 = 1.0 - ADAM_BETA1 ** self.t
        c2 = 1.0 - ADAM_BETA2 ** self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= ADAM_BETA1
            m += (1.0 - ADAM_BETA1) * g
            v *= ADAM_BETA2
            v += (1.0 - ADAM_BETA2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + ADAM_EPSILON)


def train(train_table: pd.DataFrame, val_table: pd.DataFrame, net_config: NetConfig,
          train_config: TrainConfig, log_manager=None) -> TrainedNet:
    """Train one network from one seed.

    Args:
        train_table: Normalized training samples
        val_table: Normalized validation samples, evaluated once per epoch
        net_config: Feature set and hidden layer widths
        train_config: Optimizer settings, L2 strength and seed
        log_manager: Optional LogManager for progress events

    Returns:
        TrainedNet holding the snapshot with the smallest validation loss

    Raises:
        ConfigurationError: Empty validation set
        TrainingError: Empty training set or non-finite loss
        InputError: Samples not normalized
    """
    if val_table is None or len(val_table) == 0:
        raise ConfigurationError("HedgeNet needs a non-empty validation set for early stopping")
    if len(train_table) == 0:
        raise TrainingError("empty training set", model=f"ann_{net_config.feature_set}")

    name = f"ann_{net_config.feature_set}"
    initial = init_net(train_table, net_config, train_config)
    standardizer, weights, biases = initial.standardizer, initial.weights, initial.biases
    train_batch = _make_batch(train_table, net_config, standardizer)
    val_batch = _make_batch(val_table, net_config, standardizer)

    params = weights + biases
    optimizer = _Adam(params, train_config.learning_rate)
    alpha = train_config.l2_alpha

    history = {'train_loss': [], 'val_loss': []}
    best = (np.inf, 0, None)
    dead_batches = 0
    started = time.time()
    n = len(train_batch)
    for epoch in range(1, train_config.epochs + 1):
        order = np.random.default_rng([train_config.seed, epoch]).permutation(n)
        for start in range(0, n, train_config.batch_size):
            batch = train_batch.take(order[start:start + train_config.batch_size])
            loss, grad_w, grad_b, dead = _gradients(weights, biases, batch, alpha)
            if not np.isfinite(loss):
                raise TrainingError(f"non-finite loss at epoch {epoch}", model=name)
            if dead == len(batch):
                dead_batches += 1
            optimizer.step(params, grad_w + grad_b)

        train_loss = _loss(weights, biases, train_batch, 0.0)
        val_loss = _loss(weights, biases, val_batch, 0.0)
        history['train_loss'].append(train_loss)
        history['val_loss'].append(val_loss)
        if val_loss < best[0]:
            best = (val_loss, epoch, ([W.copy() for W in weights], [b.copy() for b in biases]))
        if log_manager and (epoch == 1 or epoch % 50 == 0 or epoch == train_config.epochs):
            log_manager.debug(f"[TRAIN] {name} epoch {epoch}", epoch=epoch, seed=train_config.seed,
                              train_loss=train_loss, val_loss=val_loss)

    if log_manager:
        if dead_batches:
            log_manager.warning(f"[TRAIN] {name}: {dead_batches} minibatches had no gradient (clamped output)")
        log_manager.info(f"[TIMING] {name} seed {train_config.seed}: {time.time() - started:.1f}s, "
                         f"best epoch {best[1]}, val loss {best[0]:.6g}")

    if best[2] is None:
        raise TrainingError("validation loss was never finite", model=name)
    best_weights, best_biases = best[2]
    return TrainedNet(config=net_config, train_config=train_config, standardizer=standardizer,
                      weights=best_weights, biases=best_biases, best_epoch=best[1], history=history,
                      dead_gradient_batches=dead_batches, name=name)


def train_seeds(train_table: pd.DataFrame, val_table: pd.DataFrame, net_config: NetConfig,
                train_config: TrainConfig, n_seeds: int = 1, log_manager=None) -> TrainedNet:
    """Train n_seeds networks (seed, seed + 1, ...) and keep the lowest validation loss.

    Every run is summarized in the returned net's `runs`.
    """
    if n_seeds < 1:
        raise ConfigurationError(f"n_seeds must be >= 1, got {n_seeds}")
    best_net = None
    runs = []
    for offset in range(n_seeds):
        cfg = TrainConfig(train_config.learning_rate, train_config.batch_size, train_config.epochs,
                          train_config.l2_alpha, train_config.seed + offset)
        net = train(train_table, val_table, net_config, cfg, log_manager)
        runs.append({'seed': cfg.seed, 'best_epoch': net.best_epoch, 'val_loss': net.best_val_loss,
                     'dead_gradient_batches': net.dead_gradient_batches})
        if best_net is None or net.best_val_loss < best_net.best_val_loss:
            best_net = net
    best_net.runs = runs
    return best_net


def grad_check(net: TrainedNet, table: pd.DataFrame, alpha: Optional[float] = None,
               step: float = GRAD_CHECK_STEP) -> float:
    """Max relative error between backprop and central finite differences.

    Args:
        net: Network whose parameters are checked (left unchanged)
        table: Normalized samples forming one batch
        alpha: L2 strength, defaults to the net's training value
        step: Finite-difference step h

    Returns:
        max over parameters of |g - g_fd| / max(|g| + |g_fd|, 1e-8)
    """
    if len(table) == 0:
        raise InputError("grad_check needs a non-empty batch")
    alpha = net.train_config.l2_alpha if alpha is None else alpha
    batch = _make_batch(table, net.config, net.standardizer)
    weights = [W.copy() for W in net.weights]
    biases = [b.copy() for b in net.biases]
    _, grad_w, grad_b, _ = _gradients(weights, biases, batch, alpha)

    worst = 0.0
    for params, grads in ((weights, grad_w), (biases, grad_b)):
        for p, g in zip(params, grads):
            flat, gflat = p.reshape(-1), g.reshape(-1)
            for i in range(flat.size):
                saved = flat[i]
                flat[i] = saved + step
                up = _loss(weights, biases, batch, alpha)
                flat[i] = saved - step
                down = _loss(weights, biases, batch, alpha)
                flat[i] = saved
                numeric = (up - down) / (2.0 * step)
                err = abs(gflat[i] - numeric) / max(abs(gflat[i]) + abs(numeric), 1e-8)
                worst = max(worst, err)
    return worst


def gradients(net: TrainedNet, table: pd.DataFrame, alpha: Optional[float] = None):
    """Backprop gradients (weight grads, bias grads) of the training loss at the net's parameters."""
    alpha = net.train_config.l2_alpha if alpha is None else alpha
    batch = _make_batch(table, net.config, net.standardizer)
    _, grad_w, grad_b, _ = _gradients(net.weights, net.biases, batch, alpha)
    return grad_w, grad_b


def init_net(train_table: pd.DataFrame, net_config: NetConfig, train_config: TrainConfig) -> TrainedNet:
    """Untrained net with Xavier weights and the train-set standardizer."""
    standardizer = Standardizer.fit(feature_matrix(train_table, net_config))
    sizes = [net_config.input_dim, *net_config.hidden_layers, 1]
    weights, biases = xavier_init(sizes, np.random.default_rng([train_config.seed, 0]))
    return TrainedNet(config=net_config, train_config=train_config, standardizer=standardizer,
                      weights=weights, biases=biases)
