"""Hedging performance: MSHE, relative improvements, daily confidence
intervals, Sharpe factors, leverage coefficients and error buckets.

All functions take normalized sample tables and any object exposing
`name` and `positions(table) -> (delta, eta or None)`; fitted hedgers and
trained nets both qualify.
"""

from dataclasses import dataclass, asdict, field
from typing import Dict, Iterable, List, Optional

import numpy as np
import pandas as pd

from src.errors import EvaluationError, InputError
from src.hedgers.interface import CP_CLASSES
from src.hedgers.ols import gross_return

CLASSES = ('calls', 'puts', 'both')

MATURITY_BUCKETS = {
    '<1m': (0.0, 1.0 / 12.0),
    '1-6m': (1.0 / 12.0, 0.5),
    '>6m': (0.5, np.inf),
}

N_DECILES = 10


def hedged_value(table: pd.DataFrame, model) -> np.ndarray:
    """V = delta S1 + eta C1_atm + R (C0 - delta S0 - eta C0_atm) - C1 per row."""
    delta, eta = model.positions(table)
    S0 = table['S0'].to_numpy(dtype=float)
    R = gross_return(table)
    value = (delta * table['S1'].to_numpy(dtype=float)
             + R * (table['C0'].to_numpy(dtype=float) - delta * S0)
             - table['C1'].to_numpy(dtype=float))
    if eta is not None:
        value = value + eta * table['C1_atm'].to_numpy(dtype=float) - R * eta * table['C0_atm'].to_numpy(dtype=float)
    return value


def hedging_errors(table: pd.DataFrame, model) -> np.ndarray:
    """Scale-free errors 100 V / S0."""
    return 100.0 * hedged_value(table, model) / table['S0'].to_numpy(dtype=float)


@dataclass
class ClassMshe:
    """MSHE per cp class with sample counts; NaN for an empty class."""
    calls: float
    puts: float
    both: float
    n_calls: int
    n_puts: int

    @property
    def n(self) -> int:
        return self.n_calls + self.n_puts

    def get(self, cp_class: str) -> float:
        return getattr(self, cp_class)

    def count(self, cp_class: str) -> int:
        return {'calls': self.n_calls, 'puts': self.n_puts, 'both': self.n}[cp_class]


def mshe_from_errors(errors: np.ndarray, cp_flag: np.ndarray) -> ClassMshe:
    if len(errors) == 0:
        raise EvaluationError("MSHE of an empty table")
    squared = np.asarray(errors, dtype=float) ** 2
    put = np.asarray(cp_flag) == CP_CLASSES['puts']
    n_puts = int(put.sum())
    n_calls = len(squared) - n_puts
    return ClassMshe(
        calls=float(squared[~put].mean()) if n_calls else float('nan'),
        puts=float(squared[put].mean()) if n_puts else float('nan'),
        both=float(squared.mean()),
        n_calls=n_calls,
        n_puts=n_puts,
    )


def mshe(table: pd.DataFrame, model) -> ClassMshe:
    """Mean squared hedging error per cp class.

    Raises:
        EvaluationError: Empty table
    """
    if len(table) == 0:
        raise EvaluationError("MSHE of an empty table", model=getattr(model, 'name', None))
    return mshe_from_errors(hedging_errors(table, model), table['cp_flag'].to_numpy())


def relative_improvement(model_mshe: float, baseline_mshe: float) -> float:
    """Signed percentage change versus the baseline; negative means better."""
    if not baseline_mshe > 0:
        raise EvaluationError(f"baseline MSHE must be positive, got {baseline_mshe}")
    return 100.0 * (model_mshe - baseline_mshe) / baseline_mshe


def sharpe_factor(relative_reduction: float) -> float:
    """1 / sqrt(1 - reduction): Sharpe multiplier of a hedged position."""
    if not 0.0 <= relative_reduction < 1.0:
        raise EvaluationError(f"reduction must lie in [0, 1), got {relative_reduction}")
    return 1.0 / np.sqrt(1.0 - relative_reduction)


def daily_mshe(table: pd.DataFrame, model, cp_class: str = 'both') -> pd.DataFrame:
    """Cross-sectional MSHE per test day: columns set_id, day, mshe, n.

    Days of different simulated sets are distinct days.
    """
    set_id = table['set_id'].to_numpy() if 'set_id' in table.columns else np.zeros(len(table), dtype=np.int64)
    frame = pd.DataFrame({'set_id': set_id,
                          'day': table['day'].to_numpy(),
                          'sq': hedging_errors(table, model) ** 2,
                          'cp': table['cp_flag'].to_numpy()})
    if cp_class != 'both':
        frame = frame.loc[frame['cp'] == CP_CLASSES[cp_class]]
    grouped = frame.groupby(['set_id', 'day'], sort=True)['sq'].agg(['mean', 'size'])
    return grouped.reset_index().rename(columns={'mean': 'mshe', 'size': 'n'})


@dataclass
class PairwiseCI:
    model_a: str
    model_b: str
    cp_class: str
    mean: float
    std: float
    lower: float
    upper: float
    days: int

    @property
    def excludes_zero(self) -> bool:
        return self.lower > 0.0 or self.upper < 0.0


def pairwise_ci(table: pd.DataFrame, model_a, model_b, cp_class: str = 'both') -> PairwiseCI:
    """mean(MSHE_t^a - MSHE_t^b) -+ 2 std over test days with samples.

    Raises:
        EvaluationError: Fewer than two days with samples
    """
    a = daily_mshe(table, model_a, cp_class)
    b = daily_mshe(table, model_b, cp_class)
    if len(a) < 2:
        raise EvaluationError(f"pairwise interval needs at least 2 test days, got {len(a)}")
    diff = a['mshe'].to_numpy() - b['mshe'].to_numpy()
    mean = float(diff.mean())
    std = float(diff.std(ddof=0))
    return PairwiseCI(model_a=model_a.name, model_b=model_b.name, cp_class=cp_class,
                      mean=mean, std=std, lower=mean - 2.0 * std, upper=mean + 2.0 * std, days=len(diff))


@dataclass
class LeverageRow:
    cp_class: str
    bucket: str
    slope: float
    leverage_coefficient: float
    n_samples: int
    delta_t: float


def maturity_bucket(tau: np.ndarray) -> np.ndarray:
    """Label per row: '<1m', '1-6m' or '>6m'."""
    labels = np.empty(len(tau), dtype=object)
    for name, (low, high) in MATURITY_BUCKETS.items():
        labels[(tau >= low) & (tau < high)] = name
    return labels


def leverage_coefficient(train_table: pd.DataFrame, cp_class: str, bucket: str,
                         delta_t: Optional[float] = None) -> LeverageRow:
    """Slope b of the no-intercept regression of the implied-vol change on the
    spot change, times mean(Vega / delta) over the bucket.

    Raises:
        InputError: implied_vol_1 missing
        EvaluationError: Empty bucket or no variation in the spot change
    """
    if 'implied_vol_1' not in train_table.columns:
        raise InputError("leverage coefficient needs implied_vol_1")
    if bucket not in MATURITY_BUCKETS:
        raise EvaluationError(f"Unknown maturity bucket {bucket!r}")
    tau = train_table['tau'].to_numpy(dtype=float)
    rows = train_table.loc[(maturity_bucket(tau) == bucket)
                           & (train_table['cp_flag'].to_numpy() == CP_CLASSES[cp_class])]
    if delta_t is not None:
        rows = rows.loc[np.isclose(rows['delta_t'].to_numpy(dtype=float), delta_t)]
    d_sigma = rows['implied_vol_1'].to_numpy(dtype=float) - rows['implied_vol'].to_numpy(dtype=float)
    d_spot = rows['S1'].to_numpy(dtype=float) - rows['S0'].to_numpy(dtype=float)
    ratio = rows['vega_bs'].to_numpy(dtype=float) / rows['delta_bs'].to_numpy(dtype=float)
    ok = np.isfinite(d_sigma) & np.isfinite(d_spot) & np.isfinite(ratio)
    if not ok.any():
        raise EvaluationError(f"empty leverage bucket {cp_class} {bucket}")
    d_sigma, d_spot, ratio = d_sigma[ok], d_spot[ok], ratio[ok]
    denominator = float(d_spot @ d_spot)
    if denominator == 0.0:
        raise EvaluationError(f"no spot variation in bucket {cp_class} {bucket}")
    slope = float(d_spot @ d_sigma) / denominator
    return LeverageRow(cp_class=cp_class, bucket=bucket, slope=slope,
                       leverage_coefficient=slope * float(ratio.mean()),
                       n_samples=int(ok.sum()),
                       delta_t=float(delta_t) if delta_t is not None else float(rows['delta_t'].iloc[0]))


def leverage_report(train_table: pd.DataFrame, delta_t: Optional[float] = None) -> pd.DataFrame:
    """Every non-empty (cp class, maturity bucket) cell."""
    rows = []
    for cp_class in ('calls', 'puts'):
        for bucket in MATURITY_BUCKETS:
            try:
                rows.append(asdict(leverage_coefficient(train_table, cp_class, bucket, delta_t)))
            except EvaluationError:
                continue
    return pd.DataFrame(rows, columns=['cp_class', 'bucket', 'slope', 'leverage_coefficient',
                                       'n_samples', 'delta_t'])


def bucket_diagnostics(test_table: pd.DataFrame, model, axis: str = 'tau') -> pd.DataFrame:
    """Mean squared relative hedging error (V / C0)^2 per decile of tau or Vega.

    Deciles are taken on the rank, so each holds a tenth of the samples even
    when axis values tie.
    """
    column = {'tau': 'tau', 'vega': 'vega_bs'}.get(axis)
    if column is None:
        raise EvaluationError(f"bucket axis must be 'tau' or 'vega', got {axis!r}")
    if len(test_table) == 0:
        raise EvaluationError("bucket diagnostics of an empty table")
    values = test_table[column].reset_index(drop=True)
    relative = (hedged_value(test_table, model) / test_table['C0'].to_numpy(dtype=float)) ** 2
    n_buckets = min(N_DECILES, len(values))
    decile = pd.qcut(values.rank(method='first'), n_buckets, labels=False)
    frame = pd.DataFrame({'decile': decile, 'value': values, 'relative': relative})
    grouped = frame.groupby('decile').agg(lower=('value', 'min'), upper=('value', 'max'),
                                          count=('relative', 'size'), mean=('relative', 'mean'),
                                          std=('relative', 'std'))
    grouped['std_error'] = (grouped['std'].fillna(0.0) / np.sqrt(grouped['count']))
    grouped = grouped.drop(columns='std').rename(columns={'mean': 'mean_relative_error'}).reset_index()
    grouped.insert(0, 'axis', axis)
    grouped.insert(0, 'model', model.name)
    return grouped


@dataclass
class EvalReport:
    """Tidy MSHE table: one row per model, window and cp class."""
    rows: List[Dict] = field(default_factory=list)

    def add(self, model_name: str, window_id: int, result: ClassMshe,
            baseline: Optional[ClassMshe] = None, zero: Optional[ClassMshe] = None,
            section: str = 'all') -> None:
        for cp_class in CLASSES:
            value = result.get(cp_class)
            row = {'section': section, 'model': model_name, 'window_id': window_id,
                   'cp_class': cp_class, 'mshe': value, 'n_test': result.count(cp_class),
                   'rel_improvement': np.nan, 'ratio_to_zero': np.nan}
            if baseline is not None and baseline.get(cp_class) > 0:
                row['rel_improvement'] = relative_improvement(value, baseline.get(cp_class))
            if zero is not None and zero.get(cp_class) > 0:
                row['ratio_to_zero'] = value / zero.get(cp_class)
            self.rows.append(row)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.rows, columns=['section', 'model', 'window_id', 'cp_class', 'mshe',
                                                'n_test', 'rel_improvement', 'ratio_to_zero'])


def evaluate_models(test_table: pd.DataFrame, models: Iterable, window_id: int = 0,
                    baseline: str = 'bs_delta', zero: str = 'zero',
                    report: Optional[EvalReport] = None, section: str = 'all') -> EvalReport:
    """MSHE of every model on one test table, relative to the baseline model."""
    report = report if report is not None else EvalReport()
    results = {m.name: mshe(test_table, m) for m in models}
    for name, result in results.items():
        report.add(name, window_id, result, results.get(baseline), results.get(zero), section)
    return report


def summarize(frame: pd.DataFrame, baseline: str = 'bs_delta', pooled: bool = True) -> pd.DataFrame:
    """Collapse windows: pooled over samples (rolling/single) or averaged (simulation sets).

    Returns:
        One row per (section, model, cp_class) with mshe, n_test and rel_improvement
    """
    keys = ['section', 'model', 'cp_class']
    valid = frame.dropna(subset=['mshe'])
    if pooled:
        weighted = valid.assign(sse=valid['mshe'] * valid['n_test'])
        out = weighted.groupby(keys, sort=False).agg(sse=('sse', 'sum'), n_test=('n_test', 'sum')).reset_index()
        out['mshe'] = out['sse'] / out['n_test']
        out = out.drop(columns='sse')
    else:
        out = valid.groupby(keys, sort=False).agg(mshe=('mshe', 'mean'), n_test=('n_test', 'sum')).reset_index()
    base = out.loc[out['model'] == baseline].set_index(['section', 'cp_class'])['mshe']
    lookup = [base.get((s, c), np.nan) for s, c in zip(out['section'], out['cp_class'])]
    out['rel_improvement'] = 100.0 * (out['mshe'].to_numpy() - np.array(lookup)) / np.array(lookup)
    return out


def gap_series(frame: pd.DataFrame, model: str, baseline: str = 'bs_delta', zero: str = 'zero') -> pd.DataFrame:
    """Per window: (MSHE_baseline - MSHE_model) / MSHE_zero for each cp class."""
    pivot = frame.pivot_table(index=['section', 'window_id', 'cp_class'], columns='model', values='mshe')
    missing = [m for m in (model, baseline, zero) if m not in pivot.columns]
    if missing:
        raise EvaluationError(f"gap series needs models {missing}")
    gap = (pivot[baseline] - pivot[model]) / pivot[zero]
    return gap.rename('gap').reset_index().assign(model=model)
