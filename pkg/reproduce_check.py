#!/usr/bin/env python3
"""Full-scale reproduction checks of the simulation study.

Runs the heavy Monte-Carlo pricing oracles and the BS/Heston simulation
studies at their published sizes and prints PASS/FAIL per criterion.
Not collected by pytest.

Usage:
    python reproduce_check.py pricing                 # BS and Heston price vs Monte Carlo
    python reproduce_check.py bs --seeds 1 2 3        # BS study, regression rows
    python reproduce_check.py heston --seeds 1 2 3    # Heston study incl. model-implied hedges
    python reproduce_check.py ann --seeds 1           # HedgeNet vs best regression, BS one-day
    python reproduce_check.py all --out runs/check
"""

import argparse
import sys
import time
from pathlib import Path

import numpy as np
import pandas as pd

# Add project root to path
sys.path.insert(0, str(Path(__file__).parent))

from config import ExperimentConfig
from src.pipeline import Experiment
from src.pricer import bs_price, heston_price
from src.simkit import DT_DAY, HestonParams, path_rng, simulate_heston_paths

REGRESSIONS = [
    "delta", "gamma", "vega", "vanna", "delta_gamma", "delta_vega", "delta_vanna", "delta_vega_gamma",
    "delta_vega_vanna", "delta_gamma_vanna", "delta_vega_gamma_vanna",
]


class Checker:
    """Collects PASS/FAIL lines."""

    def __init__(self):
        self.failures = 0

    def check(self, label: str, ok: bool, detail: str) -> None:
        status = "PASS" if ok else "FAIL"
        if not ok:
            self.failures += 1
        print(f"  [{status}] {label}: {detail}")


def check_pricing(checker: Checker, n_paths: int, heston_paths: int, steps_per_day: int) -> None:
    print("Pricing vs Monte Carlo")
    z = path_rng(2024).standard_normal(n_paths)
    for moneyness in (0.85, 1.0, 1.15):
        for tau in (1 / 12, 0.5, 1.0):
            K = 100.0 / moneyness
            ST = 100.0 * np.exp(-0.02 * tau + 0.2 * np.sqrt(tau) * z)
            for kind in ("call", "put"):
                payoff = np.maximum(ST - K, 0.0) if kind == "call" else np.maximum(K - ST, 0.0)
                se = payoff.std() / np.sqrt(n_paths)
                diff = payoff.mean() - bs_price(100.0, K, tau, 0.2, 0.0, kind)
                checker.check(f"BS M={moneyness} tau={tau:.3f} {kind}", abs(diff) < 3 * se,
                              f"diff {diff:+.5f}, 3 SE {3 * se:.5f}")

    params = HestonParams()
    n_days = 63
    chunk = 50_000
    terminal = []
    for batch in range(int(np.ceil(heston_paths / chunk))):
        spots, _ = simulate_heston_paths(params, n_days, min(chunk, heston_paths - batch * chunk), seed=2024,
                                         steps_per_day=steps_per_day, scheme="milstein", batch_index=batch)
        terminal.append(spots[:, -1])
    terminal = np.concatenate(terminal)
    for kind in ("call", "put"):
        payoff = np.maximum(terminal - 2000.0, 0.0) if kind == "call" else np.maximum(2000.0 - terminal, 0.0)
        se = payoff.std() / np.sqrt(len(payoff))
        diff = payoff.mean() - heston_price(params, 2000.0, params.y0, 2000.0, n_days * DT_DAY, 0.0, kind)
        checker.check(f"Heston ATM tau=0.25 {kind}", abs(diff) < 3 * se, f"diff {diff:+.4f}, 3 SE {3 * se:.4f}")


def _study(model: str, seed: int, out: Path, nets=(), horizons=(1, 2)):
    """Simulate and run one study; returns (experiment, summary per horizon)."""
    config = ExperimentConfig.create_default(model=model)
    config.apply_overrides({'seed': seed, 'output_dir': str(out / f"{model}_seed{seed}"),
                            'nets': list(nets), 'horizons': list(horizons)})
    experiment = Experiment(config)
    started = time.time()
    experiment.simulate()
    summaries = experiment.run()
    print(f"  {model} seed {seed}: {time.time() - started:.0f}s")
    return experiment, summaries


def _both(summary: pd.DataFrame, column: str = 'mshe') -> pd.Series:
    part = summary.loc[(summary['section'] == 'all') & (summary['cp_class'] == 'both')]
    return part.set_index('model')[column]


def check_bs(checker: Checker, seeds, out: Path) -> None:
    print("BS simulation study")
    ratio = {'1d': [], '2d': []}
    rel = {'1d': [], '2d': []}
    for seed in seeds:
        _, summaries = _study('bs', seed, out)
        for label, summary in summaries.items():
            mshe = _both(summary)
            ratio[label].append(mshe['bs_delta'] / mshe['zero'])
            rel[label].append(_both(summary, 'rel_improvement'))
    for label in ('1d', '2d'):
        value = float(np.mean(ratio[label]))
        checker.check(f"{label} BS Delta / zero hedge", value <= 0.02, f"{value:.4f}")
    mean_rel = {label: pd.concat(rel[label], axis=1).mean(axis=1) for label in rel}
    for model in ('delta_gamma', 'delta_vega_gamma_vanna'):
        value = mean_rel['2d'][model]
        checker.check(f"2d {model} vs BS Delta", -6.0 <= value <= 0.0, f"{value:+.2f}%")
    for model in REGRESSIONS:
        value = mean_rel['1d'][model]
        checker.check(f"1d {model} vs BS Delta", -3.0 <= value <= 2.0, f"{value:+.2f}%")


def check_heston(checker: Checker, seeds, out: Path) -> None:
    print("Heston simulation study")
    ratio = {'1d': [], '2d': []}
    rel = []
    coefficients = []
    for seed in seeds:
        experiment, summaries = _study('heston', seed, out)
        for label, summary in summaries.items():
            mshe = _both(summary)
            ratio[label].append(mshe['bs_delta'] / mshe['zero'])
        rel.append(_both(summaries['1d'], 'rel_improvement'))
        frame = pd.read_csv(experiment.run_dir / 'reports' / 'coefficients_1d.csv')
        coefficients.append(frame.loc[(frame['model'] == 'delta') & (frame['coefficient'] == 'delta')])
    for label in ('1d', '2d'):
        value = float(np.mean(ratio[label]))
        checker.check(f"{label} BS Delta / zero hedge", value <= 0.05, f"{value:.4f}")
    delta = pd.concat(coefficients).groupby('cp_class')['estimate'].mean()
    checker.check("Delta-only call coefficient", 0.90 < delta['calls'] < 1.00, f"{delta['calls']:.4f}")
    checker.check("Delta-only put coefficient", 1.00 < delta['puts'] < 1.10, f"{delta['puts']:.4f}")
    mean_rel = pd.concat(rel, axis=1).mean(axis=1)
    for model, low, high in (('delta_vega_vanna', -9.0, -1.0), ('heston_adjusted', -10.0, -2.0),
                             ('delta_vega_neutral', -75.0, -50.0)):
        value = mean_rel[model]
        checker.check(f"1d {model} vs BS Delta", low <= value <= high, f"{value:+.2f}%")


def check_ann(checker: Checker, seeds, out: Path) -> None:
    print("HedgeNet on BS one-day data")
    for seed in seeds:
        _, summaries = _study('bs', seed, out / 'ann', nets=['delta_vega_tau'], horizons=[1])
        summary = summaries['1d']
        mshe = _both(summary)
        best = mshe[[m for m in REGRESSIONS if m in mshe.index]].min()
        value = mshe['ann_delta_vega_tau'] / best
        checker.check(f"seed {seed} ANN / best regression", value <= 1.15, f"{value:.4f}")


def main():
    parser = argparse.ArgumentParser(description='Full-scale reproduction checks of the simulation study')
    parser.add_argument('check', choices=['pricing', 'bs', 'heston', 'ann', 'all'])
    parser.add_argument('--seeds', type=int, nargs='+', default=[1, 2, 3],
                        help='Master seeds, results are averaged (default: 1 2 3)')
    parser.add_argument('--out', default='runs/reproduce', help='Directory for the study runs')
    parser.add_argument('--paths', type=int, default=1_000_000,
                        help='Monte-Carlo draws for the BS oracle (default: 1000000)')
    parser.add_argument('--heston-paths', type=int, default=1_000_000,
                        help='Milstein paths for the Heston oracle (default: 1000000)')
    parser.add_argument('--steps-per-day', type=int, default=100,
                        help='Milstein steps per day for the Heston oracle (default: 100)')
    args = parser.parse_args()

    checker = Checker()
    out = Path(args.out)
    if args.check in ('pricing', 'all'):
        check_pricing(checker, args.paths, args.heston_paths, args.steps_per_day)
    if args.check in ('bs', 'all'):
        check_bs(checker, args.seeds, out)
    if args.check in ('heston', 'all'):
        check_heston(checker, args.seeds, out)
    if args.check in ('ann', 'all'):
        check_ann(checker, args.seeds, out)

    print(f"\n{checker.failures} failure(s)")
    return 1 if checker.failures else 0


if __name__ == '__main__':
    sys.exit(main())
