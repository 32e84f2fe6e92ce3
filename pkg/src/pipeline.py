"""Experiment pipelines behind the CLI commands.

simulate: paths -> listings -> sample tables
ingest:   tick CSVs -> sample table
run:      clean -> normalize -> split -> fit/train -> evaluate
report:   plot-ready series and a text summary from a finished run

Run directory layout:
    manifest.json
    paths/     simulated paths and listed contracts
    samples/   raw sample tables, cleaning reports, windows, drop counts
    models/    fitted hedgers and trained nets (JSON), per horizon
    reports/   tidy CSVs and summary.txt
    logs/      events.jsonl
"""

import json
from dataclasses import asdict
from datetime import datetime
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np
import pandas as pd

from config import ExperimentConfig
from rules import setup_rules
from src.datapipe import (
    PREFILTER_RULES, VARIANCE_FLOOR,
    build_samples, bucket_moneyness, clean, drops_frame, normalize, read_drops, read_samples, split_windows,
    window_tables, write_cleaning_report, write_samples, write_windows,
)
from src.errors import ConfigurationError, InputError
from src.evaluator import (
    EvalReport, N_DECILES, bucket_diagnostics, daily_mshe, evaluate_models, gap_series, leverage_report,
    pairwise_ci, sharpe_factor, summarize,
)
from src.hedgenet import FEATURE_LABELS, NetConfig, TrainConfig, default_l2_alpha, train_seeds
from src.hedgers import create_hedger, display_name
from src.listings import generate_option_universe, universe_to_csv
from src.logging_system import LogManager
from src.rule_engine import RuleEngine
from src.simkit import GbmParams, HestonParams, PricePath, simulate_gbm, simulate_heston
from src.system_stats import get_system_stats, process_memory_mb
from src.tick_matcher import match_ticks, read_contracts, read_trades

SIMULATED_HORIZONS = {1: '1d', 2: '2d'}
COEFFICIENT_COLUMNS = ['horizon', 'model', 'window_id', 'cp_class', 'coefficient', 'estimate',
                       'std_error', 'n_samples']


def horizon_label(days: int) -> str:
    if days not in SIMULATED_HORIZONS:
        raise ConfigurationError(f"simulated horizons are 1 or 2 trading days, got {days}")
    return SIMULATED_HORIZONS[days]


class Experiment:
    """One run directory and the configuration that produced it."""

    def __init__(self, config: ExperimentConfig, log_manager: Optional[LogManager] = None):
        """Initialize experiment.

        Args:
            config: Experiment configuration; output_dir is the run directory
            log_manager: Defaults to a LogManager writing run_dir/logs/events.jsonl
        """
        self.config = config
        self.run_dir = config.run_dir()
        for sub in ('paths', 'samples', 'models', 'reports', 'logs'):
            (self.run_dir / sub).mkdir(parents=True, exist_ok=True)
        self.log_manager = log_manager or LogManager(
            log_file=str(self.run_dir / 'logs' / 'events.jsonl'),
            debug_mode=config.debug,
        )
        self.rule_status: Dict[str, List[Dict]] = {}

    # ------------------------------------------------------------------
    # Manifest
    # ------------------------------------------------------------------

    @property
    def manifest_path(self) -> Path:
        return self.run_dir / 'manifest.json'

    def read_manifest(self) -> Dict:
        if not self.manifest_path.exists():
            return {}
        try:
            return json.loads(self.manifest_path.read_text(encoding='utf-8'))
        except (OSError, ValueError) as e:
            raise InputError(f"Cannot read manifest {self.manifest_path}: {e}") from e

    def write_manifest(self, command: str, **updates) -> Dict:
        manifest = self.read_manifest()
        manifest.update(updates)
        manifest['config'] = self.config.to_dict()
        manifest['config_hash'] = self.config.config_hash()
        manifest['seed'] = self.config.seed
        manifest.setdefault('commands', []).append(
            {'command': command, 'time': datetime.now().isoformat(timespec='seconds')})
        manifest['system'] = get_system_stats()
        manifest['log_levels'] = dict(self.log_manager.level_counts)
        self.manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True), encoding='utf-8')
        return manifest

    def samples_path(self, label: str) -> Path:
        return self.run_dir / 'samples' / f'samples_{label}.csv'

    # ------------------------------------------------------------------
    # simulate
    # ------------------------------------------------------------------

    def _model_params(self, s0: float, y0: Optional[float] = None):
        sim = self.config.simulation
        if sim.model == 'bs':
            return GbmParams(s0=s0, mu=sim.mu, sigma=sim.sigma)
        return HestonParams(s0=s0, y0=max(y0 if y0 is not None else sim.y0, VARIANCE_FLOOR),
                            theta=sim.theta, kappa=sim.kappa, sigma_y=sim.sigma_y, rho=sim.rho)

    def heston_params(self) -> Optional[HestonParams]:
        sim = self.config.simulation
        return self._model_params(sim.s0, sim.y0) if sim.model == 'heston' else None

    def _simulate_path(self, params, n_days: int, path_index: int, start_day: int) -> PricePath:
        sim = self.config.simulation
        if sim.model == 'bs':
            return simulate_gbm(params, n_days, self.config.seed, path_index, start_day)
        return simulate_heston(params, n_days, sim.steps_per_day, sim.scheme, self.config.seed,
                               path_index, start_day)

    def simulate(self) -> Dict[str, Path]:
        """Simulate paths, list contracts and build one sample table per horizon.

        simulation mode: an in-sample path (set 0) and n_oos_sets paths branching
        from its terminal state, each continuing the in-sample listings.
        rolling/single modes: one long path.

        Returns:
            Sample file per horizon label
        """
        cfg = self.config
        sim = cfg.simulation
        labels = [horizon_label(h) for h in cfg.horizons]
        paths_dir = self.run_dir / 'paths'
        self.log_manager.info(f"[SIMULATE] {sim.model} model, seed {cfg.seed}, mode {cfg.window_mode}")

        with self.log_manager.timed("simulate paths"):
            sets = []
            if cfg.window_mode == 'simulation':
                base = self._simulate_path(self._model_params(sim.s0, sim.y0), sim.in_sample_days, 0, 0)
                sets.append((0, base))
                spot, var = base.terminal_state()
                for k in range(1, sim.n_oos_sets + 1):
                    sets.append((k, self._simulate_path(self._model_params(spot, var), sim.oos_days,
                                                        k, int(base.dates[-1]))))
            else:
                n_days = sim.in_sample_days + sim.n_oos_sets * sim.oos_days
                sets.append((0, self._simulate_path(self._model_params(sim.s0, sim.y0), n_days, 0, 0)))

        universes = {}
        with self.log_manager.timed("list contracts"):
            in_sample_state = None
            for set_id, path in sets:
                path.to_csv(paths_dir / f'path_{set_id:02d}.csv')
                initial = in_sample_state if set_id > 0 else None
                universe, state = generate_option_universe(path, sim.start_date, initial_state=initial)
                if set_id == 0:
                    in_sample_state = state
                universe_to_csv(universe, paths_dir / f'contracts_{set_id:02d}.csv')
                universes[set_id] = universe
                self.log_manager.debug(f"[SIMULATE] set {set_id}: {len(universe)} contracts",
                                       set_id=set_id, contracts=len(universe))

        cleaning = cfg.cleaning
        moneyness_range = (cleaning.moneyness_low, cleaning.moneyness_high) if cleaning.moneyness else None
        outputs = {}
        for days, label in zip(cfg.horizons, labels):
            with self.log_manager.timed(f"build samples {label}"):
                tables = []
                drops: Dict[str, int] = {}
                for set_id, path in sets:
                    params = self._model_params(float(path.spot[0]),
                                                None if path.variance is None else float(path.variance[0]))
                    table = build_samples(path, universes[set_id], params, days, sim.r_onr, sim.start_date,
                                          set_id=set_id, moneyness_range=moneyness_range,
                                          otm_only=cleaning.in_the_money)
                    for reason, count in table.attrs.get('build_drops', {}).items():
                        drops[reason] = drops.get(reason, 0) + count
                    tables.append(table)
                samples = pd.concat(tables, ignore_index=True)
                samples['index'] = np.arange(len(samples), dtype=np.int64)
                write_samples(samples, self.samples_path(label))
                drops_frame(drops).to_csv(self.run_dir / 'samples' / f'build_drops_{label}.csv', index=False)
            n_puts = int((samples['cp_flag'] == 1).sum())
            self.log_manager.info(f"[SIMULATE] {label}: {len(samples)} samples "
                                  f"({len(samples) - n_puts} calls, {n_puts} puts)")
            outputs[label] = self.samples_path(label)

        self.write_manifest('simulate', dataset=sim.model, horizons=labels)
        return outputs

    # ------------------------------------------------------------------
    # ingest
    # ------------------------------------------------------------------

    def ingest(self, trades_path, contracts_path) -> Path:
        """Match tick trades into a sample table for config.ingest_horizon."""
        cfg = self.config
        label = cfg.ingest_horizon
        self.log_manager.info(f"[INGEST] {trades_path} ({label}, tolerance {cfg.tolerance_min} min)")
        with self.log_manager.timed("match ticks"):
            trades = read_trades(trades_path)
            contracts = read_contracts(contracts_path)
            table, drops = match_ticks(trades, contracts, horizon=label, tolerance_min=cfg.tolerance_min,
                                       underlying_id=cfg.underlying_id, r_onr=cfg.simulation.r_onr)
        write_samples(table, self.samples_path(label))
        drops_frame(drops).to_csv(self.run_dir / 'samples' / f'build_drops_{label}.csv', index=False)
        self.log_manager.info(f"[INGEST] {len(table)} samples matched, dropped {sum(drops.values())}")
        self.write_manifest('ingest', dataset='tick', horizons=[label])
        return self.samples_path(label)

    # ------------------------------------------------------------------
    # run
    # ------------------------------------------------------------------

    def _horizons(self, manifest: Dict) -> List[str]:
        labels = manifest.get('horizons')
        if not labels:
            raise InputError(f"No samples in {self.run_dir}; run simulate or ingest first")
        return labels

    def _build_models(self, dataset: str):
        cfg = self.config
        heston = self.heston_params() if dataset == 'heston' else None
        return [create_hedger(name, intercept=cfg.intercept, fixed_call=cfg.fixed_call,
                              fixed_put=cfg.fixed_put, heston=heston) for name in cfg.roster]

    def prepare(self, label: str) -> pd.DataFrame:
        """Read, clean and normalize the sample table of one horizon."""
        table = read_samples(self.samples_path(label))
        with self.log_manager.timed(f"clean {label}"):
            engine = RuleEngine(self.log_manager)
            setup_rules(engine, self.config.cleaning)
            cleaned, report = clean(table, engine)
        drops_path = self.run_dir / 'samples' / f'build_drops_{label}.csv'
        if drops_path.exists():
            drops = read_drops(drops_path)
            for reason, rule_name in PREFILTER_RULES.items():
                report.add_prefiltered(rule_name, drops.get(reason, 0))
        self.rule_status[label] = engine.get_rule_status()
        write_cleaning_report(report, self.run_dir / 'samples' / f'cleaning_{label}.csv')
        self.log_manager.info(f"[CLEAN] {label}: {report.retained}/{report.input_count} samples kept")
        return normalize(cleaned)

    def run(self, horizons: Optional[List[str]] = None) -> Dict[str, pd.DataFrame]:
        """Fit, train and evaluate every roster model on every window.

        Returns:
            Summary frame per horizon label
        """
        cfg = self.config
        manifest = self.read_manifest()
        dataset = manifest.get('dataset', cfg.simulation.model)
        labels = horizons or self._horizons(manifest)
        if dataset == 'tick' and cfg.window_mode == 'simulation':
            raise ConfigurationError("window_mode 'simulation' needs simulated sets; use rolling or single")

        summaries = {}
        for label in labels:
            if not self.samples_path(label).exists():
                raise InputError(f"Missing {self.samples_path(label)}")
            summaries[label] = self._run_horizon(label, dataset)

        self._write_table(summaries)
        self.write_manifest('run', run_horizons=labels, cleaning_rules=self.rule_status)
        self.log_manager.info(f"[RUN] done, process memory {process_memory_mb()} MiB")
        return summaries

    def _run_horizon(self, label: str, dataset: str) -> pd.DataFrame:
        cfg = self.config
        sim = cfg.simulation
        table = self.prepare(label)
        splits = split_windows(table, cfg.window_mode, in_sample_days=sim.in_sample_days,
                               sim_train_days=sim.train_days)
        write_windows(splits, self.run_dir / 'samples' / f'windows_{label}.csv')
        model_dir = self.run_dir / 'models' / label
        model_dir.mkdir(parents=True, exist_ok=True)
        reports_dir = self.run_dir / 'reports'

        report = EvalReport()
        coefficients, pairwise, leverage, buckets = [], [], [], []
        for split in splits:
            train, val, test = window_tables(table, split)
            in_sample = pd.concat([train, val], ignore_index=True)
            self.log_manager.info(f"[FIT] {label} window {split.window_id}: "
                                  f"{len(in_sample)} in-sample, {len(test)} test samples")
            models = self._build_models(dataset)
            with self.log_manager.timed(f"fit {label} window {split.window_id}"):
                for model in models:
                    model.window_id = split.window_id
                    model.fit(in_sample)
                    (model_dir / f'{model.name}_w{split.window_id:02d}.json').write_text(
                        json.dumps(model.to_dict(), indent=1), encoding='utf-8')
                    coefficients.extend({'horizon': label, **row} for row in model.coefficient_rows())
            models.extend(self._train_nets(train, val, label, dataset, split.window_id, model_dir))

            if split.test_sets:
                for set_id in split.test_sets:
                    subset = test.loc[test['set_id'] == set_id]
                    if len(subset):
                        self._evaluate(report, subset, models, set_id)
            else:
                self._evaluate(report, test, models, split.window_id)

            pairwise.extend(self._pairwise(test, models, split.window_id))
            lev = leverage_report(in_sample) if 'implied_vol_1' in in_sample.columns else pd.DataFrame()
            if not lev.empty:
                leverage.append(lev.assign(window_id=split.window_id))
            if len(test) >= N_DECILES:
                buckets.extend(bucket_diagnostics(test, model, axis).assign(window_id=split.window_id)
                               for model in models for axis in ('tau', 'vega'))

        frame = report.to_frame()
        frame.insert(0, 'horizon', label)
        report_name = f'mshe_{label}.csv'
        frame.to_csv(reports_dir / report_name, index=False, float_format='%.10g')
        pd.DataFrame(coefficients, columns=COEFFICIENT_COLUMNS).to_csv(
            reports_dir / f'coefficients_{label}.csv', index=False, float_format='%.10g')
        pd.DataFrame(pairwise).to_csv(reports_dir / f'pairwise_{label}.csv', index=False, float_format='%.10g')
        if leverage:
            pd.concat(leverage, ignore_index=True).to_csv(reports_dir / f'leverage_{label}.csv', index=False,
                                                          float_format='%.10g')
        if buckets:
            pd.concat(buckets, ignore_index=True).to_csv(reports_dir / f'buckets_{label}.csv', index=False,
                                                         float_format='%.10g')

        summary = summarize(frame, pooled=cfg.window_mode != 'simulation')
        summary.insert(0, 'horizon', label)
        summary.to_csv(reports_dir / f'summary_{label}.csv', index=False, float_format='%.10g')
        both = summary.loc[(summary['cp_class'] == 'both') & (summary['section'] == 'all')]
        for _, row in both.iterrows():
            self.log_manager.info(f"[EVAL] {label} {row['model']}: MSHE {row['mshe']:.6g} "
                                  f"({row['rel_improvement']:+.2f}% vs BS Delta)")
        return summary

    def _train_nets(self, train, val, label: str, dataset: str, window_id: int, model_dir: Path) -> list:
        cfg = self.config
        nets = []
        for feature_set in cfg.nets:
            alpha = cfg.training.l2_alpha if cfg.training.l2_alpha >= 0 else default_l2_alpha(dataset, feature_set, label)
            net_config = NetConfig(feature_set, tuple(cfg.training.hidden_layers))
            train_config = TrainConfig(cfg.training.learning_rate, cfg.training.batch_size, cfg.training.epochs,
                                       alpha, cfg.seed)
            self.log_manager.info(f"[TRAIN] {label} window {window_id}: {FEATURE_LABELS[feature_set]}, "
                                  f"alpha {alpha:g}, {cfg.training.n_seeds} seed(s)")
            net = train_seeds(train, val, net_config, train_config, cfg.training.n_seeds, self.log_manager)
            net.window_id = window_id
            net.save(model_dir / f'{net.name}_w{window_id:02d}.json')
            nets.append(net)
        return nets

    def _evaluate(self, report: EvalReport, test: pd.DataFrame, models, window_id: int) -> None:
        evaluate_models(test, models, window_id, report=report)
        if self.config.bucket_moneyness:
            near, away = bucket_moneyness(test)
            if len(near):
                evaluate_models(near, models, window_id, report=report, section='near_the_money')
            if len(away):
                evaluate_models(away, models, window_id, report=report, section='away_from_the_money')

    def _pairwise(self, test: pd.DataFrame, models, window_id: int) -> List[Dict]:
        """Each model against BS Delta, per cp class."""
        baseline = next((m for m in models if m.name == 'bs_delta'), None)
        if baseline is None:
            return []
        rows = []
        for model in models:
            if model is baseline:
                continue
            for cp_class in ('calls', 'puts', 'both'):
                if len(daily_mshe(test, baseline, cp_class)) < 2:
                    continue
                rows.append({'window_id': window_id, **asdict(pairwise_ci(test, model, baseline, cp_class))})
        return rows

    def _write_table(self, summaries: Dict[str, pd.DataFrame]) -> None:
        """Relative improvement vs BS Delta: one row per model, one column per horizon and class."""
        frames = []
        for label, summary in summaries.items():
            part = summary.loc[summary['section'] == 'all']
            wide = part.pivot(index='model', columns='cp_class', values='rel_improvement')
            wide = wide.reindex(columns=['calls', 'puts', 'both'])
            wide.columns = [f'{label}_{c}' for c in wide.columns]
            frames.append(wide)
        table = pd.concat(frames, axis=1)
        order = [m for m in self.config.roster + [f'ann_{n}' for n in self.config.nets] if m in table.index]
        table = table.loc[order]
        names = {f'ann_{k}': v for k, v in FEATURE_LABELS.items()}
        table.insert(0, 'instruments', [2 if m == 'delta_vega_neutral' else 1 for m in table.index])
        table.insert(0, 'display_name', [names.get(m, display_name(m)) for m in table.index])
        table.index.name = 'model'
        table.to_csv(self.run_dir / 'reports' / 'table.csv', float_format='%.4f')

    # ------------------------------------------------------------------
    # report
    # ------------------------------------------------------------------

    def report(self) -> str:
        """Write plot-ready series and return the text summary.

        Raises:
            InputError: The run has not been executed
        """
        manifest = self.read_manifest()
        labels = manifest.get('run_horizons')
        if not labels:
            raise InputError(f"No finished run in {self.run_dir}; run 'run' first")
        reports_dir = self.run_dir / 'reports'
        lines = [f"deltabench report: {self.run_dir}",
                 f"dataset {manifest.get('dataset')}, seed {manifest.get('seed')}, "
                 f"config {manifest.get('config_hash', '')[:12]}"]

        for label in labels:
            try:
                frame = pd.read_csv(reports_dir / f'mshe_{label}.csv')
                summary = pd.read_csv(reports_dir / f'summary_{label}.csv')
                coefficients = pd.read_csv(reports_dir / f'coefficients_{label}.csv')
            except (OSError, pd.errors.EmptyDataError) as e:
                raise InputError(f"Incomplete run outputs for {label}: {e}") from e

            both = frame.loc[(frame['cp_class'] == 'both') & (frame['section'] == 'all')]
            series = both.pivot(index='window_id', columns='model', values='mshe')
            series.to_csv(reports_dir / f'mshe_series_{label}.csv', float_format='%.10g')

            if not coefficients.empty:
                coefficients = coefficients.assign(
                    lower=coefficients['estimate'] - 2.0 * coefficients['std_error'],
                    upper=coefficients['estimate'] + 2.0 * coefficients['std_error'])
                coefficients.to_csv(reports_dir / f'coefficient_series_{label}.csv', index=False,
                                    float_format='%.10g')

            if 'zero' in set(frame['model']):
                ratio = frame.loc[frame['section'] == 'all', ['window_id', 'model', 'cp_class', 'ratio_to_zero']]
                ratio.to_csv(reports_dir / f'ratio_to_zero_{label}.csv', index=False, float_format='%.10g')
                if 'bs_delta' in set(frame['model']):
                    gaps = [gap_series(frame, m) for m in frame['model'].unique() if m not in ('zero', 'bs_delta')]
                    if gaps:
                        pd.concat(gaps, ignore_index=True).to_csv(reports_dir / f'gap_{label}.csv', index=False,
                                                                  float_format='%.10g')

            lines.append("")
            lines.append(f"horizon {label}: relative MSHE change vs BS Delta (%), calls / puts / both")
            part = summary.loc[summary['section'] == 'all']
            for model in part['model'].unique():
                rows = part.loc[part['model'] == model].set_index('cp_class')
                values = [rows['rel_improvement'].get(c, np.nan) for c in ('calls', 'puts', 'both')]
                cells = " / ".join(f"{v:+7.2f}" for v in values)
                mshe_both = rows['mshe'].get('both', np.nan)
                extra = ""
                reduction = -values[2] / 100.0
                if np.isfinite(reduction) and 0.0 <= reduction < 1.0:
                    extra = f"  Sharpe x{sharpe_factor(reduction):.3f}"
                lines.append(f"  {_label(model):<32} {cells}   MSHE {mshe_both:.5g}{extra}")

        text = "\n".join(lines) + "\n"
        (reports_dir / 'summary.txt').write_text(text, encoding='utf-8')
        self.write_manifest('report')
        self.log_manager.info(f"[REPORT] written to {reports_dir}")
        return text


def _label(model: str) -> str:
    if model.startswith('ann_'):
        return FEATURE_LABELS.get(model[4:], model)
    return display_name(model)
