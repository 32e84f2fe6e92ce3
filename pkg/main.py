"""Command-line entry point for deltabench."""

import argparse
import json
import sys
from pathlib import Path

from config import ExperimentConfig, parse_override
from src.errors import ConfigurationError, DeltaBenchError
from src.pipeline import Experiment

HORIZON_DAYS = {'1d': 1, '2d': 2}


def build_config(args: argparse.Namespace) -> ExperimentConfig:
    """Base config, then --set overrides, then dedicated flags.

    The base is the --config file, else the config recorded in the run
    directory's manifest, else the built-in defaults.
    """
    overrides = {}
    for text in args.set or []:
        overrides.update(parse_override(text))

    if args.config:
        config = ExperimentConfig.from_file(args.config)
    else:
        config = ExperimentConfig.create_default(model=str(overrides.get('simulation.model', 'bs')))
        manifest = Path(args.run_dir or config.output_dir) / 'manifest.json'
        if manifest.exists():
            try:
                recorded = json.loads(manifest.read_text(encoding='utf-8'))['config']
            except (OSError, ValueError, KeyError) as e:
                raise ConfigurationError(f"Cannot read config from {manifest}: {e}") from e
            config = ExperimentConfig.from_dict(recorded)

    if args.run_dir:
        overrides['output_dir'] = args.run_dir
    if args.seed is not None:
        overrides['seed'] = args.seed
    if args.tolerance_min is not None:
        overrides['tolerance_min'] = args.tolerance_min
    if args.filter_tau_min is not None:
        overrides['cleaning.filter_tau_min_days'] = args.filter_tau_min
    if args.bucket_moneyness:
        overrides['bucket_moneyness'] = True
    if args.debug:
        overrides['debug'] = True

    horizons = args.horizon or []
    if args.command == 'ingest':
        if len(horizons) > 1:
            raise ConfigurationError("ingest takes a single --horizon")
        if horizons:
            overrides['ingest_horizon'] = horizons[0]
    elif horizons:
        if '1h' in horizons and args.command == 'simulate':
            raise ConfigurationError("the 1h horizon exists only for ingested tick data")
        if args.command == 'simulate':
            overrides['horizons'] = [HORIZON_DAYS[h] for h in horizons]

    if overrides:
        config.apply_overrides(overrides)
    return config


def run_command(args: argparse.Namespace) -> int:
    """Dispatch one subcommand.

    Returns:
        Process exit code
    """
    config = build_config(args)
    experiment = Experiment(config)
    log = experiment.log_manager
    log.debug(f"Config {config.config_hash()[:12]}", command=args.command, run_dir=str(experiment.run_dir))
    try:
        if args.command == 'simulate':
            experiment.simulate()
        elif args.command == 'ingest':
            experiment.ingest(args.trades, args.contracts)
        elif args.command == 'run':
            experiment.run(args.horizon or None)
        elif args.command == 'report':
            sys.stdout.write(experiment.report())
    except DeltaBenchError as e:
        log.error(f"{args.command} failed: {e}")
        raise
    finally:
        log.flush()
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='deltabench',
        description='deltabench - hedging model simulator and benchmark harness'
    )
    commands = parser.add_subparsers(dest='command', required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        '--config',
        help='TOML experiment configuration (default: built-in BS simulation study)'
    )
    common.add_argument(
        '--run-dir',
        help='Run directory (default: output_dir from the config)'
    )
    common.add_argument(
        '--seed',
        type=int,
        help='Master seed'
    )
    common.add_argument(
        '--horizon',
        action='append',
        choices=['1h', '1d', '2d'],
        help='Hedging horizon, repeatable (1h only for ingest)'
    )
    common.add_argument(
        '--tolerance-min',
        type=float,
        help='Tick matching tolerance window in minutes (default: 6)'
    )
    common.add_argument(
        '--filter-tau-min',
        type=float,
        metavar='DAYS',
        help='Drop samples with at most DAYS calendar days to maturity'
    )
    common.add_argument(
        '--bucket-moneyness',
        action='store_true',
        help='Also evaluate near-the-money and away-from-the-money sections'
    )
    common.add_argument(
        '--set',
        action='append',
        metavar='KEY=VALUE',
        help="Override any config key, e.g. --set simulation.model=heston"
    )
    common.add_argument(
        '--debug',
        action='store_true',
        help='Write DEBUG events (rule conditions, epoch losses) to the event log'
    )

    commands.add_parser('simulate', parents=[common], help='Simulate paths, list contracts, build samples')
    ingest = commands.add_parser('ingest', parents=[common], help='Build samples from tick trades')
    ingest.add_argument('--trades', required=True, help='Trades CSV (timestamp, contract_id, price, volume)')
    ingest.add_argument('--contracts', required=True, help='Contracts CSV (id, kind, strike, expiry)')
    commands.add_parser('run', parents=[common], help='Clean, split, fit, train and evaluate')
    commands.add_parser('report', parents=[common], help='Write plot data and print the summary')
    return parser


def main(argv=None) -> int:
    """Main entry point."""
    args = build_parser().parse_args(argv)
    try:
        return run_command(args)
    except DeltaBenchError as e:
        print(f"deltabench {args.command}: {e}", file=sys.stderr)
        return e.exit_code
    except OSError as e:
        print(f"deltabench {args.command}: {e}", file=sys.stderr)
        return 2
    except KeyboardInterrupt:
        print("Interrupted", file=sys.stderr)
        return 130


if __name__ == "__main__":
    sys.exit(main())
