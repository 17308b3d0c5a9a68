#!/usr/bin/env python3
"""
Command-line interface for fluct-chain.
"""
import argparse
import sys
import logging
from pathlib import Path

from dotenv import load_dotenv

from .runner import ExperimentRunner
from .utils.config_loader import EXPERIMENTS, ConfigLoader, RunConfig


def setup_logging(level=logging.INFO):
    """Set up logging configuration."""
    logging.basicConfig(
        level=level,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
    )


def create_sample_config(args):
    """Create a sample configuration file."""
    output_file = Path(args.output)
    format_type = args.format or 'yaml'

    try:
        ConfigLoader.create_sample_config(output_file, format=format_type)
        print(f"Sample configuration created: {output_file}")
    except Exception as e:
        print(f"Error creating sample config: {e}")
        return 1

    return 0


def _overrides(args) -> dict:
    """Dotted config keys for every flag given on the command line."""
    return {
        'experiment': args.command,
        'chain.n': args.n,
        'chain.boundary': args.boundary,
        'noise.gamma': args.gamma,
        'noise.gammas': args.gammas,
        'noise.mode': args.mode,
        'simulation.trajectories': args.trajectories,
        'simulation.dt': args.dt,
        'simulation.t_max': args.t_max,
        'simulation.t_samples': args.t_samples,
        'simulation.seed': args.seed,
        'simulation.workers': args.workers,
        'simulation.source': args.source,
        'lindblad.h0': args.h0,
        'lindblad.kind': args.kind,
        'analysis.eps': args.eps,
        'output.directory': str(args.output_dir) if args.output_dir else None,
    }


def build_config(args) -> RunConfig:
    """File values (or defaults) with command-line flags applied on top."""
    base = ConfigLoader.load_config(args.config) if args.config else RunConfig()
    return base.with_overrides(_overrides(args))


def run_experiment(args):
    """Run one experiment subcommand."""
    try:
        config = build_config(args)
        runner = ExperimentRunner(config)
        record = runner.run()

        print(f"Experiment: {record.experiment} (fluct-chain {record.version})")
        print(f"  Seed: {record.seed}")
        print(f"  Output directory: {runner.output_dir}")
        print(f"  Wall clock: {record.wall_clock_seconds:.2f} seconds")
        print(f"  Files written: {len(record.checksums)}")
        for name, digest in sorted(record.checksums.items()):
            print(f"    {name}  {digest[:16]}")
        if record.notes:
            print("\nNotes:")
            for note in record.notes:
                print(f"  {note}")

    except Exception as e:
        print(f"Error running {args.command}: {e}")
        logging.exception("Detailed error:")
        return 1

    return 0


def _add_run_flags(parser):
    parser.add_argument('--n', type=int, help='Number of sites')
    parser.add_argument('--boundary', choices=['open', 'ring', 'infinite-analytic'], help='Chain boundary')
    parser.add_argument('--gamma', type=float, help='Noise strength')
    parser.add_argument('--gammas', type=float, nargs='+', help='Sweep of noise strengths')
    parser.add_argument('--mode', choices=['dynamic', 'static', 'none'], help='Noise mode')
    parser.add_argument('--trajectories', type=int, help='Number of noise realisations')
    parser.add_argument('--dt', type=float, help='Timestep')
    parser.add_argument('--t-max', dest='t_max', type=float, help='Final time')
    parser.add_argument('--t-samples', dest='t_samples', type=int, help='Number of output times')
    parser.add_argument('--seed', type=int, help='Master seed')
    parser.add_argument('--workers', type=int, help='Ensemble worker processes (default: env FLUCT_CHAIN_WORKERS or 1)')
    parser.add_argument('--source', type=int, help='Source site (0-based)')
    parser.add_argument('--h0', choices=['xx', 'heisenberg', 'xx_field'], help='Intrinsic Hamiltonian preset')
    parser.add_argument('--kind', choices=['isotropic', 'z-only'], help='Noise channel for the master equation')
    parser.add_argument('--eps', type=float, help='Front threshold')
    parser.add_argument('--output-dir', '-o', dest='output_dir', type=Path,
                        help='Output directory (default: env FLUCT_CHAIN_OUTPUT_DIR or ./results)')


def main(argv=None):
    """Main CLI entry point."""
    load_dotenv()

    parser = argparse.ArgumentParser(
        description='fluct-chain - information propagation in noisy one-dimensional chains',
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  # Create sample configuration
  fluct-chain create-config --output config.yaml

  # Four-panel ensemble heatmaps
  fluct-chain --config config.yaml ensemble --gammas 0.05 0.1 0.2 0.5

  # Exact dephasing evolution on 201 sites
  fluct-chain exact --n 201 --gamma 0.05 --t-max 20

  # Commutator against the noisy light-cone bound
  fluct-chain lindblad --n 4 --gamma 89.5 --kind isotropic --t-max 1 --t-samples 50

  # Mixing verdict for a transverse-field chain with z noise
  fluct-chain mixing --n 3 --h0 xx_field --kind z-only --gamma 0.3
        """
    )

    parser.add_argument('--verbose', '-v', action='store_true', help='Enable verbose logging')
    parser.add_argument('--config', '-c', type=Path, help='Configuration file path')

    subparsers = parser.add_subparsers(dest='command', help='Available commands')

    config_parser = subparsers.add_parser('create-config', help='Create sample configuration file')
    config_parser.add_argument('--output', '-o', required=True, help='Output file path')
    config_parser.add_argument('--format', choices=['yaml', 'json'], help='Configuration format')

    helps = {
        'ensemble': 'Trajectory ensembles: heatmaps and MSD / momentum series',
        'exact': 'Closed-form averaged correlations and exact density evolution',
        'lindblad': 'Many-body master equation and commutator series',
        'bounds': 'Closed-form bound curves and regime report',
        'analyze': 'Propagation exponents and momentum decay rate',
        'mixing': 'Structure matrix, rank condition and relaxation verdict',
    }
    for name in EXPERIMENTS:
        _add_run_flags(subparsers.add_parser(name, help=helps[name]))

    args = parser.parse_args(argv)

    log_level = logging.DEBUG if args.verbose else logging.INFO
    setup_logging(log_level)

    if not args.command:
        parser.print_help()
        return 1

    if args.command == 'create-config':
        return create_sample_config(args)
    elif args.command in EXPERIMENTS:
        return run_experiment(args)
    else:
        parser.print_help()
        return 1


if __name__ == '__main__':
    sys.exit(main())
