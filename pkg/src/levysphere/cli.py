"""
Command-line interface for levysphere experiments.
"""

import logging
import sys
import time
from typing import Any, Callable, Dict, Optional

import click

from levysphere.config import ExperimentSpec, default_config_dict, load_config, validate_config
from levysphere.errors import ConfigError, NoSolutionError
from levysphere.experiments import EXIT_CONFIG, EXIT_ERROR, run_experiment
from levysphere.formatter import format_json, format_output, write_report


def print_progress(name: str, status: str) -> None:
    """Print progress update for an experiment stage."""
    click.echo(f"  {name.upper():20} {status}")


def common_options(func: Callable) -> Callable:
    """Options shared by every experiment subcommand."""
    options = [
        click.option('--config', '-c', 'config_file', default=None, type=click.Path(exists=True, dir_okay=False),
                     help='Config file (JSON or YAML); defaults are used when omitted'),
        click.option('--out', '-o', 'out_dir', default=None, help='Output directory (auto-generated if not specified)'),
        click.option('--seed', default=None, type=click.IntRange(0, 2 ** 64 - 1), help='Base seed (overrides config)'),
        click.option('--threads', '-w', default=1, type=click.IntRange(1), help='Parallel workers (default: 1)'),
        click.option('--quiet', '-q', is_flag=True, help='Suppress progress output'),
        click.option('--verbose', '-v', is_flag=True, help='Debug logging'),
    ]
    for option in reversed(options):
        func = option(func)
    return func


def _load_spec(command: str, config_file: Optional[str], out_dir: Optional[str], seed: Optional[int],
               threads: int, quiet: bool) -> ExperimentSpec:
    if config_file:
        cfg, experiment, warnings = load_config(config_file)
    else:
        cfg, warnings = validate_config(None)
        experiment = {}
    if not quiet:
        for w in warnings:
            click.echo(f"Warning: {w}", err=True)
    base_seed = seed if seed is not None else int(experiment.get('seed', cfg.seed))
    schedules = dict(experiment.get(command, {}) or {})
    if not out_dir:
        timestamp = time.strftime('%Y%m%d_%H%M%S')
        out_dir = f"levysphere_{command.replace('-', '_')}_{timestamp}"
    return ExperimentSpec(command=command, model=cfg.replace(seed=base_seed), schedules=schedules,
                          output_dir=out_dir, seed=base_seed, threads=threads)


def run_command(command: str, config_file: Optional[str], out_dir: Optional[str], seed: Optional[int],
                threads: int, quiet: bool, verbose: bool) -> None:
    """
    Load the config, run one experiment, write its report and exit with its status code.
    """
    logging.basicConfig(level=logging.DEBUG if verbose else logging.WARNING,
                        format='%(levelname)s %(name)s: %(message)s')

    try:
        spec = _load_spec(command, config_file, out_dir, seed, threads, quiet)
    except ConfigError as e:
        click.echo("Error: invalid configuration", err=True)
        for msg in e.errors:
            click.echo(f"  {msg}", err=True)
        sys.exit(EXIT_CONFIG)

    if not quiet:
        click.echo(f"\nRunning {command}...")
        click.echo("-" * 40)

    start_time = time.time()
    progress_callback = None if quiet else print_progress

    try:
        report = run_experiment(spec, progress_callback)
    except ConfigError as e:
        click.echo(f"Error: {e}", err=True)
        sys.exit(EXIT_CONFIG)
    except NoSolutionError as e:
        click.echo(f"Error: {e}", err=True)
        sys.exit(EXIT_ERROR)
    except ValueError as e:
        click.echo(f"Error: {e}", err=True)
        sys.exit(EXIT_ERROR)

    elapsed = time.time() - start_time

    try:
        written = write_report(report, spec.output_dir)
    except OSError as e:
        click.echo(f"Error writing output: {e}", err=True)
        sys.exit(EXIT_ERROR)

    if not quiet:
        click.echo("-" * 40)
        click.echo(format_output(report, 'text'), nl=False)
        click.echo(f"  Duration: {elapsed:.1f}s")
        click.echo(f"\nOutput saved to: {spec.output_dir} ({len(written)} files)")

    sys.exit(report['status']['code'])


@click.group()
def main() -> None:
    """
    levysphere - Stochastic Navier-Stokes on the rotating sphere with stable Levy noise.

    Examples:

        # Forward run with the energy ledger
        levysphere simulate -c config.json -o out/

        # Ensemble check of the Gronwall and absorption inequalities
        levysphere verify -c config.json --threads 8

        # Cocycle residuals at t = s = 1
        levysphere cocycle --seed 7

        # Print the default configuration
        levysphere default-config
    """


def _make_command(name: str, help_text: str) -> None:
    @main.command(name=name, help=help_text)
    @common_options
    def command(**kwargs: Any) -> None:
        run_command(name, **kwargs)


_make_command('simulate', 'Forward run from t0 to t1 with the energy ledger.')
_make_command('pullback', 'Pullback clouds on one noise path plus absorbing radii.')
_make_command('attractor', 'Random attractor estimate from a pullback schedule.')
_make_command('ou-stats', 'Moments, ergodic averages and growth of the OU process.')
_make_command('verify', 'Ensemble check of every energy inequality.')
_make_command('measure', 'Invariant measure estimate and semigroup probes.')
_make_command('cocycle', 'Cocycle residuals and the flow continuity constant.')


@main.command(name='default-config')
def default_config() -> None:
    """Print the default configuration as JSON."""
    config: Dict[str, Any] = default_config_dict()
    click.echo(format_json(config), nl=False)


if __name__ == '__main__':
    main()
