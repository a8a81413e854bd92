"""
Experiment runners, one module per CLI command.

Each module exposes run_<name>_experiment(spec, progress_callback) returning a
report dict with 'command', 'summary', 'tables', 'status' and 'manifest'.
"""

import importlib
import platform
import time
from importlib.metadata import version as package_version
from typing import Any, Callable, Dict, Optional

import numpy as np
import scipy
import yaml

from levysphere import __version__
from levysphere.config import COMMANDS, ExperimentSpec, ModelConfig, validate_command

# Exit codes
EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CONFIG = 2
EXIT_BLOW_UP = 3
EXIT_VERIFICATION = 4
EXIT_NOT_CONVERGED = 5

# Ensembles losing more than this fraction to blow-up are reported as dominated
BLOW_UP_DOMINATED = 0.5

# Command name to module name mapping (for names that are not identifiers)
COMMAND_MODULE_MAP = {
    'ou-stats': 'ou_stats',
}


def get_experiment_function(command: str) -> Optional[Callable]:
    """
    Dynamically import and return the runner for a command.

    Args:
        command: CLI command name

    Returns:
        Runner function or None if not found
    """
    module_name = COMMAND_MODULE_MAP.get(command, command)
    function_name = f"run_{module_name}_experiment"

    try:
        module = importlib.import_module(f'levysphere.experiments.{module_name}')
        return getattr(module, function_name)
    except (ImportError, AttributeError):
        return None


def get_available_commands() -> list:
    return list(COMMANDS)


def make_status(code: int, reason: str) -> Dict[str, Any]:
    return {'code': code, 'reason': reason}


def blow_up_status(fraction: float) -> Optional[Dict[str, Any]]:
    """EXIT_BLOW_UP status when more than half the members blew up, else None."""
    if fraction > BLOW_UP_DOMINATED:
        return make_status(EXIT_BLOW_UP, f"{fraction:.0%} of ensemble members blew up")
    return None


def build_manifest(
    spec: ExperimentSpec,
    cfg: ModelConfig,
    seeds: Dict[str, Any],
    started: float,
    extra: Optional[Dict[str, Any]] = None
) -> Dict[str, Any]:
    """
    Config echo, versions, seeds and wall clock for one run.
    """
    manifest = {
        'command': spec.command,
        'config': cfg.to_dict(),
        'schedules': dict(spec.schedules),
        'seeds': {'base': spec.seed, **seeds},
        'threads': spec.threads,
        'versions': {
            'levysphere': __version__,
            'numpy': np.__version__,
            'scipy': scipy.__version__,
            'click': package_version('click'),
            'pyyaml': yaml.__version__,
            'python': platform.python_version(),
        },
        'timestamp': time.strftime('%Y-%m-%d %H:%M:%S UTC', time.gmtime(started)),
        'duration_seconds': round(time.time() - started, 2),
    }
    if extra:
        manifest.update(extra)
    return manifest


def run_experiment(spec: ExperimentSpec, progress_callback: Optional[Callable[[str, str], None]] = None) -> Dict[str, Any]:
    """
    Execute the pipeline of spec.command.

    Raises:
        ValueError: For an unknown command
    """
    validate_command(spec.command)
    runner = get_experiment_function(spec.command)
    if runner is None:
        raise ValueError(f"No runner for command '{spec.command}'")
    return runner(spec, progress_callback)
