"""
Statistics of the stationary Ornstein-Uhlenbeck process.
"""

import logging
import time
from typing import Any, Callable, Dict, Optional

import numpy as np

from levysphere.config import ExperimentSpec, derive_seed
from levysphere.errors import MomentError
from levysphere.experiments import EXIT_OK, EXIT_VERIFICATION, build_manifest, make_status
from levysphere.flow_map import make_path, resolve_constants
from levysphere.ou_process import (
    check_growth,
    decay_products,
    ergodic_gamma_average,
    estimate_abs_moment,
    ou_ledger_rows,
    ou_stationary_burn_in,
    ou_trajectory,
)
from levysphere.stable_noise import moment_diagnostics

logger = logging.getLogger(__name__)

MAX_TRAJECTORY_ROWS = 2000


def run_ou_stats_experiment(
    spec: ExperimentSpec,
    progress_callback: Optional[Callable[[str, str], None]] = None
) -> Dict[str, Any]:
    """
    Moment estimates, ergodic average of the growth rate, decay products and
    the sub-polynomial growth check on one two-sided path.

    Schedules: horizon (50.0), n_paths (4096), t0 (decay-product start times).
    """
    started = time.time()
    cfg, constants = resolve_constants(spec.model)
    horizon = float(spec.schedule('horizon', 50.0))
    n_paths = int(spec.schedule('n_paths', 4096))
    t0_values = [float(t) for t in spec.schedule('t0', [-2.0, -4.0, -8.0, -16.0, -32.0])]
    path_seed = derive_seed(spec.seed, 'path', 0)
    lo = min(-horizon, min(t0_values))
    path = make_path(cfg, path_seed, lo, horizon, cfg.alpha)

    summary: Dict[str, Any] = {'alpha': cfg.alpha, 'delta': cfg.delta, 'horizon': horizon}
    moments = []
    for mode in range(cfg.m):
        if progress_callback:
            progress_callback('ou-stats', f"moment of mode {mode + 1}/{cfg.m}")
        try:
            moments.append(estimate_abs_moment(cfg, None, mode, n_paths, derive_seed(spec.seed, 'moment')))
        except MomentError as e:
            logger.warning("%s", e)
            break
    summary['abs_moments'] = moments
    summary['increment_moments'] = moment_diagnostics(path.increments[0], cfg.beta)

    ergodic = ergodic_gamma_average(path, cfg, cfg.delta, -horizon, 0.0)
    summary['ergodic'] = ergodic
    if moments:
        predicted = 4.0 * cfg.delta * sum(m['estimate'] for m in moments)
        se = 4.0 * cfg.delta * float(np.sqrt(sum(m['stderr'] ** 2 for m in moments)))
        summary['ergodic_predicted'] = {'mean_noise_term': predicted, 'stderr': se}

    decay = decay_products(path, cfg, cfg.delta, t0_values)
    growth = check_growth(path, cfg, horizon)
    summary['decay_trend_slope'] = decay['trend_slope']
    summary['growth'] = growth

    state = ou_stationary_burn_in(path, cfg, -horizon)
    times, values = ou_trajectory(path, state.generator, state.k, path.grid_index(horizon), state.values)
    stride = max(1, times.size // MAX_TRAJECTORY_ROWS)
    rows = ou_ledger_rows(times[::stride], values[:, ::stride], cfg, cfg.delta)

    if not growth['bounded'] and growth['hypothesis_ok']:
        status = make_status(EXIT_VERIFICATION, "growth ratio still increasing over the horizon")
    else:
        status = make_status(EXIT_OK, "OU statistics complete")
    return {
        'command': spec.command,
        'summary': summary,
        'tables': {'ou_trajectory': rows, 'decay_products': decay['rows']},
        'status': status,
        'manifest': build_manifest(spec, cfg, {'path': path_seed, 'moment': derive_seed(spec.seed, 'moment')},
                                   started, {'constants': constants}),
    }
