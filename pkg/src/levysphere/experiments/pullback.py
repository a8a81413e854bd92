"""
Pullback clouds on one noise realisation, with absorbing radii.
"""

import logging
import time
from typing import Any, Callable, Dict, Optional

from levysphere.attractor_lab import absorbing_radii, cloud_rows, pullback_ensemble, verify_absorption
from levysphere.config import ExperimentSpec, derive_seed
from levysphere.experiments import (
    EXIT_OK,
    EXIT_VERIFICATION,
    blow_up_status,
    build_manifest,
    make_status,
)
from levysphere.flow_map import make_path, resolve_constants

logger = logging.getLogger(__name__)

DEFAULT_T0 = [-1.0, -2.0, -4.0, -8.0]


def run_pullback_experiment(
    spec: ExperimentSpec,
    progress_callback: Optional[Callable[[str, str], None]] = None
) -> Dict[str, Any]:
    """
    Push a ball of initial data forward from each t0 to time 0 and check the
    absorbing radii.

    Schedules: t0 (list), rho (1.0), n_samples (16).
    """
    started = time.time()
    cfg, constants = resolve_constants(spec.model, with_c_b=True)
    schedule = [float(t) for t in spec.schedule('t0', DEFAULT_T0)]
    rho = float(spec.schedule('rho', 1.0))
    n_samples = int(spec.schedule('n_samples', 16))
    path_seed = derive_seed(spec.seed, 'path', 0)
    path = make_path(cfg, path_seed, min(schedule), 0.0, cfg.alpha)

    estimate = pullback_ensemble(path, cfg, schedule, rho, n_samples, spec.seed,
                                 spec.threads, progress_callback)
    radii = absorbing_radii(path, cfg, schedule, cfg.delta, cfg.c_b, rho)
    absorption = verify_absorption(estimate, radii)

    n_members = len(schedule) * estimate.n_samples
    n_blow = sum(estimate.blow_up_counts.values())
    fraction = n_blow / n_members if n_members else 0.0
    status = blow_up_status(fraction)
    if status is None:
        if absorption['ok']:
            status = make_status(EXIT_OK, "pullback complete, absorption holds")
        else:
            status = make_status(EXIT_VERIFICATION, "absorbing radius violated")

    tables = {
        'clouds': cloud_rows(estimate),
        'hausdorff': [{'t0_a': a, 't0_b': b, 'distance': d}
                      for a, b, d in zip(estimate.t0_schedule, estimate.t0_schedule[1:],
                                         estimate.hausdorff_trace)],
    }
    summary = {
        'rho': rho,
        'n_samples': estimate.n_samples,
        't0_schedule': estimate.t0_schedule,
        'hausdorff_trace': estimate.hausdorff_trace,
        'blow_up_counts': {str(k): v for k, v in estimate.blow_up_counts.items()},
        'radii': radii.as_dict(),
        'absorption': absorption,
    }
    return {
        'command': spec.command,
        'summary': summary,
        'tables': tables,
        'status': status,
        'manifest': build_manifest(spec, cfg, {'path': path_seed, 'init': spec.seed}, started,
                                   {'constants': constants}),
    }
