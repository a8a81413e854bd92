"""
Random attractor estimate from a pullback schedule.
"""

import logging
import time
from typing import Any, Callable, Dict, Optional

from levysphere.attractor_lab import cloud_rows, fit_trace_rate, omega_limit_estimate, pullback_ensemble
from levysphere.config import ExperimentSpec, derive_seed
from levysphere.experiments import (
    EXIT_NOT_CONVERGED,
    EXIT_OK,
    blow_up_status,
    build_manifest,
    make_status,
)
from levysphere.flow_map import make_path, resolve_constants

logger = logging.getLogger(__name__)

DEFAULT_T0 = [-1.0, -2.0, -4.0, -8.0, -16.0, -32.0]


def run_attractor_experiment(
    spec: ExperimentSpec,
    progress_callback: Optional[Callable[[str, str], None]] = None
) -> Dict[str, Any]:
    """
    Schedules: t0 (list), rho (1.0), n_samples (16), tol (1e-2 * rho).
    """
    started = time.time()
    cfg, constants = resolve_constants(spec.model)
    schedule = [float(t) for t in spec.schedule('t0', DEFAULT_T0)]
    rho = float(spec.schedule('rho', 1.0))
    n_samples = int(spec.schedule('n_samples', 16))
    tol = float(spec.schedule('tol', 1e-2 * rho))
    path_seed = derive_seed(spec.seed, 'path', 0)
    path = make_path(cfg, path_seed, min(schedule), 0.0, cfg.alpha)

    estimate = pullback_ensemble(path, cfg, schedule, rho, n_samples, spec.seed,
                                 spec.threads, progress_callback)
    limit = omega_limit_estimate(estimate, tol, spectrum=cfg.spectrum)
    rate = fit_trace_rate(estimate)

    n_members = len(schedule) * estimate.n_samples
    status = blow_up_status(sum(estimate.blow_up_counts.values()) / n_members)
    if status is None:
        if limit.converged:
            status = make_status(EXIT_OK, f"trace {limit.final_trace:.3g} <= tol {tol:.3g}")
        else:
            status = make_status(EXIT_NOT_CONVERGED, f"trace {limit.final_trace:.3g} > tol {tol:.3g}")

    summary = {
        'rho': rho,
        'tol': tol,
        't0_schedule': estimate.t0_schedule,
        'hausdorff_trace': estimate.hausdorff_trace,
        'trace_rate': rate,
        'reference_rate': cfg.nu * cfg.lambda1,
        'final_trace': limit.final_trace,
        'converged': limit.converged,
        'limit_t0': limit.t0,
        'limit_size': len(limit.cloud),
        'limit_max_v_norm': limit.max_v_norm,
    }
    return {
        'command': spec.command,
        'summary': summary,
        'tables': {
            'clouds': cloud_rows(estimate),
            'hausdorff': [{'t0_a': a, 't0_b': b, 'distance': d}
                          for a, b, d in zip(estimate.t0_schedule, estimate.t0_schedule[1:],
                                             estimate.hausdorff_trace)],
        },
        'status': status,
        'manifest': build_manifest(spec, cfg, {'path': path_seed, 'init': spec.seed}, started,
                                   {'constants': constants}),
    }
