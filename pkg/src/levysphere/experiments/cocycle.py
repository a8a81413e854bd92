"""
Cocycle residuals and the continuity constant of the flow map.
"""

import logging
import time
from typing import Any, Callable, Dict, Optional

from levysphere.attractor_lab import sample_ball
from levysphere.config import ExperimentSpec, ModelConfig, derive_seed
from levysphere.ensemble import run_ensemble
from levysphere.experiments import EXIT_OK, EXIT_VERIFICATION, blow_up_status, build_manifest, make_status
from levysphere.flow_map import (
    Integrator,
    continuity_constant,
    make_integrator,
    make_path,
    resolve_constants,
    verify_cocycle,
)
from levysphere.spherical_spectral import SpectralField

logger = logging.getLogger(__name__)


def _cocycle_member(path_seed: int, cfg: ModelConfig, t: float, s: float, x: SpectralField,
                    integ: Integrator) -> float:
    path = make_path(cfg, path_seed, 0.0, t + s, integ.alpha)
    return verify_cocycle(t, s, path, x, cfg, integ)


def run_cocycle_experiment(
    spec: ExperimentSpec,
    progress_callback: Optional[Callable[[str, str], None]] = None
) -> Dict[str, Any]:
    """
    Schedules: t (1.0), s (1.0), n_pairs (10), rho (1.0), tol (1e-10), eps (1e-6).
    """
    started = time.time()
    cfg, constants = resolve_constants(spec.model)
    t = float(spec.schedule('t', 1.0))
    s = float(spec.schedule('s', 1.0))
    n_pairs = int(spec.schedule('n_pairs', 10))
    rho = float(spec.schedule('rho', 1.0))
    tol = float(spec.schedule('tol', 1e-10))
    eps = float(spec.schedule('eps', 1e-6))

    xs = sample_ball(rho, n_pairs, cfg.l_max, cfg.l_min, spec.seed)
    seeds = [derive_seed(spec.seed, 'path', i) for i in range(n_pairs)]
    integ = make_integrator(cfg)
    tasks = [(i, _cocycle_member, (seeds[i], cfg, t, s, xs[i], integ)) for i in range(n_pairs)]
    result = run_ensemble(tasks, spec.threads, progress_callback, label='cocycle')
    rows = [{'pair': m.key, 'path_seed': seeds[m.key], 'residual': m.value} for m in result.successes]
    max_residual = max((r['residual'] for r in rows), default=float('nan'))

    continuity = None
    if rows:
        path = make_path(cfg, seeds[0], 0.0, t, integ.alpha)
        continuity = continuity_constant(t, path, xs[0], cfg, eps, seed=derive_seed(spec.seed, 'probe'),
                                         integrator=integ)

    status = blow_up_status(result.blow_up_fraction)
    if status is None:
        if max_residual <= tol:
            status = make_status(EXIT_OK, f"max residual {max_residual:.3g} <= {tol:.3g}")
        else:
            status = make_status(EXIT_VERIFICATION, f"max residual {max_residual:.3g} > {tol:.3g}")
    return {
        'command': spec.command,
        'summary': {'t': t, 's': s, 'n_pairs': n_pairs, 'max_residual': max_residual,
                    'tol': tol, 'blow_ups': len(result.blow_ups), 'continuity': continuity},
        'tables': {'residuals': rows},
        'status': status,
        'manifest': build_manifest(spec, cfg, {'paths': seeds, 'init': spec.seed}, started,
                                   {'constants': constants}),
    }
