"""
Invariant measure estimate and Markov semigroup probes.
"""

import logging
import math
import time
from typing import Any, Callable, Dict, Optional

from levysphere.config import ExperimentSpec, derive_seed
from levysphere.experiments import EXIT_OK, EXIT_VERIFICATION, blow_up_status, build_manifest, make_status
from levysphere.flow_map import resolve_constants
from levysphere.invariant_measure import (
    STDERR_MULTIPLE,
    ball_sampler,
    chapman_kolmogorov_check,
    default_observables,
    energy_decay,
    feller_probe,
    invariance_check,
    pullback_measure,
    time_average,
)
from levysphere.spherical_spectral import SpectralField

logger = logging.getLogger(__name__)


def run_measure_experiment(
    spec: ExperimentSpec,
    progress_callback: Optional[Callable[[str, str], None]] = None
) -> Dict[str, Any]:
    """
    Pullback measure, invariance, time average and the semigroup probes.

    Schedules: t_big (8.0), n_realisations (32), repeats (2), rho (1.0),
    invariance_s ([0.25, 0.5]), average_t (50.0), sample_every (0.05),
    probe_t (0.5), ck_outer (100), ck_inner (10), feller_samples (100),
    feller_eps ([0.1, 0.01, 0.001]).
    """
    started = time.time()
    cfg, constants = resolve_constants(spec.model)
    t_big = float(spec.schedule('t_big', 8.0))
    n_real = int(spec.schedule('n_realisations', 32))
    repeats = int(spec.schedule('repeats', 2))
    rho = float(spec.schedule('rho', 1.0))
    probe_t = float(spec.schedule('probe_t', 0.5))
    threads = spec.threads

    path_seeds = [derive_seed(spec.seed, 'path', i) for i in range(n_real)]
    sampler = ball_sampler(rho, cfg, spec.seed)
    measure = pullback_measure(path_seeds, cfg, t_big, sampler, repeats, threads, progress_callback)
    observables = default_observables(cfg)
    summary: Dict[str, Any] = {
        't_big': t_big,
        'support_size': measure.size,
        'blow_ups': measure.blow_ups,
        'observables': measure.observable_table(observables),
    }
    failures = []

    invariance = []
    for s in spec.schedule('invariance_s', [0.25, 0.5]):
        invariance.extend(invariance_check(measure, observables, float(s), cfg,
                                           derive_seed(spec.seed, 'probe', 10), threads))
    failures += [f"invariance {r['observable']} s={r['s']}" for r in invariance if not r['passed']]

    if progress_callback:
        progress_callback('measure', "time average")
    average = time_average(energy_decay, cfg, SpectralField.zeros(cfg.l_max, cfg.l_min),
                           float(spec.schedule('average_t', 50.0)), float(spec.schedule('sample_every', 0.05)),
                           spec.seed, burn=t_big)
    pooled, pooled_se = measure.expectation(energy_decay)
    combined = math.hypot(pooled_se, average['stderr'])
    average['pullback_mean'] = pooled
    average['agrees'] = abs(average['mean'] - pooled) <= STDERR_MULTIPLE * combined
    summary['time_average'] = average
    if not average['agrees']:
        failures.append("time average vs pullback")

    x = SpectralField.zeros(cfg.l_max, cfg.l_min)
    if progress_callback:
        progress_callback('measure', "Chapman-Kolmogorov")
    ck = chapman_kolmogorov_check(energy_decay, probe_t, probe_t, x, int(spec.schedule('ck_outer', 100)),
                                  int(spec.schedule('ck_inner', 10)), cfg, derive_seed(spec.seed, 'probe', 20),
                                  threads)
    summary['chapman_kolmogorov'] = ck
    if not ck['passed']:
        failures.append("Chapman-Kolmogorov")

    if progress_callback:
        progress_callback('measure', "Feller probe")
    feller = feller_probe(observables['mode1_sigmoid'], probe_t, x,
                          [float(e) for e in spec.schedule('feller_eps', [0.1, 0.01, 0.001])],
                          int(spec.schedule('feller_samples', 100)), cfg, derive_seed(spec.seed, 'probe', 30),
                          max_workers=threads)
    summary['feller'] = {'monotone': feller['monotone'], 'n': feller['n'], 'blow_ups': feller['blow_ups']}
    if not feller['monotone']:
        failures.append("Feller monotonicity")

    status = blow_up_status(measure.blow_ups / (n_real * repeats))
    if status is None:
        if failures:
            status = make_status(EXIT_VERIFICATION, "failed: " + ", ".join(failures))
        else:
            status = make_status(EXIT_OK, "measure checks pass")
    return {
        'command': spec.command,
        'summary': summary,
        'tables': {
            'support': measure.norm_rows(cfg.spectrum),
            'invariance': invariance,
            'feller': feller['rows'],
        },
        'status': status,
        'manifest': build_manifest(spec, cfg, {'paths': path_seeds, 'init': spec.seed}, started,
                                   {'constants': constants}),
    }
