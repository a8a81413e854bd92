"""
Ensemble verification of the energy ledger and the absorbing radii.
"""

import logging
import time
from typing import Any, Callable, Dict, Optional

from levysphere.attractor_lab import absorbing_radii, sample_ball
from levysphere.config import ExperimentSpec, ModelConfig, derive_seed
from levysphere.ensemble import run_ensemble
from levysphere.experiments import (
    EXIT_OK,
    EXIT_VERIFICATION,
    blow_up_status,
    build_manifest,
    make_status,
)
from levysphere.flow_map import Integrator, make_integrator, make_path, resolve_constants, solve, v_ledger_check
from levysphere.spherical_spectral import SpectralField, h_norm, v_norm

logger = logging.getLogger(__name__)


def _verify_member(path_seed: int, cfg: ModelConfig, t0: float, u0: SpectralField, rho: float,
                   integ: Integrator) -> Dict[str, Any]:
    path = make_path(cfg, path_seed, t0, 0.0, integ.alpha)
    radii = absorbing_radii(path, cfg, [t0], cfg.delta, cfg.c_b, rho)
    trajectory, ledger = solve(path, cfg, t0, 0.0, u0, cfg.delta, [-1.0], integ)
    v_check = v_ledger_check(ledger, cfg.nu, -1.0, 0.0)
    v_minus1_sq = h_norm(trajectory.v_records[-1.0]) ** 2
    u0_v_sq = v_norm(trajectory.u_final, cfg.spectrum) ** 2
    r1_applies = radii.t_bar is not None and t0 <= radii.t_bar
    return {
        'path_seed': path_seed,
        'ledger_rows': len(ledger.rows),
        'ledger_violations': ledger.violation_count,
        'v_ledger_holds': v_check['holds'],
        'v_minus1_sq': v_minus1_sq,
        'r1_sq': radii.r1_sq,
        'r1_applies': r1_applies,
        'r1_ok': (v_minus1_sq <= radii.r1_sq) if r1_applies else None,
        'u0_v_sq': u0_v_sq,
        'r2_sq': radii.r2_sq,
        'r2_overflow': radii.r2_overflow,
        'r2_ok': u0_v_sq <= radii.r2_sq,
        't_bar': radii.t_bar,
    }


def run_verify_experiment(
    spec: ExperimentSpec,
    progress_callback: Optional[Callable[[str, str], None]] = None
) -> Dict[str, Any]:
    """
    Run n_members independent paths from t0 to 0 with the ledger and check
    every inequality.

    Schedules: t0 (-8.0), n_members (20), rho (1.0).
    """
    started = time.time()
    cfg, constants = resolve_constants(spec.model, with_c_b=True)
    t0 = float(spec.schedule('t0', -8.0))
    n_members = int(spec.schedule('n_members', 20))
    rho = float(spec.schedule('rho', 1.0))
    ball = sample_ball(rho, n_members, cfg.l_max, cfg.l_min, spec.seed)
    integ = make_integrator(cfg)
    seeds = [derive_seed(spec.seed, 'path', i) for i in range(n_members)]
    tasks = [(i, _verify_member, (seeds[i], cfg, t0, ball[i], rho, integ)) for i in range(n_members)]
    result = run_ensemble(tasks, spec.threads, progress_callback, label='verify')

    rows = [{'member': m.key, **m.value} for m in result.successes]
    violations = sum(r['ledger_violations'] for r in rows)
    v_fail = sum(1 for r in rows if not r['v_ledger_holds'])
    r1_fail = sum(1 for r in rows if r['r1_ok'] is False)
    r2_fail = sum(1 for r in rows if not r['r2_ok'])
    summary = {
        't0': t0,
        'n_members': n_members,
        'blow_ups': len(result.blow_ups),
        'ledger_violations': violations,
        'v_ledger_failures': v_fail,
        'r1_checked': sum(1 for r in rows if r['r1_applies']),
        'r1_failures': r1_fail,
        'r2_failures': r2_fail,
        'delta': cfg.delta,
        'c_b': cfg.c_b,
        'alpha': cfg.alpha,
    }
    status = blow_up_status(result.blow_up_fraction)
    if status is None:
        if violations or v_fail or r1_fail or r2_fail:
            status = make_status(EXIT_VERIFICATION, f"{violations} ledger rows, {v_fail} V bounds, "
                                                    f"{r1_fail} r1 and {r2_fail} r2 checks failed")
        else:
            status = make_status(EXIT_OK, "all inequalities hold")
    return {
        'command': spec.command,
        'summary': summary,
        'tables': {'members': rows},
        'status': status,
        'manifest': build_manifest(spec, cfg, {'paths': seeds, 'init': spec.seed}, started,
                                   {'constants': constants, 'ensemble': result.metadata}),
    }
