"""
Forward simulation with the energy ledger.
"""

import logging
import time
from typing import Any, Callable, Dict, Optional

from levysphere.attractor_lab import sample_ball
from levysphere.config import ExperimentSpec, derive_seed
from levysphere.errors import BlowUpError
from levysphere.experiments import EXIT_BLOW_UP, EXIT_OK, EXIT_VERIFICATION, build_manifest, make_status
from levysphere.flow_map import make_integrator, make_path, resolve_constants, solve
from levysphere.spherical_spectral import (
    SpectralField,
    enstrophy,
    field_to_snapshot,
    h_norm,
    spectral_csv_rows,
    v_norm,
)

logger = logging.getLogger(__name__)


def run_simulate_experiment(
    spec: ExperimentSpec,
    progress_callback: Optional[Callable[[str, str], None]] = None
) -> Dict[str, Any]:
    """
    Integrate u from t0 to t1 on one path and keep the ledger.

    Schedules: t0 (0.0), t1 (1.0), record_every (0.1), rho (1.0; 0 starts at rest).
    """
    started = time.time()
    cfg, constants = resolve_constants(spec.model)
    t0 = float(spec.schedule('t0', 0.0))
    t1 = float(spec.schedule('t1', 1.0))
    every = float(spec.schedule('record_every', 0.1))
    rho = float(spec.schedule('rho', 1.0))
    path_seed = derive_seed(spec.seed, 'path', 0)

    integ = make_integrator(cfg)
    path = make_path(cfg, path_seed, t0, t1, integ.alpha)
    if rho > 0:
        u0 = sample_ball(rho, 1, cfg.l_max, cfg.l_min, spec.seed)[0]
    else:
        u0 = SpectralField.zeros(cfg.l_max, cfg.l_min)
    n_records = int(round((t1 - t0) / every)) if every > 0 else 0
    record_times = [round(t0 + k * every, 12) for k in range(n_records + 1)]

    if progress_callback:
        progress_callback('simulate', f"t in [{t0:g}, {t1:g}], {len(record_times)} records")
    summary: Dict[str, Any] = {'t0': t0, 't1': t1, 'alpha': cfg.alpha, 'delta': cfg.delta, 'rho': rho}
    tables: Dict[str, Any] = {}
    try:
        trajectory, ledger = solve(path, cfg, t0, t1, u0, cfg.delta, record_times, integ)
    except BlowUpError as e:
        summary['blow_up_time'] = e.time
        if e.ledger is not None:
            tables['ledger'] = e.ledger.to_rows()
        status = make_status(EXIT_BLOW_UP, f"blow-up at t={e.time:.6g}")
    else:
        tables['ledger'] = ledger.to_rows()
        tables['snapshots'] = [
            {'t': t, 'u_norm': h_norm(u), 'u_norm_V': v_norm(u, cfg.spectrum), 'enstrophy': enstrophy(u)}
            for t, u in sorted(trajectory.snapshots.items())
        ]
        tables['spectrum_final'] = spectral_csv_rows(trajectory.u_final)
        summary.update(
            n_steps=trajectory.n_steps,
            final_u_norm=h_norm(trajectory.u_final),
            final_snapshot=field_to_snapshot(trajectory.u_final, t1),
            ledger_violations=ledger.violation_count,
        )
        if ledger.violation_count:
            status = make_status(EXIT_VERIFICATION, f"{ledger.violation_count} ledger rows violated")
        else:
            status = make_status(EXIT_OK, "simulation complete")

    return {
        'command': spec.command,
        'summary': summary,
        'tables': tables,
        'status': status,
        'manifest': build_manifest(spec, cfg, {'path': path_seed}, started, {'constants': constants}),
    }

