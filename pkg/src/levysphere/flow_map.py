"""
Random dynamical system of the transformed equation.

v = u - z solves dv/dt = -(nu A + C) v - B(u, u) + f + alpha z with u = v + z,
integrated by exponential time differencing (Cox-Matthews ETD-RK2). The
noise enters only through z, stepped pathwise alongside v. The cocycle is
phi(t, w) x = v(t; x - z(0)) + z(t).
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import trapezoid

from levysphere.config import ModelConfig, derive_seed
from levysphere.errors import AlignmentError, BlowUpError, ParameterError, RangeError
from levysphere.fluid_operators import (
    OperatorContext,
    advect_vorticity,
    estimate_c_b,
    estimate_mode_bound_delta,
    linear_symbol,
)
from levysphere.ou_process import (
    OUState,
    _rotate_mode,
    burn_steps,
    gamma_p_q,
    ou_generator,
    ou_stationary_burn_in,
    ou_step,
    select_alpha_for_config,
)
from levysphere.spherical_spectral import (
    SpectralField,
    a_norm,
    enstrophy,
    h_norm,
    random_field,
    v_norm,
)
from levysphere.stable_noise import NoisePath, make_generator, make_two_sided_path, shift_path

logger = logging.getLogger(__name__)

BLOWUP_NORM = 1e12
VIOLATION_TOLERANCE = 1e-8
TAG_CONTINUITY = 41
_SERIES_CUTOFF = 1e-2


def phi_functions(x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    phi1(x) = (e^x - 1) / x and phi2(x) = (e^x - 1 - x) / x^2, elementwise.

    Small |x| uses the Taylor series; x may be complex.
    """
    x = np.asarray(x, dtype=complex)
    small = np.abs(x) < _SERIES_CUTOFF
    safe = np.where(small, 1.0, x)
    em1 = np.expm1(safe)
    phi1 = np.where(small, 1 + x / 2 + x ** 2 / 6 + x ** 3 / 24 + x ** 4 / 120, em1 / safe)
    phi2 = np.where(small, 0.5 + x / 6 + x ** 2 / 24 + x ** 3 / 120 + x ** 4 / 720,
                    (em1 - safe) / (safe * safe))
    return phi1, phi2


@dataclass(frozen=True)
class Integrator:
    """Precomputed ETD-RK2 factors and noise basis for one config and alpha."""
    cfg: ModelConfig
    alpha: float
    ctx: OperatorContext
    generator: np.ndarray
    expo: np.ndarray
    phi1h: np.ndarray
    phi2h: np.ndarray
    forcing: np.ndarray
    basis: Tuple[Tuple[np.ndarray, np.ndarray], ...]

    @property
    def dt(self) -> float:
        return self.cfg.dt

    @property
    def path_step(self) -> float:
        return self.cfg.path_step

    def noise_coeffs(self, values: np.ndarray) -> np.ndarray:
        out = np.zeros_like(self.forcing)
        for z, (re_part, im_part) in zip(values, self.basis):
            out = out + np.real(z) * re_part
            if np.imag(z) != 0:
                out = out + np.imag(z) * im_part
        return out

    def noise_field(self, values: np.ndarray) -> SpectralField:
        return SpectralField(self.cfg.l_max, self.cfg.l_min, self.noise_coeffs(values))


def make_integrator(cfg: ModelConfig, alpha: Optional[float] = None) -> Integrator:
    """
    Build the step factors for cfg.

    Raises:
        ParameterError: For dt <= 0 or an invalid operator context
        DimensionError: If the grid cannot resolve l_max
    """
    if not cfg.dt > 0:
        raise ParameterError(f"dt must be positive, got {cfg.dt}")
    alpha = cfg.alpha if alpha is None else alpha
    ctx = cfg.context()
    ctx.validate(cfg.l_max)
    lin = linear_symbol(cfg.l_max, cfg.l_min, ctx) * cfg.dt
    phi1, phi2 = phi_functions(lin)
    basis = []
    for (l, m), e in zip(cfg.noise_modes, cfg.noise_fields()):
        basis.append((e.coeffs.copy(), _rotate_mode(e.coeffs, l, m, cfg.l_max, 1j)))
    return Integrator(
        cfg=cfg,
        alpha=alpha,
        ctx=ctx,
        generator=ou_generator(cfg, alpha),
        expo=np.exp(lin),
        phi1h=phi1 * cfg.dt,
        phi2h=phi2 * cfg.dt,
        forcing=cfg.forcing_field().coeffs.copy(),
        basis=tuple(basis),
    )


def _nonlinear(v: np.ndarray, z: np.ndarray, integ: Integrator) -> np.ndarray:
    """-B(u, u) + f + alpha z with u = v + z."""
    cfg = integ.cfg
    u = SpectralField(cfg.l_max, cfg.l_min, v + z)
    return -advect_vorticity(u, integ.ctx).coeffs + integ.forcing + integ.alpha * z


def step_v(
    v: SpectralField,
    z: OUState,
    cfg: ModelConfig,
    z_next: Optional[np.ndarray] = None,
    integrator: Optional[Integrator] = None
) -> SpectralField:
    """
    One ETD-RK2 step of the v equation.

    Args:
        v: State at z.time
        z: OU state at the start of the step
        cfg: Model configuration
        z_next: Left limit z((t + dt)-); defaults to pure decay of z
        integrator: Precomputed factors (built from cfg when omitted)

    Returns:
        v at t + dt

    Raises:
        BlowUpError: On a non-finite or overflowing state
    """
    integ = integrator or make_integrator(cfg, z.alpha)
    if z_next is None:
        z_next = np.exp(-z.generator * cfg.dt) * z.values
    z_now = integ.noise_coeffs(z.values)
    z_end = integ.noise_coeffs(z_next)
    with np.errstate(over='ignore', invalid='ignore'):
        n_start = _nonlinear(v.coeffs, z_now, integ)
        stage = integ.expo * v.coeffs + integ.phi1h * n_start
        n_stage = _nonlinear(stage, z_end, integ)
        out = stage + integ.phi2h * (n_stage - n_start)
    result = SpectralField.from_array(out, cfg.l_max, cfg.l_min)
    if not result.is_finite() or h_norm(result) > BLOWUP_NORM:
        raise BlowUpError(z.time + cfg.dt)
    return result


@dataclass(frozen=True)
class LedgerRow:
    t: float
    v_sq: float
    v_v_sq: float
    av_sq: float
    gamma: float
    p: float
    q: float
    gronwall_rhs: float
    violated: bool
    energy: float
    enstrophy: float
    int_gamma: float
    int_noise: float
    int_2p: float

    def as_dict(self) -> Dict[str, Any]:
        return {
            't': self.t,
            'energy': self.energy,
            'enstrophy': self.enstrophy,
            'v_norm': math.sqrt(self.v_sq),
            'v_norm_V': math.sqrt(self.v_v_sq),
            'v_norm_A': math.sqrt(self.av_sq),
            'gamma': self.gamma,
            'p': self.p,
            'q': self.q,
            'gronwall_rhs': self.gronwall_rhs,
            'violated': self.violated,
        }


@dataclass
class EnergyLedger:
    """
    Per-step energy rows with the running Gronwall bound.

    int_noise is the integral of 4 delta sum|z_l| (gamma without its
    dissipative constant); int_2p the integral of 2p.
    """
    delta: float
    rows: List[LedgerRow] = field(default_factory=list)

    def append(self, row: LedgerRow) -> None:
        if self.rows and not row.t > self.rows[-1].t:
            raise ParameterError(f"ledger times must increase: {row.t} after {self.rows[-1].t}")
        self.rows.append(row)

    @property
    def violated_rows(self) -> List[LedgerRow]:
        return [r for r in self.rows if r.violated]

    @property
    def violation_count(self) -> int:
        return len(self.violated_rows)

    def times(self) -> np.ndarray:
        return np.array([r.t for r in self.rows])

    def row_at(self, t: float) -> LedgerRow:
        times = self.times()
        j = int(np.argmin(np.abs(times - t)))
        if abs(times[j] - t) > 1e-9 * max(1.0, abs(t)):
            raise RangeError(f"ledger has no row at t={t}")
        return self.rows[j]

    def window(self, t_lo: float, t_hi: float) -> List[LedgerRow]:
        eps = 1e-9 * max(1.0, abs(t_lo), abs(t_hi))
        rows = [r for r in self.rows if t_lo - eps <= r.t <= t_hi + eps]
        if not rows or abs(rows[0].t - t_lo) > eps or abs(rows[-1].t - t_hi) > eps:
            raise RangeError(f"ledger does not cover [{t_lo}, {t_hi}]")
        return rows

    def to_rows(self) -> List[Dict[str, Any]]:
        return [r.as_dict() for r in self.rows]


@dataclass
class Trajectory:
    """Result of one integration: final state plus recorded snapshots."""
    t0: float
    t1: float
    v_final: SpectralField
    z_final: OUState
    u_final: SpectralField
    snapshots: Dict[float, SpectralField] = field(default_factory=dict)
    v_records: Dict[float, SpectralField] = field(default_factory=dict)
    n_steps: int = 0


def make_path(cfg: ModelConfig, seed: int, t_lo: float, t_hi: float,
              alpha: Optional[float] = None) -> NoisePath:
    """
    Noise path covering [t_lo, t_hi] plus the OU burn-in before t_lo.

    The window always contains 0.
    """
    h = cfg.path_step
    n_burn = burn_steps(ou_generator(cfg, alpha), h)
    k_lo = min(int(round(t_lo / h)) - n_burn, 0)
    k_hi = max(int(round(t_hi / h)), 0)
    return make_two_sided_path(cfg.mode_params(), h, k_lo * h, k_hi * h, seed)


def _solver_index(t: float, dt: float) -> int:
    n = int(round(t / dt))
    if abs(n * dt - t) > 1e-9 * max(1.0, abs(t)):
        raise AlignmentError(f"t={t} is not a multiple of dt={dt}")
    return n


def _ledger_row(t: float, v: SpectralField, gpq: Tuple[float, float, float], rhs: float,
                integrals: Tuple[float, float, float], spectrum: str) -> LedgerRow:
    v_sq = h_norm(v) ** 2
    gamma, p, q = gpq
    return LedgerRow(
        t=t,
        v_sq=v_sq,
        v_v_sq=v_norm(v, spectrum) ** 2,
        av_sq=a_norm(v, spectrum) ** 2,
        gamma=gamma,
        p=p,
        q=q,
        gronwall_rhs=rhs,
        violated=v_sq > rhs * (1.0 + VIOLATION_TOLERANCE),
        energy=0.5 * v_sq,
        enstrophy=enstrophy(v),
        int_gamma=integrals[0],
        int_noise=integrals[1],
        int_2p=integrals[2],
    )


def integrate_v(
    path: NoisePath,
    integ: Integrator,
    t0: float,
    t1: float,
    v0: SpectralField,
    z0: OUState,
    delta: Optional[float] = None,
    record_times: Sequence[float] = ()
) -> Tuple[Trajectory, Optional[EnergyLedger]]:
    """
    Step (v, z) from t0 to t1 on the path.

    A ledger is kept when delta is given. Records hold u at record_times
    (snapshots) and v (v_records).

    Raises:
        RangeError: If the path does not cover [t0, t1]
        BlowUpError: With the partial ledger attached
    """
    cfg = integ.cfg
    n0, n1 = _solver_index(t0, cfg.dt), _solver_index(t1, cfg.dt)
    if n1 < n0:
        raise ParameterError(f"need t1 >= t0, got [{t0}, {t1}]")
    sub = cfg.path_substeps
    h = path.step
    if abs(h - cfg.path_step) > 1e-12 * h:
        raise AlignmentError(f"path step {h} != dt / path_substeps = {cfg.path_step}")
    path.require(t0, t1)
    record = {_solver_index(t, cfg.dt): t for t in record_times}

    ledger = None
    if delta is not None:
        ledger = EnergyLedger(delta=delta)
        f_sq = h_norm(cfg.forcing_field()) ** 2
        lam_half = cfg.nu * cfg.lambda1 / 2.0
        gpq = gamma_p_q(z0.values, cfg, delta, integ.alpha, f_sq)
        rhs = h_norm(v0) ** 2
        integrals = (0.0, 0.0, 0.0)
        ledger.append(_ledger_row(t0, v0, gpq, rhs, integrals, cfg.spectrum))

    v, z = v0, z0
    snapshots: Dict[float, SpectralField] = {}
    v_records: Dict[float, SpectralField] = {}
    if n0 in record:
        snapshots[record[n0]] = v + integ.noise_field(z.values)
        v_records[record[n0]] = v

    for n in range(n0, n1):
        z_sub = z
        for j in range(sub - 1):
            z_sub = ou_step(z_sub, h, path.increment_at(z_sub.k))
        z_minus = np.exp(-z_sub.generator * h) * z_sub.values
        z_next = ou_step(z_sub, h, path.increment_at(z_sub.k))
        t_next = (n + 1) * cfg.dt
        try:
            v = step_v(v, z, cfg, z_minus, integ)
        except BlowUpError as e:
            raise BlowUpError(t_next, str(e), ledger=ledger)

        if ledger is not None:
            g_left, p_left, _ = gpq
            g_right, p_right, _ = gamma_p_q(z_minus, cfg, delta, integ.alpha, f_sq)
            dt = cfg.dt
            growth = 0.5 * dt * (g_left + g_right)
            rhs = math.exp(growth) * rhs + 0.5 * dt * (math.exp(growth) * 2.0 * p_left + 2.0 * p_right)
            integrals = (
                integrals[0] + growth,
                integrals[1] + 0.5 * dt * (g_left + g_right + 2.0 * lam_half),
                integrals[2] + dt * (p_left + p_right),
            )
            gpq = gamma_p_q(z_next.values, cfg, delta, integ.alpha, f_sq)
            row = _ledger_row(t_next, v, gpq, rhs, integrals, cfg.spectrum)
            if row.violated:
                logger.warning("Gronwall bound violated at t=%.6g: %.6g > %.6g", t_next, row.v_sq, rhs)
            ledger.append(row)

        z = z_next
        if n + 1 in record:
            snapshots[record[n + 1]] = v + integ.noise_field(z.values)
            v_records[record[n + 1]] = v

    u = v + integ.noise_field(z.values)
    trajectory = Trajectory(t0=t0, t1=t1, v_final=v, z_final=z, u_final=u,
                            snapshots=snapshots, v_records=v_records, n_steps=n1 - n0)
    return trajectory, ledger


def solve(
    path: NoisePath,
    cfg: ModelConfig,
    t0: float,
    t1: float,
    u0: SpectralField,
    delta: Optional[float] = None,
    record_times: Sequence[float] = (),
    integrator: Optional[Integrator] = None
) -> Tuple[Trajectory, Optional[EnergyLedger]]:
    """
    u(t1; t0, u0) on one noise realisation, v started from u0 - z(t0).
    """
    integ = integrator or make_integrator(cfg)
    z0 = ou_stationary_burn_in(path, cfg, t0, alpha=integ.alpha)
    v0 = u0 - integ.noise_field(z0.values)
    return integrate_v(path, integ, t0, t1, v0, z0, delta, record_times)


def phi(
    t: float,
    path: NoisePath,
    x: SpectralField,
    cfg: ModelConfig,
    integrator: Optional[Integrator] = None
) -> SpectralField:
    """
    The cocycle phi(t, w) x = v(t; x - z(0)) + z(t).

    Args:
        t: Grid-aligned time >= 0
        path: Noise realisation w, covering [-burn, t]
        x: Initial state in H
        cfg: Model configuration

    Returns:
        u(t)

    Raises:
        BlowUpError: Propagated from the integrator
    """
    if t < 0:
        raise ParameterError(f"phi needs t >= 0, got {t}")
    if _solver_index(t, cfg.dt) == 0:
        return x
    trajectory, _ = solve(path, cfg, 0.0, t, x, integrator=integrator)
    return trajectory.u_final


def verify_cocycle(
    t: float,
    s: float,
    path: NoisePath,
    x: SpectralField,
    cfg: ModelConfig,
    integrator: Optional[Integrator] = None
) -> float:
    """
    |phi(t+s, w)x - phi(t, theta_s w) phi(s, w)x| / (1 + |phi(t+s, w)x|).

    Raises:
        AlignmentError: If s or t is off the solver grid
    """
    _solver_index(s, cfg.dt)
    _solver_index(t, cfg.dt)
    integ = integrator or make_integrator(cfg)
    direct = phi(t + s, path, x, cfg, integ)
    composed = phi(t, shift_path(path, s), phi(s, path, x, cfg, integ), cfg, integ)
    residual = h_norm(direct - composed) / (1.0 + h_norm(direct))
    logger.debug("cocycle residual t=%g s=%g: %.3g", t, s, residual)
    return residual


def run_with_ledger(
    t0: float,
    t1: float,
    path: NoisePath,
    v0: SpectralField,
    cfg: ModelConfig,
    delta: Optional[float] = None,
    record_times: Sequence[float] = (),
    integrator: Optional[Integrator] = None
) -> Tuple[Trajectory, EnergyLedger]:
    """
    Integrate v from v0 at t0 with the energy ledger.

    delta defaults to cfg.delta; one of them is required.

    Returns:
        (Trajectory, EnergyLedger)

    Raises:
        RangeError: If the path does not cover [t0, t1]
        BlowUpError: With the partial ledger attached
    """
    delta = cfg.delta if delta is None else delta
    if delta is None:
        raise ParameterError("run_with_ledger needs delta (resolve_constants fills cfg.delta)")
    integ = integrator or make_integrator(cfg)
    z0 = ou_stationary_burn_in(path, cfg, t0, alpha=integ.alpha)
    trajectory, ledger = integrate_v(path, integ, t0, t1, v0, z0, delta, record_times)
    if ledger.violation_count:
        logger.warning("%d ledger rows violate the Gronwall bound", ledger.violation_count)
    return trajectory, ledger


def v_ledger_check(ledger: EnergyLedger, nu: float, t_lo: float, t_hi: float) -> Dict[str, Any]:
    """
    Integrated V bound over [t_lo, t_hi]:
    nu * int |v|_V^2 <= |v(t_lo)|^2 + (int 4 delta sum|z_l|) sup|v|^2 + int 2p.
    """
    rows = ledger.window(t_lo, t_hi)
    times = np.array([r.t for r in rows])
    lhs = nu * float(trapezoid([r.v_v_sq for r in rows], times)) if len(rows) > 1 else 0.0
    sup_v = max(r.v_sq for r in rows)
    noise_integral = rows[-1].int_noise - rows[0].int_noise
    int_2p = rows[-1].int_2p - rows[0].int_2p
    rhs = rows[0].v_sq + noise_integral * sup_v + int_2p
    return {
        't_lo': t_lo,
        't_hi': t_hi,
        'lhs': lhs,
        'rhs': rhs,
        'sup_v_sq': sup_v,
        'int_noise': noise_integral,
        'int_2p': int_2p,
        'holds': lhs <= rhs * (1.0 + VIOLATION_TOLERANCE),
    }


def continuity_constant(
    t: float,
    path: NoisePath,
    x: SpectralField,
    cfg: ModelConfig,
    eps: float = 1e-6,
    n_directions: int = 4,
    seed: int = 0,
    integrator: Optional[Integrator] = None
) -> Dict[str, Any]:
    """
    K with |phi(t)x - phi(t)x'| <= K eps over random perturbations of size eps.
    """
    if eps <= 0 or n_directions < 1:
        raise ParameterError(f"need eps > 0 and n_directions >= 1, got ({eps}, {n_directions})")
    integ = integrator or make_integrator(cfg)
    base = phi(t, path, x, cfg, integ)
    rng = make_generator(seed, TAG_CONTINUITY)
    ratios = []
    for _ in range(n_directions):
        d = random_field(cfg.l_max, cfg.l_min, rng, slope=1.0)
        d = d * (eps / h_norm(d))
        moved = phi(t, path, x + d, cfg, integ)
        ratios.append(h_norm(moved - base) / eps)
    k = max(ratios)
    logger.info("continuity constant at t=%g: K=%.4g", t, k)
    return {'t': t, 'eps': eps, 'K': k, 'ratios': ratios, 'finite': math.isfinite(k)}


def resolve_constants(
    cfg: ModelConfig,
    n_delta_samples: int = 64,
    n_alpha_paths: int = 2048,
    with_c_b: bool = False
) -> Tuple[ModelConfig, Dict[str, Any]]:
    """
    Fill the empirical constants a run needs.

    delta is estimated when unset; alpha is selected when alpha_auto is on;
    c_b is estimated on request.

    Returns:
        (updated config, report of what was estimated)

    Raises:
        NoSolutionError: If alpha selection fails
    """
    report: Dict[str, Any] = {}
    ctx = cfg.context()
    if cfg.delta is None:
        est = estimate_mode_bound_delta(cfg.noise_fields(), ctx, n_delta_samples,
                                        derive_seed(cfg.seed, 'delta'))
        cfg = cfg.replace(delta=est['delta'])
        report['delta'] = est
    if cfg.alpha_auto:
        sel = select_alpha_for_config(cfg, cfg.delta, n_alpha_paths, derive_seed(cfg.seed, 'moment'))
        cfg = cfg.replace(alpha=sel['alpha'])
        report['alpha'] = sel
    if with_c_b and cfg.c_b is None:
        c_b = estimate_c_b(cfg.l_max, cfg.l_min, ctx, seed=derive_seed(cfg.seed, 'delta', 1))
        cfg = cfg.replace(c_b=c_b)
        report['c_b'] = c_b
    return cfg, report
