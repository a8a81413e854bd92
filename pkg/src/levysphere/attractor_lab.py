"""
Pullback experiments, attractor estimates and absorbing radii.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np
from scipy.spatial.distance import cdist

from levysphere.config import ModelConfig, derive_seed
from levysphere.ensemble import run_ensemble
from levysphere.errors import ParameterError, RangeError
from levysphere.flow_map import Integrator, make_integrator, solve
from levysphere.ou_process import (
    gamma_p_q_series,
    mode_eigenvalues,
    ou_generator,
    ou_stationary_burn_in,
    ou_trajectory,
)
from levysphere.spherical_spectral import (
    SpectralField,
    h_norm,
    inverse_laplacian_factor,
    random_field,
    v_norm,
)
from levysphere.stable_noise import NoisePath, make_generator

logger = logging.getLogger(__name__)

TAG_BALL = 53
_LOG_FLOAT_MAX = math.log(np.finfo(float).max)


@dataclass
class AttractorEstimate:
    """Pullback clouds at time 0, one per start time, and their Hausdorff trace."""
    t0_schedule: List[float]
    clouds: Dict[float, List[SpectralField]]
    hausdorff_trace: List[float]
    path_seed: int
    rho: float
    n_samples: int
    blow_up_counts: Dict[float, int] = field(default_factory=dict)
    member_stats: List[Dict[str, Any]] = field(default_factory=list)


@dataclass
class AbsorbingRadii:
    """Random radii of the H and V absorbing balls for one noise realisation."""
    r1_sq: float
    c1: float
    c2: float
    c3: float
    c4: float
    c5: float
    r2_sq: float
    r2_overflow: bool = False
    log_r2_term: float = 0.0
    t_bar: Optional[float] = None
    window_start: float = 0.0
    ingredients: Dict[str, float] = field(default_factory=dict)

    def as_dict(self) -> Dict[str, Any]:
        return {
            'r1_sq': self.r1_sq,
            'c1': self.c1,
            'c2': self.c2,
            'c3': self.c3,
            'c4': self.c4,
            'c5': self.c5,
            'r2_sq': self.r2_sq,
            'r2_overflow': self.r2_overflow,
            'log_r2_term': self.log_r2_term,
            't_bar': self.t_bar,
            'window_start': self.window_start,
            'ingredients': dict(self.ingredients),
        }


def sample_ball(rho: float, n: int, l_max: int, l_min: int, seed: int) -> List[SpectralField]:
    """
    n fields of H norm rho in uniformly random directions over the retained modes.
    """
    if rho < 0 or n < 1:
        raise ParameterError(f"need rho >= 0 and n >= 1, got ({rho}, {n})")
    out = []
    for i in range(n):
        rng = make_generator(derive_seed(seed, 'init', i), TAG_BALL)
        u = random_field(l_max, l_min, rng)
        out.append(u * (rho / h_norm(u)))
    return out


def _as_points(cloud: Sequence[SpectralField]) -> np.ndarray:
    # Real coordinates in which the Euclidean norm is the H norm
    if not cloud:
        raise ParameterError("cloud is empty")
    weight = np.sqrt(inverse_laplacian_factor(cloud[0].l_max))
    flat = np.stack([(c.coeffs * weight).ravel() for c in cloud])
    return np.concatenate([flat.real, flat.imag], axis=1)


def hausdorff_semidist(cloud_a: Sequence[SpectralField], cloud_b: Sequence[SpectralField]) -> float:
    """
    d(A, B) = max over a in A of min over b in B of |a - b|, in the H norm.

    Raises:
        ParameterError: If either cloud is empty
    """
    distances = cdist(_as_points(cloud_a), _as_points(cloud_b))
    return float(np.max(np.min(distances, axis=1)))


def hausdorff_dist(cloud_a: Sequence[SpectralField], cloud_b: Sequence[SpectralField]) -> float:
    """rho(A, B) = max(d(A, B), d(B, A))."""
    distances = cdist(_as_points(cloud_a), _as_points(cloud_b))
    return float(max(np.max(np.min(distances, axis=1)), np.max(np.min(distances, axis=0))))


def _pullback_member(path: NoisePath, cfg: ModelConfig, integ: Integrator, t0: float,
                     u0: SpectralField) -> Dict[str, Any]:
    record = [-1.0] if t0 <= -1.0 else []
    trajectory, _ = solve(path, cfg, t0, 0.0, u0, record_times=record, integrator=integ)
    v_minus1 = trajectory.v_records.get(-1.0)
    return {
        'u0_final': trajectory.u_final,
        'v_minus1_sq': h_norm(v_minus1) ** 2 if v_minus1 is not None else None,
        'u_final_v_sq': v_norm(trajectory.u_final, cfg.spectrum) ** 2,
    }


def pullback_ensemble(
    path: NoisePath,
    cfg: ModelConfig,
    t0_schedule: Sequence[float],
    rho: float,
    n_samples: int,
    seed: int = 0,
    max_workers: int = 1,
    progress_callback: Optional[Callable[[str, str], None]] = None,
    initial_ball: Optional[List[SpectralField]] = None
) -> AttractorEstimate:
    """
    u(0; t0, u0) = phi(-t0, theta_t0 w) u0 for each t0 and each u0 in the ball.

    Every member uses the same noise realisation; the same initial points are
    reused for every t0.

    Args:
        path: Noise realisation covering [min t0 - burn, 0]
        cfg: Model configuration
        t0_schedule: Pullback start times (grid-aligned, <= -1 in the usual schedule)
        rho: Initial ball radius in H
        n_samples: Points per ball
        seed: Base seed for the ball
        max_workers: Thread count
        progress_callback: Optional callback(label, status)
        initial_ball: Explicit initial points (overrides rho / n_samples sampling)

    Returns:
        AttractorEstimate

    Raises:
        ParameterError: For an empty schedule
    """
    if not t0_schedule:
        raise ParameterError("t0 schedule is empty")
    schedule = sorted(t0_schedule, reverse=True)
    ball = initial_ball if initial_ball is not None else sample_ball(rho, n_samples, cfg.l_max, cfg.l_min, seed)
    integ = make_integrator(cfg)
    tasks = []
    for a, t0 in enumerate(schedule):
        for i, u0 in enumerate(ball):
            tasks.append(((a, i), _pullback_member, (path, cfg, integ, t0, u0)))
    result = run_ensemble(tasks, max_workers, progress_callback, label='pullback')

    clouds: Dict[float, List[SpectralField]] = {t0: [] for t0 in schedule}
    blow_ups = {t0: 0 for t0 in schedule}
    stats = []
    for member in result.members:
        a, i = member.key
        t0 = schedule[a]
        if not member.ok:
            blow_ups[t0] += 1
            continue
        clouds[t0].append(member.value['u0_final'])
        stats.append({'t0': t0, 'sample': i, 'v_minus1_sq': member.value['v_minus1_sq'],
                      'u_final_v_sq': member.value['u_final_v_sq'],
                      'u_final_norm': h_norm(member.value['u0_final'])})
    empty = [t0 for t0 in schedule if not clouds[t0]]
    if empty:
        logger.warning("every member blew up for t0 in %s", empty)
    trace = []
    for t_a, t_b in zip(schedule[:-1], schedule[1:]):
        if clouds[t_a] and clouds[t_b]:
            trace.append(hausdorff_dist(clouds[t_a], clouds[t_b]))
        else:
            trace.append(float('nan'))
    return AttractorEstimate(
        t0_schedule=schedule,
        clouds=clouds,
        hausdorff_trace=trace,
        path_seed=path.seed,
        rho=rho,
        n_samples=len(ball),
        blow_up_counts=blow_ups,
        member_stats=stats,
    )


def fit_trace_rate(estimate: AttractorEstimate) -> float:
    """Contraction rate r from log trace_k ~ -r |t0_k|; nan with fewer than two finite points."""
    t = np.array([abs(t0) for t0 in estimate.t0_schedule[:-1]])
    y = np.array(estimate.hausdorff_trace)
    ok = np.isfinite(y) & (y > 0)
    if ok.sum() < 2:
        return float('nan')
    slope, _ = np.polyfit(t[ok], np.log(y[ok]), 1)
    return float(-slope)


def _step_integrals(values: np.ndarray, decay: np.ndarray, cfg: ModelConfig, delta: float,
                    alpha: float, f_sq: float, h: float) -> Dict[str, np.ndarray]:
    """Per-step trapezoid integrals using the post-jump left value and the left limit on the right."""
    left = values[:, :-1]
    right = decay[:, None] * left
    g_l, p_l, q_l = gamma_p_q_series(left, cfg, delta, alpha, f_sq)
    g_r, p_r, q_r = gamma_p_q_series(right, cfg, delta, alpha, f_sq)
    return {
        'gamma': 0.5 * h * (g_l + g_r),
        'gamma_plus': 0.5 * h * (np.maximum(g_l, 0.0) + np.maximum(g_r, 0.0)),
        'p_left': p_l,
        'p_right': p_r,
        'q': 0.5 * h * (q_l + q_r),
    }


def _gronwall_integral(growth: np.ndarray, p_left: np.ndarray, p_right: np.ndarray, h: float) -> np.ndarray:
    """R_k = integral up to step k of exp(int_s^t gamma) 2p(s) ds, with R_0 = 0."""
    out = np.zeros(growth.size + 1)
    for j in range(growth.size):
        e = math.exp(growth[j])
        out[j + 1] = e * out[j] + 0.5 * h * (e * 2.0 * p_left[j] + 2.0 * p_right[j])
    return out


def absorbing_radii(
    path: NoisePath,
    cfg: ModelConfig,
    t0_schedule: Sequence[float],
    delta: float,
    c_b: float,
    rho: Optional[float] = None,
    alpha: Optional[float] = None
) -> AbsorbingRadii:
    """
    Evaluate r1^2, c1..c5 and r2^2 with integrals truncated to [min t0, 0].

    Args:
        path: Noise realisation
        cfg: Model configuration
        t0_schedule: Start times; the sup in r1^2 runs over those <= -1
        delta: Mode bound constant
        c_b: Trilinear constant
        rho: Initial ball radius, used for the threshold time t_bar
        alpha: Override cfg.alpha

    Returns:
        AbsorbingRadii

    Raises:
        RangeError: If the path does not cover the window
    """
    alpha = cfg.alpha if alpha is None else alpha
    starts = [t for t in t0_schedule if t <= -1.0]
    if not starts:
        raise ParameterError("absorbing radii need at least one t0 <= -1")
    t_window = min(starts)
    h = path.step
    a = ou_generator(cfg, alpha)
    state = ou_stationary_burn_in(path, cfg, t_window, alpha=alpha)
    k_m1, k_0 = path.grid_index(-1.0), path.grid_index(0.0)
    if k_0 > path.k_max:
        raise RangeError("path does not reach t = 0")
    times, values = ou_trajectory(path, a, state.k, k_0, state.values)
    decay = np.exp(-np.asarray(a) * h)
    f_sq = h_norm(cfg.forcing_field()) ** 2
    steps = _step_integrals(values, decay, cfg, delta, alpha, f_sq, h)
    cum_gamma = np.concatenate([[0.0], np.cumsum(steps['gamma'])])
    j_m1 = k_m1 - state.k

    # r1^2: sup over the schedule plus the Gronwall integral up to -1
    gronwall = _gronwall_integral(steps['gamma'][:j_m1], steps['p_left'][:j_m1], steps['p_right'][:j_m1], h)
    z_sq = np.sum(np.abs(values) ** 2, axis=0)
    products = []
    for t0 in starts:
        j = path.grid_index(t0) - state.k
        products.append(math.exp(min(cum_gamma[j_m1] - cum_gamma[j], _LOG_FLOAT_MAX)) * z_sq[j])
    sup_product = max(products)
    r1_sq = 2.0 + 2.0 * sup_product + gronwall[-1]

    t_bar = None
    if rho is not None:
        admissible = [t0 for t0 in starts
                      if (cum_gamma[j_m1] - cum_gamma[path.grid_index(t0) - state.k]) + 2 * math.log(max(rho, 1e-300)) <= 0.0]
        t_bar = max(admissible) if admissible else None

    # c1: sup over [-1, 0] of exp(int_{-1}^t gamma) r1^2 + int_{-1}^t exp(...) 2p
    g_tail = steps['gamma'][j_m1:]
    tail_int = _gronwall_integral(g_tail, steps['p_left'][j_m1:], steps['p_right'][j_m1:], h)
    cum_tail = np.concatenate([[0.0], np.cumsum(g_tail)])
    c1 = float(np.max(np.exp(np.minimum(cum_tail, _LOG_FLOAT_MAX)) * r1_sq + tail_int))

    lam_half = cfg.nu * cfg.lambda1 / 2.0
    noise_integral = float(np.sum(g_tail) + lam_half * (k_0 - k_m1) * h)
    int_2p = float(np.sum(0.5 * h * (2.0 * steps['p_left'][j_m1:] + 2.0 * steps['p_right'][j_m1:])))
    int_gamma = float(np.sum(g_tail))
    int_gamma_plus = float(np.sum(steps['gamma_plus'][j_m1:]))
    c2 = r1_sq * (1.0 + int_gamma_plus) + int_2p
    c2_display = r1_sq * (1.0 + int_gamma) + int_2p

    tail_values = values[:, j_m1:]
    lam = mode_eigenvalues(cfg)
    abs_tail = np.abs(tail_values)
    z_norm_tail = np.sqrt(np.sum(abs_tail ** 2, axis=0))
    z_v_sq_tail = np.sum(abs_tail ** 2 * lam[:, None], axis=0)
    z_a_tail = np.sqrt(np.sum(abs_tail ** 2 * (lam ** 2)[:, None], axis=0))
    sup_z = float(np.max(z_norm_tail))
    sup_z_v_sq = float(np.max(z_v_sq_tail))
    sup_az = float(np.max(z_a_tail))
    int_z_v_sq = float(np.sum(0.5 * h * (z_v_sq_tail[:-1] + z_v_sq_tail[1:])))
    int_2q = float(2.0 * np.sum(steps['q'][j_m1:]))

    c3 = c1 + sup_z ** 2
    c4 = c2 + int_z_v_sq
    c5 = math.sqrt(c1) + sup_z

    exponent = 64.0 * cfg.nu * c_b ** 4 * c3 * c4
    bracket = (c2 + 64.0 * cfg.nu * c_b ** 4 * c3 * c4 * sup_z_v_sq
               + 8.0 * cfg.nu * c_b ** 2 * c5 * c4 * sup_az + int_2q)
    log_term = math.log(2.0 * bracket) + exponent if bracket > 0 else -math.inf
    z0_v_sq = float(z_v_sq_tail[-1])
    overflow = log_term > _LOG_FLOAT_MAX
    r2_sq = math.inf if overflow else 2.0 * z0_v_sq + math.exp(log_term)
    if overflow:
        logger.warning("r2^2 overflows (log term %.4g); stored as inf", log_term)
    if int_gamma < 0:
        logger.info("int_{-1}^0 gamma = %.4g < 0; c2 uses the positive part (%.4g), raw form gives %.4g",
                    int_gamma, int_gamma_plus, c2_display)

    return AbsorbingRadii(
        r1_sq=r1_sq,
        c1=c1,
        c2=c2,
        c3=c3,
        c4=c4,
        c5=c5,
        r2_sq=r2_sq,
        r2_overflow=overflow,
        log_r2_term=log_term,
        t_bar=t_bar,
        window_start=t_window,
        ingredients={
            'sup_product': sup_product,
            'gronwall_integral': float(gronwall[-1]),
            'int_gamma': int_gamma,
            'int_gamma_plus': int_gamma_plus,
            'int_noise': noise_integral,
            'int_2p': int_2p,
            'int_2q': int_2q,
            'sup_z': sup_z,
            'sup_z_v_sq': sup_z_v_sq,
            'sup_az': sup_az,
            'int_z_v_sq': int_z_v_sq,
            'z0_v_sq': z0_v_sq,
            'c2_display': c2_display,
            'c_b': c_b,
            'delta': delta,
        },
    )


def verify_absorption(estimate: AttractorEstimate, radii: AbsorbingRadii) -> Dict[str, Any]:
    """
    Count members breaking |v(-1)|^2 <= r1^2 or |u(0)|_V^2 <= r2^2.

    Only members with t0 <= t_bar are checked when t_bar is known.
    """
    checked = r1_bad = r2_bad = 0
    for s in estimate.member_stats:
        if radii.t_bar is not None and s['t0'] > radii.t_bar:
            continue
        if s['v_minus1_sq'] is None:
            continue
        checked += 1
        if s['v_minus1_sq'] > radii.r1_sq:
            r1_bad += 1
        if s['u_final_v_sq'] > radii.r2_sq:
            r2_bad += 1
    if r1_bad or r2_bad:
        logger.warning("absorption violated: %d r1, %d r2 of %d members", r1_bad, r2_bad, checked)
    return {'checked': checked, 'r1_violations': r1_bad, 'r2_violations': r2_bad,
            'ok': r1_bad == 0 and r2_bad == 0}


@dataclass
class OmegaLimit:
    cloud: List[SpectralField]
    t0: float
    final_trace: float
    converged: bool
    max_v_norm: float
    within_r2: Optional[bool] = None


def omega_limit_estimate(
    estimate: AttractorEstimate,
    tol: float,
    radii: Optional[AbsorbingRadii] = None,
    spectrum: str = 'stokes'
) -> OmegaLimit:
    """
    The cloud of the earliest start time as the limit-set estimate.

    converged is False (and logged) when the last trace value exceeds tol;
    the cloud is returned regardless.
    """
    t0 = estimate.t0_schedule[-1]
    cloud = estimate.clouds[t0]
    finite = [x for x in estimate.hausdorff_trace if math.isfinite(x)]
    final_trace = finite[-1] if finite else float('nan')
    converged = bool(finite) and final_trace <= tol
    if not converged:
        logger.warning("Hausdorff trace %.4g has not reached tol %.4g", final_trace, tol)
    max_v = max((v_norm(x, spectrum) for x in cloud), default=0.0)
    within = None
    if radii is not None:
        within = max_v ** 2 <= radii.r2_sq
    return OmegaLimit(cloud=cloud, t0=t0, final_trace=final_trace, converged=converged,
                      max_v_norm=max_v, within_r2=within)


def cloud_rows(estimate: AttractorEstimate) -> List[Dict[str, Any]]:
    """CSV rows of member norms per start time."""
    return [{'t0': s['t0'], 'sample': s['sample'], 'u_norm': s['u_final_norm'],
             'u_norm_V_sq': s['u_final_v_sq'], 'v_minus1_sq': s['v_minus1_sq']}
            for s in estimate.member_stats]
