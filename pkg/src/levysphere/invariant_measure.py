"""
Markov semigroup estimates and empirical invariant measures.

All estimators are Monte Carlo over noise paths whose seeds are derived from
(base seed, purpose, sample index), so results do not depend on thread count.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from levysphere.config import ModelConfig, derive_seed
from levysphere.ensemble import run_ensemble
from levysphere.errors import ParameterError
from levysphere.flow_map import Integrator, make_integrator, make_path, phi, solve
from levysphere.spherical_spectral import SpectralField, enstrophy, h_norm, inner_h, random_field, v_norm
from levysphere.stable_noise import make_generator

logger = logging.getLogger(__name__)

Observable = Callable[[SpectralField], float]

TAG_FELLER = 61
STDERR_MULTIPLE = 3.0


def energy_decay(u: SpectralField) -> float:
    """exp(-|u|^2), bounded in (0, 1]."""
    return math.exp(-h_norm(u) ** 2)


def mode_sigmoid(direction: SpectralField, scale: float = 1.0) -> Observable:
    """Smoothed indicator of the amplitude of u along a direction."""
    unit = direction * (1.0 / h_norm(direction))

    def f(u: SpectralField) -> float:
        x = inner_h(u, unit) / scale
        return 0.5 * (1.0 + math.tanh(0.5 * x))
    return f


def mode_cosine(direction: SpectralField) -> Observable:
    unit = direction * (1.0 / h_norm(direction))
    return lambda u: math.cos(inner_h(u, unit))


def moment_observable(p: float) -> Observable:
    """|u|^p; unbounded, only meaningful for p < beta."""
    return lambda u: h_norm(u) ** p


def default_observables(cfg: ModelConfig) -> Dict[str, Observable]:
    """The bounded test dictionary: energy decay plus two functions of the first noise mode."""
    e1 = cfg.noise_fields()[0]
    return {
        'exp_neg_energy': energy_decay,
        'mode1_sigmoid': mode_sigmoid(e1),
        'mode1_cosine': mode_cosine(e1),
    }


def _mean_stderr(values: Sequence[float]) -> Tuple[float, float]:
    x = np.asarray(values, dtype=float)
    if x.size == 0:
        return float('nan'), float('nan')
    if x.size == 1:
        return float(x[0]), 0.0
    return float(np.mean(x)), float(np.std(x, ddof=1) / math.sqrt(x.size))


@dataclass
class EmpiricalMeasure:
    """Uniformly weighted samples, optionally grouped by noise realisation."""
    support: List[SpectralField]
    groups: List[int] = field(default_factory=list)
    blow_ups: int = 0
    metadata: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if not self.support:
            raise ParameterError("empirical measure needs at least one sample")
        if not self.groups:
            self.groups = list(range(len(self.support)))

    @property
    def size(self) -> int:
        return len(self.support)

    @property
    def weights(self) -> np.ndarray:
        return np.full(self.size, 1.0 / self.size)

    def expectation(self, f: Observable) -> Tuple[float, float]:
        """(mean, stderr) of f under the measure."""
        return _mean_stderr([f(u) for u in self.support])

    def group(self, g: int) -> 'EmpiricalMeasure':
        """The per-realisation measure of group g."""
        members = [u for u, k in zip(self.support, self.groups) if k == g]
        return EmpiricalMeasure(support=members, groups=[g] * len(members))

    def group_ids(self) -> List[int]:
        return sorted(set(self.groups))

    def observable_table(self, observables: Dict[str, Observable]) -> List[Dict[str, Any]]:
        rows = []
        for name, f in observables.items():
            mean, se = self.expectation(f)
            rows.append({'observable': name, 'estimate': mean, 'stderr': se, 'n': self.size})
        return rows

    def norm_rows(self, spectrum: str = 'stokes') -> List[Dict[str, Any]]:
        return [{'sample': i, 'group': g, 'u_norm': h_norm(u), 'u_norm_V': v_norm(u, spectrum),
                 'enstrophy': enstrophy(u)}
                for i, (u, g) in enumerate(zip(self.support, self.groups))]


def ball_sampler(rho: float, cfg: ModelConfig, seed: int) -> Callable[[int, int], SpectralField]:
    """init_sampler drawing x of H norm rho, seeded by (realisation, repeat)."""
    def sample(i: int, r: int) -> SpectralField:
        rng = make_generator(derive_seed(seed, 'init', i, r))
        u = random_field(cfg.l_max, cfg.l_min, rng)
        return u * (rho / h_norm(u))
    return sample


def _pullback_sample(path_seed: int, cfg: ModelConfig, t_big: float, xs: List[SpectralField],
                     integ: Integrator) -> List[SpectralField]:
    path = make_path(cfg, path_seed, -t_big, 0.0, integ.alpha)
    return [solve(path, cfg, -t_big, 0.0, x, integrator=integ)[0].u_final for x in xs]


def pullback_measure(
    path_seeds: Sequence[int],
    cfg: ModelConfig,
    t_big: float,
    init_sampler: Callable[[int, int], SpectralField],
    repeats: int = 1,
    max_workers: int = 1,
    progress_callback: Optional[Callable[[str, str], None]] = None
) -> EmpiricalMeasure:
    """
    Samples phi(t_big, theta_{-t_big} w_i) x_ir for each path seed and repeat.

    The pooled support estimates the invariant measure; the samples of one
    path seed (group) estimate the per-realisation measure.

    Args:
        path_seeds: One noise realisation per seed
        cfg: Model configuration
        t_big: Pullback time (grid-aligned)
        init_sampler: Callable (realisation index, repeat index) -> initial field
        repeats: Initial conditions per realisation
        max_workers: Thread count
        progress_callback: Optional callback(label, status)

    Returns:
        EmpiricalMeasure; blown-up realisations are counted and excluded

    Raises:
        ParameterError: If nothing survives
    """
    if t_big <= 0 or repeats < 1:
        raise ParameterError(f"need t_big > 0 and repeats >= 1, got ({t_big}, {repeats})")
    integ = make_integrator(cfg)
    tasks = []
    for i, s in enumerate(path_seeds):
        xs = [init_sampler(i, r) for r in range(repeats)]
        tasks.append((i, _pullback_sample, (s, cfg, t_big, xs, integ)))
    result = run_ensemble(tasks, max_workers, progress_callback, label='pullback-measure')
    support, groups = [], []
    for member in result.successes:
        support.extend(member.value)
        groups.extend([member.key] * len(member.value))
    blow_ups = len(result.blow_ups) * repeats
    if not support:
        raise ParameterError("every pullback realisation blew up")
    return EmpiricalMeasure(support=support, groups=groups, blow_ups=blow_ups,
                            metadata={'t_big': t_big, 'repeats': repeats,
                                      'realisations': len(path_seeds), **result.metadata})


def _forward_values(t: float, path_seed: int, xs: List[SpectralField], fs: List[Observable],
                    cfg: ModelConfig, integ: Integrator) -> List[List[float]]:
    # Same path for every start point: common random numbers
    path = make_path(cfg, path_seed, 0.0, t, integ.alpha)
    out = []
    for x in xs:
        u = phi(t, path, x, cfg, integ)
        out.append([f(u) for f in fs])
    return out


def transition_estimate(
    f: Observable,
    t: float,
    x: SpectralField,
    n_samples: int,
    cfg: ModelConfig,
    seed: int = 0,
    max_workers: int = 1
) -> Dict[str, Any]:
    """
    Monte Carlo estimate of P_t f(x) = E f(phi(t) x) over fresh paths.

    Returns:
        dict with mean, stderr, n (surviving samples) and blow_ups
    """
    if t < 0 or n_samples < 1:
        raise ParameterError(f"need t >= 0 and n_samples >= 1, got ({t}, {n_samples})")
    if t == 0:
        return {'mean': f(x), 'stderr': 0.0, 'n': n_samples, 'blow_ups': 0}
    integ = make_integrator(cfg)
    tasks = [(i, _forward_values, (t, derive_seed(seed, 'probe', i), [x], [f], cfg, integ))
             for i in range(n_samples)]
    result = run_ensemble(tasks, max_workers, label='transition')
    mean, se = _mean_stderr([v[0][0] for v in result.values()])
    return {'mean': mean, 'stderr': se, 'n': len(result.successes), 'blow_ups': len(result.blow_ups)}


def feller_probe(
    f: Observable,
    t: float,
    x: SpectralField,
    eps_list: Sequence[float],
    n_samples: int,
    cfg: ModelConfig,
    seed: int = 0,
    direction: Optional[SpectralField] = None,
    max_workers: int = 1
) -> Dict[str, Any]:
    """
    |P_t f(x + eps e) - P_t f(x)| for each eps, with common paths per pair.

    monotone is True when every difference is no larger than the previous
    one plus 3 combined stderr.
    """
    if any(e < 0 for e in eps_list):
        raise ParameterError("eps values must be nonnegative")
    if direction is None:
        direction = random_field(cfg.l_max, cfg.l_min, make_generator(seed, TAG_FELLER))
    unit = direction * (1.0 / h_norm(direction))
    xs = [x] + [x + unit * e for e in eps_list]
    integ = make_integrator(cfg)
    tasks = [(i, _forward_values, (t, derive_seed(seed, 'probe', i), xs, [f], cfg, integ))
             for i in range(n_samples)]
    result = run_ensemble(tasks, max_workers, label='feller')
    values = np.array([[row[0] for row in member] for member in result.values()])

    rows = []
    for j, eps in enumerate(eps_list):
        if eps == 0:
            rows.append({'eps': eps, 'difference': 0.0, 'stderr': 0.0})
            continue
        diff, se = _mean_stderr(values[:, j + 1] - values[:, 0])
        rows.append({'eps': eps, 'difference': abs(diff), 'stderr': se})
    monotone = all(
        b['difference'] <= a['difference'] + STDERR_MULTIPLE * math.hypot(a['stderr'], b['stderr'])
        for a, b in zip(rows, rows[1:])
    )
    if not monotone:
        logger.warning("Feller differences do not decrease along eps=%s", list(eps_list))
    return {'t': t, 'rows': rows, 'monotone': monotone, 'n': int(values.shape[0]),
            'blow_ups': len(result.blow_ups)}


def _inner_estimate(t: float, s: float, outer_seed: int, inner_seeds: List[int], x: SpectralField,
                    f: Observable, cfg: ModelConfig, integ: Integrator) -> float:
    path = make_path(cfg, outer_seed, 0.0, s, integ.alpha)
    y = phi(s, path, x, cfg, integ)
    if t == 0:
        return f(y)
    return float(np.mean([_forward_values(t, k, [y], [f], cfg, integ)[0][0] for k in inner_seeds]))


def chapman_kolmogorov_check(
    f: Observable,
    t: float,
    s: float,
    x: SpectralField,
    n_outer: int,
    n_inner: int,
    cfg: ModelConfig,
    seed: int = 0,
    max_workers: int = 1
) -> Dict[str, Any]:
    """
    Compare P_{t+s} f(x) with the nested estimate P_s(P_t f)(x).

    The outer paths of the nested estimate share seeds with the direct one,
    so s = 0 and t = 0 reproduce the direct estimator.

    Returns:
        dict with lhs, rhs, their stderrs, combined stderr and passed
    """
    if n_outer < 2 or n_inner < 1:
        raise ParameterError(f"need n_outer >= 2 and n_inner >= 1, got ({n_outer}, {n_inner})")
    lhs = transition_estimate(f, t + s, x, n_outer, cfg, seed, max_workers)
    if s == 0 or t == 0:
        rhs = dict(lhs)
    else:
        integ = make_integrator(cfg)
        tasks = [(i, _inner_estimate,
                  (t, s, derive_seed(seed, 'probe', i),
                   [derive_seed(seed, 'probe', 1, j, i) for j in range(n_inner)], x, f, cfg, integ))
                 for i in range(n_outer)]
        result = run_ensemble(tasks, max_workers, label='chapman-kolmogorov')
        mean, se = _mean_stderr(result.values())
        rhs = {'mean': mean, 'stderr': se, 'n': len(result.successes), 'blow_ups': len(result.blow_ups)}
    combined = math.hypot(lhs['stderr'], rhs['stderr'])
    gap = abs(lhs['mean'] - rhs['mean'])
    passed = gap <= STDERR_MULTIPLE * combined
    if not passed:
        logger.warning("Chapman-Kolmogorov gap %.4g exceeds %.1f x %.4g", gap, STDERR_MULTIPLE, combined)
    return {'t': t, 's': s, 'lhs': lhs['mean'], 'lhs_stderr': lhs['stderr'], 'rhs': rhs['mean'],
            'rhs_stderr': rhs['stderr'], 'combined_stderr': combined, 'gap': gap, 'passed': passed}


def invariance_check(
    measure: EmpiricalMeasure,
    observables: Dict[str, Observable],
    s: float,
    cfg: ModelConfig,
    seed: int = 0,
    max_workers: int = 1
) -> List[Dict[str, Any]]:
    """
    Push every support point forward by s on its own fresh path and compare
    the integral of each observable before and after.
    """
    names = list(observables)
    fs = [observables[n] for n in names]
    before = np.array([[f(u) for f in fs] for u in measure.support])
    if s == 0:
        after = before
    else:
        integ = make_integrator(cfg)
        tasks = [(k, _forward_values, (s, derive_seed(seed, 'probe', 2, k), [u], fs, cfg, integ))
                 for k, u in enumerate(measure.support)]
        result = run_ensemble(tasks, max_workers, label='invariance')
        after = np.array([v[0] for v in result.values()])
    rows = []
    for j, name in enumerate(names):
        m0, se0 = _mean_stderr(before[:, j])
        m1, se1 = _mean_stderr(after[:, j])
        combined = math.hypot(se0, se1)
        gap = abs(m1 - m0)
        rows.append({'observable': name, 's': s, 'before': m0, 'after': m1, 'gap': gap,
                     'combined_stderr': combined, 'passed': gap <= STDERR_MULTIPLE * combined})
    return rows


def time_average(
    f: Observable,
    cfg: ModelConfig,
    x: SpectralField,
    t_end: float,
    sample_every: float,
    seed: int = 0,
    burn: float = 0.0,
    n_batches: int = 10
) -> Dict[str, Any]:
    """
    Birkhoff average of f along one forward run, with a batch-means stderr.

    Samples are taken every sample_every from burn to t_end.
    """
    if not 0 <= burn < t_end or sample_every <= 0:
        raise ParameterError(f"need 0 <= burn < t_end and sample_every > 0, got ({burn}, {t_end}, {sample_every})")
    integ = make_integrator(cfg)
    path = make_path(cfg, derive_seed(seed, 'path'), 0.0, t_end, integ.alpha)
    n_first = int(math.ceil(burn / sample_every - 1e-9))
    n_last = int(math.floor(t_end / sample_every + 1e-9))
    times = [k * sample_every for k in range(n_first, n_last + 1)]
    trajectory, _ = solve(path, cfg, 0.0, t_end, x, record_times=times, integrator=integ)
    values = np.array([f(trajectory.snapshots[t]) for t in times])
    n_batches = max(1, min(n_batches, values.size))
    batches = [b.mean() for b in np.array_split(values, n_batches)]
    mean = float(np.mean(values))
    se = float(np.std(batches, ddof=1) / math.sqrt(n_batches)) if n_batches > 1 else float('nan')
    return {'mean': mean, 'stderr': se, 'n_samples': int(values.size), 'n_batches': n_batches,
            't_end': t_end, 'burn': burn}
