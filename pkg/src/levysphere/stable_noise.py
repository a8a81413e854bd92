"""
Stable random variates, two-sided multi-mode Levy paths and the path shift.

Paths are stored as per-step increments so that the shift theta_s is an exact
re-indexing of the same numbers.
"""

import io
import logging
import struct
from dataclasses import dataclass
from typing import Any, BinaryIO, Dict, List, Optional, Sequence, Tuple

import numpy as np

from levysphere.errors import AlignmentError, ParameterError, RangeError

logger = logging.getLogger(__name__)

PATH_MAGIC = b'SNSEPATH'
PATH_FORMAT_VERSION = 2

# Draws are keyed per block of steps so a given step index always sees the
# same uniforms, whatever window the path covers.
BLOCK_SIZE = 1024
_INDEX_OFFSET = 2 ** 40

# Purpose tags for SeedSequence derivation
TAG_SAMPLE = 11
TAG_PATH = 17

CONVENTIONS = ('standard', 'half')


@dataclass(frozen=True)
class StableParams:
    """
    Parameters of a stable law S_beta(scale, skew, shift).

    convention 'standard' has E exp(i t X) = exp(i t shift - |scale t|^beta (...)),
    so S_2(s, 0, m) = N(m, 2 s^2). convention 'half' is the symmetric law with
    E exp(i t X) = exp(-scale^beta |t|^beta / 2).
    """
    beta: float
    scale: float = 1.0
    skew: float = 0.0
    shift: float = 0.0
    convention: str = 'standard'

    def validate(self) -> None:
        """Raise ParameterError if any field is out of range."""
        problems = []
        if not np.isfinite(self.beta) or not 0.0 < self.beta <= 2.0:
            problems.append(f"beta must lie in (0, 2], got {self.beta}")
        if not np.isfinite(self.scale) or self.scale < 0.0:
            problems.append(f"scale must be >= 0, got {self.scale}")
        if not np.isfinite(self.skew) or abs(self.skew) > 1.0:
            problems.append(f"skew must lie in [-1, 1], got {self.skew}")
        if not np.isfinite(self.shift):
            problems.append(f"shift must be finite, got {self.shift}")
        if self.convention not in CONVENTIONS:
            problems.append(f"convention must be one of {CONVENTIONS}, got {self.convention!r}")
        elif self.convention == 'half' and self.skew != 0.0:
            problems.append("convention 'half' is symmetric; skew must be 0")
        if problems:
            raise ParameterError('; '.join(problems))

    @property
    def standard_scale(self) -> float:
        """Scale expressed in the 'standard' convention."""
        if self.convention == 'half':
            return self.scale * 2.0 ** (-1.0 / self.beta)
        return self.scale

    def rescaled(self, factor: float, shift_factor: Optional[float] = None) -> 'StableParams':
        """Copy with scale multiplied by factor (and shift by shift_factor)."""
        return StableParams(
            beta=self.beta,
            scale=self.scale * factor,
            skew=self.skew,
            shift=self.shift * (factor if shift_factor is None else shift_factor),
            convention=self.convention,
        )


def _seed_sequence(*entropy: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(e) & 0xFFFFFFFFFFFFFFFF for e in entropy])


def make_generator(*entropy: int) -> np.random.Generator:
    """
    Counter-based generator keyed by a tuple of non-negative integers.

    Args:
        entropy: Seed, purpose tag and indices

    Returns:
        numpy Generator backed by Philox
    """
    return np.random.Generator(np.random.Philox(_seed_sequence(*entropy)))


def characteristic_function(params: StableParams, theta: Any) -> np.ndarray:
    """
    Evaluate E exp(i theta X) for X ~ params.

    Args:
        params: Stable law parameters
        theta: Scalar or array of frequencies

    Returns:
        Complex array of characteristic function values
    """
    params.validate()
    theta = np.asarray(theta, dtype=float)
    if params.convention == 'half':
        return np.exp(1j * theta * params.shift
                      - params.scale ** params.beta * np.abs(theta) ** params.beta / 2.0)

    beta, sigma, delta = params.beta, params.scale, params.skew
    st = np.abs(sigma * theta)
    with np.errstate(divide='ignore', invalid='ignore'):
        if beta == 1.0:
            c = np.where(st > 0, -2.0 / np.pi * np.log(np.where(st > 0, st, 1.0)), 0.0)
        else:
            c = np.where(st > 0, (np.where(st > 0, st, 1.0) ** (1.0 - beta) - 1.0), 0.0)
            c = c * np.tan(np.pi * beta / 2.0)
    exponent = 1j * theta * params.shift - st ** beta * (1.0 - 1j * delta * c * np.sign(theta))
    return np.exp(exponent)


def _cms_standard(v: np.ndarray, w: np.ndarray, beta: float, skew: float) -> np.ndarray:
    """
    Chambers-Mallows-Stuck transform to a standard S^1(1, skew, 0) variate.

    v is uniform on (-pi/2, pi/2), w is Exp(1).
    """
    if beta == 1.0:
        if skew == 0.0:
            return np.tan(v)
        half_pi = np.pi / 2.0
        return (2.0 / np.pi) * ((half_pi + skew * v) * np.tan(v)
                                - skew * np.log(half_pi * w * np.cos(v) / (half_pi + skew * v)))
    if skew == 0.0:
        return (np.sin(beta * v) / np.cos(v) ** (1.0 / beta)
                * (np.cos(v - beta * v) / w) ** ((1.0 - beta) / beta))
    t = skew * np.tan(np.pi * beta / 2.0)
    b = np.arctan(t) / beta
    s = (1.0 + t * t) ** (1.0 / (2.0 * beta))
    return (s * np.sin(beta * (v + b)) / np.cos(v) ** (1.0 / beta)
            * (np.cos(v - beta * (v + b)) / w) ** ((1.0 - beta) / beta))


def _transform_uniforms(params: StableParams, u1: np.ndarray, u2: np.ndarray) -> np.ndarray:
    """Map two uniform arrays to variates of the law params."""
    if params.scale == 0.0:
        return np.full(u1.shape, float(params.shift))
    v = np.pi * (u1 - 0.5)
    w = -np.log1p(-u2)
    sigma = params.standard_scale
    beta = params.beta
    if params.convention == 'half' or params.skew == 0.0:
        return sigma * _cms_standard(v, w, beta, 0.0) + params.shift

    # The skewed display corresponds to S^1(sigma, -skew, shift') with a
    # shift correction; see characteristic_function.
    delta = params.skew
    if beta == 1.0:
        return sigma * _cms_standard(v, w, beta, delta) + params.shift
    x = _cms_standard(v, w, beta, -delta)
    mu = params.shift + delta * sigma * np.tan(np.pi * beta / 2.0)
    return sigma * x + mu


def sample_stable(params: StableParams, n: int, seed: int) -> np.ndarray:
    """
    Draw n i.i.d. stable variates.

    Args:
        params: Stable law parameters
        n: Number of samples (>= 1)
        seed: Integer seed; identical seeds give identical arrays

    Returns:
        Array of shape (n,)

    Raises:
        ParameterError: If params are invalid or n < 1
    """
    params.validate()
    if n < 1:
        raise ParameterError(f"n must be >= 1, got {n}")
    rng = make_generator(seed, TAG_SAMPLE)
    u1 = rng.random(n)
    u2 = rng.random(n)
    return _transform_uniforms(params, u1, u2)


def stable_sum_scale(weights: Sequence[float], scales: Sequence[float], beta: float) -> float:
    """
    Scale of sum_j w_j X_j for independent symmetric X_j of scales s_j.

    Args:
        weights: Linear combination weights
        scales: Scales of the summands
        beta: Common stability index

    Returns:
        (sum |w_j|^beta s_j^beta)^(1/beta)
    """
    w = np.asarray(weights, dtype=float)
    s = np.asarray(scales, dtype=float)
    if w.shape != s.shape:
        raise ParameterError(
            f"weights and scales must have the same length, got {w.size} and {s.size}"
        )
    if not 0.0 < beta <= 2.0:
        raise ParameterError(f"beta must lie in (0, 2], got {beta}")
    return float(np.sum(np.abs(w) ** beta * s ** beta) ** (1.0 / beta))


def empirical_cf(samples: np.ndarray, theta: Any) -> np.ndarray:
    """Monte Carlo characteristic function mean(exp(i theta X))."""
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    x = np.asarray(samples, dtype=float)
    return np.array([np.mean(np.cos(t * x)) + 1j * np.mean(np.sin(t * x)) for t in theta])


def moment_diagnostics(samples: np.ndarray, beta: float) -> Dict[str, Any]:
    """
    Heavy-tail sanity check on absolute moments.

    The p = beta/2 moment should stabilise when N doubles, while p = 2 beta
    typically keeps growing. Logged, never asserted.
    """
    x = np.abs(np.asarray(samples, dtype=float))
    half = x[: x.size // 2]
    report = {}
    for label, p in (('low', beta / 2.0), ('high', 2.0 * beta)):
        m_half = float(np.mean(half ** p)) if half.size else float('nan')
        m_full = float(np.mean(x ** p))
        ratio = m_full / m_half if m_half > 0 else float('nan')
        report[label] = {'p': p, 'moment_half_n': m_half, 'moment_n': m_full, 'ratio': ratio}
        logger.info("moment p=%.3f: N/2 -> %.4g, N -> %.4g (ratio %.3f)", p, m_half, m_full, ratio)
    return report


@dataclass(frozen=True)
class NoisePath:
    """
    One realisation of the m-mode two-sided Levy path on a uniform grid.

    increments[l, j] is the increment of mode l over the step
    ((k_min + j) h, (k_min + j + 1) h].
    """
    step: float
    k_min: int
    increments: np.ndarray
    seed: int
    mode_params: Tuple[StableParams, ...]
    origin: int = 0

    def __post_init__(self):
        self.increments.setflags(write=False)

    @property
    def n_modes(self) -> int:
        return self.increments.shape[0]

    @property
    def n_steps(self) -> int:
        return self.increments.shape[1]

    @property
    def k_max(self) -> int:
        return self.k_min + self.n_steps

    @property
    def t_min(self) -> float:
        return self.k_min * self.step

    @property
    def t_max(self) -> float:
        return self.k_max * self.step

    def grid_index(self, t: float) -> int:
        """
        Absolute step index k with t = k h.

        Raises:
            AlignmentError: If t is not a grid time
        """
        k = int(round(t / self.step))
        if abs(k * self.step - t) > 1e-9 * max(1.0, abs(t)):
            raise AlignmentError(f"t={t} is not a multiple of the path step {self.step}")
        return k

    def covers(self, t_lo: float, t_hi: float) -> bool:
        return self.grid_index(t_lo) >= self.k_min and self.grid_index(t_hi) <= self.k_max

    def require(self, t_lo: float, t_hi: float) -> None:
        """Raise RangeError unless [t_lo, t_hi] lies inside the path window."""
        if not self.covers(t_lo, t_hi):
            raise RangeError(
                f"path covers [{self.t_min:g}, {self.t_max:g}], "
                f"requested [{t_lo:g}, {t_hi:g}]"
            )

    def increment_at(self, k: int) -> np.ndarray:
        """Per-mode increment over the step (k h, (k+1) h]."""
        j = k - self.k_min
        if not 0 <= j < self.n_steps:
            raise RangeError(f"step index {k} outside path [{self.k_min}, {self.k_max})")
        return self.increments[:, j]

    def value(self, t: float) -> np.ndarray:
        """Path value L(t) per mode, with L(0) = 0."""
        k = self.grid_index(t)
        if not self.k_min <= k <= self.k_max:
            raise RangeError(f"t={t} outside path [{self.t_min:g}, {self.t_max:g}]")
        j0 = -self.k_min
        j = k - self.k_min
        if j >= j0:
            return np.sum(self.increments[:, j0:j], axis=1)
        return -np.sum(self.increments[:, j:j0], axis=1)

    def grid_values(self) -> Tuple[np.ndarray, np.ndarray]:
        """Times and path values on the whole grid, shape (n_steps + 1,), (m, n_steps + 1)."""
        times = (self.k_min + np.arange(self.n_steps + 1)) * self.step
        cum = np.concatenate([np.zeros((self.n_modes, 1)), np.cumsum(self.increments, axis=1)], axis=1)
        values = cum - cum[:, [-self.k_min]]
        return times, values


def _block_uniforms(seed: int, mode: int, block: int) -> Tuple[np.ndarray, np.ndarray]:
    rng = make_generator(seed, TAG_PATH, mode, block + _INDEX_OFFSET)
    return rng.random(BLOCK_SIZE), rng.random(BLOCK_SIZE)


def _mode_uniforms(seed: int, mode: int, k_lo: int, k_hi: int) -> Tuple[np.ndarray, np.ndarray]:
    """Uniform pairs for absolute steps k_lo..k_hi-1 of one mode."""
    b_lo = k_lo // BLOCK_SIZE
    b_hi = (k_hi - 1) // BLOCK_SIZE
    u1_parts, u2_parts = [], []
    for block in range(b_lo, b_hi + 1):
        u1, u2 = _block_uniforms(seed, mode, block)
        u1_parts.append(u1)
        u2_parts.append(u2)
    u1 = np.concatenate(u1_parts)
    u2 = np.concatenate(u2_parts)
    start = k_lo - b_lo * BLOCK_SIZE
    return u1[start:start + (k_hi - k_lo)], u2[start:start + (k_hi - k_lo)]


def make_two_sided_path(
    mode_params: Sequence[StableParams],
    h: float,
    t_min: float,
    t_max: float,
    seed: int
) -> NoisePath:
    """
    Generate a two-sided path with independent stable increments.

    Each increment of mode l is S_beta(sigma_l h^(1/beta), skew, shift h).

    Args:
        mode_params: One StableParams per noise mode
        h: Grid step
        t_min: Left end (<= 0)
        t_max: Right end (>= 0)
        seed: Base seed

    Returns:
        NoisePath with L(0) = 0

    Raises:
        ParameterError: For non-positive h or invalid params
        AlignmentError: If h does not divide t_min or t_max
    """
    if not h > 0:
        raise ParameterError(f"step h must be positive, got {h}")
    if not t_min <= 0.0 <= t_max:
        raise ParameterError(f"need t_min <= 0 <= t_max, got [{t_min}, {t_max}]")
    for p in mode_params:
        p.validate()
    k_min = int(round(t_min / h))
    k_max = int(round(t_max / h))
    for t, k in ((t_min, k_min), (t_max, k_max)):
        if abs(k * h - t) > 1e-9 * max(1.0, abs(t)):
            raise AlignmentError(f"step {h} does not divide {t}")

    n_steps = k_max - k_min
    increments = np.zeros((len(mode_params), n_steps))
    for mode, params in enumerate(mode_params):
        if n_steps == 0:
            break
        step_params = params.rescaled(h ** (1.0 / params.beta), shift_factor=h)
        u1, u2 = _mode_uniforms(seed, mode, k_min, k_max)
        increments[mode] = _transform_uniforms(step_params, u1, u2)

    return NoisePath(
        step=float(h),
        k_min=k_min,
        increments=increments,
        seed=int(seed),
        mode_params=tuple(mode_params),
    )


def shift_path(path: NoisePath, s: float) -> NoisePath:
    """
    The metric-dynamical shift (theta_s w)(t) = w(t + s) - w(s).

    No resampling: the increments are re-indexed.

    Args:
        path: Source path
        s: Grid-aligned shift

    Returns:
        Shifted path over [t_min - s, t_max - s]

    Raises:
        AlignmentError: If s is off-grid
        RangeError: If s falls outside the path window
    """
    k_s = path.grid_index(s)
    if not path.k_min <= k_s <= path.k_max:
        raise RangeError(
            f"shift {s} moves the origin outside [{path.t_min:g}, {path.t_max:g}]"
        )
    return NoisePath(
        step=path.step,
        k_min=path.k_min - k_s,
        increments=path.increments,
        seed=path.seed,
        mode_params=path.mode_params,
        origin=path.origin + k_s,
    )


def coarsen_path(path: NoisePath, factor: int) -> NoisePath:
    """
    The same realisation on a grid `factor` times coarser.

    Increments are summed over consecutive groups, so the coarse path agrees
    with the fine one at every coarse grid time.

    Raises:
        ParameterError: If factor < 1
        AlignmentError: If the window is not a whole number of coarse steps
    """
    if factor < 1:
        raise ParameterError(f"factor must be >= 1, got {factor}")
    if path.k_min % factor or path.n_steps % factor or path.origin % factor:
        raise AlignmentError(f"path window is not divisible into steps of {factor} h")
    coarse = path.increments.reshape(path.n_modes, path.n_steps // factor, factor).sum(axis=2)
    return NoisePath(
        step=path.step * factor,
        k_min=path.k_min // factor,
        increments=coarse,
        seed=path.seed,
        mode_params=path.mode_params,
        origin=path.origin // factor,
    )


def fit_increment_exponent(
    path: NoisePath,
    mode: int = 0,
    lags: Sequence[int] = (1, 2, 4, 8, 16, 32)
) -> Dict[str, Any]:
    """
    Fit the growth exponent of the increment scale over lag windows.

    For each lag (in steps) the path increments are summed in disjoint
    windows, the scale is estimated from the empirical characteristic
    function at theta = 1/median|X|, and log(scale) is regressed on log(lag h).

    Returns:
        Dict with 'exponent', 'lags', 'scales'
    """
    beta = path.mode_params[mode].beta
    inc = path.increments[mode]
    scales = []
    for lag in lags:
        n = inc.size // lag
        if n < 2:
            raise ParameterError(f"path too short for lag {lag}")
        sums = inc[: n * lag].reshape(n, lag).sum(axis=1)
        theta = 1.0 / max(float(np.median(np.abs(sums))), 1e-300)
        phi = abs(empirical_cf(sums, theta)[0])
        scales.append((-np.log(phi)) ** (1.0 / beta) / theta)
    x = np.log(np.asarray(lags, dtype=float) * path.step)
    y = np.log(np.asarray(scales))
    slope, _ = np.polyfit(x, y, 1)
    return {'exponent': float(slope), 'lags': list(lags), 'scales': [float(s) for s in scales]}


def write_path(path: NoisePath, stream: BinaryIO) -> None:
    """
    Write the binary path container.

    Header: magic, version, m, then per mode beta, scale, skew, shift and a
    convention code; then h, t_min, t_max, seed; then little-endian float64
    increments, mode-major.
    """
    m = path.n_modes
    params = path.mode_params
    stream.write(PATH_MAGIC)
    stream.write(struct.pack('<II', PATH_FORMAT_VERSION, m))
    for attr in ('beta', 'scale', 'skew', 'shift'):
        stream.write(struct.pack(f'<{m}d', *[getattr(p, attr) for p in params]))
    stream.write(struct.pack(f'<{m}B', *[CONVENTIONS.index(p.convention) for p in params]))
    stream.write(struct.pack('<dddQ', path.step, path.t_min, path.t_max, path.seed & 0xFFFFFFFFFFFFFFFF))
    stream.write(np.ascontiguousarray(path.increments, dtype='<f8').tobytes())


def read_path(stream: BinaryIO) -> NoisePath:
    """Read a container written by write_path (version 1 files carry beta and scale only)."""
    magic = stream.read(len(PATH_MAGIC))
    if magic != PATH_MAGIC:
        raise ParameterError(f"not a path container (magic {magic!r})")
    version, m = struct.unpack('<II', stream.read(8))
    if version not in (1, PATH_FORMAT_VERSION):
        raise ParameterError(f"unsupported path format version {version}")
    betas = struct.unpack(f'<{m}d', stream.read(8 * m))
    scales = struct.unpack(f'<{m}d', stream.read(8 * m))
    if version == 1:
        skews = shifts = (0.0,) * m
        codes = (0,) * m
    else:
        skews = struct.unpack(f'<{m}d', stream.read(8 * m))
        shifts = struct.unpack(f'<{m}d', stream.read(8 * m))
        codes = struct.unpack(f'<{m}B', stream.read(m))
        if any(c >= len(CONVENTIONS) for c in codes):
            raise ParameterError(f"unknown convention code in {codes}")
    h, t_min, t_max, seed = struct.unpack('<dddQ', stream.read(32))
    k_min = int(round(t_min / h))
    n_steps = int(round(t_max / h)) - k_min
    data = np.frombuffer(stream.read(8 * m * n_steps), dtype='<f8')
    params = tuple(
        StableParams(beta=b, scale=s, skew=k, shift=d, convention=CONVENTIONS[c])
        for b, s, k, d, c in zip(betas, scales, skews, shifts, codes)
    )
    return NoisePath(
        step=h,
        k_min=k_min,
        increments=data.reshape(m, n_steps).astype(float),
        seed=int(seed),
        mode_params=params,
    )


def path_to_bytes(path: NoisePath) -> bytes:
    buf = io.BytesIO()
    write_path(path, buf)
    return buf.getvalue()


def path_csv_rows(path: NoisePath) -> List[Dict[str, float]]:
    """Rows (t, L_1..L_m) for CSV export."""
    times, values = path.grid_values()
    rows = []
    for j, t in enumerate(times):
        row = {'t': float(t)}
        for mode in range(path.n_modes):
            row[f'L_{mode + 1}'] = float(values[mode, j])
        rows.append(row)
    return rows
