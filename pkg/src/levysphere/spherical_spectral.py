"""
Spherical-harmonic representation of divergence-free velocity fields.

The state is the scalar vorticity zeta = Laplacian(psi), stored as complex
coefficients of orthonormal harmonics Y_lm (Condon-Shortley phase). Grid
transforms use Gauss-Legendre latitudes and FFT in longitude. All norms are
velocity norms in H = L^2; the 1/(l(l+1)) conversion happens here.
"""

import base64
import functools
import math
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import scipy.special as sps

from levysphere.errors import DimensionError, DomainError, ParameterError

SPECTRA = ('stokes', 'laplacian')
TAG_VORTICITY = 'vorticity'


def stokes_eig(l: int, spectrum: str = 'stokes', l_min: int = 2) -> float:
    """
    Eigenvalue of the Stokes operator on degree-l stream-function modes.

    'stokes' is l(l+1) - 2 (vector Laplacian plus 2 Ric on the unit sphere);
    'laplacian' is l(l+1).

    Raises:
        DomainError: If l < l_min
        ParameterError: For an unknown spectrum name
    """
    if spectrum not in SPECTRA:
        raise ParameterError(f"spectrum must be one of {SPECTRA}, got {spectrum!r}")
    if l < l_min:
        raise DomainError(f"degree {l} is below l_min={l_min}")
    value = l * (l + 1)
    return float(value - 2 if spectrum == 'stokes' else value)


@dataclass(frozen=True)
class SphereGrid:
    """Gauss-Legendre latitudes times equispaced longitudes."""
    n_lat: int
    n_lon: int

    @property
    def mu(self) -> np.ndarray:
        """sin(latitude) at the Gauss nodes, ascending."""
        return gauss_nodes(self.n_lat)[0]

    @property
    def weights(self) -> np.ndarray:
        return gauss_nodes(self.n_lat)[1]

    @property
    def lon(self) -> np.ndarray:
        return 2.0 * np.pi * np.arange(self.n_lon) / self.n_lon

    @property
    def shape(self) -> Tuple[int, int]:
        return self.n_lat, self.n_lon

    def check(self, l_max: int, dealias: bool = False) -> None:
        """
        Raise DimensionError unless the grid resolves degree l_max.

        With dealias, quadratic products must be alias free.
        """
        if self.n_lat < l_max + 1 or self.n_lon < 2 * l_max + 1:
            raise DimensionError(
                f"grid {self.n_lat}x{self.n_lon} too coarse for l_max={l_max} "
                f"(need n_lat >= {l_max + 1}, n_lon >= {2 * l_max + 1})"
            )
        if dealias:
            need_lat = math.ceil(3 * (l_max + 1) / 2)
            need_lon = 3 * l_max + 1
            if self.n_lat < need_lat or self.n_lon < need_lon:
                raise DimensionError(
                    f"dealiased grid needs n_lat >= {need_lat}, n_lon >= {need_lon} "
                    f"for l_max={l_max}, got {self.n_lat}x{self.n_lon}"
                )

    def cartesian(self) -> np.ndarray:
        """Unit position vectors on the grid, shape (3, n_lat, n_lon)."""
        return _cartesian(self.n_lat, self.n_lon)

    def area_weights(self) -> np.ndarray:
        """Quadrature weights for integrals over the sphere, shape (n_lat, n_lon)."""
        return np.outer(self.weights, np.full(self.n_lon, 2.0 * np.pi / self.n_lon))


def make_grid(l_max: int, dealias: bool = True) -> SphereGrid:
    """Smallest grid for l_max (alias free for quadratic products when dealias)."""
    if dealias:
        return SphereGrid(n_lat=math.ceil(3 * (l_max + 1) / 2), n_lon=3 * l_max + 1)
    return SphereGrid(n_lat=l_max + 1, n_lon=2 * l_max + 1)


@functools.lru_cache(maxsize=32)
def gauss_nodes(n: int) -> Tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on [-1, 1]."""
    x, w = sps.roots_legendre(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


@functools.lru_cache(maxsize=32)
def _cartesian(n_lat: int, n_lon: int) -> np.ndarray:
    mu = gauss_nodes(n_lat)[0]
    cos_lat = np.sqrt(1.0 - mu * mu)
    lon = 2.0 * np.pi * np.arange(n_lon) / n_lon
    xyz = np.stack([
        np.outer(cos_lat, np.cos(lon)),
        np.outer(cos_lat, np.sin(lon)),
        np.outer(mu, np.ones(n_lon)),
    ])
    xyz.setflags(write=False)
    return xyz


@functools.lru_cache(maxsize=32)
def legendre_table(l_max: int, n_lat: int) -> np.ndarray:
    """
    Normalised associated Legendre functions at the Gauss nodes.

    Returns:
        Array p of shape (l_max + 1, n_lat, l_max + 1) with p[m, j, l] the
        unit-L^2([-1, 1]) function of degree l and order m >= 0 (zero for l < m)
    """
    x = gauss_nodes(n_lat)[0]
    y = np.sqrt(1.0 - x * x)
    p = np.zeros((l_max + 1, n_lat, l_max + 1))
    diag = np.full(n_lat, 1.0 / np.sqrt(2.0))
    for m in range(l_max + 1):
        if m > 0:
            diag = -np.sqrt(1.0 + 1.0 / (2.0 * m)) * y * diag
        p[m, :, m] = diag
        if m + 1 <= l_max:
            p[m, :, m + 1] = np.sqrt(2.0 * m + 3.0) * x * diag
        for l in range(m + 2, l_max + 1):
            a = np.sqrt((4.0 * l * l - 1.0) / (l * l - m * m))
            b = np.sqrt(((l - 1.0) ** 2 - m * m) / (4.0 * (l - 1.0) ** 2 - 1.0))
            p[m, :, l] = a * (x * p[m, :, l - 1] - b * p[m, :, l - 2])
    p.setflags(write=False)
    return p


def degree_grid(l_max: int) -> Tuple[np.ndarray, np.ndarray]:
    """Broadcastable degree (l_max+1, 1) and order (1, 2 l_max + 1) index arrays."""
    l = np.arange(l_max + 1).reshape(-1, 1)
    m = np.arange(-l_max, l_max + 1).reshape(1, -1)
    return l, m


@functools.lru_cache(maxsize=64)
def mode_mask(l_max: int, l_min: int) -> np.ndarray:
    """Boolean mask of stored modes l_min <= l <= l_max, |m| <= l."""
    l, m = degree_grid(l_max)
    mask = (np.abs(m) <= l) & (l >= l_min)
    mask.setflags(write=False)
    return mask


@functools.lru_cache(maxsize=64)
def inverse_laplacian_factor(l_max: int) -> np.ndarray:
    """1/(l(l+1)) per degree, 0 for l = 0; shape (l_max + 1, 1)."""
    l = np.arange(l_max + 1, dtype=float)
    out = np.zeros_like(l)
    out[1:] = 1.0 / (l[1:] * (l[1:] + 1.0))
    out = out.reshape(-1, 1)
    out.setflags(write=False)
    return out


@functools.lru_cache(maxsize=64)
def stokes_spectrum(l_max: int, l_min: int, spectrum: str = 'stokes') -> np.ndarray:
    """stokes_eig per degree, zero below l_min; shape (l_max + 1, 1)."""
    values = np.zeros((l_max + 1, 1))
    for l in range(l_min, l_max + 1):
        values[l, 0] = stokes_eig(l, spectrum, l_min)
    values.setflags(write=False)
    return values


@dataclass(frozen=True)
class SpectralField:
    """
    Vorticity coefficients zeta[l, m + l_max] of a real velocity field.

    Reality: zeta[l, -m] = (-1)^m conj(zeta[l, m]). Degrees below l_min are zero.
    """
    l_max: int
    l_min: int
    coeffs: np.ndarray
    tag: str = TAG_VORTICITY

    def __post_init__(self):
        expected = (self.l_max + 1, 2 * self.l_max + 1)
        if self.coeffs.shape != expected:
            raise DimensionError(f"coeffs shape {self.coeffs.shape} != {expected}")
        self.coeffs.setflags(write=False)

    @classmethod
    def zeros(cls, l_max: int, l_min: int = 2) -> 'SpectralField':
        return cls(l_max, l_min, np.zeros((l_max + 1, 2 * l_max + 1), dtype=complex))

    @classmethod
    def from_array(cls, coeffs: np.ndarray, l_max: int, l_min: int) -> 'SpectralField':
        """Project an arbitrary coefficient array onto the working subspace."""
        return cls(l_max, l_min, np.where(mode_mask(l_max, l_min), coeffs, 0.0).astype(complex))

    @classmethod
    def single_mode(cls, l: int, m: int, l_max: int, l_min: int = 2,
                    amplitude: complex = 1.0) -> 'SpectralField':
        """
        Real field with zeta[l, m] = amplitude and its conjugate partner.

        unit_mode gives the H-normalised version.
        """
        if not l_min <= l <= l_max or abs(m) > l:
            raise DimensionError(f"mode ({l}, {m}) outside truncation [{l_min}, {l_max}]")
        c = np.zeros((l_max + 1, 2 * l_max + 1), dtype=complex)
        c[l, m + l_max] = amplitude
        if m != 0:
            c[l, -m + l_max] = (-1) ** m * np.conj(amplitude)
        elif np.iscomplexobj(amplitude) and np.imag(amplitude) != 0:
            c[l, l_max] = np.real(amplitude)
        return cls(l_max, l_min, c)

    @classmethod
    def unit_mode(cls, l: int, m: int, l_max: int, l_min: int = 2) -> 'SpectralField':
        """Single mode with unit H norm (the basis field e_l)."""
        amplitude = math.sqrt(l * (l + 1) / (1.0 if m == 0 else 2.0))
        return cls.single_mode(l, m, l_max, l_min, amplitude)

    def same_truncation(self, other: 'SpectralField') -> None:
        if (self.l_max, self.l_min) != (other.l_max, other.l_min):
            raise DimensionError(
                f"truncation mismatch: ({self.l_min}, {self.l_max}) vs ({other.l_min}, {other.l_max})"
            )

    def with_coeffs(self, coeffs: np.ndarray) -> 'SpectralField':
        return SpectralField(self.l_max, self.l_min, np.asarray(coeffs, dtype=complex), self.tag)

    def __add__(self, other: 'SpectralField') -> 'SpectralField':
        self.same_truncation(other)
        return self.with_coeffs(self.coeffs + other.coeffs)

    def __sub__(self, other: 'SpectralField') -> 'SpectralField':
        self.same_truncation(other)
        return self.with_coeffs(self.coeffs - other.coeffs)

    def __mul__(self, scalar: float) -> 'SpectralField':
        return self.with_coeffs(self.coeffs * scalar)

    __rmul__ = __mul__

    def __neg__(self) -> 'SpectralField':
        return self.with_coeffs(-self.coeffs)

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.coeffs)))

    def stream_function(self) -> np.ndarray:
        """psi coefficients, psi_lm = -zeta_lm / (l(l+1))."""
        return -self.coeffs * inverse_laplacian_factor(self.l_max)

    def reality_defect(self) -> float:
        """max |zeta[l,-m] - (-1)^m conj(zeta[l,m])|."""
        _, m = degree_grid(self.l_max)
        mirrored = ((-1.0) ** np.abs(m)) * np.conj(self.coeffs[:, ::-1])
        return float(np.max(np.abs(self.coeffs - mirrored)))


def inner_h(u: SpectralField, w: SpectralField) -> float:
    """Real H inner product (u, w) = sum zeta_u conj(zeta_w) / (l(l+1))."""
    u.same_truncation(w)
    return float(np.real(np.sum(u.coeffs * np.conj(w.coeffs) * inverse_laplacian_factor(u.l_max))))


def _weighted_sum(field: SpectralField, weight: np.ndarray) -> float:
    return float(np.sum(np.abs(field.coeffs) ** 2 * weight * inverse_laplacian_factor(field.l_max)))


def h_norm(field: SpectralField) -> float:
    """|u| in H."""
    return math.sqrt(_weighted_sum(field, 1.0))


def v_norm(field: SpectralField, spectrum: str = 'stokes') -> float:
    """|u|_V = |A^(1/2) u|."""
    lam = stokes_spectrum(field.l_max, field.l_min, spectrum)
    return math.sqrt(_weighted_sum(field, lam))


def a_norm(field: SpectralField, spectrum: str = 'stokes') -> float:
    """|A u|."""
    lam = stokes_spectrum(field.l_max, field.l_min, spectrum)
    return math.sqrt(_weighted_sum(field, lam * lam))


def enstrophy(field: SpectralField) -> float:
    """Half the squared L^2 norm of the vorticity."""
    mask = mode_mask(field.l_max, 0)
    return 0.5 * float(np.sum(np.abs(field.coeffs[mask]) ** 2))


# --- scalar transforms -------------------------------------------------------

def synthesize_scalar(coeffs: np.ndarray, l_max: int, grid: SphereGrid) -> np.ndarray:
    """
    Grid values of the real scalar sum_lm c_lm Y_lm.

    Only m >= 0 coefficients are read; reality supplies the rest.
    """
    grid.check(l_max)
    p = legendre_table(l_max, grid.n_lat)
    pos = coeffs[:, l_max:]
    f_m = np.einsum('lm,mjl->jm', pos, p)
    spectrum = np.zeros((grid.n_lat, grid.n_lon // 2 + 1), dtype=complex)
    spectrum[:, : l_max + 1] = f_m
    return np.fft.irfft(spectrum, n=grid.n_lon, axis=1) * (grid.n_lon / np.sqrt(2.0 * np.pi))


def analyze_scalar(values: np.ndarray, l_max: int, grid: SphereGrid) -> np.ndarray:
    """
    Coefficients c_lm = integral of f conj(Y_lm), all |m| <= l <= l_max.

    Exact for band-limited f whose product with Y_lm the grid integrates exactly.
    """
    grid.check(l_max)
    if values.shape != grid.shape:
        raise DimensionError(f"grid values shape {values.shape} != {grid.shape}")
    p = legendre_table(l_max, grid.n_lat)
    g_m = np.fft.rfft(values, axis=1)[:, : l_max + 1] * (np.sqrt(2.0 * np.pi) / grid.n_lon)
    pos = np.einsum('j,jm,mjl->lm', grid.weights, g_m, p)
    out = np.zeros((l_max + 1, 2 * l_max + 1), dtype=complex)
    out[:, l_max:] = pos
    m = np.arange(1, l_max + 1)
    out[:, l_max - m] = ((-1.0) ** m) * np.conj(pos[:, 1:])
    l_idx, m_idx = degree_grid(l_max)
    out[np.abs(m_idx) > l_idx] = 0.0
    return out


# --- angular momentum ladder operators ---------------------------------------

@functools.lru_cache(maxsize=64)
def _ladder_factors(l_max: int) -> Tuple[np.ndarray, np.ndarray]:
    l, m = degree_grid(l_max)
    inside = np.abs(m) <= l
    plus = np.where(inside, np.sqrt(np.clip((l - m + 1) * (l + m), 0, None)), 0.0)
    minus = np.where(inside, np.sqrt(np.clip((l + m + 1) * (l - m), 0, None)), 0.0)
    plus.setflags(write=False)
    minus.setflags(write=False)
    return plus, minus


def angular_momentum(coeffs: np.ndarray, l_max: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Apply (L_x, L_y, L_z), L = -i x cross grad, in coefficient space.

    Every component preserves the degree l.
    """
    plus, minus = _ladder_factors(l_max)
    raised = np.zeros_like(coeffs, dtype=complex)
    lowered = np.zeros_like(coeffs, dtype=complex)
    raised[:, 1:] = plus[:, 1:] * coeffs[:, :-1]
    lowered[:, :-1] = minus[:, :-1] * coeffs[:, 1:]
    _, m = degree_grid(l_max)
    lx = 0.5 * (raised + lowered)
    ly = -0.5j * (raised - lowered)
    lz = m * coeffs
    return lx, ly, lz


def rotational_gradient(coeffs: np.ndarray, l_max: int) -> List[np.ndarray]:
    """Coefficients of the Cartesian components of x cross grad(f) = i L f."""
    return [1j * c for c in angular_momentum(coeffs, l_max)]


def cartesian_velocity(field: SpectralField, grid: SphereGrid) -> np.ndarray:
    """Cartesian velocity components u = x cross grad(psi), shape (3, n_lat, n_lon)."""
    comps = rotational_gradient(field.stream_function(), field.l_max)
    return np.stack([synthesize_scalar(c, field.l_max, grid) for c in comps])


def synthesize(field: SpectralField, grid: SphereGrid, velocity: bool = False) -> Any:
    """
    Grid values of the vorticity, optionally with (u_lon, u_lat).

    Args:
        field: Spectral state
        grid: Target grid (must resolve l_max)
        velocity: Also return eastward and northward velocity

    Returns:
        zeta grid, or tuple (zeta, u_lon, u_lat)

    Raises:
        DimensionError: If the grid is too coarse
    """
    zeta = synthesize_scalar(field.coeffs, field.l_max, grid)
    if not velocity:
        return zeta
    u = cartesian_velocity(field, grid)
    lon = grid.lon
    mu = grid.mu[:, None]
    e_lon = np.stack([-np.sin(lon)[None, :] * np.ones_like(mu),
                      np.cos(lon)[None, :] * np.ones_like(mu),
                      np.zeros((grid.n_lat, grid.n_lon))])
    e_lat = np.stack([-mu * np.cos(lon)[None, :],
                      -mu * np.sin(lon)[None, :],
                      np.sqrt(1.0 - mu * mu) * np.ones((1, grid.n_lon))])
    return zeta, np.sum(u * e_lon, axis=0), np.sum(u * e_lat, axis=0)


def analyze(values: np.ndarray, grid: SphereGrid, l_max: int, l_min: int = 2) -> SpectralField:
    """
    Vorticity grid values to a SpectralField, projected to [l_min, l_max].

    Raises:
        DimensionError: If the grid is too coarse for l_max
    """
    return SpectralField.from_array(analyze_scalar(values, l_max, grid), l_max, l_min)


def integrate(values: np.ndarray, grid: SphereGrid) -> float:
    """Quadrature of grid values over the unit sphere."""
    return float(np.sum(values * grid.area_weights()))


def random_field(l_max: int, l_min: int, rng: np.random.Generator,
                 slope: float = 0.0) -> SpectralField:
    """
    Random real field with Gaussian coefficients.

    Coefficient variance scales as (l(l+1))^(-slope) relative to an
    H-white field.
    """
    l, m = degree_grid(l_max)
    shape = (l_max + 1, 2 * l_max + 1)
    raw = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    ll1 = np.maximum(l * (l + 1), 1).astype(float)
    raw = raw * np.sqrt(ll1) * ll1 ** (-slope / 2.0)
    pos = np.where(m >= 0, raw, 0.0)
    pos[:, l_max] = np.real(pos[:, l_max])
    mirrored = ((-1.0) ** np.abs(m)) * np.conj(pos[:, ::-1])
    full = np.where(m > 0, pos, 0.0) + np.where(m < 0, mirrored, 0.0) + np.where(m == 0, pos, 0.0)
    return SpectralField.from_array(full, l_max, l_min)


# --- snapshots ---------------------------------------------------------------

def field_to_snapshot(field: SpectralField, time: Optional[float] = None) -> Dict[str, Any]:
    """JSON-ready snapshot with base64 little-endian complex128 coefficients."""
    raw = np.ascontiguousarray(field.coeffs, dtype='<c16').tobytes()
    return {
        'l_max': field.l_max,
        'l_min': field.l_min,
        'time': time,
        'tag': field.tag,
        'coeffs': base64.b64encode(raw).decode('ascii'),
    }


def field_from_snapshot(data: Dict[str, Any]) -> SpectralField:
    l_max = int(data['l_max'])
    raw = base64.b64decode(data['coeffs'])
    coeffs = np.frombuffer(raw, dtype='<c16').reshape(l_max + 1, 2 * l_max + 1).astype(complex)
    return SpectralField(l_max, int(data['l_min']), coeffs, data.get('tag', TAG_VORTICITY))


def spectral_csv_rows(field: SpectralField) -> List[Dict[str, Any]]:
    """Rows (l, m_z, re, im) over the stored modes."""
    rows = []
    for l in range(field.l_min, field.l_max + 1):
        for m in range(-l, l + 1):
            c = field.coeffs[l, m + field.l_max]
            rows.append({'l': l, 'm_z': m, 're': float(c.real), 'im': float(c.imag)})
    return rows
