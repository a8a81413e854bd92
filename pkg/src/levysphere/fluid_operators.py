"""
Stokes, Coriolis and advection operators in vorticity space.

A and C are diagonal and exact. B is evaluated pseudo-spectrally on the
dealiased grid from Cartesian velocity components, so that
b(u, v, v) = 0 holds to roundoff.
"""

import logging
from dataclasses import dataclass
from typing import Any, Dict, Sequence

import numpy as np

from levysphere.errors import ParameterError
from levysphere.spherical_spectral import (
    SpectralField,
    SphereGrid,
    analyze_scalar,
    angular_momentum,
    degree_grid,
    h_norm,
    inner_h,
    inverse_laplacian_factor,
    random_field,
    rotational_gradient,
    stokes_spectrum,
    synthesize_scalar,
    v_norm,
)
from levysphere.stable_noise import make_generator

logger = logging.getLogger(__name__)

TAG_DELTA = 23
TAG_CB = 29
DELTA_SAFETY = 1.1


@dataclass(frozen=True)
class OperatorContext:
    """Grid and physical constants shared by the operators."""
    grid: SphereGrid
    rotation: float = 0.0
    viscosity: float = 1.0
    dealias: bool = True
    spectrum: str = 'stokes'

    def validate(self, l_max: int) -> None:
        if self.viscosity < 0:
            raise ParameterError(f"viscosity must be >= 0, got {self.viscosity}")
        if self.rotation < 0:
            raise ParameterError(f"rotation must be >= 0, got {self.rotation}")
        self.grid.check(l_max, self.dealias)


def apply_A(field: SpectralField, spectrum: str = 'stokes') -> SpectralField:
    """Stokes operator: multiply each degree by stokes_eig(l)."""
    return field.with_coeffs(field.coeffs * stokes_spectrum(field.l_max, field.l_min, spectrum))


def coriolis_multiplier(l_max: int, rotation: float) -> np.ndarray:
    """Vorticity-space symbol of C: -2 Omega i m / (l(l+1))."""
    _, m = degree_grid(l_max)
    return -2.0j * rotation * m * inverse_laplacian_factor(l_max)


def apply_C(field: SpectralField, ctx: OperatorContext) -> SpectralField:
    """Coriolis operator; skew-adjoint in H and zero on zonal fields."""
    return field.with_coeffs(field.coeffs * coriolis_multiplier(field.l_max, ctx.rotation))


def linear_symbol(l_max: int, l_min: int, ctx: OperatorContext) -> np.ndarray:
    """Diagonal of -(nu A + C) in vorticity space."""
    lam = stokes_spectrum(l_max, l_min, ctx.spectrum)
    return -(ctx.viscosity * lam + coriolis_multiplier(l_max, ctx.rotation))


def _synthesize_all(coeff_list: Sequence[np.ndarray], l_max: int, grid: SphereGrid) -> np.ndarray:
    return np.stack([synthesize_scalar(c, l_max, grid) for c in coeff_list])


def _triple(x: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pointwise x . (a cross b) for (3, n_lat, n_lon) arrays."""
    return np.sum(x * np.cross(a, b, axis=0), axis=0)


def jacobian(a_coeffs: np.ndarray, b_coeffs: np.ndarray, l_max: int, grid: SphereGrid) -> np.ndarray:
    """
    Grid values of J(a, b) = (x cross grad a) . grad b.

    Computed as x . (U_a cross U_b) with U_f = x cross grad f, which needs no
    latitude derivatives of the Legendre functions.
    """
    x = grid.cartesian()
    ua = _synthesize_all(rotational_gradient(a_coeffs, l_max), l_max, grid)
    ub = _synthesize_all(rotational_gradient(b_coeffs, l_max), l_max, grid)
    return _triple(x, ua, ub)


def bilinear_B(u: SpectralField, v: SpectralField, ctx: OperatorContext) -> SpectralField:
    """
    Vorticity coefficients of P[(u . grad) v].

    The covariant advection of each Cartesian component v_i is J(psi_u, v_i);
    the curl of the resulting vector field G is i sum_i L_i G_i in
    coefficient space.

    Raises:
        DimensionError: If u and v differ in truncation or the grid is too coarse
    """
    u.same_truncation(v)
    l_max = u.l_max
    grid = ctx.grid
    grid.check(l_max, ctx.dealias)
    x = grid.cartesian()

    u_cart = _synthesize_all(rotational_gradient(u.stream_function(), l_max), l_max, grid)
    v_cart_coeffs = rotational_gradient(v.stream_function(), l_max)

    result = np.zeros_like(u.coeffs, dtype=complex)
    for i, vi in enumerate(v_cart_coeffs):
        w = _synthesize_all(rotational_gradient(vi, l_max), l_max, grid)
        g_i = _triple(x, u_cart, w)
        lg = angular_momentum(analyze_scalar(g_i, l_max, grid), l_max)[i]
        result += 1j * lg
    return SpectralField.from_array(result, l_max, u.l_min)


def trilinear_b(u: SpectralField, v: SpectralField, w: SpectralField, ctx: OperatorContext) -> float:
    """b(u, v, w) = (B(u, v), w)_H."""
    return inner_h(bilinear_B(u, v, ctx), w)


def advect_vorticity(u: SpectralField, ctx: OperatorContext) -> SpectralField:
    """[J(psi, zeta)] projected; equals bilinear_B(u, u) for the same field."""
    grid = ctx.grid
    grid.check(u.l_max, ctx.dealias)
    j = jacobian(u.stream_function(), u.coeffs, u.l_max, grid)
    return SpectralField.from_array(analyze_scalar(j, u.l_max, grid), u.l_max, u.l_min)


def gradient_bound(mode: SpectralField, grid: SphereGrid) -> float:
    """
    Grid maximum of the Frobenius norm of grad e for a velocity field e.

    |<B(u, e), u>| <= sup|grad e| |u|^2, so this bounds the mode constant.
    """
    l_max = mode.l_max
    total = np.zeros(grid.shape)
    for vi in rotational_gradient(mode.stream_function(), l_max):
        w = _synthesize_all(rotational_gradient(vi, l_max), l_max, grid)
        total += np.sum(w * w, axis=0)
    return float(np.sqrt(np.max(total)))


def _zonal_only(field: SpectralField) -> SpectralField:
    _, m = degree_grid(field.l_max)
    return field.with_coeffs(np.where(m == 0, field.coeffs, 0.0))


def estimate_mode_bound_delta(
    noise_modes: Sequence[SpectralField],
    ctx: OperatorContext,
    n_samples: int = 64,
    seed: int = 0,
    zonal_only: bool = False,
) -> Dict[str, Any]:
    """
    Empirical constant delta with |<B(u, e_l), u>| <= delta |u|^2.

    Args:
        noise_modes: Unit-H-norm basis fields e_l
        ctx: Operator context
        n_samples: Random fields u per call
        seed: Base seed
        zonal_only: Restrict u to zonal fields

    Returns:
        Dict with 'delta' (max ratio times the 1.1 safety factor), 'raw_max',
        per-mode ratios and the analytic 'gradient_bound'

    Raises:
        ParameterError: If noise_modes is empty
    """
    if not noise_modes:
        raise ParameterError("noise mode list is empty")
    if n_samples < 1:
        raise ParameterError(f"n_samples must be >= 1, got {n_samples}")
    l_max, l_min = noise_modes[0].l_max, noise_modes[0].l_min
    rng = make_generator(seed, TAG_DELTA)
    per_mode = [0.0] * len(noise_modes)
    for _ in range(n_samples):
        u = random_field(l_max, l_min, rng, slope=1.0)
        if zonal_only:
            u = _zonal_only(u)
        norm_sq = h_norm(u) ** 2
        if norm_sq == 0.0:
            continue
        for k, e in enumerate(noise_modes):
            ratio = abs(trilinear_b(u, e, u, ctx)) / norm_sq
            per_mode[k] = max(per_mode[k], ratio)
    raw_max = max(per_mode)
    bounds = [gradient_bound(e, ctx.grid) for e in noise_modes]
    logger.debug("delta estimate: raw max %.4g, gradient bounds %s", raw_max, bounds)
    return {
        'delta': DELTA_SAFETY * raw_max,
        'raw_max': raw_max,
        'per_mode': per_mode,
        'gradient_bound': max(bounds),
        'gradient_bounds': bounds,
        'n_samples': n_samples,
    }


def estimate_c_b(
    l_max: int,
    l_min: int,
    ctx: OperatorContext,
    n_samples: int = 32,
    seed: int = 0,
) -> float:
    """
    Empirical Ladyzhenskaya-type constant for the trilinear form.

    Maximises |b(u,v,w)| / (|u|^1/2 |u|_V^1/2 |v|^1/2 |v|_V^1/2 |w|_V) over
    random triples.
    """
    rng = make_generator(seed, TAG_CB)
    best = 0.0
    for _ in range(n_samples):
        u, v, w = (random_field(l_max, l_min, rng, slope=s) for s in (1.0, 1.5, 2.0))
        denom = np.sqrt(h_norm(u) * v_norm(u, ctx.spectrum) * h_norm(v) * v_norm(v, ctx.spectrum)) \
            * v_norm(w, ctx.spectrum)
        if denom > 0:
            best = max(best, abs(trilinear_b(u, v, w, ctx)) / denom)
    return best
