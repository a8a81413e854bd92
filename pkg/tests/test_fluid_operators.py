import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from levysphere.errors import DimensionError, ParameterError
from levysphere.fluid_operators import (
    OperatorContext,
    advect_vorticity,
    apply_A,
    apply_C,
    bilinear_B,
    estimate_c_b,
    estimate_mode_bound_delta,
    linear_symbol,
    trilinear_b,
)
from levysphere.spherical_spectral import (
    SpectralField,
    SphereGrid,
    h_norm,
    inner_h,
    make_grid,
    random_field,
    stokes_spectrum,
    v_norm,
)
from levysphere.stable_noise import make_generator

L_MAX = 7


@pytest.fixture
def ctx() -> OperatorContext:
    return OperatorContext(grid=make_grid(L_MAX), rotation=2.0, viscosity=0.5)


def _field(seed: int, slope: float = 1.0) -> SpectralField:
    return random_field(L_MAX, 2, make_generator(seed), slope)


class TestLinear:

    def test_stokes_is_diagonal(self):
        e = SpectralField.unit_mode(4, 2, L_MAX)
        np.testing.assert_allclose(apply_A(e).coeffs, 18.0 * e.coeffs)

    def test_coriolis_skew(self, ctx):
        for seed in range(5):
            u = _field(seed)
            assert abs(inner_h(apply_C(u, ctx), u)) <= 1e-12 * h_norm(u) ** 2

    def test_coriolis_vanishes_on_zonal(self, ctx):
        e = SpectralField.unit_mode(3, 0, L_MAX)
        assert h_norm(apply_C(e, ctx)) == 0.0

    def test_linear_symbol_damping(self, ctx):
        sym = linear_symbol(L_MAX, 2, ctx)
        lam = stokes_spectrum(L_MAX, 2)
        np.testing.assert_allclose(sym.real, -0.5 * np.broadcast_to(lam, sym.shape))

    def test_context_validation(self):
        with pytest.raises(ParameterError):
            OperatorContext(grid=make_grid(L_MAX), viscosity=-1.0).validate(L_MAX)
        with pytest.raises(DimensionError):
            OperatorContext(grid=SphereGrid(8, 15)).validate(L_MAX)


class TestNonlinear:

    @settings(max_examples=10, deadline=None)
    @given(st.integers(0, 10 ** 6))
    def test_energy_conserving(self, seed):
        ctx = OperatorContext(grid=make_grid(L_MAX))
        u, v = _field(seed), _field(seed + 1)
        assert abs(trilinear_b(u, v, v, ctx)) <= 1e-10 * v_norm(u) * v_norm(v) ** 2

    def test_self_advection_matches_jacobian(self, ctx):
        u = _field(11)
        b = bilinear_B(u, u, ctx)
        j = advect_vorticity(u, ctx)
        np.testing.assert_allclose(b.coeffs, j.coeffs, atol=1e-10 * np.max(np.abs(j.coeffs)))

    def test_self_advection_orthogonal(self, ctx):
        u = _field(12)
        assert abs(inner_h(advect_vorticity(u, ctx), u)) <= 1e-10 * v_norm(u) ** 3

    def test_bilinear(self, ctx):
        u, w, v = _field(13), _field(14), _field(15)
        lhs = bilinear_B(u + 2.0 * w, v, ctx)
        rhs = bilinear_B(u, v, ctx) + 2.0 * bilinear_B(w, v, ctx)
        np.testing.assert_allclose(lhs.coeffs, rhs.coeffs, atol=1e-10 * np.max(np.abs(lhs.coeffs)))

    def test_truncation_mismatch(self, ctx):
        with pytest.raises(DimensionError):
            bilinear_B(_field(1), SpectralField.zeros(L_MAX - 1), ctx)


class TestConstants:

    def test_mode_bound_delta(self, ctx):
        modes = [SpectralField.unit_mode(2, 0, L_MAX), SpectralField.unit_mode(3, 0, L_MAX)]
        est = estimate_mode_bound_delta(modes, ctx, n_samples=16, seed=1)
        assert est['delta'] == pytest.approx(1.1 * est['raw_max'])
        assert 0.0 < est['raw_max'] <= 1.05 * est['gradient_bound']
        assert len(est['per_mode']) == 2

    def test_zonal_pairs_do_not_exchange_energy(self, ctx):
        modes = [SpectralField.unit_mode(2, 0, L_MAX)]
        est = estimate_mode_bound_delta(modes, ctx, n_samples=8, seed=2, zonal_only=True)
        assert est['raw_max'] < 1e-10

    def test_mode_bound_needs_modes(self, ctx):
        with pytest.raises(ParameterError):
            estimate_mode_bound_delta([], ctx)

    def test_c_b(self, ctx):
        c_b = estimate_c_b(L_MAX, 2, ctx, n_samples=8, seed=3)
        assert 0.0 < c_b < np.inf
