import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from levysphere.attractor_lab import (
    absorbing_radii,
    cloud_rows,
    fit_trace_rate,
    hausdorff_dist,
    hausdorff_semidist,
    omega_limit_estimate,
    pullback_ensemble,
    sample_ball,
    verify_absorption,
)
from levysphere.errors import ParameterError
from levysphere.flow_map import make_path
from levysphere.spherical_spectral import h_norm, random_field
from levysphere.stable_noise import make_generator

L_MAX = 7


def _cloud(seed: int, n: int):
    rng = make_generator(seed)
    return [random_field(L_MAX, 2, rng) for _ in range(n)]


def _brute_semidist(a, b):
    return max(min(h_norm(x - y) for y in b) for x in a)


class TestHausdorff:

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 10 ** 6), st.integers(1, 4), st.integers(1, 4))
    def test_matches_brute_force(self, seed, n_a, n_b):
        a, b = _cloud(seed, n_a), _cloud(seed + 1, n_b)
        assert hausdorff_semidist(a, b) == pytest.approx(_brute_semidist(a, b), rel=1e-10)
        expected = max(_brute_semidist(a, b), _brute_semidist(b, a))
        assert hausdorff_dist(a, b) == pytest.approx(expected, rel=1e-10)

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 10 ** 6))
    def test_metric_axioms(self, seed):
        a, b, c = _cloud(seed, 3), _cloud(seed + 1, 2), _cloud(seed + 2, 4)
        assert hausdorff_dist(a, a) == pytest.approx(0.0, abs=1e-12)
        assert hausdorff_dist(a, b) == pytest.approx(hausdorff_dist(b, a))
        assert hausdorff_dist(a, c) <= hausdorff_dist(a, b) + hausdorff_dist(b, c) + 1e-12
        assert hausdorff_semidist(a, b) <= hausdorff_dist(a, b)

    def test_subset_semidistance(self):
        a, b = _cloud(1, 3), _cloud(2, 3)
        assert hausdorff_semidist(a, a + b) == pytest.approx(0.0, abs=1e-12)
        assert hausdorff_semidist(a + b, a) > 0.0

    def test_empty_cloud(self):
        with pytest.raises(ParameterError):
            hausdorff_dist([], _cloud(1, 2))


class TestBall:

    def test_radius(self):
        ball = sample_ball(2.5, 5, L_MAX, 2, seed=3)
        for u in ball:
            assert h_norm(u) == pytest.approx(2.5)
            assert u.reality_defect() < 1e-12

    def test_reproducible(self):
        a = sample_ball(1.0, 3, L_MAX, 2, seed=3)
        b = sample_ball(1.0, 3, L_MAX, 2, seed=3)
        for x, y in zip(a, b):
            np.testing.assert_array_equal(x.coeffs, y.coeffs)

    def test_invalid(self):
        with pytest.raises(ParameterError):
            sample_ball(-1.0, 3, L_MAX, 2, seed=0)


class TestPullback:

    def test_noise_free_contraction(self, quiet_cfg):
        path = make_path(quiet_cfg, 1, -3.0, 0.0)
        estimate = pullback_ensemble(path, quiet_cfg, [-1.0, -3.0, -2.0], rho=1.0, n_samples=3, seed=2)
        assert estimate.t0_schedule == [-1.0, -2.0, -3.0]
        assert len(estimate.hausdorff_trace) == 2
        for t0, cloud in estimate.clouds.items():
            assert len(cloud) == 3
            for u in cloud:
                assert h_norm(u) <= math.exp(4.0 * t0) * 1.01
        assert estimate.hausdorff_trace[1] < estimate.hausdorff_trace[0]
        assert fit_trace_rate(estimate) > 2.0

    def test_forced_steady_state(self, quiet_cfg):
        cfg = quiet_cfg.replace(forcing=((2, 0, 1.0, 0.0),))
        steady = cfg.forcing_field() * (1.0 / (cfg.nu * cfg.lambda1))
        path = make_path(cfg, 1, -3.0, 0.0)
        estimate = pullback_ensemble(path, cfg, [-3.0], rho=1.0, n_samples=3, seed=4)
        for u in estimate.clouds[-3.0]:
            assert h_norm(u - steady) <= 1e-3

    def test_explicit_ball(self, small_cfg):
        path = make_path(small_cfg, 2, -1.0, 0.0)
        ball = sample_ball(0.5, 2, small_cfg.l_max, small_cfg.l_min, seed=9)
        estimate = pullback_ensemble(path, small_cfg, [-1.0], rho=0.5, n_samples=99, initial_ball=ball)
        assert estimate.n_samples == 2
        assert estimate.hausdorff_trace == []
        assert len(cloud_rows(estimate)) == 2

    def test_same_path_same_result(self, small_cfg):
        path = make_path(small_cfg, 3, -2.0, 0.0)
        serial = pullback_ensemble(path, small_cfg, [-1.0, -2.0], rho=1.0, n_samples=2, seed=1)
        threaded = pullback_ensemble(path, small_cfg, [-1.0, -2.0], rho=1.0, n_samples=2, seed=1, max_workers=3)
        for t0 in serial.clouds:
            for x, y in zip(serial.clouds[t0], threaded.clouds[t0]):
                np.testing.assert_array_equal(x.coeffs, y.coeffs)

    def test_empty_schedule(self, small_cfg):
        path = make_path(small_cfg, 2, -1.0, 0.0)
        with pytest.raises(ParameterError):
            pullback_ensemble(path, small_cfg, [], rho=1.0, n_samples=2)


class TestAbsorbingRadii:

    def test_noise_free_values(self, quiet_cfg):
        path = make_path(quiet_cfg, 1, -4.0, 0.0)
        radii = absorbing_radii(path, quiet_cfg, [-1.0, -2.0, -4.0], delta=0.3, c_b=0.1, rho=2.0)
        assert radii.r1_sq == pytest.approx(2.0)
        assert radii.c1 == pytest.approx(2.0)
        assert radii.c2 == pytest.approx(2.0)
        assert radii.c3 == pytest.approx(2.0)
        assert radii.c5 == pytest.approx(math.sqrt(2.0))
        assert radii.r2_sq == pytest.approx(4.0 * math.exp(256.0 * 0.1 ** 4))
        assert radii.t_bar == -2.0
        assert radii.window_start == -4.0
        assert radii.ingredients['c2_display'] == pytest.approx(-2.0)

    def test_noisy_radii(self, small_cfg):
        path = make_path(small_cfg, 5, -4.0, 0.0)
        radii = absorbing_radii(path, small_cfg, [-1.0, -2.0, -4.0], delta=0.2, c_b=0.01)
        assert not radii.r2_overflow
        assert math.isfinite(radii.r2_sq)
        assert radii.r1_sq >= 2.0
        assert radii.c3 >= radii.c1
        assert radii.c5 >= math.sqrt(radii.c1)
        assert radii.r2_sq >= 2.0 * radii.ingredients['z0_v_sq']
        assert radii.t_bar is None

    def test_forced_noise_free_c2(self, quiet_cfg):
        cfg = quiet_cfg.replace(forcing=((2, 0, 1.0, 0.0),))
        path = make_path(cfg, 1, -2.0, 0.0)
        radii = absorbing_radii(path, cfg, [-1.0, -2.0], delta=0.3, c_b=0.1)
        f_sq = h_norm(cfg.forcing_field()) ** 2
        # gamma = -nu*lambda1/2 < 0 everywhere, p = c|f|^2
        assert radii.ingredients['int_gamma_plus'] == 0.0
        assert radii.ingredients['int_2p'] == pytest.approx(2.0 * cfg.c_value * f_sq, rel=1e-12)
        assert radii.c2 == pytest.approx(radii.r1_sq + 2.0 * cfg.c_value * f_sq, rel=1e-12)
        assert radii.c4 == pytest.approx(radii.c2)

    def test_c2_uses_positive_part(self, small_cfg):
        path = make_path(small_cfg, 5, -2.0, 0.0)
        radii = absorbing_radii(path, small_cfg, [-1.0, -2.0], delta=5.0, c_b=0.01)
        ing = radii.ingredients
        assert ing['int_gamma_plus'] >= max(ing['int_gamma'], 0.0)
        assert radii.c2 == pytest.approx(radii.r1_sq * (1.0 + ing['int_gamma_plus']) + ing['int_2p'], rel=1e-12)
        assert radii.c2 >= ing['c2_display']

    def test_overflow_flag(self, quiet_cfg):
        path = make_path(quiet_cfg, 1, -1.0, 0.0)
        radii = absorbing_radii(path, quiet_cfg, [-1.0], delta=0.3, c_b=10.0)
        assert radii.r2_overflow
        assert radii.r2_sq == math.inf
        assert radii.as_dict()['r2_overflow']

    def test_needs_early_start(self, small_cfg):
        path = make_path(small_cfg, 1, -1.0, 0.0)
        with pytest.raises(ParameterError):
            absorbing_radii(path, small_cfg, [-0.5], delta=0.3, c_b=0.1)


class TestAbsorption:

    def test_noise_free_members_absorbed(self, quiet_cfg):
        path = make_path(quiet_cfg, 1, -4.0, 0.0)
        schedule = [-1.0, -2.0, -4.0]
        estimate = pullback_ensemble(path, quiet_cfg, schedule, rho=2.0, n_samples=2, seed=5)
        radii = absorbing_radii(path, quiet_cfg, schedule, delta=0.3, c_b=0.1, rho=2.0)
        report = verify_absorption(estimate, radii)
        assert report['checked'] == 4
        assert report['ok']

        limit = omega_limit_estimate(estimate, tol=0.0, radii=radii)
        assert not limit.converged
        assert limit.t0 == -4.0
        assert len(limit.cloud) == 2
        assert limit.within_r2

    def test_limit_converges_with_loose_tol(self, quiet_cfg):
        path = make_path(quiet_cfg, 1, -2.0, 0.0)
        estimate = pullback_ensemble(path, quiet_cfg, [-1.0, -2.0], rho=1.0, n_samples=2, seed=5)
        limit = omega_limit_estimate(estimate, tol=1.0)
        assert limit.converged
        assert limit.within_r2 is None
