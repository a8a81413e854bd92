import math

import numpy as np
import pytest

from levysphere.config import ModelConfig
from levysphere.errors import AlignmentError, MomentError, NoSolutionError, ParameterError
from levysphere.flow_map import make_path
from levysphere.ou_process import (
    advance,
    alpha_search_grid,
    burn_steps,
    check_growth,
    closed_form_abs_moment,
    decay_products,
    ergodic_gamma_average,
    estimate_abs_moment,
    gamma_p_q,
    gamma_p_q_series,
    mode_eigenvalues,
    noise_field,
    ou_generator,
    ou_ibp_reconstruct,
    ou_ledger_rows,
    ou_stationary_burn_in,
    ou_step,
    ou_trajectory,
    select_alpha,
    select_alpha_for_config,
    stationary_params,
)
from levysphere.spherical_spectral import h_norm
from levysphere.stable_noise import StableParams, coarsen_path, make_two_sided_path, shift_path


class TestGenerator:

    def test_zonal_is_real(self, small_cfg):
        a = ou_generator(small_cfg)
        assert not np.iscomplexobj(a)
        np.testing.assert_allclose(a, [4.0, 10.0])
        np.testing.assert_allclose(ou_generator(small_cfg, alpha=1.5), [5.5, 11.5])

    def test_non_zonal_is_complex(self, small_cfg):
        cfg = small_cfg.replace(noise_modes=((3, 2),), sigma=(1.0,))
        a = ou_generator(cfg)
        assert np.iscomplexobj(a)
        assert a[0].real == pytest.approx(10.0)
        assert a[0].imag == pytest.approx(-2.0 * 2.0 * 2 / 12.0)

    def test_non_positive_generator(self, small_cfg):
        with pytest.raises(ParameterError):
            ou_generator(small_cfg, alpha=-5.0)

    def test_burn_steps(self):
        assert burn_steps(np.array([4.0, 10.0]), 1e-2) == math.ceil(12 * math.log(10) / 4.0 / 1e-2)

    def test_mode_eigenvalues(self, small_cfg):
        np.testing.assert_array_equal(mode_eigenvalues(small_cfg), [4.0, 10.0])


class TestPathwise:

    def test_step_alignment(self, small_cfg):
        path = make_path(small_cfg, 1, -1.0, 0.0)
        state = ou_stationary_burn_in(path, small_cfg, -1.0)
        with pytest.raises(AlignmentError):
            ou_step(state, 2 * path.step, path.increment_at(state.k))

    def test_filter_matches_steps(self, small_cfg):
        path = make_path(small_cfg, 2, -1.0, 1.0)
        state = ou_stationary_burn_in(path, small_cfg, -1.0)
        k_end = path.grid_index(1.0)
        _, values = ou_trajectory(path, state.generator, state.k, k_end, state.values)
        stepped = advance(state, path, k_end)
        np.testing.assert_allclose(values[:, -1], stepped.values, rtol=1e-12, atol=1e-12)

    def test_restart_invariance(self, small_cfg):
        path = make_path(small_cfg, 3, -20.0, 0.0)
        z_default = ou_stationary_burn_in(path, small_cfg, 0.0).values
        z_long = ou_stationary_burn_in(path, small_cfg, 0.0, t_start=-20.0).values
        np.testing.assert_allclose(z_default, z_long, atol=1e-9 * max(1.0, np.max(np.abs(z_long))))

    def test_shift_equivariance(self, small_cfg):
        path = make_path(small_cfg, 4, -3.0, 3.0)
        shifted = shift_path(path, 1.5)
        for t in (-1.0, 0.0, 1.0):
            np.testing.assert_allclose(ou_stationary_burn_in(shifted, small_cfg, t).values,
                                       ou_stationary_burn_in(path, small_cfg, t + 1.5).values, atol=1e-12)

    def test_ibp_first_order_agreement(self):
        cfg = ModelConfig(l_max=7, n_lat=12, n_lon=22, noise_modes=((2, 0),), sigma=(1.0,), dt=1e-3)
        fine = make_two_sided_path(cfg.mode_params(), 1e-3, -12.0, 0.0, 5)
        a = ou_generator(cfg)
        times = np.round(np.linspace(-4.0, 0.0, 41), 6)
        errors = []
        for factor in (1, 2):
            path = coarsen_path(fine, factor)
            diffs = [abs(ou_stationary_burn_in(path, cfg, t).values[0] - ou_ibp_reconstruct(path, a, t)[0])
                     for t in times]
            errors.append(np.mean(diffs))
        assert 1.7 <= errors[1] / errors[0] <= 2.3


class TestMoments:

    def test_closed_form_gaussian(self):
        s = 0.8
        assert closed_form_abs_moment(StableParams(beta=2.0, scale=s)) == pytest.approx(2 * s / math.sqrt(math.pi))

    def test_closed_form_needs_beta_above_one(self):
        with pytest.raises(MomentError):
            closed_form_abs_moment(StableParams(beta=0.9))

    def test_stationary_scale_small_step(self):
        p = stationary_params(StableParams(beta=1.5, scale=2.0), 4.0, 1e-6)
        assert p.scale == pytest.approx(2.0 * (1.0 / (1.5 * 4.0)) ** (1 / 1.5), rel=1e-4)

    def test_estimate_matches_closed_form(self, small_cfg):
        cfg = small_cfg.replace(beta=2.0)
        report = estimate_abs_moment(cfg, n_paths=20000, seed=1)
        assert report['method'] == 'exact'
        assert abs(report['estimate'] - report['closed_form']) <= 4 * report['stderr']

    def test_pathwise_matches_exact(self, small_cfg):
        cfg = small_cfg.replace(beta=2.0)
        exact = estimate_abs_moment(cfg, n_paths=4000, seed=2, method='exact')
        pathwise = estimate_abs_moment(cfg, n_paths=512, seed=3, method='pathwise')
        gap = abs(exact['estimate'] - pathwise['estimate'])
        assert gap <= 4 * math.hypot(exact['stderr'], pathwise['stderr'])

    def test_stderr_rate(self, small_cfg):
        cfg = small_cfg.replace(beta=2.0)
        small = estimate_abs_moment(cfg, n_paths=2000, seed=4)
        large = estimate_abs_moment(cfg, n_paths=8000, seed=5)
        assert 1.6 <= small['stderr'] / large['stderr'] <= 2.5

    def test_infinite_mean(self, small_cfg):
        with pytest.raises(MomentError):
            estimate_abs_moment(small_cfg.replace(beta=1.0))

    def test_zero_noise(self, quiet_cfg):
        report = estimate_abs_moment(quiet_cfg)
        assert report['estimate'] == 0.0
        assert report['stderr'] == 0.0

    def test_unknown_method(self, small_cfg):
        with pytest.raises(ParameterError):
            estimate_abs_moment(small_cfg, method='magic')


class TestAlphaSelection:

    def test_search_grid(self):
        grid = alpha_search_grid(0.0, 100.0, 8)
        assert grid[0] == 0.0
        assert grid[-1] == pytest.approx(100.0)
        assert np.all(np.diff(grid) > 0)

    def test_smallest_admissible(self):
        result = select_alpha(1.0, 1, 4.0, lambda a: (1.0 / (1.0 + a), 0.0), bounds=(0.0, 100.0), n_grid=32)
        assert result['alpha'] >= 3.0
        assert result['certificate'] <= result['bound']
        earlier = [e['alpha'] for e in result['evaluations'][:-1]]
        assert all(a < 3.0 for a in earlier)

    def test_stderr_counts_against(self):
        result = select_alpha(1.0, 1, 4.0, lambda a: (1.0 / (1.0 + a), 0.1), bounds=(0.0, 100.0), n_grid=32)
        assert 4.0 * (1.0 / (1.0 + result['alpha']) + 0.2) <= 1.0

    def test_no_solution(self):
        with pytest.raises(NoSolutionError) as info:
            select_alpha(1.0, 2, 4.0, lambda a: (10.0, 0.0), bounds=(0.0, 10.0), n_grid=5)
        assert len(info.value.diagnostics['evaluations']) == 5

    def test_bad_inputs(self):
        with pytest.raises(ParameterError):
            select_alpha(0.0, 1, 4.0, lambda a: (0.0, 0.0))

    def test_config_selection_certificate(self, small_cfg):
        cfg = small_cfg.replace(beta=2.0)
        result = select_alpha_for_config(cfg, 0.5, n_paths=512, seed=6, n_grid=16)
        assert result['certificate'] <= cfg.nu * cfg.lambda1 / 4.0
        recheck = estimate_abs_moment(cfg, result['alpha'], 0, 4096, seed=7)
        assert 4.0 * 0.5 * cfg.m * recheck['estimate'] <= cfg.nu * cfg.lambda1 / 4.0 * 1.2


class TestLedgerCoefficients:

    def test_zero_state(self, small_cfg):
        gamma, p, q = gamma_p_q(np.zeros(2), small_cfg, delta=0.3)
        assert gamma == pytest.approx(-small_cfg.nu * small_cfg.lambda1 / 2)
        assert p == 0.0
        assert q == 0.0

    def test_forcing_terms(self, small_cfg):
        cfg = small_cfg.replace(forcing=((2, 0, 3.0, 0.0),), alpha=2.0)
        f_sq = h_norm(cfg.forcing_field()) ** 2
        z = np.array([0.5, -1.0])
        gamma, p, q = gamma_p_q(z, cfg, delta=0.3)
        assert gamma == pytest.approx(-2.0 + 4 * 0.3 * 1.5)
        assert p == pytest.approx(cfg.c_value * (f_sq + 4.0 * 1.25) + 2 * 0.3 * 1.25 * 1.5)
        assert q == pytest.approx(2.0 * (f_sq + 4.0 * 1.25))

    def test_series_matches_pointwise(self, small_cfg):
        values = np.array([[0.1, -0.4, 2.0], [0.0, 0.3, -1.0]])
        series = gamma_p_q_series(values, small_cfg, 0.2)
        for j in range(3):
            point = gamma_p_q(values[:, j], small_cfg, 0.2)
            for k in range(3):
                assert series[k][j] == pytest.approx(point[k])

    def test_noise_field_norm(self, small_cfg):
        u = noise_field(np.array([0.6, -0.8]), small_cfg)
        assert h_norm(u) == pytest.approx(1.0)


class TestDiagnostics:

    def test_ergodic_average_without_noise(self, quiet_cfg):
        path = make_path(quiet_cfg, 1, -5.0, 0.0)
        report = ergodic_gamma_average(path, quiet_cfg, 0.3, -5.0, 0.0)
        assert report['mean_noise_term'] == 0.0
        assert report['below_quarter']
        assert report['integral_gamma'] == pytest.approx(-2.0 * 5.0)

    def test_decay_products_without_noise(self, quiet_cfg):
        path = make_path(quiet_cfg, 1, -8.0, 0.0)
        report = decay_products(path, quiet_cfg, 0.3, [-2.0, -4.0, -8.0])
        for row in report['rows']:
            assert row['integral_gamma'] == pytest.approx(-2.0 * (-1.0 - row['t0']))
        assert report['trend_slope'] == pytest.approx(2.0)

    def test_decay_products_order(self, small_cfg):
        path = make_path(small_cfg, 1, -4.0, 0.0)
        with pytest.raises(ParameterError):
            decay_products(path, small_cfg, 0.3, [-0.5])

    def test_growth_without_noise(self, quiet_cfg):
        path = make_path(quiet_cfg, 1, -5.0, 5.0)
        report = check_growth(path, quiet_cfg, 5.0, n_samples=50)
        assert report['sup'] == 0.0
        assert report['bounded']
        assert report['kappa_p'] == pytest.approx(1.5)
        assert report['hypothesis_ok']

    def test_growth_report(self, small_cfg):
        path = make_path(small_cfg, 2, -10.0, 10.0)
        report = check_growth(path, small_cfg, 10.0, n_samples=100)
        assert report['sup'] >= report['sup_first_half'] > 0.0
        assert report['moment_exponent'] == pytest.approx(0.75 * small_cfg.beta)

    def test_ledger_rows(self, small_cfg):
        path = make_path(small_cfg, 3, -1.0, 0.0)
        state = ou_stationary_burn_in(path, small_cfg, -1.0)
        times, values = ou_trajectory(path, state.generator, state.k, path.grid_index(0.0), state.values)
        rows = ou_ledger_rows(times, values, small_cfg, 0.3)
        assert len(rows) == times.size
        assert set(rows[0]) == {'t', 'z_1', 'z_2', 'gamma', 'p', 'q'}
