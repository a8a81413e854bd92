import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from levysphere.errors import AlignmentError, ParameterError, RangeError
from levysphere.stable_noise import (
    StableParams,
    characteristic_function,
    coarsen_path,
    empirical_cf,
    fit_increment_exponent,
    make_two_sided_path,
    moment_diagnostics,
    path_csv_rows,
    path_to_bytes,
    read_path,
    sample_stable,
    shift_path,
    stable_sum_scale,
    write_path,
)

H = 1e-2


def _path(t_min=-2.0, t_max=2.0, seed=3, beta=1.5):
    params = [StableParams(beta=beta, scale=1.0), StableParams(beta=beta, scale=0.5)]
    return make_two_sided_path(params, H, t_min, t_max, seed)


class TestStableParams:

    @pytest.mark.parametrize("kwargs", [
        {'beta': 2.5},
        {'beta': 0.0},
        {'beta': 1.5, 'scale': -1.0},
        {'beta': 1.5, 'skew': 1.5},
        {'beta': 1.5, 'skew': 0.5, 'convention': 'half'},
        {'beta': 1.5, 'convention': 'other'},
    ])
    def test_invalid(self, kwargs):
        with pytest.raises(ParameterError):
            StableParams(**kwargs).validate()

    def test_half_convention_is_rescaled_standard(self):
        theta = np.array([0.25, 0.5, 1.0, 2.0, 4.0])
        half = StableParams(beta=1.5, scale=1.3, convention='half')
        standard = StableParams(beta=1.5, scale=half.standard_scale)
        np.testing.assert_allclose(characteristic_function(half, theta),
                                   characteristic_function(standard, theta), atol=1e-14)


class TestSampling:

    def test_same_seed_same_draws(self):
        p = StableParams(beta=1.2)
        np.testing.assert_array_equal(sample_stable(p, 100, 7), sample_stable(p, 100, 7))
        assert not np.array_equal(sample_stable(p, 100, 7), sample_stable(p, 100, 8))

    @pytest.mark.slow
    def test_gaussian_limit_variance(self):
        sigma = 0.7
        x = sample_stable(StableParams(beta=2.0, scale=sigma), 10 ** 6, 1)
        assert abs(np.var(x) / (2 * sigma ** 2) - 1.0) < 0.02

    @pytest.mark.slow
    def test_symmetric_characteristic_function(self):
        p = StableParams(beta=1.5, scale=1.0, convention='half')
        theta = [0.25, 0.5, 1.0, 2.0, 4.0]
        x = sample_stable(p, 10 ** 6, 2)
        err = np.abs(empirical_cf(x, theta) - np.exp(-np.abs(theta) ** 1.5 / 2.0))
        assert err.max() < 5e-3

    def test_zero_scale_is_shift(self):
        x = sample_stable(StableParams(beta=1.5, scale=0.0, shift=2.5), 10, 0)
        np.testing.assert_array_equal(x, np.full(10, 2.5))

    def test_n_must_be_positive(self):
        with pytest.raises(ParameterError):
            sample_stable(StableParams(beta=1.5), 0, 0)

    def test_moment_diagnostics_keys(self):
        x = sample_stable(StableParams(beta=1.5), 4000, 5)
        report = moment_diagnostics(x, 1.5)
        assert report['low']['p'] == pytest.approx(0.75)
        assert report['high']['p'] == pytest.approx(3.0)


class TestSumScale:

    def test_gaussian_sum(self):
        assert stable_sum_scale([1.0, 1.0], [1.0, 1.0], 2.0) == pytest.approx(np.sqrt(2.0))

    def test_cauchy_sum_is_additive(self):
        assert stable_sum_scale([2.0, -1.0], [1.0, 3.0], 1.0) == pytest.approx(5.0)

    def test_length_mismatch(self):
        with pytest.raises(ParameterError):
            stable_sum_scale([1.0], [1.0, 2.0], 1.5)


class TestPath:

    def test_origin_is_zero(self):
        path = _path()
        np.testing.assert_array_equal(path.value(0.0), np.zeros(2))

    def test_window_independent_increments(self):
        small = _path(-1.0, 1.0)
        large = _path(-5.0, 3.0)
        offset = small.k_min - large.k_min
        np.testing.assert_array_equal(small.increments,
                                      large.increments[:, offset:offset + small.n_steps])

    def test_off_grid_window(self):
        with pytest.raises(AlignmentError):
            make_two_sided_path([StableParams(beta=1.5)], H, -1.005, 1.0, 0)

    def test_window_must_contain_zero(self):
        with pytest.raises(ParameterError):
            make_two_sided_path([StableParams(beta=1.5)], H, 0.5, 1.0, 0)

    def test_value_outside_window(self):
        with pytest.raises(RangeError):
            _path().value(3.0)

    def test_grid_values_match_value(self):
        path = _path()
        times, values = path.grid_values()
        j = int(np.argmin(np.abs(times - 0.37)))
        np.testing.assert_allclose(values[:, j], path.value(0.37), atol=1e-12)

    def test_shift_definition(self):
        path = _path()
        shifted = shift_path(path, 0.5)
        for t in (-1.0, 0.25, 1.5):
            np.testing.assert_allclose(shifted.value(t), path.value(t + 0.5) - path.value(0.5), atol=1e-12)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(-100, 100), st.integers(-100, 100))
    def test_shift_group_law(self, a, b):
        path = _path()
        once = shift_path(path, (a + b) * H)
        twice = shift_path(shift_path(path, a * H), b * H)
        assert once.k_min == twice.k_min
        assert once.origin == twice.origin
        np.testing.assert_array_equal(once.increments, twice.increments)

    def test_shift_errors(self):
        path = _path()
        with pytest.raises(RangeError):
            shift_path(path, 5.0)
        with pytest.raises(AlignmentError):
            shift_path(path, 0.005)

    def test_coarsen_agrees_at_coarse_times(self):
        path = _path()
        coarse = coarsen_path(path, 4)
        assert coarse.step == pytest.approx(4 * H)
        for t in (-2.0, -0.4, 0.0, 1.2, 2.0):
            np.testing.assert_allclose(coarse.value(t), path.value(t), atol=1e-12)

    def test_coarsen_errors(self):
        path = _path()
        with pytest.raises(ParameterError):
            coarsen_path(path, 0)
        with pytest.raises(AlignmentError):
            coarsen_path(path, 7)

    @pytest.mark.slow
    def test_increment_exponent(self):
        path = make_two_sided_path([StableParams(beta=1.5)], 1e-3, 0.0, 131.072, 11)
        fit = fit_increment_exponent(path)
        assert fit['exponent'] == pytest.approx(1.0 / 1.5, rel=0.05)

    def test_container(self):
        path = _path(-0.5, 0.5)
        buf = io.BytesIO()
        write_path(path, buf)
        buf.seek(0)
        loaded = read_path(buf)
        assert loaded.k_min == path.k_min
        assert loaded.seed == path.seed
        np.testing.assert_array_equal(loaded.increments, path.increments)
        assert loaded.mode_params == path.mode_params

    def test_container_keeps_law_parameters(self):
        params = [StableParams(beta=1.5, scale=1.0, convention='half'),
                  StableParams(beta=1.2, scale=0.5, skew=0.4, shift=0.1)]
        path = make_two_sided_path(params, H, -0.2, 0.2, 9)
        loaded = read_path(io.BytesIO(path_to_bytes(path)))
        assert loaded.mode_params == tuple(params)
        assert loaded.mode_params[0].convention == 'half'
        assert loaded.mode_params[1].skew == 0.4
        np.testing.assert_array_equal(loaded.increments, path.increments)

    def test_bad_container(self):
        with pytest.raises(ParameterError):
            read_path(io.BytesIO(b'NOTAPATH' + bytes(64)))

    def test_csv_rows(self):
        rows = path_csv_rows(_path(-0.1, 0.1))
        assert len(rows) == 21
        assert set(rows[0]) == {'t', 'L_1', 'L_2'}
        assert rows[10]['L_1'] == 0.0
