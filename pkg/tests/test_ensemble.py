import time

import pytest

from levysphere.ensemble import run_ensemble
from levysphere.errors import BlowUpError


def _square(x, delay=0.0):
    time.sleep(delay)
    return x * x


def _explode(t):
    raise BlowUpError(t)


def _broken():
    raise KeyError('missing')


class TestRunEnsemble:

    def test_results_in_key_order(self):
        # later keys finish first
        tasks = [(i, _square, (i, 0.01 * (5 - i))) for i in range(5)]
        result = run_ensemble(tasks, max_workers=4)
        assert [m.key for m in result.members] == list(range(5))
        assert result.values() == [0, 1, 4, 9, 16]

    def test_thread_count_does_not_change_output(self):
        tasks = [((a, i), _square, (10 * a + i,)) for a in range(3) for i in range(3)]
        serial = run_ensemble(tasks, max_workers=1)
        threaded = run_ensemble(tasks, max_workers=3)
        assert serial.values() == threaded.values()

    def test_blow_up_recorded(self):
        tasks = [(0, _square, (2,)), (1, _explode, (1.5,)), (2, _explode, (0.25,))]
        result = run_ensemble(tasks, max_workers=2)
        assert [m.ok for m in result.members] == [True, False, False]
        assert [m.blow_up_time for m in result.blow_ups] == [1.5, 0.25]
        assert result.blow_up_fraction == pytest.approx(2 / 3)
        assert result.metadata['blow_up_count'] == 2

    def test_other_errors_propagate(self):
        with pytest.raises(KeyError):
            run_ensemble([(0, _broken, ())])

    def test_duplicate_keys(self):
        with pytest.raises(ValueError):
            run_ensemble([(0, _square, (1,)), (0, _square, (2,))])

    def test_progress_callback(self):
        calls = []
        run_ensemble([(i, _square, (i,)) for i in range(3)], progress_callback=lambda *a: calls.append(a),
                     label='probe')
        assert calls[-1] == ('probe', '3/3 members')
        assert len(calls) == 3

    def test_empty(self):
        result = run_ensemble([])
        assert result.members == []
        assert result.blow_up_fraction == 0.0
