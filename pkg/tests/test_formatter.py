import json

import numpy as np
import pytest

from levysphere.formatter import (
    MANIFEST_FILE,
    REPORT_FILE,
    format_csv,
    format_json,
    format_output,
    format_text,
    to_jsonable,
    write_report,
)


def _report():
    return {
        'command': 'cocycle',
        'summary': {'max_residual': 1.5e-13, 'n_pairs': 2, 'r2_sq': float('inf')},
        'tables': {'residuals': [{'pair': 0, 'residual': 1e-13}, {'pair': 1, 'residual': 1.5e-13}]},
        'status': {'code': 0, 'reason': 'ok'},
        'manifest': {'timestamp': '2024-01-01 00:00:00 UTC', 'seeds': {'base': 7}},
    }


class TestJson:

    def test_non_finite_values(self):
        data = json.loads(format_json({'a': float('inf'), 'b': -np.inf, 'c': float('nan'), 'd': 1.5}))
        assert data == {'a': 'inf', 'b': '-inf', 'c': 'nan', 'd': 1.5}

    def test_numpy_values(self):
        value = to_jsonable({'i': np.int64(3), 'f': np.float32(0.5), 'b': np.bool_(True), 'arr': np.arange(3),
                             'z': 1 + 2j})
        assert value == {'i': 3, 'f': 0.5, 'b': True, 'arr': [0, 1, 2], 'z': {'re': 1.0, 'im': 2.0}}

    def test_sorted_and_terminated(self):
        text = format_json({'b': 1, 'a': 2})
        assert text.index('"a"') < text.index('"b"')
        assert text.endswith('\n')


class TestCsv:

    def test_crlf_and_header(self):
        text = format_csv([{'t': 0.0, 'x': 1}, {'t': 0.5, 'x': 2}])
        assert text == 't,x\r\n0.0,1\r\n0.5,2\r\n'

    def test_columns_by_first_appearance(self):
        text = format_csv([{'a': 1}, {'b': 2, 'a': 3}])
        assert text.splitlines()[0] == 'a,b'
        assert text.splitlines()[1] == '1,'

    def test_float_precision(self):
        x = 0.1 + 0.2
        text = format_csv([{'x': x}])
        assert float(text.splitlines()[1]) == x

    def test_none_and_nested(self):
        text = format_csv([{'a': None, 'b': [1, 2]}])
        assert text.splitlines()[1] == ',"[1, 2]"'

    def test_empty(self):
        assert format_csv([]) == ''


class TestFormatOutput:

    def test_json_drops_manifest(self):
        data = json.loads(format_output(_report(), 'json'))
        assert 'manifest' not in data
        assert data['summary']['r2_sq'] == 'inf'

    def test_csv_renders_first_table(self):
        assert format_output(_report(), 'CSV').startswith('pair,residual\r\n')

    def test_text(self):
        text = format_text(_report())
        assert text.startswith('cocycle: ok')
        assert 'table residuals: 2 rows' in text

    def test_unsupported(self):
        with pytest.raises(ValueError, match="Unsupported format"):
            format_output(_report(), 'xml')


class TestWriteReport:

    def test_files(self, tmp_path):
        out = tmp_path / 'run'
        written = write_report(_report(), str(out))
        assert sorted(p.name for p in out.iterdir()) == sorted([REPORT_FILE, MANIFEST_FILE, 'residuals.csv'])
        assert len(written) == 3
        report = json.loads((out / REPORT_FILE).read_text())
        assert report['tables'] == ['residuals']
        assert 'timestamp' not in json.dumps(report)
        manifest = json.loads((out / MANIFEST_FILE).read_text())
        assert manifest['seeds']['base'] == 7
        assert (out / 'residuals.csv').read_bytes().count(b'\r\n') == 3

    def test_reruns_are_identical(self, tmp_path):
        write_report(_report(), str(tmp_path / 'a'))
        second = _report()
        second['manifest']['timestamp'] = '2025-06-01 12:00:00 UTC'
        write_report(second, str(tmp_path / 'b'))
        assert (tmp_path / 'a' / REPORT_FILE).read_bytes() == (tmp_path / 'b' / REPORT_FILE).read_bytes()
