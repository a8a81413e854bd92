"""
Output formatters for experiment reports - JSON, CSV, text summary.
"""

import csv
import io
import json
import math
import os
from typing import Any, Dict, List

import numpy as np

REPORT_FILE = 'report.json'
MANIFEST_FILE = 'manifest.json'


def to_jsonable(value: Any) -> Any:
    """
    Convert numpy values and non-finite floats into plain JSON types.

    Non-finite floats become the strings 'inf', '-inf' and 'nan'.
    """
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (float, np.floating)):
        x = float(value)
        if math.isnan(x):
            return 'nan'
        if math.isinf(x):
            return 'inf' if x > 0 else '-inf'
        return x
    if isinstance(value, complex):
        return {'re': to_jsonable(value.real), 'im': to_jsonable(value.imag)}
    return value


def format_json(data: Dict[str, Any]) -> str:
    """
    Format a report as JSON.

    Args:
        data: Report dictionary

    Returns:
        JSON string, indented with sorted keys
    """
    return json.dumps(to_jsonable(data), indent=2, sort_keys=True, default=str) + '\n'


def format_csv(rows: List[Dict[str, Any]]) -> str:
    """
    Format table rows as RFC-4180 CSV.

    Columns follow first appearance across the rows; missing cells are empty.

    Args:
        rows: List of flat dictionaries

    Returns:
        CSV string (empty string for no rows)
    """
    if not rows:
        return ''
    fieldnames: List[str] = []
    for row in rows:
        for key in row:
            if key not in fieldnames:
                fieldnames.append(key)

    output = io.StringIO()
    writer = csv.DictWriter(output, fieldnames=fieldnames, extrasaction='ignore', lineterminator='\r\n')
    writer.writeheader()
    for row in rows:
        writer.writerow({k: _csv_cell(v) for k, v in row.items()})
    return output.getvalue()


def _csv_cell(value: Any) -> Any:
    if value is None:
        return ''
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (dict, list, tuple)):
        return json.dumps(to_jsonable(value), sort_keys=True)
    return value


def format_text(data: Dict[str, Any]) -> str:
    """
    One line per summary entry, for the terminal.

    Args:
        data: Report with 'command', 'summary' and 'status'

    Returns:
        Plain text summary
    """
    lines = [f"{data.get('command', 'report')}: {data.get('status', {}).get('reason', '')}"]
    for key, value in sorted(data.get('summary', {}).items()):
        if isinstance(value, (dict, list)):
            continue
        if isinstance(value, float):
            value = f"{value:.6g}"
        lines.append(f"  {key}: {value}")
    for name, rows in sorted(data.get('tables', {}).items()):
        lines.append(f"  table {name}: {len(rows)} rows")
    return '\n'.join(lines) + '\n'


def format_output(data: Dict[str, Any], format_type: str) -> str:
    """
    Format a report in the specified format.

    Args:
        data: Report dictionary
        format_type: Output format (json, csv, text); csv renders the first table

    Returns:
        Formatted string

    Raises:
        ValueError: If format type is not supported
    """
    format_type = format_type.lower()

    if format_type == 'json':
        return format_json({k: v for k, v in data.items() if k != 'manifest'})
    elif format_type == 'csv':
        tables = data.get('tables', {})
        return format_csv(tables[sorted(tables)[0]]) if tables else ''
    elif format_type == 'text':
        return format_text(data)
    else:
        raise ValueError(f"Unsupported format: {format_type}")


def export_file(content: str, file_path: str) -> None:
    """
    Export content to a file.

    Args:
        content: Content to write
        file_path: Destination file path
    """
    with open(file_path, 'w', encoding='utf-8', newline='') as f:
        f.write(content)


def write_report(data: Dict[str, Any], out_dir: str) -> List[str]:
    """
    Write report.json, one CSV per table and manifest.json into out_dir.

    Timestamps and durations belong in the manifest only, so the report and
    tables are identical across reruns with the same seed.

    Args:
        data: Report with 'summary', 'status', 'tables' and 'manifest'
        out_dir: Output directory (created if missing)

    Returns:
        Paths written
    """
    os.makedirs(out_dir, exist_ok=True)
    written = []
    body = {k: v for k, v in data.items() if k not in ('tables', 'manifest')}
    body['tables'] = sorted(data.get('tables', {}))
    path = os.path.join(out_dir, REPORT_FILE)
    export_file(format_json(body), path)
    written.append(path)
    for name, rows in sorted(data.get('tables', {}).items()):
        path = os.path.join(out_dir, f"{name}.csv")
        export_file(format_csv(rows), path)
        written.append(path)
    path = os.path.join(out_dir, MANIFEST_FILE)
    export_file(format_json(data.get('manifest', {})), path)
    written.append(path)
    return written
