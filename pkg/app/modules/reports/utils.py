"""
Utilities for the reports module

CSV rendering with a header mapping, and JSON encoding with complex
numbers written as [re, im] pairs.
"""

import csv
import io
import json
from datetime import date, datetime
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
import typer
from pydantic import BaseModel


def complex_pair(value) -> List[float]:
    """[re, im] with signed zeros folded to +0.0."""
    z = complex(value)
    return [float(z.real) + 0.0, float(z.imag) + 0.0]


def complex_array(array) -> list:
    """Nested lists of [re, im] pairs with the shape of `array`."""
    values = np.asarray(array, dtype=np.complex128)
    if values.ndim == 0:
        return complex_pair(values)
    return [complex_array(item) for item in values]


def jsonable(value: Any) -> Any:
    """
    Convert a report payload to plain JSON types.

    Complex arrays and scalars become [re, im] pairs, real arrays become
    lists, enums their value, non-finite floats None. Dict order is kept.
    """
    if isinstance(value, BaseModel):
        return jsonable(value.model_dump())
    if isinstance(value, dict):
        return {str(key): jsonable(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(item) for item in value]
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, (date, datetime)):
        return value.isoformat()
    if isinstance(value, Path):
        return str(value)
    if isinstance(value, np.ndarray):
        if np.iscomplexobj(value):
            return complex_array(value)
        return jsonable(value.tolist())
    if isinstance(value, (complex, np.complexfloating)):
        return complex_pair(value)
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return float(value) if np.isfinite(value) else None
    return value


def dump_json(payload: Any) -> str:
    return json.dumps(jsonable(payload), indent=2) + "\n"


def format_csv_value(value: Any) -> str:
    """
    Format a value for CSV export.

    Args:
        value: Value to format

    Returns:
        String representation suitable for CSV; floats keep full precision
    """
    if value is None:
        return ""
    elif isinstance(value, Enum):
        return str(value.value)
    elif isinstance(value, bool):
        return "true" if value else "false"
    elif isinstance(value, (float, np.floating)):
        return repr(float(value))
    elif isinstance(value, (date, datetime)):
        return value.isoformat()
    else:
        return str(value)


def render_csv(data: List[Dict[str, Any]], headers: Optional[Dict[str, str]] = None) -> str:
    """
    Render a list of dictionaries as CSV text.

    Args:
        data: rows
        headers: optional mapping of field names to CSV headers (also fixes
            the column order)

    Returns:
        CSV text; only the header row when `data` is empty
    """
    fieldnames = list(headers.keys()) if headers else (list(data[0].keys()) if data else [])
    csv_headers = list(headers.values()) if headers else fieldnames

    output = io.StringIO()
    writer = csv.DictWriter(output, fieldnames=fieldnames, lineterminator="\n")
    writer.writerow(dict(zip(fieldnames, csv_headers)))
    for row in data:
        writer.writerow({key: format_csv_value(value) for key, value in row.items() if key in fieldnames})
    content = output.getvalue()
    output.close()
    return content


def write_text(path: Optional[Path], content: str) -> None:
    """Write to `path`, or to stdout when no path is given."""
    if path is None:
        typer.echo(content, nl=False)
        return
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(content, encoding="utf-8")
