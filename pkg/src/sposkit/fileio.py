"""CSV and flat-config file formats.

CSV payload is byte-reproducible: comma separator, LF line endings,
UTF-8, floats printed with 17 significant digits (which round-trips
float64 exactly), no timestamps.

Config files are flat ``key = value`` lines with ``#`` comments, one
key per line.
"""

from pathlib import Path

import numpy as np


def format_value(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(format_value(v) for v in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")
    return path


def read_csv(path):
    """Read a CSV written by ``write_csv``: (header, rows of strings)."""
    text = Path(path).read_text(encoding="utf-8")
    lines = [line for line in text.split("\n") if line]
    if not lines:
        raise ValueError(f"empty CSV file: {path}")
    header = lines[0].split(",")
    rows = [line.split(",") for line in lines[1:]]
    for row in rows:
        if len(row) != len(header):
            raise ValueError(f"ragged CSV row in {path}: {row}")
    return header, rows


def column(header, rows, name, converter=float):
    """Extract one column from ``read_csv`` output as a list."""
    idx = header.index(name)
    return [converter(row[idx]) for row in rows]


def write_flat_config(path, mapping) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"{key} = {value}" for key, value in mapping.items()]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")
    return path


def parse_flat_config(source) -> dict:
    """Parse ``key = value`` text (a path or a string) into a str -> str map."""
    if isinstance(source, (str, Path)) and "\n" not in str(source) and Path(source).exists():
        text = Path(source).read_text(encoding="utf-8")
    else:
        text = str(source)
    values = {}
    for lineno, raw in enumerate(text.split("\n"), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno} is not 'key = value': {raw!r}")
        key, _, value = line.partition("=")
        values[key.strip()] = value.strip()
    return values
