"""
Report serialization: deterministic JSON and CSV matrix/trajectory files.

JSON output sorts keys, prints floats with 17 significant digits, writes
complex numbers as [re, im] and non-finite values as null, so two runs on the
same input produce byte-identical text.
"""

import csv
import dataclasses
import json
import math
from pathlib import Path

import numpy as np

from errors import ConfigError

SCHEMA = "floquet-report/1"
ALLOWED_EXTENSIONS = (".csv", ".json")


def format_float(x):
    x = float(x)
    if not math.isfinite(x):
        return "null"
    text = format(x, ".17g")
    if text == "-0":
        text = "0"
    return text


def to_plain(obj):
    """Convert numpy arrays, complex numbers and dataclasses to JSON-ready structures."""
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: to_plain(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, dict):
        return {str(k): to_plain(v) for k, v in obj.items()}
    if isinstance(obj, np.ndarray):
        return [to_plain(v) for v in obj.tolist()]
    if isinstance(obj, list | tuple):
        return [to_plain(v) for v in obj]
    if isinstance(obj, bool | np.bool_):
        return bool(obj)
    if isinstance(obj, int | np.integer):
        return int(obj)
    if isinstance(obj, complex | np.complexfloating):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, float | np.floating):
        return float(obj)
    return obj


def _emit(obj, indent, level):
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if obj is None:
        return "null"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return format_float(obj)
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, list):
        if not obj:
            return "[]"
        if all(not isinstance(v, list | dict) for v in obj):
            return "[" + ", ".join(_emit(v, indent, level + 1) for v in obj) + "]"
        items = [pad + _emit(v, indent, level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(k)}: {_emit(obj[k], indent, level + 1)}" for k in sorted(obj)]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    raise TypeError(f"Cannot serialize {type(obj).__name__}")


def dumps_report(report, indent=2):
    """Serialize a report deterministically; adds the schema field when missing."""
    plain = to_plain(report)
    if isinstance(plain, dict):
        plain.setdefault("schema", SCHEMA)
    return _emit(plain, indent, 0) + "\n"


def matrix_rows(M):
    """Rows of [re, im] pairs for a complex matrix."""
    return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(M, dtype=complex)]


# =============================================================================
# FILES
# =============================================================================


def safe_output_path(out_dir, filename):
    """
    Resolve filename inside out_dir, refusing traversal and unexpected extensions.

    Raises:
        ConfigError: The resolved path escapes out_dir or has a disallowed extension
    """
    base = Path(out_dir)
    candidate = Path(filename)
    if candidate.suffix.lower() not in ALLOWED_EXTENSIONS:
        raise ConfigError(f"Refusing to write {filename!r}: extension not in {ALLOWED_EXTENSIONS}")
    try:
        resolved = (base / candidate).resolve()
        resolved.relative_to(base.resolve())
    except (ValueError, OSError) as e:
        raise ConfigError(f"Refusing to write {filename!r} outside {out_dir}") from e
    return resolved


def _matrix_header(n, prefix):
    cols = ["t"]
    for i in range(1, n + 1):
        for j in range(1, n + 1):
            cols += [f"{prefix}{i}{j}_re", f"{prefix}{i}{j}_im"]
    return cols


def write_matrix_csv(path, samples):
    """
    Write (t, matrix) samples as t,m11_re,m11_im,m12_re,... rows.

    Args:
        path: Destination file
        samples: Iterable of (real time, n x n complex matrix)
    """
    samples = list(samples)
    n = np.asarray(samples[0][1]).shape[0] if samples else 0
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(_matrix_header(n, "m"))
        for t, M in samples:
            row = [format_float(t)]
            for z in np.asarray(M, dtype=complex).ravel():
                row += [format_float(z.real), format_float(z.imag)]
            writer.writerow(row)


def write_trajectory_csv(path, samples):
    """Write (t, state vector) samples as t,x1_re,x1_im,... rows."""
    samples = list(samples)
    n = np.asarray(samples[0][1]).shape[0] if samples else 0
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["t"] + [f"x{i}_{part}" for i in range(1, n + 1) for part in ("re", "im")])
        for t, x in samples:
            row = [format_float(t)]
            for z in np.asarray(x, dtype=complex):
                row += [format_float(z.real), format_float(z.imag)]
            writer.writerow(row)


def read_matrix_csv(path):
    """Read a file written by write_matrix_csv back into (t, matrix) pairs."""
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader)
        n = math.isqrt((len(header) - 1) // 2)
        samples = []
        for row in reader:
            values = [float(v) for v in row[1:]]
            entries = [complex(values[k], values[k + 1]) for k in range(0, len(values), 2)]
            samples.append((float(row[0]), np.array(entries, dtype=complex).reshape(n, n)))
    return samples
