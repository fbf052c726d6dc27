"""
JSON system descriptions.

Schema (unknown keys anywhere are rejected):

    {
      "name": "discrete example",                  optional
      "timescale": {
        "preset": "R" | "Z" | "hZ" | "P(a,b)",     or "runs": [{"kind", "length", "gap"}, ...]
        "period": 2, "h": 0.5, "anchor": 0          period/h/anchor as the preset needs
      },
      "dimension": 2,
      "matrix": [["-1", "(2+(-1)^t)/2"], ...],     n x n expression strings (or numbers)
      "forcing": ["1", "0"],                       optional
      "t0": 0,                                     optional, defaults to the anchor
      "options": {"h_max": 1e-3, ...}              optional SolverOptions overrides
    }

Numeric fields take JSON numbers or constant expressions such as "2*pi".
"""

import json
from dataclasses import dataclass, fields
from pathlib import Path

from config import SolverOptions, default_solver_options
from errors import ConfigError, DomainError, NotInTimeScaleError
from expr import evaluate_real, parse_expression
from timescale import CONTINUOUS, POINT, PeriodicTimeScale, Run, from_preset
from transition import LinearDynamicSystem

_TOP_KEYS = {"name", "timescale", "dimension", "matrix", "forcing", "t0", "options"}
_TIMESCALE_KEYS = {"preset", "runs", "period", "h", "anchor"}
_RUN_KEYS = {"kind", "length", "gap"}
_OPTION_KEYS = {f.name for f in fields(SolverOptions)}


@dataclass(frozen=True)
class SystemConfig:
    """
    A validated system description.

    Attributes:
        name: Label used in reports
        timescale: PeriodicTimeScale
        dimension: n
        matrix: n x n Expression grid
        forcing: n Expressions, or None
        t0: Initial time (real, an element of the time scale)
        options: SolverOptions (file values over environment over defaults)
    """

    name: str
    timescale: PeriodicTimeScale
    dimension: int
    matrix: tuple
    forcing: tuple | None
    t0: float
    options: SolverOptions

    def build_system(self, check=True):
        return LinearDynamicSystem(
            self.timescale, self.matrix, name=self.name, check=check, h_max=self.options.h_max
        )


def _reject_unknown(section, data, allowed):
    if not isinstance(data, dict):
        raise ConfigError(f"'{section}' must be an object, got {type(data).__name__}")
    unknown = sorted(set(data) - allowed)
    if unknown:
        raise ConfigError(f"Unknown key(s) in {section}: {', '.join(unknown)}")


def _number(value, field_name):
    """A JSON number or a constant expression string, as a float."""
    if isinstance(value, bool):
        raise ConfigError(f"'{field_name}' must be a number, got a boolean")
    if isinstance(value, int | float):
        return float(value)
    if isinstance(value, str):
        try:
            return evaluate_real(parse_expression(value))
        except DomainError as e:
            raise ConfigError(f"'{field_name}': {e}") from e
    raise ConfigError(f"'{field_name}' must be a number or a constant expression, got {value!r}")


def _expression(value, field_name):
    if isinstance(value, bool) or not isinstance(value, str | int | float):
        raise ConfigError(f"'{field_name}' must be an expression string or a number, got {value!r}")
    return parse_expression(value)


def _parse_runs(runs):
    if not isinstance(runs, list) or not runs:
        raise ConfigError("'timescale.runs' must be a non-empty list")
    parsed = []
    for i, run in enumerate(runs):
        _reject_unknown(f"timescale.runs[{i}]", run, _RUN_KEYS)
        kind = run.get("kind")
        if kind not in (CONTINUOUS, POINT):
            raise ConfigError(
                f"timescale.runs[{i}].kind must be '{CONTINUOUS}' or '{POINT}', got {kind!r}"
            )
        length = _number(run.get("length", 0), f"timescale.runs[{i}].length")
        gap = _number(run.get("gap", 0), f"timescale.runs[{i}].gap")
        parsed.append(Run(kind, length, gap))
    return parsed


def _parse_timescale(data, tol):
    _reject_unknown("timescale", data, _TIMESCALE_KEYS)
    has_preset, has_runs = "preset" in data, "runs" in data
    if has_preset == has_runs:
        raise ConfigError("'timescale' needs exactly one of 'preset' or 'runs'")
    anchor = _number(data.get("anchor", 0), "timescale.anchor")
    period = _number(data["period"], "timescale.period") if "period" in data else None
    if has_runs:
        if "h" in data:
            raise ConfigError("'timescale.h' only applies to the 'hZ' preset")
        return PeriodicTimeScale(_parse_runs(data["runs"]), anchor, period, tol)
    preset = data["preset"]
    if not isinstance(preset, str):
        raise ConfigError(f"'timescale.preset' must be a string, got {preset!r}")
    h = _number(data["h"], "timescale.h") if "h" in data else None
    return from_preset(preset, period, h, anchor, tol)


def _parse_options(data):
    _reject_unknown("options", data, _OPTION_KEYS)
    overrides = {}
    for key, value in data.items():
        if key == "pb_terms":
            if isinstance(value, bool) or not isinstance(value, int):
                raise ConfigError(f"'options.pb_terms' must be an integer, got {value!r}")
            overrides[key] = value
        else:
            overrides[key] = _number(value, f"options.{key}")
    return default_solver_options().with_overrides(**overrides)


def parse_config(data):
    """
    Validate a decoded JSON document.

    Returns:
        SystemConfig

    Raises:
        ConfigError: Unknown keys, wrong types or inconsistent dimensions
        ExpressionSyntaxError: A matrix or forcing entry does not parse
    """
    _reject_unknown("config", data, _TOP_KEYS)
    for key in ("timescale", "dimension", "matrix"):
        if key not in data:
            raise ConfigError(f"Missing required key '{key}'")
    options = _parse_options(data.get("options", {}))
    ts = _parse_timescale(data["timescale"], options.membership_tol)

    n = data["dimension"]
    if isinstance(n, bool) or not isinstance(n, int) or n < 1:
        raise ConfigError(f"'dimension' must be a positive integer, got {n!r}")
    matrix = data["matrix"]
    square = isinstance(matrix, list) and len(matrix) == n
    if not square or any(not isinstance(r, list) or len(r) != n for r in matrix):
        raise ConfigError(f"'matrix' must be a {n}x{n} array of expressions")
    entries = tuple(
        tuple(_expression(e, f"matrix[{i}][{j}]") for j, e in enumerate(row))
        for i, row in enumerate(matrix)
    )

    forcing = None
    if data.get("forcing") is not None:
        raw = data["forcing"]
        if not isinstance(raw, list) or len(raw) != n:
            raise ConfigError(f"'forcing' must be a list of {n} expressions")
        forcing = tuple(_expression(e, f"forcing[{i}]") for i, e in enumerate(raw))

    t0 = _number(data["t0"], "t0") if "t0" in data else ts.anchor
    try:
        ts.locate(t0)
    except NotInTimeScaleError as e:
        raise ConfigError(f"'t0' = {t0!r} is not in the time scale") from e

    name = data.get("name", "system")
    if not isinstance(name, str):
        raise ConfigError(f"'name' must be a string, got {name!r}")
    return SystemConfig(name, ts, n, entries, forcing, t0, options)


def load_config(path):
    """
    Read and validate a JSON system description.

    Raises:
        FileNotFoundError: path does not exist
        ConfigError: Invalid JSON or schema violation
    """
    path = Path(path)
    with open(path) as f:
        try:
            data = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}: invalid JSON ({e})") from e
    return parse_config(data)
