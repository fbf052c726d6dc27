"""
Centralized configuration for the Floquet analyzer.

All environment variable access lives here. Values from a system config file
override these defaults; environment values override the built-in ones.

Recognized variables:
    FLOQUET_H_MAX        integrator step cap / grid spacing
    FLOQUET_RK_TOL       step-doubling local error target
    FLOQUET_PB_TERMS     Peano-Baker truncation
    FLOQUET_MAX_WORKERS  thread pool size for grid sweeps
    FLOQUET_VERBOSE      0 = warnings only, 1 = progress, 2 = debug
"""

import os
import sys
from dataclasses import dataclass, fields, replace

from errors import ConfigError

_DEFAULT_H_MAX = 1e-2
_DEFAULT_RK_TOL = 1e-10
_DEFAULT_PB_TERMS = 12
_DEFAULT_MAX_WORKERS = 4
_DEFAULT_VERBOSITY = 0


def _read_env(name, parse, default):
    raw = os.environ.get(name, "")
    if not raw:
        return default
    try:
        value = parse(raw)
    except ValueError:
        print(f"Warning: Invalid {name}='{raw}', using default {default}", file=sys.stderr)
        return default
    if value <= 0 and name != "FLOQUET_VERBOSE":
        print(
            f"Warning: {name} must be positive, got '{raw}', using default {default}",
            file=sys.stderr,
        )
        return default
    return value


def get_h_max():
    """Get the integrator step cap (FLOQUET_H_MAX, default 1e-2)."""
    return _read_env("FLOQUET_H_MAX", float, _DEFAULT_H_MAX)


def get_rk_tol():
    """Get the RK4 step-doubling tolerance (FLOQUET_RK_TOL, default 1e-10)."""
    return _read_env("FLOQUET_RK_TOL", float, _DEFAULT_RK_TOL)


def get_pb_terms():
    """Get the Peano-Baker truncation (FLOQUET_PB_TERMS, default 12)."""
    return _read_env("FLOQUET_PB_TERMS", int, _DEFAULT_PB_TERMS)


def get_max_workers():
    """Get the thread pool size for grid sweeps (FLOQUET_MAX_WORKERS, default 4)."""
    return _read_env("FLOQUET_MAX_WORKERS", int, _DEFAULT_MAX_WORKERS)


def get_verbosity():
    """Get the log verbosity level (FLOQUET_VERBOSE, default 0)."""
    return max(0, _read_env("FLOQUET_VERBOSE", int, _DEFAULT_VERBOSITY))


# =============================================================================
# SOLVER OPTIONS
# =============================================================================


@dataclass(frozen=True)
class SolverOptions:
    """
    Numeric knobs shared by the integrator and the numerical checks.

    Attributes:
        h_max: Step cap for RK4 and grid spacing on continuous runs
        rk_tol: Step-doubling local error target
        pb_terms: Number of iterated integrals kept in the Peano-Baker series
        cluster_rel_tol: Eigenvalues closer than this times ||M|| are merged
        unit_tol: Band around modulus 1 (and around the value 1) for multipliers
        semisimple_tol: Relative singular value cutoff in the rank test of M - lambda*I
        membership_tol: Absolute tolerance for time scale membership
    """

    h_max: float = _DEFAULT_H_MAX
    rk_tol: float = _DEFAULT_RK_TOL
    pb_terms: int = _DEFAULT_PB_TERMS
    cluster_rel_tol: float = 1e-7
    unit_tol: float = 1e-7
    semisimple_tol: float = 1e-8
    membership_tol: float = 1e-9

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if not value > 0:
                raise ConfigError(f"Solver option '{f.name}' must be positive, got {value!r}")
        if not isinstance(self.pb_terms, int):
            raise ConfigError(f"Solver option 'pb_terms' must be an integer, got {self.pb_terms!r}")

    def with_overrides(self, **overrides):
        """Return a copy with the given fields replaced; unknown names are a ConfigError."""
        known = {f.name for f in fields(self)}
        unknown = sorted(set(overrides) - known)
        if unknown:
            raise ConfigError(f"Unknown solver option(s): {', '.join(unknown)}")
        return replace(self, **overrides)


def default_solver_options():
    """Build SolverOptions from the environment, falling back to built-in defaults."""
    return SolverOptions(h_max=get_h_max(), rk_tol=get_rk_tol(), pb_terms=get_pb_terms())
