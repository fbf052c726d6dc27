"""Shared fixtures for the Floquet analyzer tests."""

import math
import os
import sys

import pytest

# Add src/ to the path so we can import modules directly
sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from config import SolverOptions  # noqa: E402
from timescale import integers, p_ab, real_line  # noqa: E402
from transition import LinearDynamicSystem  # noqa: E402

CONFIG_DIR = os.path.join(os.path.dirname(__file__), "..", "configs")


@pytest.fixture(autouse=True)
def clean_env(monkeypatch):
    """Ensure FLOQUET_* variables are NOT set unless a test explicitly sets them."""
    for var in [
        "FLOQUET_H_MAX",
        "FLOQUET_RK_TOL",
        "FLOQUET_PB_TERMS",
        "FLOQUET_MAX_WORKERS",
        "FLOQUET_VERBOSE",
    ]:
        monkeypatch.delenv(var, raising=False)


@pytest.fixture
def opts():
    return SolverOptions(h_max=1e-2, rk_tol=1e-10)


@pytest.fixture
def discrete_system():
    """A(t) on Z with period 2; monodromy diag(3/4, 3/4)."""
    return LinearDynamicSystem(
        integers(2),
        [["-1", "(2+(-1)^t)/2"], ["(2+(-1)^t)/2", "-1"]],
        name="discrete example",
    )


@pytest.fixture
def continuous_system():
    """A(t) = [[-1, 0], [sin t, 0]] on R with period 2 pi."""
    return LinearDynamicSystem(real_line(2 * math.pi), [["-1", "0"], ["sin(t)", "0"]], name="continuous example")


@pytest.fixture
def hybrid_system():
    """Upper triangular A(t) on P(1,1); both multipliers -2 e^{-3}."""
    return LinearDynamicSystem(
        p_ab(1.0, 1.0), [["-3+sin(2*pi*t)", "1"], ["0", "-3"]], name="hybrid example"
    )


@pytest.fixture
def config_path():
    """Path to one of the checked-in example configs."""

    def _path(name):
        return os.path.join(CONFIG_DIR, name)

    return _path
