"""
Scalar Hilger algebra and the scalar time scale exponential.

Every operation takes the graininess mu explicitly; mu = 0 reduces to the
ordinary complex operations. Principal branch throughout (Arg in (-pi, pi]).
"""

import cmath
import math

from scipy.integrate import simpson

from config import get_h_max
from errors import NonRegressiveError

_REGRESSIVE_TOL = 1e-14


def _check_regressive(z, mu, what="value"):
    if abs(1 + mu * z) <= _REGRESSIVE_TOL:
        raise NonRegressiveError(f"Non-regressive {what}: 1 + mu*z = 0 for z={z}, mu={mu}")


def circle_plus(a, b, mu):
    """a (+) b = a + b + mu*a*b."""
    return a + b + mu * a * b


def circle_minus(a, b, mu):
    """a (-) b = (a - b)/(1 + mu*b), the inverse of circle_plus in its first argument."""
    _check_regressive(b, mu, "subtrahend")
    return (a - b) / (1 + mu * b)


def circle_negate(a, mu):
    """(-)a = -a/(1 + mu*a)."""
    return circle_minus(0, a, mu)


def cylinder(z, mu):
    """Cylinder transformation Log(1 + mu*z)/mu, or z when mu = 0."""
    if mu == 0:
        return complex(z)
    _check_regressive(z, mu)
    return cmath.log(1 + mu * z) / mu


def hilger_imaginary(omega, h):
    """
    Hilger purely imaginary number (e^{i omega h} - 1)/h, or i*omega when h = 0.

    Raises:
        ValueError: omega outside the principal strip (-pi/h, pi/h]
    """
    if h == 0:
        return 1j * omega
    if not (-math.pi / h < omega <= math.pi / h):
        raise ValueError(f"omega={omega} is outside the principal strip (-pi/{h}, pi/{h}]")
    return (cmath.exp(1j * omega * h) - 1) / h


def principal_frequency(omega, h):
    """Reduce omega by multiples of 2*pi/h into (-pi/h, pi/h]; identity when h = 0."""
    if h == 0:
        return omega
    width = 2 * math.pi / h
    reduced = math.remainder(omega, width)
    if reduced <= -math.pi / h:
        reduced += width
    return reduced


def hilger_real_part(z, mu):
    """Re_mu z = (|1 + mu*z| - 1)/mu, or Re z when mu = 0."""
    if mu == 0:
        return complex(z).real
    return (abs(1 + mu * z) - 1) / mu


def in_hilger_circle(z, mu, closed=False):
    """Membership in the Hilger circle |1 + z*mu| < 1 (left half-plane when mu = 0)."""
    if mu == 0:
        re = complex(z).real
        return re <= 0 if closed else re < 0
    radius = abs(1 + z * mu)
    return radius <= 1 if closed else radius < 1


class GrainedFunction:
    """
    A scalar function of time whose value depends on the graininess at that time.

    Calling it with a real time looks up mu from the time scale. Integrators use
    at_graininess(t, 0) on continuous pieces so that the left-dense end of a
    run is evaluated with its continuous rule, not the jump rule.
    """

    def __init__(self, ts, rule):
        self.ts = ts
        self.rule = rule

    def __call__(self, t):
        return self.rule(t, self.ts.graininess(t))

    def at_graininess(self, t, mu):
        return self.rule(t, mu)


def hilger_imaginary_function(ts, omega):
    """The map t -> i(omega) with h = mu(t), omega reduced into the strip at each mu."""
    return GrainedFunction(ts, lambda t, mu: hilger_imaginary(principal_frequency(omega, mu), mu))


def _as_function(gamma):
    if callable(gamma):
        return gamma
    value = complex(gamma)
    return lambda t: value


def _continuous_value(gamma, t):
    if isinstance(gamma, GrainedFunction):
        return gamma.at_graininess(t, 0.0)
    return gamma(t)


def _jump_value(gamma, t, mu):
    if isinstance(gamma, GrainedFunction):
        return gamma.at_graininess(t, mu)
    return gamma(t)


def scalar_exp(ts, gamma, t, t0, h_max=None):
    """
    Scalar exponential e_gamma(t, t0) on a time scale.

    Continuous pieces contribute exp(integral of gamma) (composite Simpson);
    each right-scattered tau contributes exactly 1 + mu(tau)*gamma(tau).
    For t < t0 the reciprocal of e_gamma(t0, t) is returned.

    Args:
        ts: PeriodicTimeScale
        gamma: Callable of real time, or a constant
        t: End time
        t0: Start time
        h_max: Simpson step cap (defaults to the config value)

    Raises:
        NonRegressiveError: 1 + mu*gamma vanishes at some right-scattered point
    """
    if h_max is None:
        h_max = get_h_max()
    gamma = _as_function(gamma)
    tp = ts.locate(t)
    tp0 = ts.locate(t0)
    if tp < tp0:
        return 1 / scalar_exp(ts, gamma, tp0, tp, h_max)
    exponent = 0j
    factor = 1 + 0j
    for piece in ts.mesh(tp0, tp, h_max):
        if piece.kind == "jump":
            tau = ts.to_real(piece.points[0])
            g = _jump_value(gamma, tau, piece.step)
            _check_regressive(g, piece.step, f"exponent at t={tau}")
            factor *= 1 + piece.step * g
        else:
            ys = [_continuous_value(gamma, ts.to_real(p)) for p in piece.points]
            exponent += simpson(ys, dx=piece.step)
    return factor * cmath.exp(exponent)


def uniformly_regressive_check(gamma, ts, horizon=None, delta=1.0, h_max=None):
    """
    Check |1 + mu(t)*gamma(t)| >= 1/delta on a grid.

    Args:
        gamma: Callable of real time, or a constant
        ts: PeriodicTimeScale
        horizon: Length of the checked window starting at the anchor (default: one period)
        delta: Claimed uniform regressivity constant (> 0)
        h_max: Grid spacing on continuous runs
    """
    if not delta > 0:
        raise ValueError(f"delta must be positive, got {delta}")
    if h_max is None:
        h_max = get_h_max()
    gamma = _as_function(gamma)
    horizon = ts.period if horizon is None else horizon
    floor = 1.0 / delta
    for tp in ts.grid(ts.anchor, ts.anchor + horizon, h_max):
        t = ts.to_real(tp)
        if abs(1 + ts.graininess(tp) * gamma(t)) < floor * (1 - 1e-12):
            return False
    return True
