"""
Transition matrices of x^Delta = A(t) x on periodic time scales.

Continuous runs are integrated with classical RK4 under step-doubling error
control; every right-scattered point tau contributes the exact factor
I + mu(tau) A(tau). The Peano-Baker series and the h_k series for constant A
are provided as independent references, and solve_nonhomogeneous evaluates the
variation of constants formula.
"""

import bisect
import threading

import numpy as np
import scipy.linalg
from scipy.integrate import cumulative_simpson, simpson

from config import SolverOptions, default_solver_options
from errors import ConfigError, ConvergenceError, NonRegressiveError
from expr import Expression, evaluate, parse_expression
from timescale import Jump
from utils import log

__all__ = [
    "SolverOptions",
    "DynamicSystem",
    "LinearDynamicSystem",
    "CallableSystem",
    "ConstantSystem",
    "transition_matrix",
    "transition_path",
    "TransitionCursor",
    "monodromy_matrix",
    "peano_baker",
    "matrix_exp_constant",
    "solve_ivp",
    "forcing_function",
    "solve_nonhomogeneous",
]

_SINGULAR_REL_TOL = 1e-12
_STEP_FLOOR_DIVISOR = 2**20
_PERIODICITY_TOL = 1e-9


def _as_expression(entry):
    if isinstance(entry, Expression):
        return entry
    return parse_expression(entry)


class DynamicSystem:
    """
    Base class for x^Delta = A(t) x on a periodic time scale.

    Subclasses implement matrix_at(tp) for a TimePoint. The integrator asks
    for flow_matrix_at(tp) on continuous runs. The monodromy cache lives here
    and is keyed on (t0 reduced to period 0, options).
    """

    def __init__(self, ts, n, name=None):
        self.ts = ts
        self.n = n
        self.name = name or "system"
        self._monodromy_cache = {}
        self._cache_lock = threading.Lock()

    @property
    def period(self):
        return self.ts.period

    def matrix_at(self, tp):
        raise NotImplementedError

    def flow_matrix_at(self, tp):
        """A(tp) as seen from inside a continuous run."""
        return self.matrix_at(tp)

    def identity(self):
        return np.eye(self.n, dtype=complex)

    def jump_factor(self, tp, mu):
        """I + mu A(tp), checked for regressivity."""
        factor = self.identity() + mu * self.matrix_at(tp)
        scale = max(1.0, float(np.linalg.norm(factor, 2)))
        if abs(np.linalg.det(factor)) <= _SINGULAR_REL_TOL * scale**self.n:
            raise NonRegressiveError(
                f"I + mu*A is singular at t={self.ts.to_real(tp)!r} (mu={mu}) in {self.name}"
            )
        return factor

    def check_regressivity(self):
        """Raise NonRegressiveError unless I + mu A is invertible at each scattered point."""
        for tp in self.ts.right_scattered_points(0):
            self.jump_factor(tp, self.ts.graininess(tp))


class LinearDynamicSystem(DynamicSystem):
    """
    System whose matrix entries are expressions in t.

    A is evaluated at the period-0 representative of each time (the run-local
    coordinate), so periodic coefficients such as sin(2*pi*t) do not drift
    across periods.

    Args:
        ts: PeriodicTimeScale
        matrix: n x n nested sequence of Expression, text or numbers
        name: Label used in messages and reports
        check: Verify periodicity and regressivity on construction
        h_max: Grid spacing for the periodicity check
    """

    def __init__(self, ts, matrix, name=None, check=True, h_max=None):
        rows = [list(row) for row in matrix]
        n = len(rows)
        if n == 0 or any(len(row) != n for row in rows):
            shape = [len(r) for r in rows]
            raise ConfigError(f"System matrix must be square and non-empty, got {shape}")
        super().__init__(ts, n, name)
        self.entries = [[_as_expression(e) for e in row] for row in rows]
        if check:
            self.check_periodicity(h_max)
            self.check_regressivity()

    def evaluate_real(self, t):
        """A at a real time t (no reduction)."""
        return np.array([[evaluate(e, t) for e in row] for row in self.entries], dtype=complex)

    def matrix_at(self, tp):
        return self.evaluate_real(self.ts.reduced_real(tp))

    def check_periodicity(self, h_max=None, tol=_PERIODICITY_TOL):
        """Raise ConfigError if ||A(t) - A(t+p)|| exceeds tol on a one-period grid."""
        ts = self.ts
        h = h_max or default_solver_options().h_max
        worst = 0.0
        for tp in ts.grid(ts.anchor, ts.anchor + ts.period, max(h, ts.period / 64)):
            t = ts.to_real(tp)
            diff = np.linalg.norm(self.evaluate_real(t) - self.evaluate_real(t + ts.period), 2)
            worst = max(worst, diff)
        if worst > tol:
            raise ConfigError(
                f"A(t) is not {ts.period!r}-periodic (max ||A(t)-A(t+p)|| = {worst:.3e})"
            )
        return worst


class CallableSystem(DynamicSystem):
    """
    System given by a rule (TimePoint, mu) -> n x n matrix, for derived systems
    whose matrix depends on the graininess.

    matrix_at passes mu(tp). flow_matrix_at passes mu = 0 and serves the
    continuous runs, right-scattered end points included.
    """

    def __init__(self, ts, n, matrix_fn, name=None):
        super().__init__(ts, n, name)
        self._fn = matrix_fn

    def matrix_at(self, tp):
        return np.asarray(self._fn(tp, self.ts.graininess(tp)), dtype=complex)

    def flow_matrix_at(self, tp):
        return np.asarray(self._fn(tp, 0.0), dtype=complex)


class ConstantSystem(DynamicSystem):
    """x^Delta = A x with a constant matrix A."""

    def __init__(self, ts, A, name=None):
        A = np.asarray(A, dtype=complex)
        super().__init__(ts, A.shape[0], name or "constant")
        self.A = A

    def matrix_at(self, tp):
        return self.A


# =============================================================================
# INTEGRATION
# =============================================================================


def _rk4(A_at, off, h, X):
    k1 = A_at(off) @ X
    k2 = A_at(off + h / 2) @ (X + (h / 2) * k1)
    k3 = A_at(off + h / 2) @ (X + (h / 2) * k2)
    k4 = A_at(off + h) @ (X + h * k3)
    return X + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)


def _integrate_interval(sys, seg, X, opts):
    """Advance X across one continuous Interval with step-doubling RK4."""
    ts = sys.ts
    cache = {}

    def A_at(off):
        value = cache.get(off)
        if value is None:
            value = sys.flow_matrix_at(seg.point(off))
            if len(cache) > 16:
                cache.clear()
            cache[off] = value
        return value

    lo, hi = seg.start, seg.end
    floor = opts.h_max / _STEP_FLOOR_DIVISOR
    h = min(opts.h_max, hi - lo)
    off = lo
    while off < hi:
        h = min(h, hi - off)
        full = _rk4(A_at, off, h, X)
        half = _rk4(A_at, off, h / 2, X)
        two = _rk4(A_at, off + h / 2, h / 2, half)
        err = float(np.max(np.abs(two - full))) / max(1.0, float(np.max(np.abs(two))))
        if err > opts.rk_tol:
            if h / 2 < floor:
                raise ConvergenceError(
                    f"RK4 step fell below {floor:.3e} near t={ts.to_real(seg.point(off))!r} "
                    f"(error {err:.3e} > {opts.rk_tol:.1e})"
                )
            h /= 2
            continue
        X = two + (two - full) / 15
        off = hi if hi - (off + h) <= 1e-13 * max(1.0, abs(hi)) else off + h
        if err < opts.rk_tol / 32:
            h = min(2 * h, opts.h_max)
    return X


def _advance(sys, seg, X, opts):
    if isinstance(seg, Jump):
        return sys.jump_factor(seg.point, seg.mu) @ X
    return _integrate_interval(sys, seg, X, opts)


def transition_matrix(sys, t, t0, opts=None):
    """
    Transition matrix Phi_A(t, t0).

    Args:
        sys: DynamicSystem
        t: Target time (real or TimePoint)
        t0: Initial time (real or TimePoint)
        opts: SolverOptions (defaults from the environment)

    Returns:
        np.ndarray: Complex n x n matrix; the identity when t == t0. For
            t < t0 the forward matrix Phi(t0, t) is inverted.

    Raises:
        NonRegressiveError: I + mu A singular at a scattered point on the way
        ConvergenceError: RK4 could not meet rk_tol above the step floor
    """
    opts = opts or default_solver_options()
    ts = sys.ts
    tp = ts.locate(t)
    tp0 = ts.locate(t0)
    if tp == tp0:
        return sys.identity()
    if tp < tp0:
        return scipy.linalg.inv(transition_matrix(sys, tp0, tp, opts))
    X = sys.identity()
    for seg in ts.segments(tp0, tp):
        X = _advance(sys, seg, X, opts)
    return X


def transition_path(sys, times, t0, opts=None):
    """
    Phi(t, t0) for many times in one forward sweep.

    Args:
        times: Iterable of times (real or TimePoint), each >= t0

    Returns:
        list: Matrices in the order of `times`
    """
    opts = opts or default_solver_options()
    ts = sys.ts
    tp0 = ts.locate(t0)
    points = [ts.locate(t) for t in times]
    if any(p < tp0 for p in points):
        raise ValueError("transition_path() needs every time >= t0")
    values = {}
    X = sys.identity()
    current = tp0
    for target in sorted(set(points)):
        for seg in ts.segments(current, target):
            X = _advance(sys, seg, X, opts)
        values[target] = X
        current = target
    return [values[p] for p in points]


class TransitionCursor:
    """
    Phi(t, t0) with checkpoints, for many requests at nearby forward times.

    Each request integrates from the latest checkpoint at or before it and
    stores the result as a new checkpoint. Times before t0 are served by
    inverting Phi(t0, t).
    """

    def __init__(self, sys, t0, opts=None, max_checkpoints=4096):
        self.sys = sys
        self.opts = opts or default_solver_options()
        self.t0 = sys.ts.locate(t0)
        self.max_checkpoints = max_checkpoints
        self._keys = [self.t0]
        self._values = [sys.identity()]
        self._lock = threading.Lock()

    def at(self, t):
        ts = self.sys.ts
        tp = ts.locate(t)
        if tp < self.t0:
            return scipy.linalg.inv(transition_matrix(self.sys, self.t0, tp, self.opts))
        with self._lock:
            idx = bisect.bisect_right(self._keys, tp) - 1
            start, X = self._keys[idx], self._values[idx]
        if start == tp:
            return X
        for seg in ts.segments(start, tp):
            X = _advance(self.sys, seg, X, self.opts)
        with self._lock:
            if len(self._keys) >= self.max_checkpoints:
                del self._keys[1:], self._values[1:]
            pos = bisect.bisect_right(self._keys, tp)
            self._keys.insert(pos, tp)
            self._values.insert(pos, X)
        return X


def monodromy_matrix(sys, t0, opts=None):
    """Phi(t0 + p, t0), cached per (t0 mod p, opts) on the system."""
    opts = opts or default_solver_options()
    ts = sys.ts
    key = (ts.reduced(t0), opts)
    with sys._cache_lock:
        cached = sys._monodromy_cache.get(key)
    if cached is not None:
        return cached.copy()
    tp0 = ts.locate(t0)
    log(f"Integrating monodromy of {sys.name} from t0={ts.to_real(tp0)!r}", "debug")
    M = transition_matrix(sys, ts.shift(tp0, 1), tp0, opts)
    with sys._cache_lock:
        sys._monodromy_cache[key] = M
    return M.copy()


# =============================================================================
# REFERENCE SERIES
# =============================================================================


def _cumulative_simpson_complex(values, dx):
    # cumulative_simpson casts complex input to real
    real = cumulative_simpson(values.real, dx=dx, axis=0, initial=0)
    imag = cumulative_simpson(values.imag, dx=dx, axis=0, initial=0)
    return real + 1j * imag


def peano_baker(sys, t, t0, opts=None):
    """
    Peano-Baker partial sum I + sum_{k=1}^{pb_terms} of iterated Delta integrals.

    Each iterated integral is accumulated on the quadrature mesh: cumulative
    Simpson on continuous pieces, mu*A*term at each scattered point.
    """
    opts = opts or default_solver_options()
    ts = sys.ts
    tp, tp0 = ts.locate(t), ts.locate(t0)
    if tp < tp0:
        raise ValueError("peano_baker() needs t >= t0")
    eye = sys.identity()
    mesh = ts.mesh(tp0, tp, opts.h_max)
    A_values = []
    for piece in mesh:
        if piece.kind == "jump":
            A_values.append(sys.matrix_at(piece.points[0]))
        else:
            A_values.append(np.array([sys.flow_matrix_at(p) for p in piece.points]))
    term_values = [
        eye if piece.kind == "jump" else np.broadcast_to(eye, (len(piece.points), sys.n, sys.n))
        for piece in mesh
    ]
    total = eye.copy()
    for _ in range(opts.pb_terms):
        acc = np.zeros_like(eye)
        new_values = []
        for piece, A_vals, term in zip(mesh, A_values, term_values, strict=True):
            if piece.kind == "jump":
                new_values.append(acc)
                acc = acc + piece.step * (A_vals @ term)
            else:
                integrand = np.matmul(A_vals, term)
                cumulative = _cumulative_simpson_complex(integrand, piece.step)
                vals = acc + cumulative
                new_values.append(vals)
                acc = vals[-1]
        total = total + acc
        term_values = new_values
    return total


def matrix_exp_constant(A, ts, t, t0, opts=None, max_terms=400):
    """
    e_A(t, t0) = sum_k A^k h_k(t, t0) for a constant regressive matrix A.

    Raises:
        NonRegressiveError: I + mu A singular at a scattered point in [t0, t)
        ConvergenceError: Series tail still significant after max_terms
    """
    A = np.asarray(A, dtype=complex)
    if A.ndim == 0:
        A = A.reshape(1, 1)
    n = A.shape[0]
    tp, tp0 = ts.locate(t), ts.locate(t0)
    if tp < tp0:
        return scipy.linalg.inv(matrix_exp_constant(A, ts, tp0, tp, opts, max_terms))
    eye = np.eye(n, dtype=complex)
    for seg in ts.segments(tp0, tp):
        if isinstance(seg, Jump):
            factor = eye + seg.mu * A
            scale = max(1.0, np.linalg.norm(factor, 2)) ** n
            if abs(np.linalg.det(factor)) <= _SINGULAR_REL_TOL * scale:
                raise NonRegressiveError(f"I + mu*A is singular (mu={seg.mu})")
    terms = 50
    while True:
        h = ts.h_polynomials(terms, tp, tp0)
        total = np.zeros_like(eye)
        power = eye
        tail = 0.0
        for k in range(terms + 1):
            contribution = power * h[k]
            total = total + contribution
            if k >= terms - 2:
                tail = max(tail, float(np.linalg.norm(contribution, 2)))
            power = power @ A
        if tail <= 1e-15 * max(1.0, float(np.linalg.norm(total, 2))):
            return total
        if terms >= max_terms:
            raise ConvergenceError(f"h_k series did not converge in {max_terms} terms")
        terms = min(2 * terms, max_terms)


# =============================================================================
# SOLUTIONS
# =============================================================================


def solve_ivp(sys, x0, t, opts=None, t0=None):
    """x(t) = Phi(t, t0) x0 with t0 defaulting to the time scale anchor."""
    t0 = sys.ts.anchor if t0 is None else t0
    x0 = np.asarray(x0, dtype=complex)
    return transition_matrix(sys, t, t0, opts) @ x0


def forcing_function(forcing):
    """Turn a vector of expressions (or a callable) into a map real t -> complex vector."""
    if callable(forcing):
        return lambda t: np.asarray(forcing(t), dtype=complex)
    entries = [_as_expression(e) for e in forcing]
    return lambda t: np.array([evaluate(e, t) for e in entries], dtype=complex)


def solve_nonhomogeneous(sys, f, x0, t, opts=None, t0=None):
    """
    x(t) = Phi(t, t0) [x0 + integral_{t0}^{t} Phi(sigma(tau), t0)^{-1} f(tau) Delta tau].

    This is the variation of constants formula with Phi(t, sigma(tau)) factored
    through t0; the Delta integral uses Simpson on continuous pieces and
    mu(tau) * (...) at scattered points. f is evaluated at real times.
    """
    opts = opts or default_solver_options()
    ts = sys.ts
    t0 = ts.anchor if t0 is None else t0
    tp, tp0 = ts.locate(t), ts.locate(t0)
    if tp < tp0:
        raise ValueError("solve_nonhomogeneous() needs t >= t0")
    f = forcing_function(f)
    x0 = np.asarray(x0, dtype=complex)
    mesh = ts.mesh(tp0, tp, opts.h_max)
    nodes = [p for piece in mesh for p in piece.points]
    phis = dict(zip(nodes, transition_path(sys, nodes, tp0, opts), strict=True))
    integral = np.zeros(sys.n, dtype=complex)
    for piece in mesh:
        if piece.kind == "jump":
            tau = piece.points[0]
            phi_sigma = sys.jump_factor(tau, piece.step) @ phis[tau]
            integral += piece.step * scipy.linalg.solve(phi_sigma, f(ts.to_real(tau)))
        else:
            ys = np.array([scipy.linalg.solve(phis[p], f(ts.to_real(p))) for p in piece.points])
            integral += simpson(ys, dx=piece.step, axis=0)
    return transition_matrix(sys, tp, tp0, opts) @ (x0 + integral)
