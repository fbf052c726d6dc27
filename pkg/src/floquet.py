"""
Floquet analysis of periodic systems x^Delta = A(t) x on periodic time scales.

Given the monodromy M = Phi_A(t0 + p, t0), everything else is built from the
spectral data of M:

    R(t)        = (M^{mu(t)/p} - I)/mu(t), or Log(M)/p where mu(t) = 0
    e_R(t, s)   = M^{(t - s)/p}
    L(t)        = Phi_A(t, t0) e_R(t, t0)^{-1}             (p-periodic, L(t0) = I)
    Phi_A(t, s) = L(t) e_R(t, s) L(s)^{-1}

Period fractions (t - s)/p come from the time scale structure, never from
floating point subtraction of real times.
"""

import cmath
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from config import default_solver_options
from errors import FloquetError, NonRegressiveError, ResonanceError, SingularMatrixError
from hilger import (
    GrainedFunction,
    circle_minus,
    circle_plus,
    hilger_imaginary,
    hilger_imaginary_function,
    principal_frequency,
    scalar_exp,
)
from spectral import (
    eigen_decompose,
    eigenvectors,
    jordan_block_sizes,
    jordan_decomposition,
    principal_log,
    real_power,
)
from transition import (
    CallableSystem,
    TransitionCursor,
    monodromy_matrix,
    solve_nonhomogeneous,
    transition_matrix,
    transition_path,
)
from utils import log, map_parallel

EXPONENTIALLY_STABLE = "exponentially_stable"
STABLE = "stable"
UNSTABLE_POLYNOMIAL = "unstable_polynomial"
UNSTABLE_EXPONENTIAL = "unstable_exponential"

_MARGINAL_FACTOR = 10.0
_ENVELOPE_GROWTH_LIMIT = 1.5


@dataclass(frozen=True, eq=False)
class FloquetData:
    """
    Monodromy of a system at t0 with its spectral data.

    Attributes:
        system: DynamicSystem
        t0: TimePoint of the initial time
        monodromy: M = Phi_A(t0 + p, t0)
        spectrum: SpectralData of M
        opts: SolverOptions used for every integration
        cursor: Checkpointed Phi_A(., t0) evaluator shared by L and mode solutions
    """

    system: object
    t0: object
    monodromy: np.ndarray
    spectrum: object
    opts: object
    cursor: object = field(repr=False)

    @property
    def ts(self):
        return self.system.ts

    @property
    def period(self):
        return self.system.ts.period

    @property
    def n(self):
        return self.system.n

    @property
    def t0_real(self):
        return self.ts.to_real(self.t0)

    @property
    def multipliers(self):
        """Floquet multipliers repeated by algebraic multiplicity."""
        return self.spectrum.repeated_eigenvalues()


def monodromy(sys, t0=None, opts=None):
    """
    Integrate one period and decompose the monodromy matrix.

    Args:
        sys: DynamicSystem
        t0: Initial time (defaults to the time scale anchor)
        opts: SolverOptions

    Returns:
        FloquetData

    Raises:
        SingularMatrixError: M is numerically singular (the system is not regressive)
    """
    opts = opts or default_solver_options()
    ts = sys.ts
    tp0 = ts.locate(ts.anchor if t0 is None else t0)
    M = monodromy_matrix(sys, tp0, opts)
    norm = float(np.linalg.norm(M, 2))
    try:
        spec = eigen_decompose(M, cluster_tol=opts.cluster_rel_tol * max(norm, 1e-300))
    except SingularMatrixError as e:
        raise SingularMatrixError(
            f"Monodromy of {sys.name} is singular; the system is not regressive ({e})"
        ) from e
    multipliers = [complex(z) for z in spec.eigenvalues]
    log(f"✅ Monodromy of {sys.name}: multipliers {multipliers}", "info")
    return FloquetData(sys, tp0, M, spec, opts, TransitionCursor(sys, tp0, opts))


# =============================================================================
# DECOMPOSITION
# =============================================================================


def _exponent(lam, mu, p):
    if mu == 0:
        return cmath.log(lam) / p
    return (cmath.exp((mu / p) * cmath.log(lam)) - 1) / mu


def r_matrix(fd, t):
    """R(t); depends on t only through mu(t)."""
    return _r_at_graininess(fd, fd.ts.graininess(t))


def _r_at_graininess(fd, mu):
    M, spec = fd.monodromy, fd.spectrum
    if mu == 0:
        return principal_log(M, spec) / fd.period
    return (real_power(M, mu / fd.period, spec) - np.eye(fd.n)) / mu


def exp_R(fd, t, s):
    """e_R(t, s) = M^{(t - s)/p}; the identity when t == s."""
    frac = fd.ts.period_fraction(t, s)
    if frac == 0:
        return np.eye(fd.n, dtype=complex)
    return real_power(fd.monodromy, frac, fd.spectrum)


def lyapunov_factor(fd, t, opts=None):
    """
    L(t) = Phi_A(t, t0) e_R(t, t0)^{-1}; exactly I at t0.

    Phi_A comes from the checkpointed cursor of fd, or is integrated afresh
    when opts differ from the options fd was built with.
    """
    frac = fd.ts.period_fraction(t, fd.t0)
    if frac == 0:
        return np.eye(fd.n, dtype=complex)
    if opts is None or opts == fd.opts:
        phi = fd.cursor.at(t)
    else:
        phi = transition_matrix(fd.system, t, fd.t0, opts)
    return phi @ real_power(fd.monodromy, -frac, fd.spectrum)


def verify_decomposition(fd, grid):
    """
    Compare Phi_A(t, tau) with L(t) e_R(t, tau) L(tau)^{-1} over all grid pairs.

    Phi_A is integrated directly for every pair (pairs run on the thread pool).

    Returns:
        dict: max_residual, worst_pair (real times), pairs
    """
    ts = fd.ts
    points = [ts.locate(t) for t in grid]
    factors = {p: lyapunov_factor(fd, p) for p in points}
    inverses = {p: scipy.linalg.inv(L) for p, L in factors.items()}
    pairs = [(t, tau) for t in points for tau in points]

    def residual(pair):
        t, tau = pair
        direct = transition_matrix(fd.system, t, tau, fd.opts)
        floquet = factors[t] @ exp_R(fd, t, tau) @ inverses[tau]
        return float(np.linalg.norm(direct - floquet, 2))

    residuals = map_parallel(residual, pairs)
    if not residuals:
        return {"max_residual": 0.0, "worst_pair": None, "pairs": 0}
    worst = int(np.argmax(residuals))
    t, tau = pairs[worst]
    return {
        "max_residual": residuals[worst],
        "worst_pair": [ts.to_real(t), ts.to_real(tau)],
        "pairs": len(pairs),
    }


def periodicity_residual(fd, grid):
    """max ||L(t + p) - L(t)|| over the grid."""
    ts = fd.ts
    worst = 0.0
    for t in grid:
        tp = ts.locate(t)
        diff = lyapunov_factor(fd, ts.shift(tp, 1)) - lyapunov_factor(fd, tp)
        worst = max(worst, float(np.linalg.norm(diff, 2)))
    return worst


# =============================================================================
# EXPONENTS
# =============================================================================


def floquet_exponents(fd, t):
    """Floquet exponents gamma_i(t), repeated by multiplicity in multiplier order."""
    mu = fd.ts.graininess(t)
    return [_exponent(lam, mu, fd.period) for lam in fd.multipliers]


def exponent_function(fd, i):
    """gamma_i as a time-scale function of t (for the i-th distinct multiplier)."""
    lam = fd.spectrum.eigenvalues[i]
    p = fd.period
    return GrainedFunction(fd.ts, lambda t, mu: _exponent(lam, mu, p))


def distinct_graininess(ts):
    """The graininess values that occur in one period, ascending."""
    values = {r.trailing_gap for r in ts.runs}
    if ts.has_continuous_part:
        values.add(0.0)
    return sorted(values)


def exponent_table(fd):
    """Exponents of every distinct multiplier at each graininess value of the time scale."""
    p = fd.period
    table = []
    for mu in distinct_graininess(fd.ts):
        exponents = [_exponent(lam, mu, p) for lam in fd.spectrum.eigenvalues]
        table.append({"mu": mu, "exponents": exponents})
    return table


def regressivity_bound(fd):
    """min{1, |lambda_1|, ..., |lambda_k|}."""
    return min([1.0] + [abs(lam) for lam in fd.spectrum.eigenvalues])


def exponent_shift_index(fd, i, gamma, t, tol=1e-8):
    """
    Integer k with gamma = gamma_i(t) (+) i(2 pi k / p) at time t.

    Where mu(t) > 0 the index is only defined modulo p/mu(t); the
    representative with frequency in the principal strip is returned.

    Raises:
        ValueError: gamma is not a Floquet exponent of the i-th multiplier
    """
    ts = fd.ts
    mu = ts.graininess(t)
    base = _exponent(fd.spectrum.eigenvalues[i], mu, fd.period)
    diff = circle_minus(gamma, base, mu)
    if mu == 0:
        omega = diff.imag
    else:
        omega = cmath.phase(1 + mu * diff) / mu
    k = round(omega * fd.period / (2 * math.pi))
    expected = hilger_imaginary(principal_frequency(2 * math.pi * k / fd.period, mu), mu)
    if abs(diff - expected) > tol * max(1.0, abs(gamma)):
        lam = fd.spectrum.eigenvalues[i]
        raise ValueError(f"{gamma} is not a Floquet exponent of multiplier {lam}")
    return k


def shifted_exponent_residual(fd, k):
    """max_i |e_{gamma_i (+) i(2 pi k/p)}(t0 + p, t0) - lambda_i| over distinct multipliers."""
    ts = fd.ts
    omega = 2 * math.pi * k / fd.period
    end = ts.shift(fd.t0, 1)
    worst = 0.0
    for lam in fd.spectrum.eigenvalues:

        def rule(t, mu, lam=lam):
            shift = hilger_imaginary(principal_frequency(omega, mu), mu)
            return circle_plus(_exponent(lam, mu, fd.period), shift, mu)

        value = scalar_exp(ts, GrainedFunction(ts, rule), end, fd.t0, fd.opts.h_max)
        worst = max(worst, abs(value - lam))
    return worst


def spectral_mapping_residual(fd, t):
    """Distance between eig(e_R(t, t0)) and {e_{gamma_i}(t, t0)} as multisets."""
    E = exp_R(fd, t, fd.t0)
    cluster_tol = fd.opts.cluster_rel_tol * max(1.0, np.linalg.norm(E, 2))
    observed = eigen_decompose(E, cluster_tol=cluster_tol)
    observed = list(observed.repeated_eigenvalues())
    expected = []
    for i, m in enumerate(fd.spectrum.multiplicities):
        value = scalar_exp(fd.ts, exponent_function(fd, i), t, fd.t0, fd.opts.h_max)
        expected.extend([value] * m)
    worst = 0.0
    for value in expected:
        j = int(np.argmin([abs(value - z) for z in observed]))
        worst = max(worst, abs(value - observed.pop(j)))
    return worst


def eigenvector_residual(fd, t):
    """max ||R(t) v - gamma(t) v|| / ||v|| over eigenvectors v of M."""
    R = r_matrix(fd, t)
    mu = fd.ts.graininess(t)
    worst = 0.0
    for i, lam in enumerate(fd.spectrum.eigenvalues):
        gamma = _exponent(lam, mu, fd.period)
        basis = eigenvectors(fd.spectrum, i)
        for c in range(basis.shape[1]):
            v = basis[:, c]
            worst = max(worst, float(np.linalg.norm(R @ v - gamma * v) / np.linalg.norm(v)))
    return worst


# =============================================================================
# SHIFTED DECOMPOSITIONS
# =============================================================================


class ShiftedDecomposition:
    """
    The alternative pair R~ = R (-) i(omega) I, L~(t) = L(t) e_{i(omega)}(t, t0)
    with omega = 2 pi k / p. L~(t) e_R~(t, s) L~(s)^{-1} reproduces Phi_A.
    """

    def __init__(self, fd, k):
        self.fd = fd
        self.k = int(k)
        self.omega = 2 * math.pi * self.k / fd.period
        self._shift = hilger_imaginary_function(fd.ts, self.omega)

    def shift_value(self, t):
        return self._shift(t)

    def r_matrix(self, t):
        fd = self.fd
        mu = fd.ts.graininess(t)
        z = self._shift.at_graininess(fd.ts.to_real(t), mu)
        R = r_matrix(fd, t)
        if mu == 0:
            return R - z * np.eye(fd.n)
        return (R - z * np.eye(fd.n)) / (1 + mu * z)

    def _scalar(self, t, s):
        if self.k == 0:
            return 1.0 + 0j
        return scalar_exp(self.fd.ts, self._shift, t, s, self.fd.opts.h_max)

    def lyapunov_factor(self, t):
        return lyapunov_factor(self.fd, t) * self._scalar(t, self.fd.t0)

    def exp_R(self, t, s):
        return exp_R(self.fd, t, s) / self._scalar(t, s)


def shifted_decomposition(fd, k):
    """Alternative Floquet decomposition indexed by the integer k (k = 0 gives R and L)."""
    return ShiftedDecomposition(fd, k)


# =============================================================================
# STABILITY
# =============================================================================


@dataclass(frozen=True)
class MultiplierEvidence:
    value: complex
    modulus: float
    algebraic_multiplicity: int
    geometric_multiplicity: int
    unit_modulus: bool
    marginal: bool

    @property
    def semisimple(self):
        return self.geometric_multiplicity == self.algebraic_multiplicity


@dataclass(frozen=True)
class StabilityVerdict:
    """
    Stability class decided from multiplier moduli and semisimplicity.

    Attributes:
        classification: One of exponentially_stable, stable,
            unstable_polynomial, unstable_exponential
        evidence: MultiplierEvidence per distinct multiplier
    """

    classification: str
    evidence: tuple

    @property
    def marginal(self):
        return any(e.marginal for e in self.evidence)


def geometric_multiplicity(M, lam, rel_tol):
    """n - rank(M - lam I), singular values below rel_tol * ||M|| counted as zero."""
    M = np.asarray(M, dtype=complex)
    s = scipy.linalg.svdvals(M - lam * np.eye(M.shape[0]))
    return int(np.sum(s <= rel_tol * np.linalg.norm(M, 2)))


def classify_stability(fd, semisimple_tol=None, unit_tol=None):
    """Classify the system from its multipliers."""
    semisimple_tol = fd.opts.semisimple_tol if semisimple_tol is None else semisimple_tol
    unit_tol = fd.opts.unit_tol if unit_tol is None else unit_tol
    spec = fd.spectrum
    evidence = []
    for lam, m in zip(spec.eigenvalues, spec.multiplicities, strict=True):
        modulus = abs(lam)
        gap = abs(modulus - 1)
        geometric = geometric_multiplicity(fd.monodromy, lam, semisimple_tol)
        evidence.append(
            MultiplierEvidence(
                value=lam,
                modulus=modulus,
                algebraic_multiplicity=m,
                geometric_multiplicity=min(m, geometric),
                unit_modulus=gap <= unit_tol,
                marginal=unit_tol / _MARGINAL_FACTOR < gap <= unit_tol * _MARGINAL_FACTOR,
            )
        )
    if any(e.modulus > 1 + unit_tol for e in evidence):
        classification = UNSTABLE_EXPONENTIAL
    elif all(e.modulus < 1 - unit_tol for e in evidence):
        classification = EXPONENTIALLY_STABLE
    elif all(e.semisimple for e in evidence if e.unit_modulus):
        classification = STABLE
    else:
        classification = UNSTABLE_POLYNOMIAL
    return StabilityVerdict(classification, tuple(evidence))


# =============================================================================
# PERIODIC AND MODE SOLUTIONS
# =============================================================================


def _real_phase(v):
    """Scale v to unit norm with its largest entry real and positive."""
    j = int(np.argmax(np.abs(v)))
    v = v * (abs(v[j]) / v[j])
    return v / np.linalg.norm(v)


@dataclass(frozen=True)
class PeriodicState:
    initial_state: np.ndarray
    multiplier: complex
    closure: float


def periodic_solution_homogeneous(fd, tol=None):
    """
    Initial state of a p-periodic solution, or None when 1 is not a multiplier.

    Returns:
        PeriodicState | None: x0 = L(t0) z0 with z0 a unit eigenvector of M for
            the multiplier nearest 1; closure = ||M x0 - x0||
    """
    tol = fd.opts.unit_tol if tol is None else tol
    distances = [abs(lam - 1) for lam in fd.spectrum.eigenvalues]
    i = int(np.argmin(distances))
    if distances[i] > tol:
        return None
    z0 = _real_phase(eigenvectors(fd.spectrum, i)[:, 0])
    x0 = lyapunov_factor(fd, fd.t0) @ z0
    closure = float(np.linalg.norm(fd.monodromy @ x0 - x0))
    return PeriodicState(x0, fd.spectrum.eigenvalues[i], closure)


def periodic_solution_nonhomogeneous(sys, f, t0=None, opts=None):
    """
    Initial state x0 of the p-periodic solution of x^Delta = A(t) x + f(t).

    Solves [I - M] x0 = integral_{t0}^{t0+p} Phi(t0 + p, sigma(tau)) f(tau) Delta tau.

    Raises:
        ResonanceError: I - M is singular; carries a homogeneous periodic state
    """
    opts = opts or default_solver_options()
    ts = sys.ts
    tp0 = ts.locate(ts.anchor if t0 is None else t0)
    M = monodromy_matrix(sys, tp0, opts)
    K = np.eye(sys.n) - M
    s = scipy.linalg.svdvals(K)
    if s[-1] <= opts.unit_tol * max(1.0, float(np.linalg.norm(M, 2))):
        state = None
        try:
            state = periodic_solution_homogeneous(monodromy(sys, tp0, opts))
        except FloquetError:
            pass
        raise ResonanceError(
            "I - M is singular: the unforced system has a p-periodic solution, so the forced "
            "periodic state is not unique",
            homogeneous_state=None if state is None else state.initial_state,
        )
    b = solve_nonhomogeneous(sys, f, np.zeros(sys.n, dtype=complex), ts.shift(tp0, 1), opts, tp0)
    return scipy.linalg.solve(K, b)


class ModeSolution:
    """x(t) = e_{gamma_i}(t, t0) L(t) v for an eigenvector v of M; x(t + p) = lambda_i x(t)."""

    def __init__(self, fd, i, v):
        self.fd = fd
        self.index = i
        self.multiplier = fd.spectrum.eigenvalues[i]
        self.vector = v
        self.exponent = exponent_function(fd, i)

    def q(self, t):
        """The p-periodic part L(t) v."""
        return lyapunov_factor(self.fd, t) @ self.vector

    def at(self, t):
        fd = self.fd
        return scalar_exp(fd.ts, self.exponent, t, fd.t0, fd.opts.h_max) * self.q(t)

    def shift_residual(self, t):
        """||x(t + p) - lambda x(t)|| relative to max(1, ||lambda x(t)||)."""
        ts = self.fd.ts
        tp = ts.locate(t)
        expected = self.multiplier * self.at(tp)
        diff = self.at(ts.shift(tp, 1)) - expected
        return float(np.linalg.norm(diff) / max(1.0, np.linalg.norm(expected)))


def mode_solution(fd, i):
    """Mode solution for the i-th distinct multiplier."""
    if not 0 <= i < fd.spectrum.k:
        raise IndexError(f"Multiplier index {i} out of range 0..{fd.spectrum.k - 1}")
    v = _real_phase(eigenvectors(fd.spectrum, i)[:, 0])
    return ModeSolution(fd, i, v)


def independent_mode_rank(fd, i, j, rel_tol=1e-8):
    """Rank of [x_i(t0) x_j(t0)] for the mode solutions of two distinct multipliers."""
    X = np.column_stack([mode_solution(fd, i).at(fd.t0), mode_solution(fd, j).at(fd.t0)])
    s = scipy.linalg.svdvals(X)
    return int(np.sum(s > rel_tol * s[0]))


# =============================================================================
# R-SYSTEM AND DYNAMIC EIGENPAIRS
# =============================================================================


def r_system(fd):
    """z^Delta = R(t) z as a DynamicSystem; its transition matrix is e_R."""
    cache = {}

    def matrix_fn(tp, mu):
        R = cache.get(mu)
        if R is None:
            R = cache[mu] = _r_at_graininess(fd, mu)
        return R

    return CallableSystem(fd.ts, fd.n, matrix_fn, name=f"R-system of {fd.system.name}")


@dataclass(frozen=True)
class ModalBasis:
    exponents: tuple
    basis: np.ndarray
    block_sizes: tuple
    eigenvalues: tuple


def modal_basis(fd):
    """Per-column Floquet exponents, Jordan basis of M and Jordan block sizes."""
    spec = jordan_decomposition(fd.spectrum)
    J = spec.jordan_form
    exponents = []
    eigenvalues = []
    for c in range(fd.n):
        i = int(np.argmin([abs(J[c, c] - lam) for lam in spec.eigenvalues]))
        exponents.append(exponent_function(fd, i))
        eigenvalues.append(spec.eigenvalues[i])
    sizes = tuple(jordan_block_sizes(spec))
    return ModalBasis(tuple(exponents), spec.jordan_basis, sizes, tuple(eigenvalues))


def _as_scalar_function(xi):
    if callable(xi):
        return xi
    value = complex(xi)
    return lambda t: value


class DynamicEigenpairs:
    """
    Dynamic eigenpairs {xi_i, w_i} of x^Delta = A(t) x.

    W(t) = Phi(t, t0) W0 diag(1/e_{xi_i}(t, t0)); mode vectors
    m_i(t) = e_{xi_i}(t, t0) w_i(t) are the columns of Phi(t, t0) W0 and the
    reciprocal basis is given by the rows of W0^{-1}.
    """

    def __init__(self, sys, xi, t0, opts, basis=None):
        self.sys = sys
        self.ts = sys.ts
        self.opts = opts
        self.t0 = self.ts.locate(t0)
        self.xi = [_as_scalar_function(x) for x in xi]
        if len(self.xi) != sys.n:
            raise ValueError(f"Need {sys.n} dynamic eigenvalues, got {len(self.xi)}")
        if basis is None:
            self.W0 = np.eye(sys.n, dtype=complex)
        else:
            self.W0 = np.asarray(basis, dtype=complex)
        self.reciprocal = scipy.linalg.inv(self.W0)
        self.cursor = TransitionCursor(sys, self.t0, opts)
        self._check_regressive()

    def _check_regressive(self):
        ts = self.ts
        for tp in ts.right_scattered_points(self.t0.period_index):
            t, mu = ts.to_real(tp), ts.graininess(tp)
            for i, x in enumerate(self.xi):
                if abs(1 + mu * x(t)) <= 1e-14:
                    raise NonRegressiveError(f"Dynamic eigenvalue {i} is not regressive at t={t}")

    def scalar_exponentials(self, t):
        return np.array([scalar_exp(self.ts, x, t, self.t0, self.opts.h_max) for x in self.xi])

    def mode_vectors(self, t):
        """Matrix whose columns are m_i(t)."""
        return self.cursor.at(t) @ self.W0

    def W(self, t):
        return self.mode_vectors(t) / self.scalar_exponentials(t)[None, :]

    def residual(self, t):
        """max_i ||w_i^Delta(t) - A(t) w_i(t) + xi_i(t) w_i(sigma(t))||."""
        ts = self.ts
        tp = ts.locate(t)
        W = self.W(tp)
        W_delta = ts.delta_derivative(self.W, tp, self.opts.h_max / 10)
        W_sigma = self.W(ts.sigma_point(tp))
        xi = np.array([x(ts.to_real(tp)) for x in self.xi])
        R = W_delta - self.sys.matrix_at(tp) @ W + W_sigma * xi[None, :]
        return float(np.max(np.linalg.norm(R, axis=0)))

    def reconstruction(self, t):
        """||Phi(t, t0) - sum_i m_i(t) v_i^T(t0)|| with Phi integrated afresh."""
        phi = transition_matrix(self.sys, t, self.t0, self.opts)
        return float(np.linalg.norm(phi - self.mode_vectors(t) @ self.reciprocal, 2))


def dynamic_eigenpairs(sys, xi, t0=None, opts=None, basis=None):
    """Build the dynamic eigenpairs for n scalar dynamic eigenvalues xi (W(t0) = basis or I)."""
    opts = opts or default_solver_options()
    return DynamicEigenpairs(sys, xi, sys.ts.anchor if t0 is None else t0, opts, basis)


def mode_stability_report(sys, xi, horizon, opts=None, basis=None, block_sizes=None, t0=None):
    """
    Finite-horizon growth report of the mode vectors m_i over [t0, t0 + horizon].

    Each mode gets its sup norm, a least squares exponential rate of ||m_i||
    and a decay flag. The growth of w_i = m_i / e_{xi_i} is compared with the
    generalized polynomial envelope E_i(t) = sum_{k < b_i} h_k(t, t0), b_i the
    Jordan block size of the mode: c_i is the largest ratio ||w_i|| / E_i over
    the first half of the horizon, and envelope_ratio is the largest ratio
    over the second half divided by c_i. The mode counts as polynomially
    bounded while envelope_ratio stays under 1.5. Without block_sizes every
    mode gets the largest possible block, n.
    """
    opts = opts or default_solver_options()
    pairs = dynamic_eigenpairs(sys, xi, t0, opts, basis)
    ts = sys.ts
    t0_real = ts.to_real(pairs.t0)
    grid = ts.grid(t0_real, t0_real + horizon, max(opts.h_max, horizon / 400))
    grid = [p for p in grid if p >= pairs.t0]
    phis = transition_path(sys, grid, pairs.t0, opts)
    times = np.array([ts.to_real(p) - t0_real for p in grid])
    norms = np.array([np.linalg.norm(phi @ pairs.W0, axis=0) for phi in phis])

    w_norms = []
    e = np.ones(sys.n, dtype=complex)
    previous = pairs.t0
    for tp, phi in zip(grid, phis, strict=True):
        e = e * np.array([scalar_exp(ts, x, tp, previous, opts.h_max) for x in pairs.xi])
        previous = tp
        w_norms.append(np.linalg.norm(phi @ pairs.W0, axis=0) / np.abs(e))
    w_norms = np.array(w_norms)

    sizes = list(block_sizes) if block_sizes is not None else [sys.n] * sys.n
    h = np.array([ts.h_polynomials(max(sizes) - 1, tp, pairs.t0) for tp in grid])
    envelopes = np.cumsum(h, axis=1)
    first = times <= times[-1] / 2
    second = ~first if np.any(~first) else first
    modes = []
    for i in range(sys.n):
        logs = np.log(np.maximum(norms[:, i], 1e-300))
        rate = float(np.polyfit(times, logs, 1)[0]) if len(times) > 1 else 0.0
        ratio = w_norms[:, i] / envelopes[:, sizes[i] - 1]
        c = float(np.max(ratio[first]))
        envelope_ratio = float(np.max(ratio[second]) / c)
        modes.append(
            {
                "index": i,
                "sup_norm": float(np.max(norms[:, i])),
                "final_norm": float(norms[-1, i]),
                "rate": rate,
                "decays": bool(rate < 0 and norms[-1, i] < norms[0, i]),
                "w_sup_norm": float(np.max(w_norms[:, i])),
                "block_size": sizes[i],
                "envelope_constant": c,
                "envelope_ratio": envelope_ratio,
                "polynomial_bounded": bool(envelope_ratio <= _ENVELOPE_GROWTH_LIMIT),
            }
        )
    return {
        "horizon": float(horizon),
        "modes": modes,
        "all_decay": all(m["decays"] for m in modes),
        "all_polynomial_bounded": all(m["polynomial_bounded"] for m in modes),
    }
