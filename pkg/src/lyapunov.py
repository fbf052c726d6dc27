"""
Lyapunov transformations: bounded, uniformly invertible changes of variables
x = L(t) z that carry x^Delta = A(t) x into z^Delta = G(t) z with

    G(t) = L(sigma(t))^{-1} [A(t) L(t) - L^Delta(t)]

and preserve the stability class of the system.
"""

import numpy as np
import scipy.linalg
from scipy.optimize import minimize_scalar

from config import default_solver_options
from errors import ConfigError
from expr import evaluate, parse_expression
from floquet import classify_stability, exp_R, lyapunov_factor, monodromy
from transition import CallableSystem, transition_matrix, transition_path
from utils import log, map_parallel

_INVERSE_BOUND_SLACK = 1e-9
_CACHE_LIMIT = 8192


class LyapunovTransformation:
    """
    A matrix function L(t) with claimed bounds ||L(t)|| <= rho and |det L(t)| >= eta.

    Args:
        ts: PeriodicTimeScale the transformation lives on
        matrix_fn: Callable TimePoint -> n x n matrix
        rho: Claimed norm bound (None = not claimed)
        eta: Claimed determinant floor (None = not claimed)
        name: Label for reports
    """

    def __init__(self, ts, matrix_fn, rho=None, eta=None, name=None):
        self.ts = ts
        self._fn = matrix_fn
        self.rho = rho
        self.eta = eta
        self.name = name or "L"
        self._cache = {}

    @classmethod
    def from_expressions(cls, ts, matrix, rho=None, eta=None, name=None):
        """L from an n x n grid of expressions in t, evaluated at real time."""
        entries = [[parse_expression(e) for e in row] for row in matrix]
        n = len(entries)
        if n == 0 or any(len(row) != n for row in entries):
            raise ConfigError("Transformation matrix must be square and non-empty")

        def matrix_fn(tp):
            t = ts.to_real(tp)
            return np.array([[evaluate(e, t) for e in row] for row in entries], dtype=complex)

        return cls(ts, matrix_fn, rho, eta, name)

    @classmethod
    def from_floquet(cls, fd, rho=None, eta=None):
        """The Floquet factor L(t) = Phi_A(t, t0) e_R(t, t0)^{-1} of a FloquetData."""
        name = f"Floquet L of {fd.system.name}"
        return cls(fd.ts, lambda tp: lyapunov_factor(fd, tp), rho, eta, name=name)

    def at(self, t):
        tp = self.ts.locate(t)
        value = self._cache.get(tp)
        if value is None:
            value = np.asarray(self._fn(tp), dtype=complex)
            if len(self._cache) >= _CACHE_LIMIT:
                self._cache.clear()
            self._cache[tp] = value
        return value

    def __call__(self, t):
        return self.at(t)


def verify_lyapunov(lt, ts=None, horizon=None, h_max=None, start=None):
    """
    Check the Lyapunov bounds of lt on a grid over [start, start + horizon].

    Also checks ||L^{-1}|| <= ||L||^{n-1} / |det L| at every grid point and
    reports rho' = max ||L^{-1}||, the bound of the inverse transformation.

    Returns:
        dict: rho_observed, eta_observed, rho_inverse, inverse_bound_holds,
            points, passed
    """
    ts = ts or lt.ts
    start = ts.anchor if start is None else start
    horizon = ts.period if horizon is None else horizon
    h_max = h_max or default_solver_options().h_max
    rho_obs, eta_obs, rho_inv = 0.0, float("inf"), 0.0
    inverse_ok = True
    points = ts.grid(start, start + horizon, h_max)
    for tp in points:
        L = lt.at(tp)
        n = L.shape[0]
        norm = float(np.linalg.norm(L, 2))
        det = abs(complex(np.linalg.det(L)))
        rho_obs = max(rho_obs, norm)
        eta_obs = min(eta_obs, det)
        if det == 0.0:
            inverse_ok = False
            rho_inv = float("inf")
            continue
        inv_norm = float(np.linalg.norm(scipy.linalg.inv(L), 2))
        rho_inv = max(rho_inv, inv_norm)
        if inv_norm > norm ** (n - 1) / det * (1 + _INVERSE_BOUND_SLACK):
            inverse_ok = False
    passed = eta_obs > 0 and inverse_ok
    if lt.rho is not None:
        passed = passed and rho_obs <= lt.rho
    if lt.eta is not None:
        passed = passed and eta_obs >= lt.eta
    return {
        "rho_observed": rho_obs,
        "eta_observed": eta_obs,
        "rho_inverse": rho_inv,
        "inverse_bound_holds": inverse_ok,
        "points": len(points),
        "passed": bool(passed),
    }


def transform_system(sys, lt, opts=None, step=None):
    """
    The transformed system z^Delta = G(t) z.

    L^Delta is the forward quotient at right-scattered points and a centered
    difference of width step (default h_max/10) inside continuous runs. On
    the continuous flow the right end of a run takes the one-sided derivative
    along the run, with L(sigma(t)) = L(t).

    Raises:
        SingularMatrixError: via scipy when L(sigma(t)) is singular
    """
    opts = opts or default_solver_options()
    ts = sys.ts
    step = opts.h_max / 10 if step is None else step

    def matrix_fn(tp, mu):
        L = lt.at(tp)
        if mu > 0:
            A = sys.matrix_at(tp)
            L_delta = ts.delta_derivative(lt.at, tp, step)
            L_sigma = lt.at(ts.sigma_point(tp))
        else:
            A = sys.flow_matrix_at(tp)
            L_delta = ts.delta_derivative(lt.at, tp, step, dense=True)
            L_sigma = L
        return scipy.linalg.solve(L_sigma, A @ L - L_delta)

    return CallableSystem(ts, sys.n, matrix_fn, name=f"{sys.name} transformed by {lt.name}")


def verify_transition_relation(sys, lt, grid, opts=None):
    """
    max over grid pairs t >= tau of ||Phi_G(t, tau) - L(t)^{-1} Phi_A(t, tau) L(tau)||.

    Returns:
        dict: max_residual, worst_pair, pairs
    """
    opts = opts or default_solver_options()
    ts = sys.ts
    G = transform_system(sys, lt, opts)
    points = sorted({ts.locate(t) for t in grid})
    pairs = [(t, tau) for i, t in enumerate(points) for tau in points[: i + 1]]

    def residual(pair):
        t, tau = pair
        phi_g = transition_matrix(G, t, tau, opts)
        expected = scipy.linalg.solve(lt.at(t), transition_matrix(sys, t, tau, opts) @ lt.at(tau))
        return float(np.linalg.norm(phi_g - expected, 2))

    residuals = map_parallel(residual, pairs)
    worst = int(np.argmax(residuals))
    return {
        "max_residual": residuals[worst],
        "worst_pair": [ts.to_real(pairs[worst][0]), ts.to_real(pairs[worst][1])],
        "pairs": len(pairs),
    }


def _lambda_cap(ts):
    if ts.mu_max > 0:
        return (1 - 1e-6) / ts.mu_max
    return 100.0 / ts.period


def stability_estimates(sys, t0_samples, horizon, opts=None):
    """
    Finite-horizon estimates of the uniform and exponential stability constants.

    gamma_uniform is max ||Phi(t, t0)|| over the sampled t0 and t in
    [t0, t0 + horizon]. The exponential envelope gamma * e_{-lambda}(t, t0)
    takes lambda from a bounded scalar minimization of the least squares misfit
    of log ||Phi|| against log e_{-lambda}, over 0 < lambda with 1 - mu*lambda > 0,
    and gamma as the smallest constant for which the envelope holds on every
    sample. The fit is reported only for a clearly positive decay rate.

    Returns:
        dict: gamma_uniform, bounded_estimate (None for horizons under two
            periods), exponential ({gamma, lambda} or None), samples
    """
    opts = opts or default_solver_options()
    ts = sys.ts
    samples = []
    gamma_uniform = 0.0
    bounded = True if horizon >= 2 * ts.period else None
    spacing = max(opts.h_max, horizon / 200)
    for t0 in t0_samples:
        tp0 = ts.locate(t0)
        t0_real = ts.to_real(tp0)
        grid = [p for p in ts.grid(t0_real, t0_real + horizon, spacing) if p >= tp0]
        norms = [float(np.linalg.norm(phi, 2)) for phi in transition_path(sys, grid, tp0, opts)]
        gamma_uniform = max(gamma_uniform, max(norms))
        if bounded is not None:
            cut = t0_real + horizon - ts.period
            early = [v for p, v in zip(grid, norms, strict=True) if ts.to_real(p) < cut]
            late = [v for p, v in zip(grid, norms, strict=True) if ts.to_real(p) >= cut]
            if early and late and max(late) > max(early) * (1 + 1e-6):
                bounded = False
        samples.extend((tp0, p, v) for p, v in zip(grid, norms, strict=True))

    logs = np.log(np.maximum([v for _, _, v in samples], 1e-300))

    def envelope_logs(lam):
        return np.array([ts.log_scalar_exp_constant(-lam, p, tp0) for tp0, p, _ in samples])

    def misfit(lam):
        diff = logs - envelope_logs(lam)
        return float(np.sum((diff - diff.mean()) ** 2))

    exponential = None
    if len(samples) > 2:
        result = minimize_scalar(misfit, bounds=(0.0, _lambda_cap(ts)), method="bounded")
        lam = float(result.x)
        if lam > 1e-3:
            gamma = float(np.exp(np.max(logs - envelope_logs(lam))))
            exponential = {"gamma": gamma, "lambda": lam}
            log(f"Exponential envelope: gamma={gamma:.6g}, lambda={lam:.6g}", "debug")
    return {
        "gamma_uniform": gamma_uniform,
        "bounded_estimate": bounded,
        "exponential": exponential,
        "samples": len(samples),
    }


def preservation_check(fd, opts=None, grid_h=None):
    """
    Verdicts of a system and of its transform by its own Floquet L.

    The transformed system's transition matrix from t0 is also compared with
    e_R(t, t0) over one period.

    Returns:
        dict: verdict_system, verdict_transformed, match, phi_g_vs_exp_r
    """
    opts = opts or fd.opts
    lt = LyapunovTransformation.from_floquet(fd)
    G = transform_system(fd.system, lt, opts)
    transformed = monodromy(G, fd.t0, opts)
    verdict_a = classify_stability(fd).classification
    verdict_g = classify_stability(
        transformed, fd.opts.semisimple_tol, fd.opts.unit_tol
    ).classification
    ts = fd.ts
    t0 = fd.t0_real
    grid = [p for p in ts.grid(t0, t0 + ts.period, grid_h or ts.period / 16) if p >= fd.t0]
    phis = transition_path(G, grid, fd.t0, opts)
    worst = max(
        float(np.linalg.norm(phi - exp_R(fd, p, fd.t0), 2))
        for p, phi in zip(grid, phis, strict=True)
    )
    return {
        "verdict_system": verdict_a,
        "verdict_transformed": verdict_g,
        "match": verdict_a == verdict_g,
        "phi_g_vs_exp_r": worst,
    }
