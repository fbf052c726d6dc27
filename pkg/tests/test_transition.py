"""Tests for transition matrices and solution operators (transition.py)."""

import cmath
import math

import numpy as np
import pytest

from config import SolverOptions
from errors import ConfigError, ConvergenceError, NonRegressiveError
from timescale import integers, p_ab, real_line
from transition import (
    CallableSystem,
    ConstantSystem,
    LinearDynamicSystem,
    TransitionCursor,
    matrix_exp_constant,
    monodromy_matrix,
    peano_baker,
    solve_ivp,
    solve_nonhomogeneous,
    transition_matrix,
    transition_path,
)

E2PI = math.exp(-2 * math.pi)
CONTINUOUS_MONODROMY = np.array([[E2PI, 0.0], [(1 - E2PI) / 2, 1.0]])


def _random_periodic_rule(rng, ts, n, complex_entries):
    """A(t) = A0 + A1 cos(wt) + A2 sin(wt) with ||A(t)|| * p <= 1.5."""
    p = ts.period
    w = 2 * math.pi / p

    def draw():
        M = rng.standard_normal((n, n))
        if complex_entries:
            M = M + 1j * rng.standard_normal((n, n))
        return M * (0.5 / (p * np.linalg.norm(M, 2)))

    A0, A1, A2 = draw(), draw(), draw()

    def rule(tp, mu):
        t = ts.to_real(tp)
        return A0 + A1 * math.cos(w * t) + A2 * math.sin(w * t)

    return CallableSystem(ts, n, rule, name="random")


# ── Systems ───────────────────────────────────────────────────────────────────


class TestLinearDynamicSystem:
    def test_matrix_is_evaluated_at_reduced_time(self, hybrid_system):
        A = hybrid_system.matrix_at(hybrid_system.ts.locate(4.25))
        np.testing.assert_allclose(A, [[-2, 1], [0, -3]], atol=1e-12)

    def test_non_square(self):
        with pytest.raises(ConfigError, match="square"):
            LinearDynamicSystem(integers(), [["1", "0"]])

    def test_empty(self):
        with pytest.raises(ConfigError):
            LinearDynamicSystem(integers(), [])

    def test_non_periodic(self):
        with pytest.raises(ConfigError, match="periodic"):
            LinearDynamicSystem(integers(), [["t"]])

    def test_non_regressive(self):
        with pytest.raises(NonRegressiveError):
            LinearDynamicSystem(integers(), [["-1"]])

    def test_checks_can_be_skipped(self):
        sys = LinearDynamicSystem(integers(), [["t"]], check=False)
        assert sys.n == 1

    def test_numbers_and_expressions_mix(self):
        sys = LinearDynamicSystem(real_line(1.0), [[0.5, "cos(2*pi*t)"], ["0", -1]])
        np.testing.assert_allclose(sys.evaluate_real(0.5), [[0.5, -1], [0, -1]], atol=1e-15)

    def test_jump_factor(self, discrete_system):
        factor = discrete_system.jump_factor(discrete_system.ts.locate(0), 1.0)
        np.testing.assert_allclose(factor, [[0, 1.5], [1.5, 0]])


# ── Transition matrices ───────────────────────────────────────────────────────


class TestCallableSystem:
    def test_rule_receives_graininess(self):
        ts = p_ab(1.0, 1.0)
        sys = CallableSystem(ts, 1, lambda tp, mu: [[mu]])
        end = ts.locate(1.0)
        assert sys.matrix_at(end)[0, 0] == 1.0
        assert sys.flow_matrix_at(end)[0, 0] == 0.0
        assert sys.matrix_at(ts.locate(0.5))[0, 0] == 0.0

    def test_expression_systems_ignore_the_flow_flag(self, hybrid_system):
        end = hybrid_system.ts.locate(1.0)
        np.testing.assert_array_equal(hybrid_system.flow_matrix_at(end), hybrid_system.matrix_at(end))

    def test_run_end_is_integrated_along_the_run(self, opts):
        ts = p_ab(1.0, 1.0)
        sys = CallableSystem(ts, 1, lambda tp, mu: [[-1.0 if mu == 0 else -0.5]])
        assert transition_matrix(sys, 1.0, 0.0, opts)[0, 0] == pytest.approx(math.exp(-1), rel=1e-10)
        assert transition_matrix(sys, 2.0, 0.0, opts)[0, 0] == pytest.approx(0.5 * math.exp(-1), rel=1e-10)


class TestTransitionMatrix:
    def test_discrete_monodromy(self, discrete_system, opts):
        np.testing.assert_allclose(transition_matrix(discrete_system, 2, 0, opts), 0.75 * np.eye(2), atol=1e-15)

    def test_continuous_monodromy(self, continuous_system, opts):
        phi = transition_matrix(continuous_system, 2 * math.pi, 0.0, opts)
        np.testing.assert_allclose(phi, CONTINUOUS_MONODROMY, atol=1e-6)

    def test_same_time_is_identity(self, hybrid_system, opts):
        assert np.array_equal(transition_matrix(hybrid_system, 0.5, 0.5, opts), np.eye(2))

    def test_cocycle(self, continuous_system, opts):
        whole = transition_matrix(continuous_system, 5.0, 0.0, opts)
        split = transition_matrix(continuous_system, 5.0, 2.0, opts) @ transition_matrix(
            continuous_system, 2.0, 0.0, opts
        )
        assert np.linalg.norm(split - whole) <= 1e-8 * np.linalg.norm(whole)

    def test_cocycle_across_jumps(self, hybrid_system, opts):
        whole = transition_matrix(hybrid_system, 4.5, 0.25, opts)
        split = transition_matrix(hybrid_system, 4.5, 2.5, opts) @ transition_matrix(hybrid_system, 2.5, 0.25, opts)
        assert np.linalg.norm(split - whole) <= 1e-7 * np.linalg.norm(whole)

    @pytest.mark.parametrize("k", [1, 2, 3])
    def test_shift_invariance(self, hybrid_system, opts, k):
        ts = hybrid_system.ts
        for t, t0 in [(1.0, 0.25), (4.5, 0.0), (2.5, 0.0), (2.0, 0.5)]:
            base = transition_matrix(hybrid_system, t, t0, opts)
            shifted = transition_matrix(hybrid_system, t + k * ts.period, t0 + k * ts.period, opts)
            assert np.linalg.norm(shifted - base) <= 1e-7

    def test_backward_time_inverts(self, hybrid_system, opts):
        forward = transition_matrix(hybrid_system, 2.5, 0.0, opts)
        backward = transition_matrix(hybrid_system, 0.0, 2.5, opts)
        np.testing.assert_allclose(backward @ forward, np.eye(2), atol=1e-10)

    def test_determinant_never_vanishes(self, hybrid_system, opts):
        ts = hybrid_system.ts
        for phi in transition_path(hybrid_system, ts.grid(0.0, 4.0, 0.25), 0.0, opts):
            assert abs(np.linalg.det(phi)) > 1e-12

    def test_convergence_failure(self):
        rng = np.random.default_rng(5)
        sys = CallableSystem(real_line(1.0), 1, lambda tp, mu: [[rng.standard_normal()]])
        with pytest.raises(ConvergenceError, match="step fell below"):
            transition_matrix(sys, 1.0, 0.0, SolverOptions(h_max=0.1, rk_tol=1e-12))

    def test_non_regressive_on_the_way(self):
        sys = CallableSystem(integers(), 1, lambda tp, mu: [[-1.0]])
        with pytest.raises(NonRegressiveError):
            transition_matrix(sys, 2, 0)


class TestTransitionPath:
    def test_matches_pointwise(self, hybrid_system, opts):
        times = [3.0, 0.5, 2.25, 1.0]
        path = transition_path(hybrid_system, times, 0.0, opts)
        for t, phi in zip(times, path, strict=True):
            np.testing.assert_allclose(phi, transition_matrix(hybrid_system, t, 0.0, opts), atol=1e-12)

    def test_rejects_earlier_times(self, hybrid_system, opts):
        with pytest.raises(ValueError):
            transition_path(hybrid_system, [0.5, 0.0], 0.25, opts)


class TestTransitionCursor:
    def test_matches_transition_matrix(self, continuous_system, opts):
        cursor = TransitionCursor(continuous_system, 0.0, opts)
        for t in (3.0, 1.0, 6.0, 1.0):
            np.testing.assert_allclose(cursor.at(t), transition_matrix(continuous_system, t, 0.0, opts), atol=1e-9)

    def test_before_t0(self, discrete_system, opts):
        cursor = TransitionCursor(discrete_system, 2, opts)
        np.testing.assert_allclose(cursor.at(0), np.eye(2) / 0.75, atol=1e-14)

    def test_checkpoint_limit(self, discrete_system, opts):
        cursor = TransitionCursor(discrete_system, 0, opts, max_checkpoints=3)
        for t in range(1, 8):
            cursor.at(t)
        np.testing.assert_allclose(cursor.at(6), 0.75**3 * np.eye(2), atol=1e-14)


class TestMonodromyMatrix:
    def test_cached_on_reduced_t0(self, hybrid_system, opts):
        first = monodromy_matrix(hybrid_system, 0.0, opts)
        second = monodromy_matrix(hybrid_system, 2.0, opts)
        np.testing.assert_array_equal(first, second)
        assert len(hybrid_system._monodromy_cache) == 1

    def test_returns_copies(self, discrete_system, opts):
        M = monodromy_matrix(discrete_system, 0, opts)
        M[0, 0] = 99
        np.testing.assert_allclose(monodromy_matrix(discrete_system, 0, opts), 0.75 * np.eye(2))

    def test_hybrid_value(self, hybrid_system, opts):
        M = monodromy_matrix(hybrid_system, 0.0, opts)
        value = -2 * math.exp(-3)
        assert M[0, 0] == pytest.approx(value, rel=1e-8)
        assert M[1, 1] == pytest.approx(value, rel=1e-8)
        assert abs(M[1, 0]) <= 1e-14


# ── Reference series ──────────────────────────────────────────────────────────


class TestPeanoBaker:
    def test_zero_matrix(self):
        sys = ConstantSystem(p_ab(1.0, 1.0), np.zeros((2, 2)))
        np.testing.assert_array_equal(peano_baker(sys, 3.0, 0.0), np.eye(2))

    def test_single_term(self, discrete_system):
        value = peano_baker(discrete_system, 2, 0, SolverOptions(pb_terms=1))
        np.testing.assert_allclose(value, [[-1, 2], [2, -1]], atol=1e-15)

    def test_discrete_series_terminates(self, discrete_system):
        for terms in (2, 5, 12):
            value = peano_baker(discrete_system, 2, 0, SolverOptions(pb_terms=terms))
            np.testing.assert_allclose(value, 0.75 * np.eye(2), atol=1e-15)

    def test_continuous_agrees_with_integrator(self, continuous_system, opts):
        reference = peano_baker(continuous_system, 1.2, 0.0, opts)
        np.testing.assert_allclose(reference, transition_matrix(continuous_system, 1.2, 0.0, opts), atol=1e-6)

    def test_random_constant_systems(self, opts):
        rng = np.random.default_rng(11)
        ts = p_ab(0.5, 0.25, 0.75)
        for _ in range(4):
            A = rng.standard_normal((3, 3))
            A *= 0.9 / np.linalg.norm(A, 2)
            sys = ConstantSystem(ts, A)
            np.testing.assert_allclose(peano_baker(sys, 2.0, 0.0, opts), transition_matrix(sys, 2.0, 0.0, opts), atol=1e-6)

    def test_complex_constant(self, opts):
        sys = ConstantSystem(real_line(1.0), [[1j]])
        value = peano_baker(sys, 1.0, 0.0, opts)[0, 0]
        assert value == pytest.approx(cmath.exp(1j), abs=1e-6)
        assert abs(value.imag) > 0.8

    def test_complex_on_lattice_is_exact(self):
        sys = ConstantSystem(integers(), [[0.5j]])
        value = peano_baker(sys, 3, 0, SolverOptions(pb_terms=3))[0, 0]
        assert value == pytest.approx((1 + 0.5j) ** 3, abs=1e-14)

    @pytest.mark.parametrize(
        "ts", [integers(3), real_line(1.0), p_ab(1.0, 1.0)], ids=["Z", "R", "P11"]
    )
    def test_random_time_varying_systems(self, ts):
        rng = np.random.default_rng(31)
        fine = SolverOptions(h_max=5e-3, rk_tol=1e-10)
        start = ts.locate(ts.anchor)
        end = ts.shift(start, 1)
        for trial in range(12):
            sys = _random_periodic_rule(rng, ts, 2 + trial % 2, complex_entries=trial % 2 == 1)
            reference = peano_baker(sys, end, start, fine)
            np.testing.assert_allclose(reference, transition_matrix(sys, end, start, fine), atol=1e-6)

    def test_backwards_rejected(self, discrete_system):
        with pytest.raises(ValueError):
            peano_baker(discrete_system, 0, 2)


class TestMatrixExpConstant:
    def test_zero(self):
        np.testing.assert_array_equal(matrix_exp_constant(np.zeros((2, 2)), p_ab(1.0, 1.0), 3.0, 0.0), np.eye(2))

    def test_hybrid_scalar(self):
        value = matrix_exp_constant(-3.0, p_ab(1.0, 1.0), 2.0, 0.0)
        assert value[0, 0] == pytest.approx(-2 * math.exp(-3), rel=1e-10)

    def test_identity_on_integers(self):
        np.testing.assert_allclose(matrix_exp_constant(np.eye(2), integers(), 3, 0), 8 * np.eye(2), atol=1e-12)

    def test_agrees_with_integrator(self, opts):
        A = np.array([[-0.5, 0.5], [0.0, -0.25]])
        ts = p_ab(1.0, 1.0)
        np.testing.assert_allclose(
            matrix_exp_constant(A, ts, 3.0, 0.0), transition_matrix(ConstantSystem(ts, A), 3.0, 0.0, opts), atol=1e-9
        )

    def test_backwards(self):
        value = matrix_exp_constant(np.eye(1), integers(), 0, 2)
        assert value[0, 0] == pytest.approx(0.25)

    def test_non_regressive(self):
        with pytest.raises(NonRegressiveError):
            matrix_exp_constant(-np.eye(2), integers(), 2, 0)


# ── Solutions ─────────────────────────────────────────────────────────────────


class TestSolveIvp:
    def test_zero_state(self, continuous_system, opts):
        np.testing.assert_array_equal(solve_ivp(continuous_system, [0, 0], 3.0, opts), np.zeros(2))

    def test_continuous(self, continuous_system, opts):
        x = solve_ivp(continuous_system, [1, 0], 2 * math.pi, opts)
        np.testing.assert_allclose(x, [E2PI, (1 - E2PI) / 2], atol=1e-6)

    def test_discrete_one_step(self, discrete_system, opts):
        np.testing.assert_allclose(solve_ivp(discrete_system, [1, 1], 1, opts), [1.5, 1.5])

    def test_explicit_t0(self, discrete_system, opts):
        np.testing.assert_allclose(solve_ivp(discrete_system, [1, 1], 3, opts, t0=2), [1.5, 1.5])


class TestSolveNonhomogeneous:
    def test_zero_forcing_matches_ivp(self, hybrid_system, opts):
        x = solve_nonhomogeneous(hybrid_system, ["0", "0"], [1, -1], 3.0, opts)
        np.testing.assert_allclose(x, solve_ivp(hybrid_system, [1, -1], 3.0, opts), atol=1e-12)

    def test_scalar_step(self, opts):
        sys = LinearDynamicSystem(integers(), [["-1/2"]])
        assert solve_nonhomogeneous(sys, ["3"], [0], 1, opts)[0] == pytest.approx(3.0)

    def test_pure_integration(self, opts):
        sys = LinearDynamicSystem(real_line(1.0), [["0"]])
        assert solve_nonhomogeneous(sys, ["1"], [0], 2.5, opts)[0] == pytest.approx(2.5)

    def test_callable_forcing(self, opts):
        sys = LinearDynamicSystem(real_line(1.0), [["0"]])
        value = solve_nonhomogeneous(sys, lambda t: [t], [1], 2.0, opts)[0]
        assert value == pytest.approx(3.0)

    def test_matches_difference_equation(self, opts):
        sys = LinearDynamicSystem(integers(), [["-1/2"]])
        x = 1.0
        for _ in range(4):
            x = 0.5 * x + 3.0
        assert solve_nonhomogeneous(sys, ["3"], [1], 4, opts)[0] == pytest.approx(x)

    def test_backwards_rejected(self, discrete_system, opts):
        with pytest.raises(ValueError):
            solve_nonhomogeneous(discrete_system, ["1", "1"], [0, 0], 0, opts, t0=2)
