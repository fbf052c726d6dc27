"""Tests for the dense complex matrix kernel (spectral.py)."""

import cmath
import math

import numpy as np
import pytest
import scipy.linalg

from errors import SingularMatrixError
from spectral import (
    eigen_decompose,
    eigenpairs,
    eigenvectors,
    generalized_binomial,
    generalized_eigenvectors,
    jordan_block_sizes,
    jordan_decomposition,
    partial_fraction_projections,
    principal_log,
    real_power,
)

JORDAN = np.array([[2.0, 1.0], [0.0, 2.0]])
CONTINUOUS_MONODROMY = np.array(
    [[math.exp(-2 * math.pi), 0.0], [(1 - math.exp(-2 * math.pi)) / 2, 1.0]]
)


def _index_of(spec, value):
    return min(range(spec.k), key=lambda i: abs(spec.eigenvalues[i] - value))


def _random_diagonalizable(rng, n):
    """A nonsingular matrix with well separated eigenvalues and a modest condition number."""
    candidates = np.array([1.5, -0.7 + 0.4j, 0.2 + 0.3j, 2.5j, -1.1 - 0.6j])
    values = candidates[:n]
    V = np.eye(n) + 0.3 * (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)))
    return V @ np.diag(values) @ np.linalg.inv(V)


def _random_matrices():
    rng = np.random.default_rng(20240611)
    return [_random_diagonalizable(rng, n) for n in (2, 3, 4, 4, 3)]


# ── Decomposition ─────────────────────────────────────────────────────────────


class TestEigenDecompose:
    def test_diagonal(self):
        spec = eigen_decompose(np.diag([2.0, 3.0]))
        assert spec.eigenvalues == (3, 2)
        assert spec.multiplicities == (1, 1)
        np.testing.assert_allclose(spec.projections[_index_of(spec, 2)], np.diag([1, 0]), atol=1e-14)
        np.testing.assert_allclose(spec.projections[_index_of(spec, 3)], np.diag([0, 1]), atol=1e-14)

    def test_identity(self):
        spec = eigen_decompose(np.eye(2))
        assert spec.eigenvalues == (1,)
        assert spec.multiplicities == (2,)
        assert spec.nilpotent_indices == (1,)
        np.testing.assert_allclose(spec.projections[0], np.eye(2), atol=1e-14)

    def test_jordan_block(self):
        spec = eigen_decompose(JORDAN)
        assert spec.k == 1
        assert spec.multiplicities == (2,)
        assert spec.nilpotent_indices == (2,)
        np.testing.assert_allclose(spec.projections[0], np.eye(2), atol=1e-12)

    def test_repeated_eigenvalues(self):
        spec = eigen_decompose(np.diag([2.0, 2.0, 5.0]))
        assert spec.repeated_eigenvalues() == [5, 2, 2]

    def test_negative_eigenvalue_on_principal_branch(self):
        spec = eigen_decompose(-np.eye(2))
        assert spec.eigenvalues[0].imag == 0.0

    @pytest.mark.parametrize("M", [np.zeros((2, 2)), np.diag([1.0, 0.0])])
    def test_singular(self, M):
        with pytest.raises(SingularMatrixError):
            eigen_decompose(M)

    def test_singular_is_linalg_error(self):
        with pytest.raises(np.linalg.LinAlgError):
            eigen_decompose(np.zeros((3, 3)))

    def test_non_square(self):
        with pytest.raises(ValueError, match="square"):
            eigen_decompose(np.ones((2, 3)))

    @pytest.mark.parametrize("M", _random_matrices())
    def test_projection_identities(self, M):
        spec = eigen_decompose(M)
        n = M.shape[0]
        eye = np.eye(n)
        np.testing.assert_allclose(sum(spec.projections), eye, atol=1e-10)
        for i, P in enumerate(spec.projections):
            for j, Q in enumerate(spec.projections):
                expected = P if i == j else np.zeros((n, n))
                np.testing.assert_allclose(P @ Q, expected, atol=1e-10)
            lam, m = spec.eigenvalues[i], spec.multiplicities[i]
            residual = P @ np.linalg.matrix_power(M - lam * eye, m)
            assert np.linalg.norm(residual) <= 1e-10

    def test_defective_cluster(self):
        rng = np.random.default_rng(7)
        V = np.eye(3) + 0.2 * rng.standard_normal((3, 3))
        J = np.array([[1.5, 1.0, 0.0], [0.0, 1.5, 0.0], [0.0, 0.0, -0.5]])
        M = V @ J @ np.linalg.inv(V)
        spec = eigen_decompose(M, cluster_tol=1e-5)
        i = _index_of(spec, 1.5)
        assert spec.multiplicities[i] == 2
        assert spec.nilpotent_indices[i] == 2
        np.testing.assert_allclose(sum(spec.projections), np.eye(3), atol=1e-7)

    def test_matches_partial_fractions(self):
        M = np.array([[2.0, 1.0, 0.0], [0.0, 3.0, 1.0], [0.0, 0.0, -1.0]])
        spec = eigen_decompose(M)
        reference = partial_fraction_projections(M, spec.eigenvalues, spec.multiplicities)
        for P, Q in zip(spec.projections, reference, strict=True):
            np.testing.assert_allclose(P, Q, atol=1e-10)

    def test_partial_fractions_diagonal(self):
        reference = partial_fraction_projections(np.diag([2.0, 3.0]), [2, 3], [1, 1])
        np.testing.assert_allclose(reference[0], np.diag([1, 0]), atol=1e-14)
        np.testing.assert_allclose(reference[1], np.diag([0, 1]), atol=1e-14)


# ── Powers and logarithms ─────────────────────────────────────────────────────


class TestGeneralizedBinomial:
    @pytest.mark.parametrize("r, j, expected", [(5, 2, 10), (0.5, 2, -0.125), (-1, 3, -1), (2, 0, 1)])
    def test_values(self, r, j, expected):
        assert generalized_binomial(r, j) == pytest.approx(expected)


class TestRealPower:
    def test_diagonal_square_root(self):
        np.testing.assert_allclose(real_power(np.diag([4.0, 9.0]), 0.5), np.diag([2, 3]), atol=1e-14)

    def test_discrete_monodromy_root(self):
        root = real_power(np.diag([0.75, 0.75]), 0.5)
        np.testing.assert_allclose(root, math.sqrt(3) / 2 * np.eye(2), atol=1e-14)

    def test_jordan_block(self):
        r = 0.5
        expected = np.array([[2**r, r * 2 ** (r - 1)], [0, 2**r]])
        np.testing.assert_allclose(real_power(JORDAN, r), expected, atol=1e-12)

    def test_zero_and_one(self):
        M = _random_matrices()[1]
        np.testing.assert_allclose(real_power(M, 0), np.eye(3))
        np.testing.assert_allclose(real_power(M, 1), M, atol=1e-10)

    def test_negative_multiplier_gives_complex_root(self):
        value = -2 * math.exp(-3)
        root = real_power(np.array([[value]]), 0.5)
        assert root[0, 0] == pytest.approx(1j * math.sqrt(-value))

    @pytest.mark.parametrize("M", _random_matrices())
    def test_semigroup(self, M):
        spec = eigen_decompose(M)
        for r, s in [(0.5, 0.25), (-2.0, 1.5), (1.3, -0.4), (2.0, 2.0)]:
            lhs = real_power(M, r, spec) @ real_power(M, s, spec)
            rhs = real_power(M, r + s, spec)
            assert np.linalg.norm(lhs - rhs) <= 1e-9 * max(1.0, np.linalg.norm(rhs))

    @pytest.mark.parametrize("M", _random_matrices())
    def test_integer_powers(self, M):
        spec = eigen_decompose(M)
        for k in range(5):
            expected = np.linalg.matrix_power(M, k)
            assert np.linalg.norm(real_power(M, k, spec) - expected) <= 1e-10 * max(1.0, np.linalg.norm(expected))

    @pytest.mark.parametrize("q", [2, 3, 4])
    def test_roots(self, q):
        for M in _random_matrices():
            root = real_power(M, 1 / q)
            np.testing.assert_allclose(np.linalg.matrix_power(root, q), M, atol=1e-8)

    def test_jordan_roots(self):
        root = real_power(JORDAN, 1 / 3)
        np.testing.assert_allclose(np.linalg.matrix_power(root, 3), JORDAN, atol=1e-12)

    @pytest.mark.parametrize("M", _random_matrices())
    def test_eigenpair_law(self, M):
        spec = eigen_decompose(M)
        r = 0.37
        Mr = real_power(M, r, spec)
        for lam, v in eigenpairs(spec):
            assert np.linalg.norm(Mr @ v - lam**r * v) <= 1e-8 * np.linalg.norm(v)

    def test_jordan_commutation(self):
        rng = np.random.default_rng(3)
        V = np.eye(2) + 0.3 * rng.standard_normal((2, 2))
        M = V @ JORDAN @ np.linalg.inv(V)
        spec = jordan_decomposition(eigen_decompose(M, cluster_tol=1e-5))
        C = spec.similarity
        r = 0.7
        lhs = C @ real_power(M, r, spec) @ np.linalg.inv(C)
        np.testing.assert_allclose(lhs, real_power(spec.jordan_form, r), atol=1e-6)


class TestPrincipalLog:
    def test_identity(self):
        np.testing.assert_allclose(principal_log(np.eye(3)), np.zeros((3, 3)), atol=1e-15)

    def test_diagonal(self):
        result = principal_log(np.diag([math.e, math.e**2]))
        np.testing.assert_allclose(result, np.diag([1, 2]), atol=1e-14)

    def test_continuous_monodromy(self):
        R = principal_log(CONTINUOUS_MONODROMY) / (2 * math.pi)
        np.testing.assert_allclose(R, [[-1, 0], [0.5, 0]], atol=1e-12)

    def test_jordan_block(self):
        expected = np.array([[math.log(2), 0.5], [0, math.log(2)]])
        np.testing.assert_allclose(principal_log(JORDAN), expected, atol=1e-14)

    def test_negative_eigenvalue_branch(self):
        value = principal_log(-np.eye(1))
        assert value[0, 0] == pytest.approx(1j * math.pi)

    @pytest.mark.parametrize("M", _random_matrices())
    def test_exp_inverts_log(self, M):
        np.testing.assert_allclose(scipy.linalg.expm(principal_log(M)), M, atol=1e-8)


# ── Eigenvectors and Jordan data ──────────────────────────────────────────────


class TestGeneralizedEigenvectors:
    def test_diagonal(self):
        spec = eigen_decompose(np.diag([2.0, 3.0]))
        v = generalized_eigenvectors(spec, _index_of(spec, 2), 1)
        assert abs(v[1]) <= 1e-14
        assert abs(v[0]) > 0

    def test_jordan_rank_one(self):
        spec = eigen_decompose(JORDAN)
        v = generalized_eigenvectors(spec, 0, 1)
        np.testing.assert_allclose(v, [1, 0], atol=1e-12)

    def test_jordan_chain(self):
        spec = eigen_decompose(JORDAN)
        v1 = generalized_eigenvectors(spec, 0, 1)
        v2 = generalized_eigenvectors(spec, 0, 2)
        np.testing.assert_allclose((JORDAN - 2 * np.eye(2)) @ v2, v1, atol=1e-14)

    def test_rank_out_of_range(self):
        spec = eigen_decompose(np.diag([2.0, 3.0]))
        with pytest.raises(ValueError, match="Rank"):
            generalized_eigenvectors(spec, 0, 2)

    def test_eigenvectors_are_orthonormal(self):
        spec = eigen_decompose(np.eye(2))
        basis = eigenvectors(spec, 0)
        assert basis.shape == (2, 2)
        np.testing.assert_allclose(basis.conj().T @ basis, np.eye(2), atol=1e-14)

    def test_defective_has_one_eigenvector(self):
        assert eigenvectors(eigen_decompose(JORDAN), 0).shape == (2, 1)
        assert len(eigenpairs(eigen_decompose(JORDAN))) == 1


class TestJordanDecomposition:
    def test_reconstructs_matrix(self):
        M = np.array([[2.0, 1.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, -1.0]])
        spec = jordan_decomposition(eigen_decompose(M))
        V, J = spec.jordan_basis, spec.jordan_form
        np.testing.assert_allclose(V @ J @ np.linalg.inv(V), M, atol=1e-10)
        assert sorted(jordan_block_sizes(spec)) == [1, 2, 2]

    def test_diagonalizable_blocks(self):
        spec = jordan_decomposition(eigen_decompose(np.diag([2.0, 2.0, 3.0])))
        assert jordan_block_sizes(spec) == [1, 1, 1]

    def test_original_is_untouched(self):
        spec = eigen_decompose(JORDAN)
        jordan_decomposition(spec)
        assert spec.jordan_form is None
        with pytest.raises(ValueError):
            jordan_block_sizes(spec)
        with pytest.raises(ValueError):
            _ = spec.similarity


# ── Randomized matrices ───────────────────────────────────────────────────────


def _separated_eigenvalues(rng, n, gap=0.3):
    values = []
    while len(values) < n:
        lam = rng.uniform(0.3, 2.5) * cmath.exp(1j * rng.uniform(-math.pi, math.pi))
        if all(abs(lam - mu) >= gap for mu in values):
            values.append(lam)
    return values


def _random_case(rng, defective):
    n = int(rng.integers(2, 5)) if defective else int(rng.integers(1, 5))
    Z = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    Q, _ = np.linalg.qr(Z)
    U = np.triu(rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)), 1)
    V = Q @ (np.eye(n) + 0.3 * U)
    J = np.diag(_separated_eigenvalues(rng, n)).astype(complex)
    if defective:
        J[1, 1] = J[0, 0]
        J[0, 1] = 1.0
    return V @ J @ np.linalg.inv(V), defective


def _random_cases(count=200):
    rng = np.random.default_rng(20240917)
    return [_random_case(rng, defective=(i % 50 == 49)) for i in range(count)]


RANDOM_CASES = _random_cases()


@pytest.mark.parametrize("M, defective", RANDOM_CASES)
class TestRandomMatrices:
    @staticmethod
    def _spec(M, defective):
        return eigen_decompose(M, cluster_tol=1e-5) if defective else eigen_decompose(M)

    def test_projection_identities(self, M, defective):
        spec = self._spec(M, defective)
        n = M.shape[0]
        tol = 1e-6 if defective else 1e-8
        eye = np.eye(n)
        assert sum(spec.multiplicities) == n
        assert max(spec.nilpotent_indices) == (2 if defective else 1)
        np.testing.assert_allclose(sum(spec.projections), eye, atol=tol)
        for i, P in enumerate(spec.projections):
            np.testing.assert_allclose(P @ P, P, atol=tol)
            lam, m = spec.eigenvalues[i], spec.multiplicities[i]
            residual = P @ np.linalg.matrix_power(M - lam * eye, m)
            assert np.linalg.norm(residual) <= tol * max(1.0, spec.norm) ** m

    def test_semigroup_and_roots(self, M, defective):
        spec = self._spec(M, defective)
        tol = 1e-6 if defective else 1e-8
        for r, s in [(0.5, 0.25), (-1.5, 0.7)]:
            rhs = real_power(M, r + s, spec)
            lhs = real_power(M, r, spec) @ real_power(M, s, spec)
            assert np.linalg.norm(lhs - rhs) <= tol * max(1.0, np.linalg.norm(rhs))
        for q in (2, 3, 4):
            root = real_power(M, 1 / q, spec)
            residual = np.linalg.matrix_power(root, q) - M
            assert np.linalg.norm(residual) <= tol * max(1.0, np.linalg.norm(M))

    def test_eigenpair_law(self, M, defective):
        spec = self._spec(M, defective)
        tol = 1e-6 if defective else 1e-8
        r = 0.37
        Mr = real_power(M, r, spec)
        for lam, v in eigenpairs(spec):
            assert np.linalg.norm(Mr @ v - lam**r * v) <= tol * max(1.0, np.linalg.norm(Mr))

    def test_jordan_commutation(self, M, defective):
        spec = jordan_decomposition(self._spec(M, defective))
        assert sorted(jordan_block_sizes(spec))[-1] == (2 if defective else 1)
        C = spec.similarity
        r = 0.7
        lhs = C @ real_power(M, r, spec) @ np.linalg.inv(C)
        rhs = real_power(spec.jordan_form, r)
        scale = max(1.0, np.linalg.norm(rhs)) * np.linalg.cond(C)
        assert np.linalg.norm(lhs - rhs) <= (1e-6 if defective else 1e-9) * scale
