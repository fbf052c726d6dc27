"""
Dense complex matrix kernel.

Eigenvalues come from a complex Schur form and are merged into clusters
(distinct eigenvalues with algebraic multiplicities). Spectral projectors are
assembled from bases of the generalized eigenspaces, and the principal real
power and logarithm are built on them:

    M^r   = sum_i P_i lambda_i^r sum_{j < n_i} binom(r, j) ((M - lambda_i I)/lambda_i)^j
    Log M = sum_i P_i [Log(lambda_i) I
                       + sum_{1 <= j < n_i} (-1)^{j+1}/j ((M - lambda_i I)/lambda_i)^j]

The polynomial (partial fraction) construction of the projectors is kept in
partial_fraction_projections as an independent reference for small n.
"""

import cmath
import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from numpy.polynomial import Polynomial

from errors import SingularMatrixError

_DEFAULT_CLUSTER_REL_TOL = 1e-7
_SINGULAR_REL_TOL = 1e-12
_NILPOTENT_REL_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class SpectralData:
    """
    Spectral data of a nonsingular matrix.

    Attributes:
        matrix: The decomposed matrix M
        eigenvalues: Distinct eigenvalues (cluster means), ordered by decreasing modulus
        multiplicities: Algebraic multiplicities m_i
        nilpotent_indices: Smallest n_i with P_i (M - lambda_i I)^{n_i} = 0
        projections: Spectral projectors P_i
        norm: Spectral norm of M
        jordan_basis: V with M = V J V^{-1} (filled by jordan_decomposition)
        jordan_form: J
    """

    matrix: np.ndarray
    eigenvalues: tuple
    multiplicities: tuple
    nilpotent_indices: tuple
    projections: tuple
    norm: float
    jordan_basis: np.ndarray | None = None
    jordan_form: np.ndarray | None = None

    @property
    def n(self):
        return self.matrix.shape[0]

    @property
    def k(self):
        return len(self.eigenvalues)

    @property
    def similarity(self):
        """C with C M C^{-1} = J, i.e. the inverse of the Jordan basis."""
        if self.jordan_basis is None:
            raise ValueError("Jordan data not computed; call jordan_decomposition first")
        return scipy.linalg.inv(self.jordan_basis)

    def repeated_eigenvalues(self):
        """Eigenvalues listed with algebraic multiplicity."""
        out = []
        for lam, m in zip(self.eigenvalues, self.multiplicities, strict=True):
            out.extend([lam] * m)
        return out


def _as_matrix(M):
    M = np.asarray(M, dtype=complex)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"Expected a square matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError("Matrix has non-finite entries")
    return M


def _nilpotent_tol(norm, power):
    return _NILPOTENT_REL_TOL * max(norm, 1.0) ** power


def _snap_real(lam):
    """Drop roundoff imaginary parts so negative reals sit on the principal branch Arg = pi."""
    if abs(lam.imag) <= 1e-13 * abs(lam):
        return complex(lam.real, 0.0)
    return lam


def _cluster(values, tol):
    """Single-linkage clustering of complex values closer than tol."""
    parent = list(range(len(values)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(len(values)):
        for j in range(i + 1, len(values)):
            if abs(values[i] - values[j]) < tol:
                parent[find(i)] = find(j)
    groups = {}
    for i, v in enumerate(values):
        groups.setdefault(find(i), []).append(v)
    return list(groups.values())


def _smallest_right_vectors(A, count):
    """Orthonormal basis of the count-dimensional near-null space of A."""
    _, _, vh = scipy.linalg.svd(A)
    return vh[-count:].conj().T


def eigen_decompose(M, cluster_tol=None):
    """
    Cluster the eigenvalues of M and build its spectral projectors.

    Args:
        M: Square nonsingular matrix
        cluster_tol: Merge distance for eigenvalues (default 1e-7 * ||M||)

    Returns:
        SpectralData

    Raises:
        SingularMatrixError: An eigenvalue lies within 1e-12 * ||M|| of zero
    """
    M = _as_matrix(M)
    n = M.shape[0]
    norm = float(np.linalg.norm(M, 2))
    if norm == 0.0:
        raise SingularMatrixError("Zero matrix is singular")
    T, _ = scipy.linalg.schur(M, output="complex")
    raw = np.diag(T)
    if np.min(np.abs(raw)) <= _SINGULAR_REL_TOL * norm:
        smallest = np.min(np.abs(raw))
        raise SingularMatrixError(f"Matrix is singular to tolerance (min |eig| = {smallest:.3e})")
    tol = _DEFAULT_CLUSTER_REL_TOL * norm if cluster_tol is None else cluster_tol
    groups = _cluster(list(raw), tol)
    groups.sort(key=lambda g: (-abs(np.mean(g)), cmath.phase(np.mean(g))))

    eye = np.eye(n, dtype=complex)
    eigenvalues, multiplicities, bases = [], [], []
    for group in groups:
        lam = _snap_real(complex(np.mean(group)))
        m = len(group)
        eigenvalues.append(lam)
        multiplicities.append(m)
        bases.append(_smallest_right_vectors(np.linalg.matrix_power(M - lam * eye, m), m))

    V = np.hstack(bases)
    V_inv = scipy.linalg.inv(V)
    projections = []
    nilpotent_indices = []
    col = 0
    for lam, m, basis in zip(eigenvalues, multiplicities, bases, strict=True):
        P = basis @ V_inv[col : col + m, :]
        col += m
        projections.append(P)
        N = M - lam * eye
        index = m
        term = P
        for r in range(1, m + 1):
            term = term @ N
            if np.linalg.norm(term, 2) <= _nilpotent_tol(norm, r):
                index = r
                break
        nilpotent_indices.append(index)

    return SpectralData(
        matrix=M,
        eigenvalues=tuple(eigenvalues),
        multiplicities=tuple(multiplicities),
        nilpotent_indices=tuple(nilpotent_indices),
        projections=tuple(projections),
        norm=norm,
    )


def generalized_binomial(r, j):
    """binom(r, j) = prod_{q<j} (r - q) / j!, defined for any real r."""
    value = 1.0
    for q in range(j):
        value *= r - q
    return value / math.factorial(j)


def _principal_power(lam, r):
    return cmath.exp(r * cmath.log(lam))


def real_power(M, r, spec=None):
    """
    Principal real power M^r.

    Args:
        M: Nonsingular matrix
        r: Real exponent
        spec: SpectralData of M (computed if omitted)

    Returns:
        np.ndarray: Complex n x n matrix
    """
    M = _as_matrix(M)
    n = M.shape[0]
    eye = np.eye(n, dtype=complex)
    if r == 0:
        return eye
    if spec is None:
        spec = eigen_decompose(M)
    result = np.zeros((n, n), dtype=complex)
    for lam, P, n_i in zip(spec.eigenvalues, spec.projections, spec.nilpotent_indices, strict=True):
        N = (M - lam * eye) / lam
        series = eye.copy()
        term = eye
        for j in range(1, n_i):
            term = term @ N
            series = series + generalized_binomial(r, j) * term
        result += _principal_power(lam, r) * (P @ series)
    return result


def principal_log(M, spec=None):
    """Principal matrix logarithm; exp(principal_log(M)) = M."""
    M = _as_matrix(M)
    n = M.shape[0]
    eye = np.eye(n, dtype=complex)
    if spec is None:
        spec = eigen_decompose(M)
    result = np.zeros((n, n), dtype=complex)
    for lam, P, n_i in zip(spec.eigenvalues, spec.projections, spec.nilpotent_indices, strict=True):
        N = (M - lam * eye) / lam
        series = cmath.log(lam) * eye
        term = eye
        for j in range(1, n_i):
            term = term @ N
            series = series + ((-1) ** (j + 1) / j) * term
        result += P @ series
    return result


def generalized_eigenvectors(spec, i, r):
    """
    Generalized eigenvector of rank r for the i-th distinct eigenvalue (0-based).

    Returns a column of P_i (M - lambda_i I)^{n_i - r}. The column index is
    chosen once per eigenvalue, so consecutive ranks satisfy
    (M - lambda_i I) v_r = v_{r-1} exactly.

    Raises:
        ValueError: r outside 1..n_i
        SingularMatrixError: The matrix is numerically zero
    """
    n_i = spec.nilpotent_indices[i]
    if not 1 <= r <= n_i:
        raise ValueError(f"Rank must be in 1..{n_i}, got {r}")
    lam = spec.eigenvalues[i]
    N = spec.matrix - lam * np.eye(spec.n)
    P = spec.projections[i]
    top = P @ np.linalg.matrix_power(N, n_i - 1)
    norms = np.linalg.norm(top, axis=0)
    col = int(np.argmax(norms))
    if norms[col] <= _nilpotent_tol(spec.norm, n_i):
        raise SingularMatrixError(f"No generalized eigenvector of rank {r} for eigenvalue {lam}")
    return (P @ np.linalg.matrix_power(N, n_i - r))[:, col]


def eigenvectors(spec, i):
    """Orthonormal basis (columns) of the eigenspace of the i-th distinct eigenvalue."""
    lam = spec.eigenvalues[i]
    n_i = spec.nilpotent_indices[i]
    N = spec.matrix - lam * np.eye(spec.n)
    top = spec.projections[i] @ np.linalg.matrix_power(N, n_i - 1)
    U, s, _ = scipy.linalg.svd(top)
    rank = int(np.sum(s > _nilpotent_tol(spec.norm, n_i) * max(1.0, s[0])))
    if rank == 0:
        raise SingularMatrixError(f"No eigenvector found for eigenvalue {lam}")
    return U[:, :rank]


def eigenpairs(spec):
    """(eigenvalue, unit eigenvector) for every independent eigenvector of M."""
    pairs = []
    for i, lam in enumerate(spec.eigenvalues):
        basis = eigenvectors(spec, i)
        for c in range(basis.shape[1]):
            pairs.append((lam, basis[:, c]))
    return pairs


# =============================================================================
# JORDAN FORM
# =============================================================================


def _rank(A, atol):
    if A.size == 0:
        return 0
    return int(np.sum(scipy.linalg.svdvals(A) > atol))


def _null_basis(A, atol):
    _, s, vh = scipy.linalg.svd(A)
    rank = int(np.sum(s > atol))
    return vh[rank:].conj().T


def _orth(A):
    if A.shape[1] == 0:
        return A
    U, s, _ = scipy.linalg.svd(A, full_matrices=False)
    tol = max(A.shape) * np.finfo(float).eps * (s[0] if s.size else 0.0)
    return U[:, s > tol]


def _nilpotent_chains(N, scale):
    """Jordan chains of a nilpotent matrix, as a list of column lists [N^{L-1}x, ..., x]."""
    m = N.shape[0]
    powers = [np.eye(m, dtype=complex)]
    for _ in range(m + 1):
        powers.append(powers[-1] @ N)
    ranks = [_rank(powers[s], _nilpotent_tol(scale, s)) if s else m for s in range(m + 2)]
    top = next((s for s in range(m + 1) if ranks[s] == 0), m)
    chains = []
    for s in range(top, 0, -1):
        count = (ranks[s - 1] - ranks[s]) - (ranks[s] - ranks[s + 1])
        if count <= 0:
            continue
        K = _null_basis(powers[s], _nilpotent_tol(scale, s))
        spans = [_null_basis(powers[s - 1], _nilpotent_tol(scale, s - 1))] if s > 1 else []
        spans += [(powers[length - s] @ x)[:, None] for length, x in chains]
        if spans:
            Q = _orth(np.hstack(spans))
            K = K - Q @ (Q.conj().T @ K)
        U, _, _ = scipy.linalg.svd(K)
        for c in range(count):
            x = U[:, c]
            chains.append((s, x / np.linalg.norm(x)))
    columns = []
    for length, x in chains:
        columns.append([powers[length - 1 - q] @ x for q in range(length)])
    return columns


def jordan_decomposition(spec):
    """
    Numerical Jordan basis V and Jordan form J with M = V J V^{-1}.

    Returns:
        SpectralData: A copy of spec with jordan_basis and jordan_form filled in
    """
    M = spec.matrix
    n = spec.n
    eye = np.eye(n, dtype=complex)
    columns, blocks = [], []
    for lam, P, m in zip(spec.eigenvalues, spec.projections, spec.multiplicities, strict=True):
        U, _, _ = scipy.linalg.svd(P)
        Q = U[:, :m]
        N_small = Q.conj().T @ (M - lam * eye) @ Q
        for chain in _nilpotent_chains(N_small, spec.norm):
            columns.extend(Q @ v for v in chain)
            blocks.append((lam, len(chain)))
    V = np.column_stack(columns)
    J = np.zeros((n, n), dtype=complex)
    pos = 0
    for lam, size in blocks:
        for q in range(size):
            J[pos + q, pos + q] = lam
            if q + 1 < size:
                J[pos + q, pos + q + 1] = 1.0
        pos += size
    return SpectralData(
        matrix=spec.matrix,
        eigenvalues=spec.eigenvalues,
        multiplicities=spec.multiplicities,
        nilpotent_indices=spec.nilpotent_indices,
        projections=spec.projections,
        norm=spec.norm,
        jordan_basis=V,
        jordan_form=J,
    )


def jordan_block_sizes(spec):
    """Size of the Jordan block containing each column of the Jordan basis."""
    J = spec.jordan_form
    if J is None:
        raise ValueError("Jordan data not computed; call jordan_decomposition first")
    sizes = []
    n = J.shape[0]
    start = 0
    while start < n:
        end = start
        while end + 1 < n and J[end, end + 1] != 0:
            end += 1
        sizes.extend([end - start + 1] * (end - start + 1))
        start = end + 1
    return sizes


# =============================================================================
# POLYNOMIAL REFERENCE CONSTRUCTION
# =============================================================================


def _matrix_polynomial(coeffs, A):
    """Horner evaluation of sum_k coeffs[k] A^k."""
    n = A.shape[0]
    result = np.zeros((n, n), dtype=complex)
    for c in reversed(coeffs):
        result = result @ A + c * np.eye(n)
    return result


def partial_fraction_projections(M, eigenvalues, multiplicities):
    """
    Projectors P_i = a_i(M) b_i(M) from the partial fractions of 1/charpoly.

    b_i(x) = prod_{j != i} (x - lambda_j)^{m_j}; a_i is the degree < m_i Taylor
    polynomial of 1/b_i at lambda_i. Only well conditioned for small n with
    well separated eigenvalues.
    """
    M = _as_matrix(M)
    eye = np.eye(M.shape[0], dtype=complex)
    projections = []
    for i, (lam, m) in enumerate(zip(eigenvalues, multiplicities, strict=True)):
        roots = [
            lam_j
            for j, lam_j in enumerate(eigenvalues)
            if j != i
            for _ in range(multiplicities[j])
        ]
        b = Polynomial.fromroots(roots) if roots else Polynomial([1.0])
        shifted = b(Polynomial([lam, 1.0])).coef
        c = np.zeros(m, dtype=complex)
        c[: min(m, len(shifted))] = shifted[:m]
        d = np.zeros(m, dtype=complex)
        d[0] = 1 / c[0]
        for k in range(1, m):
            d[k] = -sum(c[q] * d[k - q] for q in range(1, k + 1)) / c[0]
        a_of_M = _matrix_polynomial(list(d), M - lam * eye)
        b_of_M = eye.copy()
        for j, lam_j in enumerate(eigenvalues):
            if j != i:
                b_of_M = b_of_M @ np.linalg.matrix_power(M - lam_j * eye, multiplicities[j])
        projections.append(a_of_M @ b_of_M)
    return projections
