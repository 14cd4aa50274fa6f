import logging
from functools import reduce

import numpy as np
import scipy.linalg

from core.exceptions import DomainError
from mtcpert.modules.opalg.models import (
    DEFAULT_TOL,
    DensityMatrix,
    HermitianObservable,
    SuperOperator,
    as_complex_matrix,
    hermiticity_defect,
)

logger = logging.getLogger(__name__)

PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)
IDENTITY_2 = np.eye(2, dtype=complex)


# --------------------------------------------------------------------------------------------------
# Operators
# --------------------------------------------------------------------------------------------------


def is_hermitian(A, tol=DEFAULT_TOL):
    return hermiticity_defect(np.asarray(A, dtype=complex)) <= tol


def _require_hermitian(A, tol, name="matrix"):
    A = as_complex_matrix(A, name)
    if hermiticity_defect(A) > tol:
        raise DomainError(f"{name} is not hermitian (defect {hermiticity_defect(A):.3g} > {tol:.3g})")
    return A


def spectral_decompose(A, eig_tol=None, herm_tol=DEFAULT_TOL):
    """Spectral decomposition with merging of (nearly) degenerate eigenvalues.

    Sorted eigenvalues closer than ``eig_tol`` to their neighbour are chained into one
    eigenspace whose eigenvalue is the group mean. The default tolerance is
    ``1e-9`` times the spectral radius (``1e-9`` for the zero matrix).
    """
    A = _require_hermitian(A, herm_tol)
    hermitian = (A + A.conj().T) / 2
    values, vectors = np.linalg.eigh(hermitian)
    radius = float(np.max(np.abs(values)))
    if eig_tol is None:
        eig_tol = 1e-9 * (radius if radius > 0 else 1.0)

    groups = [[0]]
    for k in range(1, len(values)):
        if values[k] - values[groups[-1][-1]] <= eig_tol:
            groups[-1].append(k)
        else:
            groups.append([k])

    eigenvalues, projectors = [], []
    for group in reversed(groups):
        basis = vectors[:, group]
        projector = basis @ basis.conj().T
        projector.setflags(write=False)
        eigenvalues.append(float(np.mean(values[group])))
        projectors.append(projector)
    return HermitianObservable(A, tuple(eigenvalues), tuple(projectors), eig_tol)


def reconstruct(observable):
    return sum(f * P for f, P in zip(observable.eigenvalues, observable.projectors))


def unitary_at(H, t):
    """e^{-iHt} through the eigendecomposition of H."""
    H = _require_hermitian(H, DEFAULT_TOL, "hamiltonian")
    values, vectors = np.linalg.eigh((H + H.conj().T) / 2)
    return (vectors * np.exp(-1j * values * t)) @ vectors.conj().T


def thermal_state(H, beta):
    H = _require_hermitian(H, DEFAULT_TOL, "hamiltonian")
    if not np.isfinite(beta) or beta < 0:
        raise DomainError(f"inverse temperature must be finite and non-negative, got {beta}")
    values, vectors = np.linalg.eigh((H + H.conj().T) / 2)
    weights = np.exp(-beta * (values - values.min()))
    weights /= weights.sum()
    rho = (vectors * weights) @ vectors.conj().T
    return DensityMatrix.from_matrix((rho + rho.conj().T) / 2)


def kron(*ops):
    return reduce(np.kron, [np.asarray(op, dtype=complex) for op in ops])


def partial_trace_env(X, d_s, d_e):
    """Trace out the second tensor factor of an operator on C^{d_s} (x) C^{d_e}."""
    X = np.asarray(X, dtype=complex).reshape(d_s, d_e, d_s, d_e)
    return np.einsum("iaja->ij", X)


def random_hermitian(d, rng, scale=1.0):
    G = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return scale * (G + G.conj().T) / 2


def random_density(d, rng, rank=None):
    rank = d if rank is None else rank
    G = rng.normal(size=(d, rank)) + 1j * rng.normal(size=(d, rank))
    rho = G @ G.conj().T
    return DensityMatrix.from_matrix(rho / np.trace(rho))


# --------------------------------------------------------------------------------------------------
# Superoperators (column stacking: vec(L X R) = (R^T (x) L) vec(X))
# --------------------------------------------------------------------------------------------------


def vec(X):
    return np.asarray(X, dtype=complex).reshape(-1, order="F")


def unvec(v, dim=None):
    v = np.asarray(v, dtype=complex)
    if dim is None:
        dim = int(round(np.sqrt(v.size)))
    if dim * dim != v.size:
        raise DomainError(f"vector of length {v.size} is not a vectorized square matrix")
    return v.reshape(dim, dim, order="F")


def superop_from_pair(L, R):
    """The map L.R : X -> L X R."""
    L = np.asarray(L, dtype=complex)
    R = np.asarray(R, dtype=complex)
    if L.ndim != 2 or L.shape != R.shape or L.shape[0] != L.shape[1]:
        raise DomainError(f"operator pair has mismatched shapes {L.shape} and {R.shape}")
    return SuperOperator(L.shape[0], np.kron(R.T, L))


def left(V):
    V = np.asarray(V, dtype=complex)
    return superop_from_pair(V, np.eye(V.shape[0]))


def right(V):
    V = np.asarray(V, dtype=complex)
    return superop_from_pair(np.eye(V.shape[0]), V)


def commutator(V):
    """[V, .]"""
    return left(V) - right(V)


def anticommutator(V):
    """{V, .}"""
    return left(V) + right(V)


def conjugation(U):
    """X -> U X U^dagger."""
    U = np.asarray(U, dtype=complex)
    return superop_from_pair(U, U.conj().T)


def superop_exp(S, t):
    return SuperOperator(S.dim, scipy.linalg.expm(t * S.matrix))


def trace_functional(dim):
    """Row vector r with r @ vec(X) = tr X."""
    return vec(np.eye(dim)).conj()


def choi_matrix(S):
    """Choi matrix sum_ij |i><j| (x) S(|i><j|)."""
    d = S.dim
    return np.reshape(S.matrix, [d] * 4).swapaxes(0, 3).reshape(d * d, d * d)


def is_trace_preserving(S, tol=DEFAULT_TOL):
    d = S.dim
    return bool(np.max(np.abs(trace_functional(d) @ S.matrix - trace_functional(d))) <= tol)


def is_trace_annihilating(S, tol=DEFAULT_TOL):
    return bool(np.max(np.abs(trace_functional(S.dim) @ S.matrix)) <= tol)


def choi_min_eigenvalue(S):
    choi = choi_matrix(S)
    return float(np.linalg.eigvalsh((choi + choi.conj().T) / 2).min())


def is_cptp(S, tol=1e-9):
    choi = choi_matrix(S)
    if hermiticity_defect(choi) > tol:
        return False
    if choi_min_eigenvalue(S) < -tol:
        return False
    return is_trace_preserving(S, tol)
