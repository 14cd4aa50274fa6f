from dataclasses import dataclass, field

import numpy as np

from core.exceptions import DomainError

DEFAULT_TOL = 1e-10


def as_complex_matrix(A, name="matrix"):
    """Validate ``A`` as a finite square complex matrix and return a read-only copy."""
    array = np.array(A, dtype=complex)
    if array.ndim != 2 or array.shape[0] != array.shape[1] or array.shape[0] == 0:
        raise DomainError(f"{name} must be a non-empty square matrix, got shape {array.shape}")
    if not np.all(np.isfinite(array)):
        raise DomainError(f"{name} has non-finite entries")
    array.setflags(write=False)
    return array


def hermiticity_defect(A):
    return float(np.max(np.abs(A - A.conj().T))) if A.size else 0.0


@dataclass(frozen=True)
class HermitianObservable:
    """Hermitian operator with its spectral decomposition F = sum_f f P(f).

    Eigenvalues are distinct and sorted in descending order; ``projectors[k]``
    belongs to ``eigenvalues[k]``.
    """

    matrix: np.ndarray
    eigenvalues: tuple
    projectors: tuple
    eig_tol: float = field(default=1e-9, compare=False)

    @property
    def dim(self):
        return self.matrix.shape[0]

    def index_of(self, value):
        for k, f in enumerate(self.eigenvalues):
            if abs(f - value) <= self.eig_tol * max(1.0, abs(f)):
                return k
        raise DomainError(f"{value} is not an eigenvalue of the observable (spectrum {self.eigenvalues})")

    def projector(self, value):
        return self.projectors[self.index_of(value)]

    def __len__(self):
        return len(self.eigenvalues)


@dataclass(frozen=True)
class DensityMatrix:
    matrix: np.ndarray

    @classmethod
    def from_matrix(cls, rho, tol=DEFAULT_TOL):
        array = as_complex_matrix(rho, "density matrix")
        if hermiticity_defect(array) > tol:
            raise DomainError("density matrix is not hermitian")
        if abs(np.trace(array) - 1.0) > tol:
            raise DomainError(f"density matrix has trace {np.trace(array).real:.3g}, expected 1")
        if np.linalg.eigvalsh(array).min() < -tol:
            raise DomainError("density matrix is not positive semidefinite")
        return cls(array)

    @property
    def dim(self):
        return self.matrix.shape[0]


@dataclass(frozen=True, eq=False)
class SuperOperator:
    """Linear map on d x d operators, stored as a d^2 x d^2 matrix acting on column-stacked vectors."""

    dim: int
    matrix: np.ndarray

    def __post_init__(self):
        matrix = self.matrix
        if not isinstance(matrix, np.ndarray) or matrix.dtype != complex or matrix.flags.writeable:
            matrix = np.array(matrix, dtype=complex)
            matrix.setflags(write=False)
            object.__setattr__(self, "matrix", matrix)
        if matrix.shape != (self.dim**2, self.dim**2):
            raise DomainError(f"superoperator matrix shape {matrix.shape} does not match dim {self.dim}")

    @classmethod
    def identity(cls, dim):
        return cls(dim, np.eye(dim * dim, dtype=complex))

    @classmethod
    def zeros(cls, dim):
        return cls(dim, np.zeros((dim * dim, dim * dim), dtype=complex))

    def apply(self, X):
        X = np.asarray(X, dtype=complex)
        if X.shape != (self.dim, self.dim):
            raise DomainError(f"operator shape {X.shape} does not match superoperator dim {self.dim}")
        return (self.matrix @ X.reshape(-1, order="F")).reshape(self.dim, self.dim, order="F")

    def _check(self, other):
        if not isinstance(other, SuperOperator):
            return NotImplemented
        if other.dim != self.dim:
            raise DomainError(f"dimension mismatch: {self.dim} vs {other.dim}")
        return None

    def __matmul__(self, other):
        if self._check(other) is NotImplemented:
            return NotImplemented
        return SuperOperator(self.dim, self.matrix @ other.matrix)

    def __add__(self, other):
        if self._check(other) is NotImplemented:
            return NotImplemented
        return SuperOperator(self.dim, self.matrix + other.matrix)

    def __sub__(self, other):
        if self._check(other) is NotImplemented:
            return NotImplemented
        return SuperOperator(self.dim, self.matrix - other.matrix)

    def __mul__(self, scalar):
        if not np.isscalar(scalar):
            return NotImplemented
        return SuperOperator(self.dim, scalar * self.matrix)

    __rmul__ = __mul__

    def __neg__(self):
        return SuperOperator(self.dim, -self.matrix)

    def norm(self):
        """Spectral norm of the vectorized matrix."""
        return float(np.linalg.norm(self.matrix, 2))

    def allclose(self, other, atol=1e-12):
        return self.dim == other.dim and bool(np.allclose(self.matrix, other.matrix, rtol=0.0, atol=atol))
