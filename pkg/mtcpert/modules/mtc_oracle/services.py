import logging

import numpy as np

from core.decorators.decorators import require
from core.exceptions import DomainError
from mtcpert.modules.mtc_oracle.models import BiProbTable, Branch, MTCQuery, check_times
from mtcpert.modules.opalg.models import DensityMatrix, as_complex_matrix
from mtcpert.modules.opalg.services import conjugation, trace_functional, unitary_at, vec

logger = logging.getLogger(__name__)


def _dims_match(H, rho, observables=()):
    d = np.shape(H)[0]
    return np.shape(rho.matrix if isinstance(rho, DensityMatrix) else rho)[0] == d and all(
        obs.dim == d for obs in observables
    )


def heisenberg(F, H, t):
    F = as_complex_matrix(F, "observable")
    if F.shape != np.shape(H):
        raise DomainError(f"observable shape {F.shape} does not match hamiltonian {np.shape(H)}")
    U = unitary_at(H, t)
    return U.conj().T @ F @ U


def embed_system(op, d_e):
    """F^s -> F^s (x) 1^e."""
    return np.kron(np.asarray(op, dtype=complex), np.eye(d_e))


# --------------------------------------------------------------------------------------------------
# Multi-time correlations and bi-probabilities
# --------------------------------------------------------------------------------------------------


def _ordered_product(operators, dim):
    """Later operators to the left; list order breaks ties."""
    product = np.eye(dim, dtype=complex)
    for op in operators:
        product = op @ product
    return product


@require(lambda q, H, rho: _dims_match(H, rho, q.observables), "dimension mismatch between query, H and rho")
def mtc_exact(q: MTCQuery, H, rho: DensityMatrix):
    """tr[ T{prod_{I+} F_j(t_j)} rho T{prod_{I-} F_k(t_k)}^dagger ]."""
    d = rho.dim
    plus = [heisenberg(obs.matrix, H, t) for obs, t, b in zip(q.observables, q.times, q.branches) if b is Branch.PLUS]
    minus = [heisenberg(obs.matrix, H, t) for obs, t, b in zip(q.observables, q.times, q.branches) if b is Branch.MINUS]
    left = _ordered_product(plus, d)
    right = _ordered_product(minus, d)
    return complex(np.trace(left @ rho.matrix @ right.conj().T))


def pair_tensor(projectors):
    """Stack of superoperators P_a . P_b as an array indexed [a, b, :, :]."""
    projectors = [np.asarray(P, dtype=complex) for P in projectors]
    return np.array([[np.kron(Pb.T, Pa) for Pb in projectors] for Pa in projectors])


def contract_table(rho, steps):
    """Run the intervention sweep shared by the exact oracle and the perturbative tables.

    ``steps`` is a list of ``(propagator, pairs)``: a d^2 x d^2 propagator matrix (or
    ``None``) applied before the pair tensor ``pairs[a, b]``. Returns entries with axes
    (plus_1..plus_n, minus_1..minus_n).
    """
    rho = np.asarray(rho, dtype=complex)
    dim = rho.shape[0]
    states = vec(rho)
    for propagator, pairs in steps:
        if propagator is not None:
            states = states @ np.asarray(propagator).T
        states = np.einsum("abwv,...v->...abw", pairs, states)
    values = states @ trace_functional(dim)
    n = len(steps)
    order = list(range(0, 2 * n, 2)) + list(range(1, 2 * n, 2))
    return np.transpose(values, order)


@require(lambda observables, H, rho: _dims_match(H, rho, observables), "dimension mismatch")
def biprob_exact(times, observables, H, rho: DensityMatrix):
    """Q(f+, f-) = tr[ T{prod P(f+)} rho T{prod P(f-)}^dagger ] for a closed system."""
    times = check_times(times)
    observables = tuple(observables)
    if len(times) != len(observables):
        raise DomainError("times and observables must have equal lengths")
    steps = []
    previous = 0.0
    for t, obs in zip(times, observables):
        propagator = conjugation(unitary_at(H, t - previous)).matrix
        steps.append((propagator, pair_tensor(obs.projectors)))
        previous = t
    return BiProbTable(times, observables, contract_table(rho.matrix, steps))


# --------------------------------------------------------------------------------------------------
# Moments and cumulants
# --------------------------------------------------------------------------------------------------


def _set_partitions(items):
    """All partitions of ``items`` into blocks that keep the input order."""
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for partition in _set_partitions(rest):
        for k in range(len(partition)):
            yield partition[:k] + [(first,) + partition[k]] + partition[k + 1 :]
        yield [(first,)] + partition


def ordered_partitions(n):
    """Partitions of (n, ..., 1) into blocks that keep the descending order of their members."""
    if n < 0:
        raise DomainError("n must be non-negative")
    if n == 0:
        return [()]
    partitions = []
    for partition in _set_partitions(tuple(range(n, 0, -1))):
        blocks = sorted(partition, key=lambda block: (-len(block), -block[0]))
        partitions.append(tuple(blocks))
    partitions.sort(key=lambda p: (len(p), [(-len(b), [-x for x in b]) for b in p]))
    return partitions


def cumulant(moment_fn, seq):
    """Cumulant <<Z_seq>> from moments by recursive inversion of the partition sum.

    ``moment_fn`` maps an ordered subsequence of ``seq`` (a tuple) to its moment and
    must return 1 for the empty tuple. Arithmetic stays in the moment type, so
    ``fractions.Fraction`` moments give exact cumulants.
    """
    seq = tuple(seq)
    if not seq:
        return moment_fn(())
    cache = {}

    def kappa(positions):
        if positions in cache:
            return cache[positions]
        value = moment_fn(tuple(seq[p] for p in positions))
        for partition in _set_partitions(positions):
            if len(partition) == 1:
                continue
            term = 1
            for block in partition:
                term = term * kappa(block)
            value = value - term
        cache[positions] = value
        return value

    return kappa(tuple(range(len(seq))))


def moment_from_cumulants(cumulant_fn, seq):
    """<Z_seq> = sum over partitions of the product of block cumulants."""
    seq = tuple(seq)
    total = 0
    for partition in _set_partitions(seq):
        term = 1
        for block in partition:
            term = term * cumulant_fn(block)
        total = total + term
    return total


def table_moment_fn(table: BiProbTable, branches):
    """Moment function over time labels 1..n backed by a bi-probability table."""
    branches = [Branch.parse(b) for b in branches]
    spectra = [np.asarray(obs.eigenvalues) for obs in table.observables]

    def moment_fn(labels):
        weights = np.ones(table.entries.shape)
        for label in labels:
            j = label - 1
            if not 0 <= j < table.n:
                raise DomainError(f"time label {label} outside 1..{table.n}")
            axis = j if branches[j] is Branch.PLUS else table.n + j
            shape = [1] * (2 * table.n)
            shape[axis] = -1
            weights = weights * spectra[j].reshape(shape)
        return complex(np.sum(weights * table.entries))

    return moment_fn


def hierarchy_truncation(moment_fn, seq, split, order=1):
    """Approximate <Z_seq> from the correlation-strength hierarchy.

    ``seq`` is split into the later block (labels > split) and the earlier block
    (labels <= split). Order 0 factorizes the blocks; order 1 adds every cross-block
    two-time cumulant with the remaining moments of each block.
    """
    if order not in (0, 1):
        raise DomainError(f"hierarchy order {order} is not supported")
    later = tuple(label for label in seq if label > split)
    earlier = tuple(label for label in seq if label <= split)
    value = moment_fn(later) * moment_fn(earlier)
    if order == 1:
        for j in later:
            for k in earlier:
                rest_later = tuple(label for label in later if label != j)
                rest_earlier = tuple(label for label in earlier if label != k)
                value = value + moment_fn(rest_later) * moment_fn(rest_earlier) * cumulant(moment_fn, (j, k))
    return value


# --------------------------------------------------------------------------------------------------
# Two-time response functions
# --------------------------------------------------------------------------------------------------


def _two_time(F, H, rho, t2, t1):
    if t2 < 0 or t1 < 0:
        raise DomainError("times must be non-negative")
    F2, F1 = heisenberg(F, H, t2), heisenberg(F, H, t1)
    rho = rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho)
    return complex(np.trace(F2 @ F1 @ rho)), np.trace(F2 @ rho).real, np.trace(F1 @ rho).real


def autocorrelation(F, H, rho, t2, t1):
    """C = Re<F(t2)F(t1)> - <F(t2)><F(t1)>."""
    product, mean2, mean1 = _two_time(F, H, rho, t2, t1)
    return product.real - mean2 * mean1


def susceptibility(F, H, rho, t2, t1):
    """K = Theta(t2 - t1) Im<F(t2)F(t1)>, with Theta(0) = 0."""
    product, _, _ = _two_time(F, H, rho, t2, t1)
    return product.imag if t2 > t1 else 0.0
