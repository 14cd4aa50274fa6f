import itertools
from dataclasses import dataclass
from enum import Enum

import numpy as np

from core.exceptions import DomainError
from mtcpert.modules.opalg.models import HermitianObservable


class Branch(str, Enum):
    PLUS = "+"
    MINUS = "-"

    @classmethod
    def parse(cls, value):
        if isinstance(value, Branch):
            return value
        try:
            return cls(str(value))
        except ValueError:
            raise DomainError(f"branch must be '+' or '-', got {value!r}")


def check_times(times):
    times = tuple(float(t) for t in times)
    if not times:
        raise DomainError("at least one time is required")
    if times[0] < 0:
        raise DomainError(f"times must be non-negative, got t1 = {times[0]}")
    if any(later < earlier for earlier, later in zip(times, times[1:])):
        raise DomainError(f"times must be sorted ascending, got {times}")
    return times


@dataclass(frozen=True)
class MTCQuery:
    """Timed observables t_1 <= ... <= t_n, each placed on the + or - branch."""

    times: tuple
    observables: tuple
    branches: tuple

    def __post_init__(self):
        object.__setattr__(self, "times", check_times(self.times))
        object.__setattr__(self, "observables", tuple(self.observables))
        object.__setattr__(self, "branches", tuple(Branch.parse(b) for b in self.branches))
        if not len(self.times) == len(self.observables) == len(self.branches):
            raise DomainError("times, observables and branches must have equal lengths")
        if not all(isinstance(obs, HermitianObservable) for obs in self.observables):
            raise DomainError("observables must be spectrally decomposed")

    @property
    def n(self):
        return len(self.times)


@dataclass(frozen=True, eq=False)
class BiProbTable:
    """Dense bi-probability Q(f+, f-) over the spectra of a timed observable sequence.

    ``entries`` has axes (plus_1, ..., plus_n, minus_1, ..., minus_n) in chronological
    order; axis k of an observable indexes its descending eigenvalue list.
    """

    times: tuple
    observables: tuple
    entries: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "times", check_times(self.times))
        object.__setattr__(self, "observables", tuple(self.observables))
        shape = tuple(len(obs) for obs in self.observables)
        entries = np.array(self.entries, dtype=complex)
        if entries.shape != shape + shape:
            raise DomainError(f"table shape {entries.shape} does not match spectra {shape + shape}")
        entries.setflags(write=False)
        object.__setattr__(self, "entries", entries)

    @property
    def n(self):
        return len(self.times)

    def entry(self, fplus, fminus):
        plus = tuple(obs.index_of(f) for obs, f in zip(self.observables, fplus))
        minus = tuple(obs.index_of(f) for obs, f in zip(self.observables, fminus))
        if len(plus) != self.n or len(minus) != self.n:
            raise DomainError(f"expected {self.n} eigenvalues per branch")
        return complex(self.entries[plus + minus])

    def items(self):
        """Yield (f+, f-, value) with eigenvalue tuples in chronological order."""
        spectra = [obs.eigenvalues for obs in self.observables]
        for index in itertools.product(*[range(len(s)) for s in spectra + spectra]):
            plus, minus = index[: self.n], index[self.n :]
            yield (
                tuple(spectra[j][k] for j, k in enumerate(plus)),
                tuple(spectra[j][k] for j, k in enumerate(minus)),
                complex(self.entries[index]),
            )

    def total(self):
        return complex(self.entries.sum())

    def moment(self, branches):
        """sum over the table of prod_j f_j^{branch_j} Q(f+, f-)."""
        branches = [Branch.parse(b) for b in branches]
        if len(branches) != self.n:
            raise DomainError(f"expected {self.n} branch labels, got {len(branches)}")
        weights = np.ones(self.entries.shape)
        for j, branch in enumerate(branches):
            axis = j if branch is Branch.PLUS else self.n + j
            shape = [1] * (2 * self.n)
            shape[axis] = -1
            weights = weights * np.asarray(self.observables[j].eigenvalues).reshape(shape)
        return complex(np.sum(weights * self.entries))

    def marginalize_latest(self):
        if self.n < 2:
            raise DomainError("cannot marginalize a single-time table")
        entries = self.entries.sum(axis=(self.n - 1, 2 * self.n - 1))
        return BiProbTable(self.times[:-1], self.observables[:-1], entries)

    def swapped_conjugate(self):
        """Table with f+ and f- exchanged and values conjugated."""
        axes = list(range(self.n, 2 * self.n)) + list(range(self.n))
        return np.conj(np.transpose(self.entries, axes))

    def hermiticity_defect(self):
        return float(np.max(np.abs(self.entries - self.swapped_conjugate())))

    def is_hermitian(self, tol=1e-12):
        return self.hermiticity_defect() <= tol

    def max_abs_diff(self, other):
        if self.entries.shape != other.entries.shape:
            raise DomainError("tables have different shapes")
        return float(np.max(np.abs(self.entries - other.entries)))

    def __add__(self, other):
        if not isinstance(other, BiProbTable):
            return NotImplemented
        if self.entries.shape != other.entries.shape or not np.allclose(self.times, other.times):
            raise DomainError("tables must share times and spectra to be combined")
        return BiProbTable(self.times, self.observables, self.entries + other.entries)
