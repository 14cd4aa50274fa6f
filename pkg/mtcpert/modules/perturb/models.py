from dataclasses import dataclass, field

import numpy as np

from core.exceptions import DomainError
from mtcpert.modules.mtc_oracle.models import BiProbTable, check_times
from mtcpert.modules.opalg.models import DensityMatrix, HermitianObservable, SuperOperator, as_complex_matrix


@dataclass(frozen=True, eq=False)
class Intervention:
    """Selective measurement of ``observable`` at time ``t`` keeping (f+, f-)."""

    t: float
    observable: HermitianObservable
    fplus: float
    fminus: float
    superop: SuperOperator


@dataclass(frozen=True, eq=False)
class InterventionGrid:
    """Observables measured at ascending times; projectors are rotated into the frame of ``Hs``."""

    times: tuple
    observables: tuple
    Hs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "times", check_times(self.times))
        object.__setattr__(self, "observables", tuple(self.observables))
        object.__setattr__(self, "Hs", as_complex_matrix(self.Hs, "system hamiltonian"))
        if len(self.times) != len(self.observables):
            raise DomainError("times and observables must have equal lengths")
        if any(obs.dim != self.dim for obs in self.observables):
            raise DomainError(f"observables must act on the {self.dim}-dimensional system")

    @property
    def n(self):
        return len(self.times)

    @property
    def dim(self):
        return self.Hs.shape[0]

    def intervals(self):
        """(t_j - t_{j-1}) for every intervention, with t_0 = 0."""
        previous = (0.0,) + self.times[:-1]
        return tuple(t - p for t, p in zip(self.times, previous))


@dataclass(frozen=True)
class CrossCoefficients:
    """C and K matrices over coupling pairs at one frequency pair.

    ``limits`` holds the lengths (X, Y) of the later and earlier integration ranges.
    """

    omega: float
    omega_prime: float
    C: np.ndarray
    K: np.ndarray
    limits: tuple = (np.inf, np.inf)
    method: str = "closed"
    error: float = 0.0


@dataclass(frozen=True, eq=False)
class CrossCoefficientTable:
    """``C[i, j, a, b]`` = C_{ab}(bohr_freqs[i], bohr_freqs[j]), likewise ``K``.

    ``tau`` is the bath correlation time the table was built with.
    """

    bohr_freqs: tuple
    C: np.ndarray
    K: np.ndarray
    limits: tuple = (np.inf, np.inf)
    tau: float | None = None

    def at(self, i, j):
        return self.C[i, j], self.K[i, j]


@dataclass(frozen=True, eq=False)
class SystemSpec:
    """System hamiltonian (already renormalized), system coupling operators and initial state."""

    Hs0: np.ndarray
    couplings: tuple
    rho0: DensityMatrix

    def __post_init__(self):
        Hs = as_complex_matrix(self.Hs0, "system hamiltonian")
        couplings = np.asarray(self.couplings, dtype=complex)
        if couplings.ndim == 2:
            couplings = couplings[np.newaxis]
        if couplings.shape[1:] != Hs.shape:
            raise DomainError(f"coupling shape {couplings.shape[1:]} does not match hamiltonian {Hs.shape}")
        if self.rho0.dim != Hs.shape[0]:
            raise DomainError(f"initial state has dim {self.rho0.dim}, expected {Hs.shape[0]}")
        object.__setattr__(self, "Hs0", Hs)
        object.__setattr__(self, "couplings", tuple(couplings))

    @property
    def dim(self):
        return self.Hs0.shape[0]


@dataclass(frozen=True, eq=False)
class PerturbativeMTCResult:
    zeroth: complex
    first_correction: complex
    total: complex
    zeroth_table: BiProbTable
    correction_table: BiProbTable | None = None
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        if abs(self.total - (self.zeroth + self.first_correction)) > 1e-12 * max(1.0, abs(self.total)):
            raise DomainError("total must equal zeroth plus first correction")

    @property
    def table(self):
        if self.correction_table is None:
            return self.zeroth_table
        return self.zeroth_table + self.correction_table
