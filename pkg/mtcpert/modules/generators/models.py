from dataclasses import dataclass

import numpy as np

from core.exceptions import DomainError
from mtcpert.modules.bath.models import SpectralRates
from mtcpert.modules.opalg.models import SuperOperator


@dataclass(frozen=True, eq=False)
class JumpDecomposition:
    """V_a(omega) = sum over E_k - E_k' = omega of |k><k| V_a |k'><k'|.

    ``jumps[i, a]`` is the jump operator of coupling ``a`` at ``bohr_freqs[i]``;
    frequencies are ascending and closed under negation.
    """

    Hs: np.ndarray
    couplings: tuple
    bohr_freqs: tuple
    jumps: np.ndarray
    freq_tol: float

    @property
    def dim(self):
        return self.Hs.shape[0]

    @property
    def n_couplings(self):
        return len(self.couplings)

    def index(self, omega):
        for k, w in enumerate(self.bohr_freqs):
            if abs(w - omega) <= self.freq_tol:
                return k
        raise DomainError(f"{omega:.6g} is not a Bohr frequency of the system")

    def mirror(self, i):
        """Index of -bohr_freqs[i]."""
        return len(self.bohr_freqs) - 1 - i

    def jump(self, omega, alpha=0):
        return self.jumps[self.index(omega), alpha]


@dataclass(frozen=True)
class OdeConfig:
    """Fixed-step RK4 settings; the default step is tau/50."""

    tau: float = 1.0
    dt: float | None = None
    max_steps: int = 1_000_000

    def __post_init__(self):
        if self.tau <= 0:
            raise DomainError(f"ode tau must be positive, got {self.tau}")
        if self.dt is not None and self.dt <= 0:
            raise DomainError(f"ode step must be positive, got {self.dt}")

    @property
    def step(self):
        return self.dt if self.dt is not None else self.tau / 50


@dataclass(frozen=True, eq=False)
class GeneratorBundle:
    davies: SuperOperator
    redfield: SuperOperator
    jd: JumpDecomposition
    rates: SpectralRates
    t_interval: tuple | None = None
