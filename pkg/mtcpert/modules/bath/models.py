from dataclasses import dataclass, field

import numpy as np

from core.exceptions import DomainError
from mtcpert.modules.opalg.models import DensityMatrix, as_complex_matrix, hermiticity_defect

HIGH_TEMPERATURE_FLAG = 0.2


class CorrelationModel:
    """Common surface of the bath variants."""

    @property
    def flags(self):
        """Regime warnings to report with results computed from this model."""
        return ()


@dataclass(frozen=True, eq=False)
class FiniteBath(CorrelationModel):
    """Exact finite-dimensional environment.

    ``couplings`` are the centred operators E_a = V_a - tr(V_a rho_e); ``rho_e`` must be
    stationary under ``H_e``. ``beta`` is set when ``rho_e`` is the Gibbs state of ``H_e``.
    """

    H_e: np.ndarray
    couplings: tuple
    rho_e: DensityMatrix
    lam: float = 0.0
    beta: float | None = None
    tol: float = field(default=1e-10, compare=False)

    def __post_init__(self):
        H_e = as_complex_matrix(self.H_e, "bath hamiltonian")
        if hermiticity_defect(H_e) > self.tol:
            raise DomainError("bath hamiltonian is not hermitian")
        rho = self.rho_e if isinstance(self.rho_e, DensityMatrix) else DensityMatrix.from_matrix(self.rho_e)
        if rho.dim != H_e.shape[0]:
            raise DomainError(f"bath state has dim {rho.dim}, hamiltonian has dim {H_e.shape[0]}")
        if np.max(np.abs(H_e @ rho.matrix - rho.matrix @ H_e)) > self.tol:
            raise DomainError("bath state is not stationary: [H_e, rho_e] != 0")

        couplings = self.couplings
        if isinstance(couplings, np.ndarray) and couplings.ndim == 2:
            couplings = (couplings,)
        couplings = tuple(as_complex_matrix(E, "bath coupling") for E in couplings)
        if not couplings:
            raise DomainError("at least one bath coupling is required")
        for k, E in enumerate(couplings):
            if E.shape != H_e.shape:
                raise DomainError(f"bath coupling {k} has shape {E.shape}, expected {H_e.shape}")
            if hermiticity_defect(E) > self.tol:
                raise DomainError(f"bath coupling {k} is not hermitian")
            mean = np.trace(E @ rho.matrix)
            if abs(mean) > self.tol:
                raise DomainError(f"bath coupling {k} is not centred: tr(E rho_e) = {mean.real:.3g}")
        if not np.isfinite(self.lam) or self.lam < 0:
            raise DomainError(f"coupling strength must be non-negative, got {self.lam}")

        object.__setattr__(self, "H_e", H_e)
        object.__setattr__(self, "rho_e", rho)
        object.__setattr__(self, "couplings", couplings)
        object.__setattr__(self, "lam", float(self.lam))

    @property
    def dim(self):
        return self.H_e.shape[0]

    @property
    def n_couplings(self):
        return len(self.couplings)


@dataclass(frozen=True)
class ExponentialHighT(CorrelationModel):
    """Single-coupling bath with Re G(s) = e^{-s/tau} and the high-temperature Im G(s) = -(beta/2tau) e^{-s/tau}."""

    tau: float
    beta: float
    lam: float

    def __post_init__(self):
        if not np.isfinite(self.tau) or self.tau <= 0:
            raise DomainError(f"tau must be positive, got {self.tau}")
        if not np.isfinite(self.beta) or self.beta < 0:
            raise DomainError(f"beta must be non-negative, got {self.beta}")
        if not np.isfinite(self.lam) or self.lam < 0:
            raise DomainError(f"lam must be non-negative, got {self.lam}")

    n_couplings = 1

    @property
    def flags(self):
        if self.beta / self.tau > HIGH_TEMPERATURE_FLAG:
            ratio = self.beta / self.tau
            return (f"beta/tau = {ratio:.3g} exceeds the high-temperature regime ({HIGH_TEMPERATURE_FLAG})",)
        return ()


@dataclass(frozen=True, eq=False)
class ExponentialSeries:
    """f(s) = sum_k c_k e^{z_k s} on s >= 0 with matrix coefficients over coupling pairs."""

    coefficients: np.ndarray
    exponents: np.ndarray

    def __post_init__(self):
        coefficients = np.array(self.coefficients, dtype=complex)
        exponents = np.array(self.exponents, dtype=complex).reshape(-1)
        if coefficients.ndim != 3 or coefficients.shape[0] != exponents.shape[0]:
            raise DomainError(
                f"series has {exponents.shape[0]} exponents but coefficients of shape {coefficients.shape}"
            )
        object.__setattr__(self, "coefficients", coefficients)
        object.__setattr__(self, "exponents", exponents)

    def __len__(self):
        return self.exponents.shape[0]

    def __call__(self, s):
        return np.einsum("k,kab->ab", np.exp(self.exponents * s), self.coefficients)

    def damped(self, eta):
        return ExponentialSeries(self.coefficients, self.exponents - eta)

    def scaled(self, factor):
        return ExponentialSeries(factor * self.coefficients, self.exponents)

    def __add__(self, other):
        if not isinstance(other, ExponentialSeries):
            return NotImplemented
        return ExponentialSeries(
            np.concatenate([self.coefficients, other.coefficients]),
            np.concatenate([self.exponents, other.exponents]),
        )


@dataclass(frozen=True, eq=False)
class BohrLines:
    """G_{ab}(s) = sum_k weights[k, a, b] e^{i frequencies[k] s}."""

    frequencies: np.ndarray
    weights: np.ndarray

    def __len__(self):
        return self.frequencies.shape[0]

    @property
    def total_weight(self):
        return float(np.sum(np.abs(self.weights)))


@dataclass(frozen=True)
class QuadratureConfig:
    """Knobs for the half-line quadratures.

    Finite-bath correlations never decay, so their transforms carry the window
    e^{-s/(window_factor tau)} and stop at ``cutoff_factor * tau``.
    """

    tau: float = 1.0
    cutoff_factor: float = 40.0
    window_factor: float = 4.0
    rel_tol: float = 1e-9
    abs_tol: float = 1e-12
    tail_tol: float = 1e-3
    limit: int = 500
    limlst: int = 200

    def __post_init__(self):
        if self.tau <= 0:
            raise DomainError(f"quadrature tau must be positive, got {self.tau}")
        if self.cutoff_factor < 20:
            raise DomainError(f"quadrature cutoff must be at least 20 tau, got {self.cutoff_factor} tau")
        if self.window_factor <= 0:
            raise DomainError("window factor must be positive")

    @property
    def cutoff(self):
        return self.cutoff_factor * self.tau

    @property
    def eta(self):
        return 1.0 / (self.window_factor * self.tau)


@dataclass(frozen=True, eq=False)
class SpectralRates:
    """gamma_{a a'}(omega) = lam^2 int_0^inf G_{a a'}(s) e^{-i omega s} ds per frequency.

    w = gamma + gamma^H and h = -i (gamma - gamma^H) (hermitian over coupling pairs),
    so gamma = (w + i h) / 2 holds by construction.
    """

    frequencies: tuple
    gamma: np.ndarray
    diagnostics: dict = field(default_factory=dict)
    freq_tol: float = 1e-9

    def __post_init__(self):
        frequencies = tuple(float(w) for w in self.frequencies)
        gamma = np.array(self.gamma, dtype=complex)
        if gamma.ndim == 1:
            gamma = gamma.reshape(-1, 1, 1)
        if gamma.ndim != 3 or gamma.shape[0] != len(frequencies) or gamma.shape[1] != gamma.shape[2]:
            raise DomainError(f"rates of shape {gamma.shape} do not match {len(frequencies)} frequencies")
        gamma.setflags(write=False)
        object.__setattr__(self, "frequencies", frequencies)
        object.__setattr__(self, "gamma", gamma)

    @property
    def n_couplings(self):
        return self.gamma.shape[1]

    def index(self, omega):
        for k, w in enumerate(self.frequencies):
            if abs(w - omega) <= self.freq_tol * max(1.0, abs(omega)):
                return k
        raise DomainError(f"no rate evaluated at frequency {omega:.6g}")

    def gamma_matrix(self, omega):
        return self.gamma[self.index(omega)]

    def w_matrix(self, omega):
        g = self.gamma_matrix(omega)
        return g + g.conj().T

    def h_matrix(self, omega):
        g = self.gamma_matrix(omega)
        return -1j * (g - g.conj().T)

    def w(self, omega, alpha=0):
        return float(self.w_matrix(omega)[alpha, alpha].real)

    def h(self, omega, alpha=0):
        return float(self.h_matrix(omega)[alpha, alpha].real)

    def gamma_at(self, omega, alpha=0, alpha_p=0):
        return complex(self.gamma_matrix(omega)[alpha, alpha_p])


DEFAULT_QUADRATURE = QuadratureConfig()
