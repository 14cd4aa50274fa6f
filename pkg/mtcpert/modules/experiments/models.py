from dataclasses import dataclass, field

import numpy as np

from core.exceptions import DomainError


def _frozen(values):
    array = np.array(values, dtype=float)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class DemoReport:
    """Thermalization of a detector qubit coupled to a probe bath, at orders 0 and 1.

    ``wq_order*`` are the detector transition rates on ``omegas``; ``ratio*`` are
    w^q(-omega)/w^q(omega) and ``target`` is e^{beta omega}.
    """

    omegas: np.ndarray
    wq_order0: np.ndarray
    wq_order1: np.ndarray
    ratio0: np.ndarray
    ratio1: np.ndarray
    target: np.ndarray
    parameters: dict
    path: str
    tolerances: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("omegas", "wq_order0", "wq_order1", "ratio0", "ratio1", "target"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        if not self.omegas.size:
            raise DomainError("demo report needs at least one frequency")

    @property
    def linearized_target(self):
        """(1 + beta omega/2)/(1 - beta omega/2), the first-order detailed-balance ratio."""
        x = self.parameters["beta"] * self.omegas / 2
        return (1 + x) / (1 - x)

    @property
    def deviation0(self):
        return np.abs(self.ratio0 - 1.0)

    @property
    def deviation1(self):
        """Relative deviation of the order-1 ratio from e^{beta omega}."""
        return np.abs(self.ratio1 - self.target) / self.target

    header = ("omega", "wq_order0", "wq_order1", "ratio0", "ratio1", "target_exp_beta_omega")

    def rows(self):
        return list(zip(self.omegas, self.wq_order0, self.wq_order1, self.ratio0, self.ratio1, self.target))


@dataclass(frozen=True, eq=False)
class ScalingReport:
    """Max bi-probability error against the exact composite evolution, per coupling strength."""

    lambdas: np.ndarray
    err_order0: np.ndarray
    err_order1: np.ndarray
    exponent0: float
    exponent1: float
    parameters: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("lambdas", "err_order0", "err_order1"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        if not self.lambdas.size:
            raise DomainError("scaling report needs at least one coupling strength")
        if np.any(self.err_order0 < 0) or np.any(self.err_order1 < 0):
            raise DomainError("errors must be non-negative")

    header = ("lambda", "err_order0", "err_order1")

    def rows(self):
        return list(zip(self.lambdas, self.err_order0, self.err_order1))

    def footer(self):
        return f"fitted exponents: order0={self.exponent0:.6g} order1={self.exponent1:.6g}"


@dataclass(frozen=True, eq=False)
class FdtReport:
    """Both sides of Im int_0^inf Im G(t) e^{-i omega t} dt = tanh(beta omega/2) S(omega)/2."""

    omegas: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray
    window: float
    tolerances: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("omegas", "lhs", "rhs"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))

    @property
    def abs_diff(self):
        return np.abs(self.lhs - self.rhs)

    @property
    def max_deviation(self):
        """Largest difference relative to the largest right-hand side (absolute when that vanishes)."""
        scale = float(np.max(np.abs(self.rhs))) if self.rhs.size else 0.0
        worst = float(np.max(self.abs_diff)) if self.rhs.size else 0.0
        return worst / scale if scale > 0 else worst

    header = ("omega", "lhs", "rhs", "abs_diff")

    def rows(self):
        return list(zip(self.omegas, self.lhs, self.rhs, self.abs_diff))


@dataclass(frozen=True, eq=False)
class SusceptibilityReport:
    times: np.ndarray
    residue_sum: np.ndarray
    high_t_limit: np.ndarray
    numeric_ft: np.ndarray
    parameters: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("times", "residue_sum", "high_t_limit", "numeric_ft"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))

    @property
    def abs_diff(self):
        return np.abs(self.residue_sum - self.numeric_ft)

    header = ("t", "residue_sum", "highT_limit", "numeric_ft", "abs_diff")

    def rows(self):
        return list(zip(self.times, self.residue_sum, self.high_t_limit, self.numeric_ft, self.abs_diff))
