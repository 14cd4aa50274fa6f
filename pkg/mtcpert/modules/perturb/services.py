import logging
import math

import numpy as np

from core.decorators.decorators import require
from core.exceptions import DomainError
from mtcpert.modules.bath.models import DEFAULT_QUADRATURE, ExponentialHighT, FiniteBath
from mtcpert.modules.bath.services import (
    correlation_evaluator,
    correlation_series,
    fourier_half_line,
    gamma_rates,
    laplace_factors,
)
from mtcpert.modules.generators.models import JumpDecomposition
from mtcpert.modules.generators.services import (
    DEFAULT_ODE,
    born_family,
    davies_family,
    generator_bundle,
    jump_decomposition,
    redfield_family,
)
from mtcpert.modules.mtc_oracle.models import BiProbTable, MTCQuery
from mtcpert.modules.mtc_oracle.services import contract_table, heisenberg, pair_tensor
from mtcpert.modules.opalg.models import DensityMatrix, SuperOperator
from mtcpert.modules.opalg.services import anticommutator, commutator, superop_from_pair
from mtcpert.modules.perturb.models import (
    CrossCoefficients,
    CrossCoefficientTable,
    Intervention,
    InterventionGrid,
    PerturbativeMTCResult,
    SystemSpec,
)

logger = logging.getLogger(__name__)

MIN_SEPARATION_FACTOR = 5.0
PROPAGATORS = ("davies", "redfield", "born")
LIMITS = ("infinite", "interval")


def intervention(F, fplus, fminus, t, Hs) -> Intervention:
    """P_t(f+) . P_t(f-) with P_t = e^{iHs t} P e^{-iHs t}."""
    P_plus = heisenberg(F.projector(fplus), Hs, t)
    P_minus = heisenberg(F.projector(fminus), Hs, t)
    return Intervention(float(t), F, fplus, fminus, superop_from_pair(P_plus, P_minus))


def _grid_pairs(grid: InterventionGrid, j):
    t, obs = grid.times[j], grid.observables[j]
    return pair_tensor([heisenberg(P, grid.Hs, t) for P in obs.projectors])


def _zeroth_steps(grid, propagators):
    steps = []
    previous = 0.0
    for j, t in enumerate(grid.times):
        Lam = propagators(t, previous)
        steps.append((Lam.matrix if isinstance(Lam, SuperOperator) else np.asarray(Lam), _grid_pairs(grid, j)))
        previous = t
    return steps


@require(lambda grid, rho0, propagators: rho0.dim == grid.dim, "initial state does not match the system dimension")
def qrf_biprob(grid: InterventionGrid, rho0: DensityMatrix, propagators) -> BiProbTable:
    """tr[prod_j P_j Lambda_{t_j, t_{j-1}} rho0] for every outcome pair, with t_0 = 0."""
    steps = _zeroth_steps(grid, propagators)
    return BiProbTable(grid.times, grid.observables, contract_table(rho0.matrix, steps))


# --------------------------------------------------------------------------------------------------
# C / K coefficients
# --------------------------------------------------------------------------------------------------


def _limits(limits):
    X, Y = (float(v) for v in limits)
    if X < 0 or Y < 0:
        raise DomainError(f"integration ranges must be non-negative, got {limits}")
    return X, Y


def _series_window(m, quad, X, Y):
    infinite = math.isinf(X) or math.isinf(Y)
    return quad.eta if isinstance(m, FiniteBath) and infinite else 0.0


def _closed_pair(m, omega, omega_prime, X, Y, window):
    lam2 = m.lam**2
    values = []
    for part in ("re", "im"):
        series = correlation_series(m, part, window)
        factors = laplace_factors(series.exponents + 1j * omega, X) * laplace_factors(
            series.exponents + 1j * omega_prime, Y
        )
        values.append(-lam2 * np.einsum("k,kab->ab", factors, series.coefficients))
    return values


def _nested_pair(m, omega, omega_prime, X, Y, quad):
    finite = isinstance(m, FiniteBath)
    evaluate = correlation_evaluator(m)
    eta = _series_window(m, quad, X, Y)
    outer = quad.cutoff if math.isinf(X) else X
    inner = Y if not math.isinf(Y) else (quad.cutoff if finite else np.inf)
    n = m.n_couplings
    C, K = np.zeros((n, n), dtype=complex), np.zeros((n, n), dtype=complex)
    error = 0.0
    for a in range(n):
        for b in range(n):
            for target, extract in ((C, np.real), (K, np.imag)):

                def f(s, a=a, b=b, extract=extract):
                    return extract(evaluate(s)[a, b]) * math.exp(-eta * s)

                def inner_integral(x, f=f):
                    return fourier_half_line(lambda y: f(x + y), -omega_prime, inner, quad)[0]

                value, err = fourier_half_line(inner_integral, -omega, outer, quad)
                target[a, b] = -(m.lam**2) * value
                error = max(error, m.lam**2 * err)
    return C, K, error


def cross_coefficients(
    m, omega, omega_prime, quad=DEFAULT_QUADRATURE, limits=(np.inf, np.inf), method="closed"
) -> CrossCoefficients:
    """C, K = -lam^2 int_0^X dx int_0^Y dy e^{i omega x + i omega' y} (Re, Im) G(x + y).

    With infinite ranges this is the nested form int_0^inf du e^{i(w - w')u} int_u^inf dv
    e^{i w' v} G(v). Finite baths are windowed by e^{-eta v} whenever a range is infinite.
    ``method`` selects the exponential-series closed form or nested QUADPACK quadrature.
    """
    X, Y = _limits(limits)
    if method == "closed":
        C, K = _closed_pair(m, omega, omega_prime, X, Y, _series_window(m, quad, X, Y))
        error = 0.0
    elif method == "quadrature":
        C, K, error = _nested_pair(m, omega, omega_prime, X, Y, quad)
    else:
        raise DomainError(f"unknown coefficient method {method!r}")
    return CrossCoefficients(float(omega), float(omega_prime), C, K, (X, Y), method, error)


def cross_coefficient_table(m, jd: JumpDecomposition, quad=DEFAULT_QUADRATURE, limits=(np.inf, np.inf)):
    """C/K for every pair of Bohr frequencies of ``jd``, in closed form."""
    X, Y = _limits(limits)
    if m.n_couplings != jd.n_couplings:
        raise DomainError(f"bath has {m.n_couplings} couplings, system has {jd.n_couplings}")
    freqs = np.array(jd.bohr_freqs)
    window = _series_window(m, quad, X, Y)
    lam2 = m.lam**2
    tables = []
    for part in ("re", "im"):
        series = correlation_series(m, part, window)
        fx = laplace_factors(series.exponents[None, :] + 1j * freqs[:, None], X)
        fy = laplace_factors(series.exponents[None, :] + 1j * freqs[:, None], Y)
        tables.append(-lam2 * np.einsum("ik,jk,kab->ijab", fx, fy, series.coefficients))
    return CrossCoefficientTable(jd.bohr_freqs, tables[0], tables[1], (X, Y), _tau(m, quad))


class CoefficientSource:
    """Callable (X, Y) -> CrossCoefficientTable; ``infinite`` limits ignore the ranges."""

    def __init__(self, m, jd: JumpDecomposition, quad=DEFAULT_QUADRATURE, limits="infinite"):
        if limits not in LIMITS:
            raise DomainError(f"limits must be one of {LIMITS}, got {limits!r}")
        self.m, self.jd, self.quad, self.limits = m, jd, quad, limits
        self.tau = _tau(m, quad)
        self._cache = {}
        if limits == "infinite":
            self._cache[None] = cross_coefficient_table(m, jd, quad)

    def __call__(self, X, Y):
        if self.limits == "infinite":
            return self._cache[None]
        key = (round(X, 12), round(Y, 12))
        if key not in self._cache:
            self._cache[key] = cross_coefficient_table(self.m, self.jd, self.quad, (X, Y))
        return self._cache[key]


def coefficient_source(m, jd: JumpDecomposition, quad=DEFAULT_QUADRATURE, limits="infinite"):
    return CoefficientSource(m, jd, quad, limits)


# --------------------------------------------------------------------------------------------------
# First-order correction
# --------------------------------------------------------------------------------------------------


def _jump_superops(jd):
    n_f, n_a, d = len(jd.bohr_freqs), jd.n_couplings, jd.dim
    comm = np.zeros((n_f, n_a, d * d, d * d), dtype=complex)
    anti = np.zeros_like(comm)
    for i in range(n_f):
        for a in range(n_a):
            comm[i, a] = commutator(jd.jumps[i, a]).matrix
            anti[i, a] = anticommutator(jd.jumps[i, a]).matrix
    return comm, anti


def _sandwich(pairs, t, freqs, comm, anti, table):
    """sum_{w,a} [V_a(w), .] pairs R_{w,a} with R built from C[V(w'), .] + iK{V(w'), .}."""
    mirror = np.arange(len(freqs))[::-1]
    phase = np.exp(1j * (freqs[:, None] + freqs[None, :]) * t)
    C, K = table.C[:, mirror], table.K[:, mirror]
    R = np.einsum("ij,ijab,jbxy->iaxy", phase, C, comm) + 1j * np.einsum("ij,ijab,jbxy->iaxy", phase, K, anti)
    return np.einsum("iaxy,pqyz,iazw->pqxw", comm, pairs, R)


def _separation_warnings(grid, min_separation):
    gaps = np.diff(grid.times)
    if min_separation is None or gaps.size == 0 or gaps.min() >= min_separation:
        return []
    return [f"interventions {gaps.min():.3g} apart, closer than the validity threshold {min_separation:.3g}"]


def first_order_biprob(
    grid: InterventionGrid, rho0: DensityMatrix, propagators, jd: JumpDecomposition, coeffs, min_separation=None
) -> BiProbTable:
    """Cross-intervention correction summed over every intervention with a following interval.

    ``coeffs`` is a CrossCoefficientTable or a callable (X, Y) -> table, where X and Y are
    the intervals after and before the intervention. ``min_separation`` defaults to
    MIN_SEPARATION_FACTOR times the ``tau`` carried by ``coeffs``.
    """
    if rho0.dim != grid.dim or jd.dim != grid.dim:
        raise DomainError("initial state, jumps and grid must share the system dimension")
    if min_separation is None and getattr(coeffs, "tau", None) is not None:
        min_separation = MIN_SEPARATION_FACTOR * coeffs.tau
    for message in _separation_warnings(grid, min_separation):
        logger.warning("first_order_biprob: %s", message)
    shape = tuple(len(obs) for obs in grid.observables)
    entries = np.zeros(shape + shape, dtype=complex)
    if grid.n < 2 or not jd.bohr_freqs:
        return BiProbTable(grid.times, grid.observables, entries)
    steps = _zeroth_steps(grid, propagators)
    freqs = np.array(jd.bohr_freqs)
    comm, anti = _jump_superops(jd)
    intervals = grid.intervals()
    for j in range(grid.n - 1):
        table = coeffs if isinstance(coeffs, CrossCoefficientTable) else coeffs(intervals[j + 1], intervals[j])
        Z = _sandwich(steps[j][1], grid.times[j], freqs, comm, anti, table)
        replaced = steps[:j] + [(steps[j][0], Z)] + steps[j + 1 :]
        entries += contract_table(rho0.matrix, replaced)
    return BiProbTable(grid.times, grid.observables, entries)


# --------------------------------------------------------------------------------------------------
# Assembly
# --------------------------------------------------------------------------------------------------


def _tau(m, quad):
    return m.tau if isinstance(m, ExponentialHighT) else quad.tau


def propagator_family(system: SystemSpec, m, propagator="davies", quad=DEFAULT_QUADRATURE, ode=DEFAULT_ODE):
    """Interaction-picture propagators (t, t_prev) -> SuperOperator with their jumps and rates."""
    if propagator not in PROPAGATORS:
        raise DomainError(f"propagator must be one of {PROPAGATORS}, got {propagator!r}")
    jd = jump_decomposition(system.Hs0, system.couplings)
    if m.n_couplings != jd.n_couplings:
        raise DomainError(f"bath has {m.n_couplings} couplings, system has {jd.n_couplings}")
    if propagator == "born":
        return born_family(jd, m, ode, quad), jd, None
    rates = gamma_rates(m, jd.bohr_freqs, quad)
    if propagator == "redfield":
        return redfield_family(jd, rates), jd, rates
    return davies_family(generator_bundle(jd, rates)), jd, rates


def mtc_perturbative(
    q: MTCQuery,
    system: SystemSpec,
    m,
    order=1,
    propagator="davies",
    limits="infinite",
    quad=DEFAULT_QUADRATURE,
    ode=DEFAULT_ODE,
) -> PerturbativeMTCResult:
    """Moment of the zeroth-order table, plus the first-order correction when ``order`` is 1."""
    if order not in (0, 1):
        raise DomainError(f"perturbative order {order} is not supported (0 or 1)")
    if any(obs.dim != system.dim for obs in q.observables):
        raise DomainError(f"query observables must act on the {system.dim}-dimensional system")
    propagators, jd, rates = propagator_family(system, m, propagator, quad, ode)
    grid = InterventionGrid(q.times, q.observables, system.Hs0)
    tau = _tau(m, quad)
    warnings = list(m.flags) + (list(rates.diagnostics.get("warnings", [])) if rates is not None else [])

    zeroth_table = qrf_biprob(grid, system.rho0, propagators)
    zeroth = zeroth_table.moment(q.branches)
    correction_table = None
    first = 0j
    if order == 1:
        separation = MIN_SEPARATION_FACTOR * tau
        warnings += _separation_warnings(grid, separation)
        coeffs = coefficient_source(m, jd, quad, limits)
        correction_table = first_order_biprob(grid, system.rho0, propagators, jd, coeffs, separation)
        first = correction_table.moment(q.branches)

    diagnostics = {
        "lambda_tau": m.lam * tau,
        "order": order,
        "propagator": propagator,
        "limits": limits,
        "normalization_defect": abs(zeroth_table.total() - 1.0),
        "warnings": list(dict.fromkeys(warnings)),
    }
    if correction_table is not None:
        diagnostics["correction_total"] = abs(correction_table.total())
    logger.info("mtc_perturbative: order %s, %s propagators, lambda*tau = %.3g", order, propagator, m.lam * tau)
    return PerturbativeMTCResult(zeroth, first, zeroth + first, zeroth_table, correction_table, diagnostics)


class PerturbativeService:
    """Perturbative MTCs and bi-probability tables under one set of numerics."""

    def __init__(self, quad=DEFAULT_QUADRATURE, ode=DEFAULT_ODE):
        self.quad = quad
        self.ode = ode

    def mtc(self, q: MTCQuery, system: SystemSpec, m, order=1, propagator="davies", limits="infinite"):
        return mtc_perturbative(q, system, m, order, propagator, limits, self.quad, self.ode)

    def biprob(self, q: MTCQuery, system: SystemSpec, m, order=1, propagator="davies", limits="infinite"):
        """Zeroth-order table, plus the correction when ``order`` is 1."""
        return self.mtc(q, system, m, order, propagator, limits).table
