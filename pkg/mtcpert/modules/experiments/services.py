import dataclasses
import logging
import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from scipy.interpolate import CubicSpline

from core.configuration.configuration import get_thread_limit
from core.exceptions import DomainError
from mtcpert.modules.bath.models import DEFAULT_QUADRATURE, ExponentialHighT, FiniteBath
from mtcpert.modules.bath.services import (
    correlation_evaluator,
    correlation_series,
    fdt_im_spectrum,
    finite_bath,
    fourier_half_line,
    is_thermal,
    series_transform,
    susceptibility_numeric,
    susceptibility_residue,
)
from mtcpert.modules.experiments.models import DemoReport, FdtReport, ScalingReport, SusceptibilityReport
from mtcpert.modules.generators.services import DEFAULT_ODE, born_family, jump_decomposition
from mtcpert.modules.mtc_oracle.models import MTCQuery
from mtcpert.modules.mtc_oracle.services import biprob_exact, embed_system
from mtcpert.modules.opalg.models import DensityMatrix
from mtcpert.modules.opalg.services import PAULI_X, PAULI_Z, kron, spectral_decompose
from mtcpert.modules.perturb.models import InterventionGrid, SystemSpec
from mtcpert.modules.perturb.services import coefficient_source, first_order_biprob, mtc_perturbative, qrf_biprob

logger = logging.getLogger(__name__)

MAX_COMPOSITE_DIM = 64
MAX_LAMBDA_TAU = 0.2
MIN_LAMBDA_TAU = 0.01
EXPONENTIAL_FIT_TOL = 1e-9


def _map(fn, items, threads):
    threads = get_thread_limit() if threads is None else max(1, int(threads))
    if threads == 1 or len(items) < 2:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


# --------------------------------------------------------------------------------------------------
# Detector thermalization
# --------------------------------------------------------------------------------------------------


def _fit_exponential(us, values):
    """(A, kappa) when values = A e^{-kappa u} on the whole grid, else None."""
    if len(us) < 2 or values[0] == 0 or values[-1] == 0:
        return None
    kappa = -float(np.log(values[-1] / values[0]).real) / (us[-1] - us[0])
    if kappa <= 0:
        return None
    amplitude = values[0] * math.exp(kappa * us[0])
    residual = np.max(np.abs(values - amplitude * np.exp(-kappa * us)))
    if residual > EXPONENTIAL_FIT_TOL * np.max(np.abs(values)):
        return None
    return amplitude, kappa


def detector_rates(us, values, omegas, mu, quad=DEFAULT_QUADRATURE):
    """w^q(omega) = 2 mu^2 Re int_0^inf MTC(u) e^{-i omega u} du from MTC samples.

    A pure exponential A e^{-kappa u} is transformed analytically; anything else is
    interpolated with a cubic spline and integrated up to the last sample.
    Returns the rates and the path taken.
    """
    us, values = np.asarray(us, dtype=float), np.asarray(values, dtype=complex)
    omegas = np.asarray(omegas, dtype=float)
    fit = _fit_exponential(us, values)
    if fit is not None:
        amplitude, kappa = fit
        return 2 * mu**2 * np.real(amplitude / (kappa + 1j * omegas)), "laplace"
    logger.info("detector_rates: correlation is not a pure exponential, using quadrature")
    spline = CubicSpline(us, values)
    rates = [2 * mu**2 * fourier_half_line(spline, w, us[-1], quad)[0].real for w in omegas]
    return np.array(rates), "quadrature"


def _detector_mtc(m, order, dt_grid, threads):
    system = SystemSpec(np.zeros((2, 2)), PAULI_X, DensityMatrix.from_matrix(np.eye(2) / 2))
    sigma_z = spectral_decompose(PAULI_Z)

    def evaluate(dt):
        q = MTCQuery((0.0, dt), (sigma_z, sigma_z), ("+", "+"))
        return mtc_perturbative(q, system, m, order=order).total

    return np.array(_map(evaluate, list(dt_grid), threads))


def run_thermalization_demo(
    beta=0.2, lam=0.1, mu=0.05, tau=1.0, omega_grid=None, dt_grid=None, quad=DEFAULT_QUADRATURE, threads=None
) -> DemoReport:
    """Detector qubit sigma_z coupled with strength mu to a probe qubit that sits in the exponential bath.

    The probe's two-time sigma_z correlation is computed at orders 0 and 1 and
    transformed into the detector rates w^q(omega).
    """
    omegas = np.linspace(-0.5, 0.5, 11) if omega_grid is None else np.asarray(omega_grid, dtype=float)
    if lam * tau > MAX_LAMBDA_TAU:
        raise DomainError(f"lambda*tau = {lam * tau:.3g} exceeds {MAX_LAMBDA_TAU}")
    if np.any(beta * np.abs(omegas) >= 2):
        raise DomainError("beta*|omega| must stay below 2 on the frequency grid")
    if mu <= 0:
        raise DomainError(f"mu must be positive, got {mu}")
    m = ExponentialHighT(tau=tau, beta=beta, lam=lam)
    if dt_grid is None:
        kappa = 4 * lam**2 * tau
        dt_grid = 5 * tau + np.linspace(0.0, 3.0 / kappa, 7)
    dt_grid = np.asarray(dt_grid, dtype=float)

    both = np.concatenate([omegas, -omegas])
    rates, paths = [], []
    for order in (0, 1):
        values = _detector_mtc(m, order, dt_grid, threads)
        rate, path = detector_rates(dt_grid, values, both, mu, quad)
        rates.append(rate)
        paths.append(path)
    n = omegas.size
    w0, w1 = rates[0][:n], rates[1][:n]
    ratio0, ratio1 = rates[0][n:] / w0, rates[1][n:] / w1
    parameters = {
        "beta": beta,
        "lambda": lam,
        "mu": mu,
        "tau": tau,
        "w_b0": 2 * lam**2 * tau,
        "K00": lam**2 * beta * tau / 2,
        "dt_min": float(dt_grid[0]),
        "dt_max": float(dt_grid[-1]),
    }
    path = paths[0] if paths[0] == paths[1] else "mixed"
    logger.info("run_thermalization_demo: %s frequencies, %s path", n, path)
    return DemoReport(
        omegas,
        w0,
        w1,
        ratio0,
        ratio1,
        np.exp(beta * omegas),
        parameters,
        path,
        {"exponential_fit": EXPONENTIAL_FIT_TOL, "rel_tol": quad.rel_tol, "abs_tol": quad.abs_tol},
    )


# --------------------------------------------------------------------------------------------------
# Error scaling against the exact composite evolution
# --------------------------------------------------------------------------------------------------


def default_scaling_bath(seed=7, beta=0.5):
    """Three bath qubits whose hamiltonian and coupling respect the parity Z(x)Z(x)Z.

    The coupling is odd under parity, so every odd moment of the thermal bath vanishes.
    """
    rng = np.random.default_rng(seed)
    identity = np.eye(2)

    def site(op, k):
        return kron(*[op if j == k else identity for j in range(3)])

    fields = rng.uniform(0.5, 1.5, size=3)
    H_e = sum(fields[k] * site(PAULI_Z, k) for k in range(3))
    for k, j in ((0, 1), (1, 2), (0, 2)):
        H_e = H_e + rng.uniform(0.2, 0.6) * site(PAULI_X, k) @ site(PAULI_X, j)
    V_e = sum(rng.uniform(0.5, 1.0) * site(PAULI_X, k) for k in range(3))
    return finite_bath(H_e, V_e, beta)


def default_scaling_system():
    """Qubit with a tilted field, coupled through sigma_x, started off the energy axis."""
    Hs = 0.6 * PAULI_Z + 0.2 * PAULI_X
    rho0 = DensityMatrix.from_matrix((np.eye(2) + 0.6 * PAULI_X + 0.3 * PAULI_Z) / 2)
    return SystemSpec(Hs, PAULI_X, rho0)


def composite_evolution(system, m):
    d_e = m.dim
    H = kron(system.Hs0, np.eye(d_e)) + kron(np.eye(system.dim), m.H_e)
    for V, E in zip(system.couplings, m.couplings):
        H = H + m.lam * kron(V, E)
    rho = DensityMatrix.from_matrix(kron(system.rho0.matrix, m.rho_e.matrix))
    return H, rho


def _scaling_errors(bath, system, times, observables, lam, quad, ode):
    m = dataclasses.replace(bath, lam=lam)
    H, rho = composite_evolution(system, m)
    embedded = [spectral_decompose(embed_system(obs.matrix, m.dim)) for obs in observables]
    exact = biprob_exact(times, embedded, H, rho)

    jd = jump_decomposition(system.Hs0, system.couplings)
    propagators = born_family(jd, m, ode, quad)
    grid = InterventionGrid(times, observables, system.Hs0)
    zeroth = qrf_biprob(grid, system.rho0, propagators)
    correction = first_order_biprob(grid, system.rho0, propagators, jd, coefficient_source(m, jd, quad, "interval"))
    err0 = float(np.max(np.abs(exact.entries - zeroth.entries)))
    err1 = float(np.max(np.abs(exact.entries - zeroth.entries - correction.entries)))
    logger.debug("error_scaling_study: lambda = %.4g, errors %.3g / %.3g", lam, err0, err1)
    return err0, err1


def _fit_exponent(lambdas, errors):
    mask = (lambdas > 0) & (errors > 0)
    if np.count_nonzero(mask) < 2:
        return float("nan")
    return float(np.polyfit(np.log(lambdas[mask]), np.log(errors[mask]), 1)[0])


def error_scaling_study(
    bath: FiniteBath,
    system: SystemSpec,
    lambda_grid,
    times,
    observables=None,
    quad=DEFAULT_QUADRATURE,
    ode=DEFAULT_ODE,
    threads=None,
) -> ScalingReport:
    """Order-0 and order-1 bi-probability errors against the exact composite, per lambda.

    Propagators are Born; the cross coefficients run over the actual neighbouring
    intervals. Observables default to sigma_z on a qubit system.
    """
    if not isinstance(bath, FiniteBath):
        raise DomainError("the error scaling study needs a finite bath")
    if system.dim * bath.dim > MAX_COMPOSITE_DIM:
        raise DomainError(f"composite dimension {system.dim * bath.dim} exceeds {MAX_COMPOSITE_DIM}")
    if observables is None:
        if system.dim != 2:
            raise DomainError("default observables need a qubit system")
        observables = [spectral_decompose(PAULI_Z)] * len(times)
    lambdas = np.asarray(lambda_grid, dtype=float)
    if not lambdas.size:
        raise DomainError("lambda grid is empty")
    scaled = lambdas * quad.tau
    if np.any((scaled != 0) & ((scaled < MIN_LAMBDA_TAU) | (scaled > MAX_LAMBDA_TAU))):
        raise DomainError(f"lambda*tau must be 0 or within [{MIN_LAMBDA_TAU}, {MAX_LAMBDA_TAU}]")

    def run(lam):
        return _scaling_errors(bath, system, tuple(times), observables, lam, quad, ode)

    errors = _map(run, list(lambdas), threads)
    err0 = np.array([e[0] for e in errors])
    err1 = np.array([e[1] for e in errors])
    parameters = {
        "times": tuple(float(t) for t in times),
        "bath_dim": bath.dim,
        "beta": bath.beta,
        "propagator": "born",
        "limits": "interval",
        "ode_step": ode.step,
        "rel_tol": quad.rel_tol,
        "cutoff": quad.cutoff,
    }
    return ScalingReport(lambdas, err0, err1, _fit_exponent(lambdas, err0), _fit_exponent(lambdas, err1), parameters)


# --------------------------------------------------------------------------------------------------
# Fluctuation-dissipation and susceptibility reports
# --------------------------------------------------------------------------------------------------


def _finite_fdt_sides(m, omegas, alpha, quad):
    """Both sides smoothed by the window e^{-eta|t|}; the finite-bath spectrum is a set of lines."""
    eta = quad.eta
    evaluate = correlation_evaluator(m)
    lhs = [
        fourier_half_line(lambda s: evaluate(s)[alpha, alpha].imag * math.exp(-eta * s), w, np.inf, quad)[0].imag
        for w in omegas
    ]
    series = correlation_series(m, "re")
    nu = series.exponents.imag
    weights = np.tanh(m.beta * nu / 2) * series.coefficients[:, alpha, alpha].real
    rhs = [float(np.sum(weights * eta / (eta**2 + (w - nu) ** 2))) for w in omegas]
    return lhs, rhs, eta


def fdt_verification(m, omega_grid, F=None, alpha=0, quad=DEFAULT_QUADRATURE) -> FdtReport:
    """Compare Im int_0^inf Im G(t) e^{-i omega t} dt with tanh(beta omega/2) S(omega)/2.

    ``F`` replaces the bath coupling of a finite bath. The exponential model is
    checked in closed form; finite baths transform the exact correlation numerically.
    """
    if F is not None:
        if not isinstance(m, FiniteBath):
            raise DomainError("only a finite bath can take a replacement coupling")
        m = finite_bath(m.H_e, F, m.beta, m.lam)
    if not is_thermal(m):
        raise DomainError("the fluctuation-dissipation check needs a thermal bath state")
    omegas = np.asarray(omega_grid, dtype=float)
    if isinstance(m, ExponentialHighT):
        series = correlation_series(m, "im")
        lhs = [series_transform(series, w)[0, 0].imag for w in omegas]
        rhs = [fdt_im_spectrum(m, w, alpha, quad) for w in omegas]
        window = 0.0
    else:
        lhs, rhs, window = _finite_fdt_sides(m, omegas, alpha, quad)
    return FdtReport(omegas, lhs, rhs, window, {"rel_tol": quad.rel_tol, "abs_tol": quad.abs_tol})


def susceptibility_table(t_grid, beta, tau, n_terms=None, quad=DEFAULT_QUADRATURE) -> SusceptibilityReport:
    """Residue sum, high-temperature limit and numeric inverse transform on ``t_grid``."""
    times = np.asarray(t_grid, dtype=float)
    residue = [susceptibility_residue(t, beta, tau, n_terms) for t in times]
    high_t = -beta / (2 * tau) * np.exp(-times / tau)
    numeric = [susceptibility_numeric(t, beta, tau, quad) for t in times]
    return SusceptibilityReport(times, residue, high_t, numeric, {"beta": beta, "tau": tau, "n_terms": n_terms})


class ExperimentsService:
    """Study runners sharing quadrature, ODE settings and the worker-thread cap."""

    def __init__(self, quad=DEFAULT_QUADRATURE, ode=DEFAULT_ODE, threads=None):
        self.quad = quad
        self.ode = ode
        self.threads = threads

    def thermalization_demo(self, beta=0.2, lam=0.1, mu=0.05, tau=1.0, omega_grid=None, dt_grid=None):
        return run_thermalization_demo(beta, lam, mu, tau, omega_grid, dt_grid, self.quad, self.threads)

    def error_scaling(self, bath, system, lambda_grid, times, observables=None):
        return error_scaling_study(bath, system, lambda_grid, times, observables, self.quad, self.ode, self.threads)

    def fdt(self, m, omega_grid, F=None, alpha=0):
        return fdt_verification(m, omega_grid, F, alpha, self.quad)

    def susceptibility(self, t_grid, beta, tau, n_terms=None):
        return susceptibility_table(t_grid, beta, tau, n_terms, self.quad)
