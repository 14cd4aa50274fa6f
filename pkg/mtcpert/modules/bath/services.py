import logging
import math

import numpy as np
from scipy import integrate

from core.exceptions import DomainError, NumericError
from mtcpert.modules.bath.models import (
    DEFAULT_QUADRATURE,
    BohrLines,
    CorrelationModel,
    ExponentialHighT,
    ExponentialSeries,
    FiniteBath,
    SpectralRates,
)
from mtcpert.modules.opalg.services import thermal_state, unitary_at

logger = logging.getLogger(__name__)

POLE_GUARD = 1e-6
SERIES_FLOOR = 1e-14
MAX_SERIES_TERMS = 100_000
SERIES_PARTS = ("full", "conj", "re", "im")


def finite_bath(H_e, V_e, beta, lam=0.0):
    """Thermal finite bath with couplings centred as E = V - tr(V rho_e)."""
    rho = thermal_state(H_e, beta)
    V_e = np.asarray(V_e, dtype=complex)
    if V_e.ndim == 2:
        V_e = V_e[np.newaxis]
    identity = np.eye(rho.dim)
    couplings = tuple(V - np.trace(V @ rho.matrix) * identity for V in V_e)
    return FiniteBath(H_e, couplings, rho, lam, beta)


def is_thermal(m, tol=1e-9):
    if isinstance(m, ExponentialHighT):
        return True
    if m.beta is None:
        return False
    return bool(np.max(np.abs(m.rho_e.matrix - thermal_state(m.H_e, m.beta).matrix)) <= tol)


def _require_thermal(m):
    if not is_thermal(m):
        raise DomainError("the fluctuation-dissipation relation needs a thermal bath state")


def _check_coupling(m, *indices):
    if not isinstance(m, CorrelationModel):
        raise DomainError(f"expected a bath correlation model, got {type(m).__name__}")
    for index in indices:
        if not 0 <= index < m.n_couplings:
            raise DomainError(f"coupling index {index} outside 0..{m.n_couplings - 1}")


# --------------------------------------------------------------------------------------------------
# Correlation functions
# --------------------------------------------------------------------------------------------------


def corr_fn(m, u, alpha=0, alpha_p=0):
    """G_{a a'}(u) = tr[E_a(u) E_a'(0) rho_e], without the lam^2 prefactor."""
    if u < 0:
        raise DomainError(f"correlation lag must be non-negative, got {u}")
    _check_coupling(m, alpha, alpha_p)
    if isinstance(m, ExponentialHighT):
        return complex((1.0 - 0.5j * m.beta / m.tau) * math.exp(-u / m.tau))
    U = unitary_at(m.H_e, u)
    E_u = U.conj().T @ m.couplings[alpha] @ U
    return complex(np.trace(E_u @ m.couplings[alpha_p] @ m.rho_e.matrix))


def bohr_lines(m: FiniteBath, tol=None):
    """Exact line decomposition G_{ab}(u) = sum_k g_k e^{i nu_k u} in the eigenbasis of H_e.

    nu = E_m - E_n carries the weight (E_a)_{mn} (E_b rho_e)_{nm}; frequencies closer
    than ``tol`` are merged.
    """
    if not isinstance(m, FiniteBath):
        raise DomainError("Bohr lines exist only for finite baths")
    values, W = np.linalg.eigh((m.H_e + m.H_e.conj().T) / 2)
    E = np.array([W.conj().T @ Ea @ W for Ea in m.couplings])
    B = np.array([W.conj().T @ Ea @ m.rho_e.matrix @ W for Ea in m.couplings])
    nu = (values[:, None] - values[None, :]).reshape(-1)
    weights = np.einsum("amn,bnm->mnab", E, B).reshape(nu.size, m.n_couplings, m.n_couplings)

    if tol is None:
        tol = 1e-9 * max(1.0, float(np.max(np.abs(nu))))
    order = np.argsort(nu, kind="stable")
    groups = [[order[0]]]
    for k in order[1:]:
        if nu[k] - nu[groups[-1][-1]] <= tol:
            groups[-1].append(k)
        else:
            groups.append([k])
    frequencies = np.array([np.mean(nu[g]) for g in groups])
    line_weights = np.array([weights[g].sum(axis=0) for g in groups])
    return BohrLines(frequencies, line_weights)


def correlation_series(m, part="full", window=0.0):
    """Exponential-series form of G (``full``), G* (``conj``), Re G or Im G, each times e^{-window s}.

    Re and Im are taken entrywise over coupling pairs, so G = Re G + i Im G.
    """
    if part not in SERIES_PARTS:
        raise DomainError(f"series part must be one of {SERIES_PARTS}, got {part!r}")
    if isinstance(m, ExponentialHighT):
        weight = {
            "full": 1.0 - 0.5j * m.beta / m.tau,
            "conj": 1.0 + 0.5j * m.beta / m.tau,
            "re": 1.0,
            "im": -0.5 * m.beta / m.tau,
        }[part]
        series = ExponentialSeries(np.full((1, 1, 1), weight, dtype=complex), [-1.0 / m.tau])
    else:
        lines = bohr_lines(m)
        g, z = lines.weights, 1j * lines.frequencies
        if part == "full":
            series = ExponentialSeries(g, z)
        elif part == "conj":
            series = ExponentialSeries(g.conj(), z.conj())
        elif part == "re":
            series = ExponentialSeries(0.5 * g, z) + ExponentialSeries(0.5 * g.conj(), z.conj())
        else:
            series = ExponentialSeries(g / 2j, z) + ExponentialSeries(-g.conj() / 2j, z.conj())
    return series.damped(window) if window else series


def laplace_factors(a, upper):
    """int_0^upper e^{a s} ds, elementwise over ``a``."""
    a = np.asarray(a, dtype=complex)
    if np.isinf(upper):
        if np.any(a.real >= 0):
            raise DomainError("correlation does not decay; the half-line transform diverges (use a window)")
        return -1.0 / a
    if upper < 0:
        raise DomainError(f"upper limit must be non-negative, got {upper}")
    small = np.abs(a) * upper < 1e-8
    safe = np.where(small, 1.0, a)
    return np.where(small, upper * (1.0 + a * upper / 2), np.expm1(safe * upper) / safe)


def series_transform(series: ExponentialSeries, omega, upper=np.inf):
    """int_0^upper f(s) e^{-i omega s} ds for an exponential series f."""
    factors = laplace_factors(series.exponents - 1j * omega, upper)
    return np.einsum("k,kab->ab", factors, series.coefficients)


def half_line_transform(m, omega, upper=np.inf, part="full", window=0.0):
    """lam^2 int_0^upper G(s) e^{-window s} e^{-i omega s} ds over coupling pairs, in closed form."""
    return m.lam**2 * series_transform(correlation_series(m, part, window), omega, upper)


def _window(m, quad):
    return quad.eta if isinstance(m, FiniteBath) else 0.0


def correlation_evaluator(m):
    """Vectorised s -> G(s) over coupling pairs, for quadrature integrands."""
    if isinstance(m, ExponentialHighT):
        return lambda s: np.array([[corr_fn(m, s)]])
    values, W = np.linalg.eigh((m.H_e + m.H_e.conj().T) / 2)
    E = np.array([W.conj().T @ Ea @ W for Ea in m.couplings])
    B = np.array([W.conj().T @ Ea @ m.rho_e.matrix @ W for Ea in m.couplings])
    products = np.einsum("amn,bnm->mnab", E, B)
    nu = values[:, None] - values[None, :]
    return lambda s: np.einsum("mn,mnab->ab", np.exp(1j * nu * s), products)


# --------------------------------------------------------------------------------------------------
# Spectral rates
# --------------------------------------------------------------------------------------------------


def _weighted_quad(f, weight, omega, lower, upper, quad):
    if omega == 0:
        if weight == "sin":
            return 0.0, 0.0
        return integrate.quad(f, lower, upper, epsabs=quad.abs_tol, epsrel=quad.rel_tol, limit=quad.limit)
    sign = -1.0 if weight == "sin" and omega < 0 else 1.0
    if np.isinf(upper):
        value, error = integrate.quad(
            f, lower, np.inf, weight=weight, wvar=abs(omega), epsabs=quad.abs_tol, limit=quad.limit, limlst=quad.limlst
        )
    else:
        value, error = integrate.quad(
            f, lower, upper, weight=weight, wvar=abs(omega), epsabs=quad.abs_tol, epsrel=quad.rel_tol, limit=quad.limit
        )
    return sign * value, error


def fourier_half_line(f, omega, upper, quad=DEFAULT_QUADRATURE, lower=0.0):
    """int_lower^upper f(s) e^{-i omega s} ds for complex ``f`` using QUADPACK cos/sin weights."""

    def real(s):
        return f(s).real

    def imag(s):
        return f(s).imag

    c_re, e1 = _weighted_quad(real, "cos", omega, lower, upper, quad)
    c_im, e2 = _weighted_quad(imag, "cos", omega, lower, upper, quad)
    s_re, e3 = _weighted_quad(real, "sin", omega, lower, upper, quad)
    s_im, e4 = _weighted_quad(imag, "sin", omega, lower, upper, quad)
    value = complex(c_re + s_im, c_im - s_re)
    if not np.isfinite(value):
        raise NumericError(f"half-line quadrature at omega = {omega:.6g} returned a non-finite value")
    return value, e1 + e2 + e3 + e4


def _quadrature_rates(m, omegas, quad):
    evaluate = correlation_evaluator(m)
    finite = isinstance(m, FiniteBath)
    upper, eta = (quad.cutoff, quad.eta) if finite else (np.inf, 0.0)
    n = m.n_couplings
    gamma = np.zeros((len(omegas), n, n), dtype=complex)
    max_error = 0.0
    for k, omega in enumerate(omegas):
        for a in range(n):
            for b in range(n):
                value, error = fourier_half_line(lambda s: evaluate(s)[a, b] * math.exp(-eta * s), omega, upper, quad)
                gamma[k, a, b] = value
                max_error = max(max_error, error)
    gamma *= m.lam**2
    diagnostics = {"method": "quadrature", "cutoff": float(upper), "window": eta, "max_abs_error": m.lam**2 * max_error}
    warnings = []
    if finite:
        decay = math.exp(-eta * upper)
        diagnostics["tail_bound"] = m.lam**2 * bohr_lines(m).total_weight * decay / eta
        if decay > quad.tail_tol:
            warnings.append(f"windowed correlation still at {decay:.3g} of its size at the cutoff {upper:.3g}")
    scale = float(np.max(np.abs(gamma))) if gamma.size else 0.0
    if m.lam**2 * max_error > quad.rel_tol * scale + quad.abs_tol:
        warnings.append(f"quadrature error estimate {m.lam**2 * max_error:.3g} exceeds the requested tolerance")
    for message in warnings:
        logger.warning("gamma_rates: %s", message)
    diagnostics["warnings"] = warnings
    return gamma, diagnostics


def gamma_rates(m, omegas, quad=DEFAULT_QUADRATURE, method="auto"):
    """Rates gamma(omega) = lam^2 int_0^inf G(s) e^{-i omega s} ds at every frequency of ``omegas``.

    ``method`` is ``closed`` (exponential series), ``quadrature`` or ``auto`` (closed
    form for the exponential model, quadrature for finite baths). Finite baths are
    windowed and truncated at the quadrature cutoff either way.
    """
    omegas = tuple(float(w) for w in omegas)
    if method == "auto":
        method = "closed" if isinstance(m, ExponentialHighT) else "quadrature"
    if method == "closed":
        upper = quad.cutoff if isinstance(m, FiniteBath) else np.inf
        window = _window(m, quad)
        gamma = np.array([half_line_transform(m, w, upper, window=window) for w in omegas])
        diagnostics = {"method": "closed", "cutoff": float(upper), "window": window, "warnings": []}
    elif method == "quadrature":
        gamma, diagnostics = _quadrature_rates(m, omegas, quad)
    else:
        raise DomainError(f"unknown rate method {method!r}")
    diagnostics["warnings"] = list(diagnostics["warnings"]) + list(m.flags)
    return SpectralRates(omegas, gamma.reshape(len(omegas), m.n_couplings, m.n_couplings), diagnostics)


# --------------------------------------------------------------------------------------------------
# Spectral density and fluctuation-dissipation
# --------------------------------------------------------------------------------------------------


def spectral_density(m, omega, alpha=0, quad=DEFAULT_QUADRATURE):
    """S(omega) = int Re G(s) e^{-i omega s} ds over the full line (windowed for finite baths)."""
    _check_coupling(m, alpha)
    series = correlation_series(m, "re", _window(m, quad))
    coefficients = series.coefficients[:, alpha, alpha]
    forward = laplace_factors(series.exponents - 1j * omega, np.inf)
    backward = laplace_factors(series.exponents + 1j * omega, np.inf)
    return float(np.sum(coefficients * (forward + backward)).real)


def fdt_im_spectrum(m, omega, alpha=0, quad=DEFAULT_QUADRATURE):
    """Im int_0^inf Im G(t) e^{-i omega t} dt = tanh(beta omega/2) S(omega) / 2.

    The exponential model uses the linearised tanh(x) ~ x that its Im part is built on.
    """
    _require_thermal(m)
    x = m.beta * omega / 2
    factor = x if isinstance(m, ExponentialHighT) else math.tanh(x)
    return 0.5 * factor * spectral_density(m, omega, alpha, quad)


def fdt_im_corr(m, u, alpha=0, quad=DEFAULT_QUADRATURE):
    """Im G(u) rebuilt from S as int i tanh(beta w/2) S(w) e^{i w u} dw/2pi."""
    _require_thermal(m)
    _check_coupling(m, alpha)
    if m.beta == 0 or u == 0:
        return 0.0
    if isinstance(m, ExponentialHighT):
        return susceptibility_numeric(u, m.beta, m.tau, quad)
    series = correlation_series(m, "re")
    nu = series.exponents.imag
    terms = 1j * np.tanh(m.beta * nu / 2) * series.coefficients[:, alpha, alpha] * np.exp(1j * nu * u)
    return float(np.sum(terms).real)


# --------------------------------------------------------------------------------------------------
# Susceptibility of the exponential model
# --------------------------------------------------------------------------------------------------


def _check_pole(beta, tau):
    c = beta / (2 * math.pi * tau)
    if abs(2 * c - round(2 * c)) < 2 * POLE_GUARD:
        raise DomainError(f"beta/(2 pi tau) = {c:.8g} sits on a pole of tanh")


def susceptibility_residue(t, beta, tau, n_terms=None):
    """Residue sum over the poles of tanh for -(1/pi) int_0^inf tanh(beta w/2) S(w) sin(w t) dw."""
    if t <= 0:
        raise DomainError(f"t must be positive, got {t}")
    if beta == 0:
        return 0.0
    _check_pole(beta, tau)
    series = 0.0
    limit = MAX_SERIES_TERMS if n_terms is None else n_terms + 1
    for n in range(limit):
        k = 2 * n + 1
        term = math.exp(-k * math.pi * t / beta) / (1.0 - (k * math.pi * tau / beta) ** 2)
        series += term
        if abs(term) < SERIES_FLOOR:
            break
    return -math.tan(beta / (2 * tau)) * math.exp(-t / tau) - 4 * tau / beta * series


def incomplete_beta(z, a, b, scaled=False):
    """B_z(a, b) = int_0^z s^{a-1} (1-s)^{b-1} ds; ``scaled`` returns z^{-a} B_z(a, b)."""
    if not 0 < z < 1:
        raise DomainError(f"incomplete beta needs 0 < z < 1, got {z}")
    if a <= 0:
        raise DomainError(f"incomplete beta needs a > 0, got {a}")
    if scaled:
        value, _ = integrate.quad(
            lambda x: (1.0 - z * x) ** (b - 1), 0.0, 1.0, weight="alg", wvar=(a - 1, 0.0), epsabs=1e-15, epsrel=1e-12
        )
    else:
        value, _ = integrate.quad(
            lambda s: (1.0 - s) ** (b - 1), 0.0, z, weight="alg", wvar=(a - 1, 0.0), epsabs=1e-15, epsrel=1e-12
        )
    return value


def susceptibility_closed_form(t, beta, tau):
    """The residue sum summed with incomplete beta functions; needs beta/(2 pi tau) < 1/2."""
    if t <= 0:
        raise DomainError(f"t must be positive, got {t}")
    if beta == 0:
        return 0.0
    if beta / (2 * math.pi * tau) >= 0.5 - POLE_GUARD:
        raise DomainError("closed form needs beta/(2 pi tau) < 1/2")
    leading = -math.tan(beta / (2 * tau)) * math.exp(-t / tau)
    q = math.exp(-math.pi * t / beta)
    if q == 0.0:
        return leading
    z = q * q
    p = (1 + beta / (math.pi * tau)) / 2
    p_low = (1 - beta / (math.pi * tau)) / 2
    bracket = incomplete_beta(z, p, 0.0, scaled=True) - incomplete_beta(z, p_low, 0.0, scaled=True)
    return leading - q / math.pi * bracket


def susceptibility_numeric(t, beta, tau, quad=DEFAULT_QUADRATURE):
    """-(1/pi) int_0^inf tanh(beta w/2) S(w) sin(w t) dw with S(w) = 2tau/(1 + w^2 tau^2)."""
    if t < 0:
        raise DomainError(f"t must be non-negative, got {t}")
    if t == 0 or beta == 0:
        return 0.0

    def integrand(w):
        return math.tanh(beta * w / 2) * 2 * tau / (1 + (w * tau) ** 2)

    value, _ = integrate.quad(integrand, 0.0, np.inf, weight="sin", wvar=t, epsabs=quad.abs_tol, limlst=quad.limlst)
    if not math.isfinite(value):
        raise NumericError(f"inverse transform at t = {t} returned a non-finite value")
    return -value / math.pi
