import logging
import math

import numpy as np
import pytest
from scipy import integrate

from core.exceptions import DomainError
from mtcpert.modules.bath.models import CorrelationModel, ExponentialHighT, FiniteBath, QuadratureConfig, SpectralRates
from mtcpert.modules.bath.services import (
    bohr_lines,
    corr_fn,
    correlation_series,
    fdt_im_corr,
    fdt_im_spectrum,
    finite_bath,
    gamma_rates,
    half_line_transform,
    incomplete_beta,
    is_thermal,
    spectral_density,
    susceptibility_closed_form,
    susceptibility_numeric,
    susceptibility_residue,
)
from mtcpert.modules.opalg.models import DensityMatrix
from mtcpert.modules.opalg.services import PAULI_X, PAULI_Z, random_hermitian, unitary_at


@pytest.fixture
def exponential():
    return ExponentialHighT(tau=1.0, beta=0.2, lam=0.1)


@pytest.fixture
def four_level(rng):
    return finite_bath(random_hermitian(4, rng), random_hermitian(4, rng), beta=0.7, lam=0.1)


@pytest.fixture
def two_level():
    return finite_bath(0.75 * PAULI_Z, PAULI_X, beta=0.4, lam=0.2)


class TestModels:
    def test_finite_bath_centres_couplings(self, four_level):
        """finite_bath subtracts the thermal mean of every coupling."""
        E = four_level.couplings[0]
        assert abs(np.trace(E @ four_level.rho_e.matrix)) < 1e-12
        assert is_thermal(four_level)

    def test_rejects_uncentred_coupling(self):
        """A coupling with non-zero mean is rejected."""
        rho = DensityMatrix.from_matrix(np.diag([0.7, 0.3]))
        with pytest.raises(DomainError):
            FiniteBath(PAULI_Z, (PAULI_Z,), rho)

    def test_rejects_non_stationary_state(self):
        """A bath state that does not commute with H_e is rejected."""
        rho = DensityMatrix.from_matrix((np.eye(2) + 0.5 * PAULI_X) / 2)
        with pytest.raises(DomainError):
            FiniteBath(PAULI_Z, (PAULI_Z,), rho)

    def test_exponential_parameters_validated(self):
        """Non-positive tau and negative beta are domain errors."""
        with pytest.raises(DomainError):
            ExponentialHighT(tau=0.0, beta=0.1, lam=0.1)
        with pytest.raises(DomainError):
            ExponentialHighT(tau=1.0, beta=-0.1, lam=0.1)

    def test_high_temperature_flag(self):
        """beta/tau above 0.2 is flagged, below it is not."""
        assert ExponentialHighT(tau=1.0, beta=0.5, lam=0.1).flags
        assert not ExponentialHighT(tau=1.0, beta=0.1, lam=0.1).flags

    def test_finite_bath_has_no_flags(self):
        """Both variants share the flags surface; a finite bath never flags."""
        bath = finite_bath(PAULI_Z, PAULI_X, beta=2.0, lam=0.1)
        assert isinstance(bath, CorrelationModel)
        assert isinstance(ExponentialHighT(tau=1.0, beta=0.1, lam=0.1), CorrelationModel)
        assert bath.flags == ()

    def test_unknown_model_rejected(self):
        with pytest.raises(DomainError):
            corr_fn(object(), 0.5)

    def test_quadrature_cutoff_floor(self):
        """A cutoff below 20 tau is refused."""
        with pytest.raises(DomainError):
            QuadratureConfig(cutoff_factor=10)

    def test_spectral_rates_identity(self):
        """gamma = (w + i h)/2 for every stored frequency."""
        rates = SpectralRates((0.0, 1.0), [0.3 + 0.1j, 0.2 - 0.4j])
        for omega in rates.frequencies:
            assert rates.gamma_at(omega) == pytest.approx((rates.w(omega) + 1j * rates.h(omega)) / 2, abs=1e-15)

    def test_spectral_rates_missing_frequency(self):
        """Asking for a frequency that was never evaluated is a domain error."""
        rates = SpectralRates((0.0,), [0.3])
        with pytest.raises(DomainError):
            rates.gamma_matrix(0.5)


class TestCorrFn:
    def test_exponential_at_zero(self, exponential):
        """Re G(0) = 1 for the exponential model."""
        assert corr_fn(exponential, 0.0).real == pytest.approx(1.0)

    def test_exponential_imaginary_part(self, exponential):
        """Im G(u) = -(beta/2tau) e^{-u/tau}."""
        for u in (0.0, 0.5, 3.0):
            assert corr_fn(exponential, u).imag == pytest.approx(-0.1 * math.exp(-u))

    def test_infinite_temperature_is_real(self, rng):
        """At beta = 0 the stationary state is maximally mixed and Im G vanishes."""
        m = finite_bath(random_hermitian(4, rng), random_hermitian(4, rng), beta=0.0)
        for u in np.linspace(0.0, 5.0, 11):
            assert abs(corr_fn(m, u).imag) < 1e-12

    def test_stationarity(self, four_level):
        """tr[E(u+s) E(s) rho] does not depend on s."""
        E, rho, H = four_level.couplings[0], four_level.rho_e.matrix, four_level.H_e
        u = 1.3
        for s in (0.0, 0.7, 4.1):
            U_late, U_early = unitary_at(H, u + s), unitary_at(H, s)
            late = U_late.conj().T @ E @ U_late
            early = U_early.conj().T @ E @ U_early
            assert abs(np.trace(late @ early @ rho) - corr_fn(four_level, u)) < 1e-12

    def test_negative_lag_rejected(self, exponential):
        """Negative lags are outside the half-line domain."""
        with pytest.raises(DomainError):
            corr_fn(exponential, -1.0)

    def test_bohr_lines_reproduce_correlation(self, four_level):
        """The line decomposition evaluates to the exact correlation."""
        lines = bohr_lines(four_level)
        for u in (0.0, 0.9, 6.0):
            value = np.sum(lines.weights[:, 0, 0] * np.exp(1j * lines.frequencies * u))
            assert abs(value - corr_fn(four_level, u)) < 1e-12

    def test_series_parts_split_correlation(self, four_level):
        """Re and Im series add up to the full correlation."""
        re, im = correlation_series(four_level, "re"), correlation_series(four_level, "im")
        for u in (0.2, 2.5):
            G = corr_fn(four_level, u)
            assert re(u)[0, 0] == pytest.approx(G.real, abs=1e-12)
            assert im(u)[0, 0] == pytest.approx(G.imag, abs=1e-12)


class TestGammaRates:
    def test_exponential_rate_at_zero(self, exponential):
        """w(0) = 2 lam^2 tau."""
        rates = gamma_rates(exponential, [0.0])
        assert rates.w(0.0) == pytest.approx(2 * 0.01 * 1.0)

    def test_exponential_lorentzian(self):
        """At beta = 0 the rate is the Lorentzian 2 lam^2 tau/(1 + w^2 tau^2)."""
        m = ExponentialHighT(tau=2.0, beta=0.0, lam=0.3)
        omegas = np.linspace(-2.0, 2.0, 9)
        rates = gamma_rates(m, omegas)
        for omega in omegas:
            assert rates.w(omega) == pytest.approx(2 * 0.09 * 2.0 / (1 + 4 * omega**2), rel=1e-12)
            assert rates.h(omega) == pytest.approx(-2 * 0.09 * 4 * omega / (1 + 4 * omega**2), rel=1e-12)

    def test_exponential_quadrature_matches_closed_form(self, exponential):
        """QUADPACK on the half line reproduces the closed-form rates."""
        omegas = [-0.7, 0.0, 0.4]
        closed = gamma_rates(exponential, omegas, method="closed")
        numeric = gamma_rates(exponential, omegas, method="quadrature")
        assert np.max(np.abs(closed.gamma - numeric.gamma)) < 1e-8 * np.max(np.abs(closed.gamma))

    def test_single_line_quadrature(self, two_level):
        """A two-level bath has one Bohr frequency pair; quadrature matches the line closed form."""
        omegas = [-1.5, -0.3, 0.0, 1.5]
        closed = gamma_rates(two_level, omegas, method="closed")
        numeric = gamma_rates(two_level, omegas, method="quadrature")
        assert np.max(np.abs(closed.gamma - numeric.gamma)) < 1e-7 * np.max(np.abs(closed.gamma))
        assert numeric.diagnostics["tail_bound"] < 1e-3

    def test_exponential_rate_positive(self):
        """w(omega) >= 0 for the exponential model wherever beta omega < 2."""
        m = ExponentialHighT(tau=1.0, beta=0.2, lam=0.1)
        omegas = np.linspace(-20.0, 9.9, 61)
        rates = gamma_rates(m, omegas)
        assert min(rates.w(omega) for omega in omegas) >= -1e-10

    def test_thermal_finite_rates_positive(self, four_level):
        """Thermal finite-bath rates are non-negative on the Bohr grid."""
        quad = QuadratureConfig(cutoff_factor=200.0)
        omegas = bohr_lines(four_level).frequencies
        rates = gamma_rates(four_level, omegas, quad, method="closed")
        assert min(rates.w(omega) for omega in omegas) >= -1e-10

    def test_short_window_warns(self, two_level, caplog):
        """A window that has not decayed at the cutoff is reported."""
        quad = QuadratureConfig(window_factor=40.0)
        with caplog.at_level(logging.WARNING):
            rates = gamma_rates(two_level, [0.0], quad)
        assert rates.diagnostics["warnings"]
        assert rates.diagnostics["tail_bound"] > 0
        assert "gamma_rates" in caplog.text

    def test_undamped_finite_transform_diverges(self, two_level):
        """Without a window a finite-bath half-line transform does not exist."""
        with pytest.raises(DomainError):
            half_line_transform(two_level, 0.0)


class TestSpectralDensity:
    def test_exponential_at_zero(self, exponential):
        """S(0) = 2 tau."""
        assert spectral_density(exponential, 0.0) == pytest.approx(2.0)

    def test_even(self, four_level):
        """S(omega) = S(-omega)."""
        for omega in (0.3, 1.1, 2.4):
            assert spectral_density(four_level, omega) == pytest.approx(spectral_density(four_level, -omega), rel=1e-12)

    def test_sum_rule(self, exponential):
        """int S dw / 2pi = Re G(0) = 1."""
        value, _ = integrate.quad(lambda w: spectral_density(exponential, w), -np.inf, np.inf)
        assert value / (2 * math.pi) == pytest.approx(1.0, rel=1e-8)


class TestFluctuationDissipation:
    def test_infinite_temperature(self):
        """tanh(0) = 0 kills the imaginary spectrum."""
        m = ExponentialHighT(tau=1.0, beta=0.0, lam=0.1)
        assert fdt_im_spectrum(m, 0.7) == 0.0

    def test_exponential_high_temperature_limit(self):
        """The inverse transform reproduces -(beta/2tau) e^{-t/tau} at beta = 0.05 tau."""
        m = ExponentialHighT(tau=1.0, beta=0.05, lam=0.1)
        for t in np.linspace(1.0, 5.0, 9):
            expected = -0.025 * math.exp(-t)
            assert fdt_im_corr(m, t) == pytest.approx(expected, rel=0.05)

    def test_finite_bath_exact(self, four_level):
        """For a thermal finite bath the rebuilt Im G equals the exact one."""
        for u in (0.1, 0.8, 2.0, 7.5):
            assert fdt_im_corr(four_level, u) == pytest.approx(corr_fn(four_level, u).imag, abs=1e-10)

    def test_non_thermal_rejected(self):
        """A stationary but non-Gibbs bath state is refused."""
        rho = DensityMatrix.from_matrix(np.diag([0.1, 0.6, 0.3]))
        H = np.diag([0.0, 1.0, 2.5])
        V = np.ones((3, 3))
        E = V - np.trace(V @ rho.matrix) * np.eye(3)
        m = FiniteBath(H, (E,), rho, lam=0.1)
        with pytest.raises(DomainError):
            fdt_im_spectrum(m, 0.5)
        with pytest.raises(DomainError):
            fdt_im_corr(m, 1.0)


class TestSusceptibility:
    def test_vanishes_at_infinite_temperature(self):
        """beta -> 0 drives the susceptibility to zero."""
        assert abs(susceptibility_residue(1.0, 1e-8, 1.0)) < 1e-7
        assert susceptibility_residue(1.0, 0.0, 1.0) == 0.0

    def test_residue_matches_numeric_transform(self):
        """Residue sum and direct inverse transform agree within 1e-4 at beta = 0.1 tau."""
        for t in np.linspace(0.5, 5.0, 10):
            assert abs(susceptibility_residue(t, 0.1, 1.0) - susceptibility_numeric(t, 0.1, 1.0)) < 1e-4

    def test_high_temperature_limit(self):
        """For t >= tau and beta = 0.05 tau the high-T exponential is within 5%."""
        for t in (1.0, 2.0, 4.0, 8.0):
            assert susceptibility_residue(t, 0.05, 1.0) == pytest.approx(-0.025 * math.exp(-t), rel=0.05)

    def test_closed_form_matches_series(self):
        """The incomplete-beta closed form equals the residue sum to 1e-8."""
        for beta in (0.5, 1.0, 2.0):
            for t in (0.2, 0.5, 1.0, 3.0):
                assert susceptibility_closed_form(t, beta, 1.0) == pytest.approx(
                    susceptibility_residue(t, beta, 1.0), abs=1e-8
                )

    def test_pole_collision(self):
        """beta/(2 pi tau) at an integer or half-integer is a domain error."""
        with pytest.raises(DomainError):
            susceptibility_residue(1.0, 2 * math.pi, 1.0)
        with pytest.raises(DomainError):
            susceptibility_residue(1.0, math.pi, 1.0)

    def test_closed_form_range(self):
        """The closed form refuses beta/(2 pi tau) >= 1/2."""
        with pytest.raises(DomainError):
            susceptibility_closed_form(1.0, 4.0, 1.0)

    def test_non_positive_time(self):
        """t must be positive."""
        with pytest.raises(DomainError):
            susceptibility_residue(0.0, 0.1, 1.0)


class TestIncompleteBeta:
    def test_known_values(self):
        """B_z(1,1) = z, B_z(a,1) = z^a/a and B_z(1,0) = -log(1-z)."""
        assert incomplete_beta(0.3, 1.0, 1.0) == pytest.approx(0.3, rel=1e-12)
        assert incomplete_beta(0.3, 0.4, 1.0) == pytest.approx(0.3**0.4 / 0.4, rel=1e-10)
        assert incomplete_beta(0.6, 1.0, 0.0) == pytest.approx(-math.log(0.4), rel=1e-10)

    def test_scaled(self):
        """The scaled form is z^{-a} B_z(a, b)."""
        z, a = 0.45, 0.7
        assert incomplete_beta(z, a, 0.0, scaled=True) == pytest.approx(z**-a * incomplete_beta(z, a, 0.0), rel=1e-10)

    def test_domain(self):
        """z outside (0, 1) or a <= 0 is refused."""
        with pytest.raises(DomainError):
            incomplete_beta(1.0, 0.5, 0.0)
        with pytest.raises(DomainError):
            incomplete_beta(0.5, 0.0, 1.0)
