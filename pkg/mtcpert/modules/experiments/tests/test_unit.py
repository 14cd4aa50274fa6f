import math

import numpy as np
import pytest

from core.exceptions import DomainError
from mtcpert.modules.bath.models import ExponentialHighT, FiniteBath
from mtcpert.modules.bath.services import finite_bath
from mtcpert.modules.experiments.services import (
    ExperimentsService,
    default_scaling_bath,
    default_scaling_system,
    detector_rates,
    error_scaling_study,
    fdt_verification,
    run_thermalization_demo,
    susceptibility_table,
)
from mtcpert.modules.opalg.models import DensityMatrix
from mtcpert.modules.opalg.services import random_hermitian


@pytest.fixture(scope="module")
def demo():
    return run_thermalization_demo(beta=0.2, lam=0.1, mu=0.05, tau=1.0, omega_grid=np.linspace(-0.5, 0.5, 11))


@pytest.fixture(scope="module")
def scaling():
    bath = default_scaling_bath(seed=7)
    return error_scaling_study(bath, default_scaling_system(), [0.02, 0.04, 0.08], times=(1.0, 2.5))


class TestThermalizationDemo:
    def test_order_zero_rates(self, demo):
        """Order 0 gives the Lorentzian 8 mu^2 lam^2 tau / ((4 lam^2 tau)^2 + omega^2)."""
        expected = 8 * 0.05**2 * 0.01 / ((4 * 0.01) ** 2 + demo.omegas**2)
        assert np.allclose(demo.wq_order0, expected, rtol=1e-9, atol=0)
        assert np.all(demo.wq_order0 > 0)

    def test_order_zero_ratio_is_unity(self, demo):
        """The zeroth order is blind to the bath temperature."""
        assert np.max(demo.deviation0) < 1e-9

    def test_order_one_ratio(self, demo):
        """Order 1 reaches the linearized detailed-balance ratio."""
        assert np.max(np.abs(demo.ratio1 - demo.linearized_target)) < 1e-6
        assert np.max(demo.deviation1) < 2e-3

    def test_order_one_rates(self, demo):
        """Order 1 rates carry the factor (1 - beta omega/2)."""
        expected = demo.wq_order0 * (1 - 0.1 * demo.omegas)
        assert np.allclose(demo.wq_order1, expected, rtol=1e-9, atol=0)

    def test_ratio_monotone(self, demo):
        positive = demo.omegas > 0
        assert np.all(np.diff(demo.ratio1[positive]) > 0)

    def test_laplace_path(self, demo):
        assert demo.path == "laplace"
        assert demo.rows()[0][0] == pytest.approx(-0.5)

    def test_infinite_temperature(self):
        """beta = 0 leaves both ratios at one."""
        report = run_thermalization_demo(beta=0.0, omega_grid=[0.1, 0.3])
        assert np.allclose(report.ratio1, 1.0, rtol=0, atol=1e-12)

    def test_preconditions(self):
        """beta*omega at the pole and strong coupling are refused."""
        with pytest.raises(DomainError):
            run_thermalization_demo(beta=4.0, omega_grid=[0.5])
        with pytest.raises(DomainError):
            run_thermalization_demo(lam=0.3)


class TestDetectorRates:
    def test_non_exponential_uses_quadrature(self):
        """Sums of exponentials fall back to spline quadrature."""
        us = np.linspace(0.0, 60.0, 3001)
        values = 0.5 * np.exp(-us) + 0.5 * np.exp(-0.5 * us)
        omegas = np.array([-0.4, 0.0, 0.4])
        rates, path = detector_rates(us, values, omegas, mu=1.0)
        expected = 2 * np.real(0.5 / (1 + 1j * omegas) + 0.5 / (0.5 + 1j * omegas))
        assert path == "quadrature"
        assert np.allclose(rates, expected, rtol=1e-5, atol=0)


class TestErrorScaling:
    def test_order_zero_exponent(self, scaling):
        """The zeroth-order error scales as (lambda tau)^2."""
        assert 1.6 <= scaling.exponent0 <= 2.4

    def test_halving_lambda(self, scaling):
        """Halving lambda divides the zeroth-order error by 3 to 5."""
        ratios = scaling.err_order0[1:] / scaling.err_order0[:-1]
        assert np.all((ratios >= 3.0) & (ratios <= 5.0))

    def test_first_order_improves(self, scaling):
        assert np.all(scaling.err_order1 < scaling.err_order0 + 1e-12)

    def test_report_rows(self, scaling):
        assert [row[0] for row in scaling.rows()] == [0.02, 0.04, 0.08]
        assert "order0=" in scaling.footer()

    def test_zero_coupling(self):
        """Without coupling every error vanishes."""
        report = error_scaling_study(default_scaling_bath(), default_scaling_system(), [0.0], times=(1.0, 2.0))
        assert report.err_order0[0] < 1e-12
        assert report.err_order1[0] < 1e-12
        assert math.isnan(report.exponent0)

    def test_oversized_composite(self):
        """Composites above 64 levels are refused."""
        H_e = np.diag(np.arange(64.0))
        bath = finite_bath(H_e, random_hermitian(64, np.random.default_rng(1)), beta=0.1)
        with pytest.raises(DomainError):
            error_scaling_study(bath, default_scaling_system(), [0.05], times=(1.0,))

    def test_grid_outside_validity(self):
        with pytest.raises(DomainError):
            error_scaling_study(default_scaling_bath(), default_scaling_system(), [0.5], times=(1.0,))

    def test_bath_has_no_odd_moments(self):
        """The parity-symmetric coupling has zero thermal mean."""
        bath = default_scaling_bath()
        assert isinstance(bath, FiniteBath)
        assert abs(np.trace(bath.couplings[0] @ bath.rho_e.matrix)) < 1e-12


class TestFdtVerification:
    def test_infinite_temperature(self):
        """beta = 0 puts both sides at zero."""
        report = fdt_verification(ExponentialHighT(tau=1.0, beta=0.0, lam=0.1), [-0.5, 0.2, 1.0])
        assert np.max(np.abs(report.lhs)) == 0.0
        assert np.max(np.abs(report.rhs)) == 0.0

    def test_exponential_model(self):
        """The exponential Im part is the FDT partner of its Re part."""
        report = fdt_verification(ExponentialHighT(tau=1.0, beta=0.2, lam=0.1), np.linspace(-2, 2, 9))
        assert report.max_deviation < 1e-10

    def test_random_four_level(self, rng):
        """A thermal four-level bath satisfies the identity to quadrature accuracy."""
        H = random_hermitian(4, rng)
        bath = finite_bath(H, random_hermitian(4, rng), beta=0.7, lam=0.1)
        report = fdt_verification(bath, np.linspace(-3, 3, 13))
        assert report.max_deviation < 1e-6
        assert len(report.rows()) == 13

    def test_replacement_coupling(self, rng):
        """A replacement coupling is centred and checked like the original."""
        H = random_hermitian(3, rng)
        bath = finite_bath(H, random_hermitian(3, rng), beta=0.4)
        report = fdt_verification(bath, [0.3], F=random_hermitian(3, rng))
        assert report.max_deviation < 1e-6

    def test_non_thermal_rejected(self):
        H = np.diag([0.0, 1.0, 2.5])
        rho = DensityMatrix.from_matrix(np.diag([0.1, 0.6, 0.3]))
        E = np.ones((3, 3)) - np.trace(np.ones((3, 3)) @ rho.matrix) * np.eye(3)
        with pytest.raises(DomainError):
            fdt_verification(FiniteBath(H, (E,), rho, lam=0.1), [0.5])


class TestSusceptibilityTable:
    def test_columns(self):
        """Residue sum and numeric transform agree; the high-T column is the exponential limit."""
        report = susceptibility_table([0.5, 1.0, 2.0], beta=0.1, tau=1.0)
        assert np.max(report.abs_diff) < 1e-4
        assert report.high_t_limit[1] == pytest.approx(-0.05 * math.exp(-1.0))
        assert len(report.rows()[0]) == 5


class TestExperimentsService:
    def test_fdt(self):
        m = ExponentialHighT(tau=1.0, beta=0.2, lam=0.1)

        report = ExperimentsService().fdt(m, [-0.5, 0.5])

        np.testing.assert_allclose(report.lhs, fdt_verification(m, [-0.5, 0.5]).lhs)

    def test_susceptibility(self):
        report = ExperimentsService().susceptibility([1.0], beta=0.1, tau=1.0)

        assert report.high_t_limit[0] == pytest.approx(-0.05 * math.exp(-1.0))

    def test_thermalization_demo_matches_function(self, demo):
        service = ExperimentsService(threads=1)

        report = service.thermalization_demo(beta=0.2, lam=0.1, mu=0.05, tau=1.0, omega_grid=np.linspace(-0.5, 0.5, 11))

        np.testing.assert_allclose(report.wq_order1, demo.wq_order1, rtol=1e-12)

    def test_error_scaling_matches_function(self, scaling):
        service = ExperimentsService(threads=2)
        bath, system = default_scaling_bath(seed=7), default_scaling_system()

        report = service.error_scaling(bath, system, [0.02, 0.04, 0.08], (1.0, 2.5))

        np.testing.assert_allclose(report.err_order1, scaling.err_order1, rtol=1e-12)
