import math

import numpy as np
import pytest

from core.exceptions import DomainError
from mtcpert.modules.bath.models import ExponentialHighT, SpectralRates
from mtcpert.modules.bath.services import gamma_rates
from mtcpert.modules.generators.models import OdeConfig
from mtcpert.modules.generators.services import (
    born_propagator,
    davies_family,
    davies_generator,
    generator_bundle,
    jump_decomposition,
    redfield_family,
    redfield_generator,
    renormalize_system,
    second_supercumulant,
)
from mtcpert.modules.opalg.models import SuperOperator
from mtcpert.modules.opalg.services import (
    PAULI_X,
    PAULI_Z,
    choi_min_eigenvalue,
    commutator,
    is_trace_annihilating,
    random_hermitian,
    superop_exp,
    superop_from_pair,
    thermal_state,
    trace_functional,
    vec,
)


def _kms_rates(jd, beta):
    """Synthetic rates with w(-w)/w(w) = e^{beta w} and a non-zero Lamb shift."""
    gamma = []
    for omega in jd.bohr_freqs:
        w = 0.3 * math.exp(-beta * omega / 2) / (1 + omega**2)
        h = 0.1 * omega
        gamma.append((w + 1j * h) / 2)
    return SpectralRates(jd.bohr_freqs, gamma)


@pytest.fixture
def qubit_model():
    """H^q = 0 and V = sigma_x coupled to the exponential bath."""
    m = ExponentialHighT(tau=1.0, beta=0.2, lam=0.1)
    jd = jump_decomposition(np.zeros((2, 2)), PAULI_X)
    return m, jd, gamma_rates(m, jd.bohr_freqs)


@pytest.fixture
def split_qubit():
    m = ExponentialHighT(tau=1.0, beta=0.2, lam=0.3)
    jd = jump_decomposition(np.diag([0.0, 2.0]), PAULI_X)
    return m, jd, gamma_rates(m, jd.bohr_freqs)


class TestJumpDecomposition:
    def test_degenerate_qubit(self):
        """H = 0 leaves sigma_x as the single jump operator at omega = 0."""
        jd = jump_decomposition(np.zeros((2, 2)), PAULI_X)
        assert jd.bohr_freqs == (0.0,)
        assert np.allclose(jd.jump(0.0), PAULI_X)

    def test_split_qubit(self):
        """diag(0, D) gives omega = +-D with V(-D) = V(D)^dagger."""
        jd = jump_decomposition(np.diag([0.0, 1.5]), PAULI_X)
        assert jd.bohr_freqs == pytest.approx((-1.5, 1.5))
        assert np.allclose(jd.jump(1.5), [[0, 0], [1, 0]])
        assert np.allclose(jd.jump(-1.5), jd.jump(1.5).conj().T)

    @pytest.mark.parametrize("d", [2, 3, 4, 6, 8])
    def test_completeness_and_adjoints(self, rng, d):
        """sum_w V(w) = V, V(-w) = V(w)^dagger and the frequency set is symmetric."""
        Hs, V = random_hermitian(d, rng), random_hermitian(d, rng)
        jd = jump_decomposition(Hs, V)
        assert np.max(np.abs(jd.jumps[:, 0].sum(axis=0) - V)) < 1e-12
        for i, omega in enumerate(jd.bohr_freqs):
            assert jd.bohr_freqs[jd.mirror(i)] == pytest.approx(-omega, abs=1e-12)
            assert np.max(np.abs(jd.jumps[jd.mirror(i), 0] - jd.jumps[i, 0].conj().T)) < 1e-12

    def test_jumps_shift_energy(self, rng):
        """[H, V(w)] = w V(w) for every Bohr frequency."""
        Hs, V = random_hermitian(4, rng), random_hermitian(4, rng)
        jd = jump_decomposition(Hs, V)
        for i, omega in enumerate(jd.bohr_freqs):
            Vw = jd.jumps[i, 0]
            assert np.max(np.abs(Hs @ Vw - Vw @ Hs - omega * Vw)) < 1e-10

    def test_unknown_frequency(self):
        """Looking up a frequency outside the decomposition fails."""
        jd = jump_decomposition(np.zeros((2, 2)), PAULI_X)
        with pytest.raises(DomainError):
            jd.jump(0.3)

    def test_renormalization_shift(self):
        """The bath mean tr(V^e rho_e) shifts H^s along V^s."""
        rho_e = thermal_state(PAULI_Z, 1.0)
        Hs = renormalize_system(np.zeros((2, 2)), PAULI_X, PAULI_Z, rho_e, 0.5)
        expected = 0.5 * np.trace(PAULI_Z @ rho_e.matrix).real * PAULI_X
        assert np.allclose(Hs, expected)


class TestDavies:
    def test_qubit_generator(self, qubit_model):
        """L^q = w(0)(sigma_x . sigma_x - .) entrywise."""
        m, jd, rates = qubit_model
        w0 = 2 * m.lam**2 * m.tau
        expected = w0 * (superop_from_pair(PAULI_X, PAULI_X).matrix - np.eye(4))
        assert np.max(np.abs(davies_generator(jd, rates).matrix - expected)) < 1e-12

    def test_qubit_relaxes_to_identity(self, qubit_model):
        """e^{tL}|1><1| reaches 1/2 within 1e-8 at t = 20/w(0) and stays CPTP."""
        m, jd, rates = qubit_model
        w0 = rates.w(0.0)
        L = davies_generator(jd, rates)
        propagator = superop_exp(L, 20 / w0)
        state = propagator.apply(np.diag([0.0, 1.0]))
        assert np.max(np.abs(state - np.eye(2) / 2)) < 1e-8
        assert choi_min_eigenvalue(propagator) >= -1e-9

    def test_zero_rates(self, rng):
        """Vanishing rates give the zero generator."""
        jd = jump_decomposition(random_hermitian(3, rng), random_hermitian(3, rng))
        rates = SpectralRates(jd.bohr_freqs, np.zeros(len(jd.bohr_freqs)))
        assert np.max(np.abs(davies_generator(jd, rates).matrix)) == 0.0

    def test_kms_fixed_point(self, rng):
        """Detailed-balance rates leave the Gibbs state of H^s stationary."""
        beta = 0.8
        Hs = np.diag([0.0, 0.7, 1.9])
        jd = jump_decomposition(Hs, random_hermitian(3, rng))
        L = davies_generator(jd, _kms_rates(jd, beta))
        gibbs = thermal_state(Hs, beta).matrix
        assert np.max(np.abs(L.matrix @ vec(gibbs))) < 1e-9

    def test_structure(self, rng):
        """Trace annihilation, secular commutation and CPTP semigroup on a random model."""
        m = ExponentialHighT(tau=1.0, beta=0.1, lam=0.2)
        Hs = random_hermitian(3, rng)
        jd = jump_decomposition(Hs, random_hermitian(3, rng))
        rates = gamma_rates(m, jd.bohr_freqs)
        L = davies_generator(jd, rates)
        assert is_trace_annihilating(L)
        free = commutator(Hs)
        assert np.max(np.abs((L @ free - free @ L).matrix)) < 1e-10
        w0 = rates.w(0.0)
        for t in (0.1 / w0, 1 / w0, 10 / w0):
            assert choi_min_eigenvalue(superop_exp(L, t)) >= -1e-9

    def test_missing_rate(self, rng):
        """Rates that skip a Bohr frequency are refused."""
        jd = jump_decomposition(np.diag([0.0, 1.0]), PAULI_X)
        rates = SpectralRates((1.0,), [0.1])
        with pytest.raises(DomainError):
            davies_generator(jd, rates)


class TestRedfield:
    def test_single_frequency(self, qubit_model):
        """With one Bohr frequency Redfield and Davies coincide."""
        _, jd, rates = qubit_model
        assert redfield_generator(jd, rates, 5.0).allclose(davies_generator(jd, rates), atol=1e-14)

    def test_trace_annihilating(self, split_qubit):
        """Redfield annihilates the trace for any averaging window."""
        _, jd, rates = split_qubit
        for interval in (None, 0.3, (1.0, 4.0)):
            assert is_trace_annihilating(redfield_generator(jd, rates, interval))

    def test_secular_limit(self, split_qubit):
        """Averaging over many periods of the off-resonant phases recovers Davies within 5%."""
        _, jd, rates = split_qubit
        davies = davies_generator(jd, rates)
        window = (200 * math.pi + 1.0) / 4.0
        redfield = redfield_generator(jd, rates, window)
        assert (redfield - davies).norm() < 0.05 * davies.norm()

    def test_bundle(self, split_qubit):
        """generator_bundle carries both generators and its context."""
        _, jd, rates = split_qubit
        bundle = generator_bundle(jd, rates, 2.0)
        assert bundle.davies.allclose(davies_generator(jd, rates))
        assert bundle.redfield.allclose(redfield_generator(jd, rates, 2.0))
        assert bundle.t_interval == (0.0, 2.0)


class TestSecondSupercumulant:
    def test_empty_interval(self, split_qubit):
        """t = t0 gives the zero superoperator."""
        m, jd, _ = split_qubit
        assert np.max(np.abs(second_supercumulant(3.0, 3.0, jd, m).matrix)) < 1e-15

    def test_long_time_markov_limit(self, qubit_model):
        """After 50 tau the kernel equals the Davies generator for a degenerate system."""
        m, jd, rates = qubit_model
        kernel = second_supercumulant(50.0, 0.0, jd, m)
        davies = davies_generator(jd, rates)
        assert (kernel - davies).norm() < 0.02 * davies.norm()

    def test_infinite_temperature_is_unital(self, split_qubit):
        """At beta = 0 only double commutators remain, so the identity is annihilated."""
        _, jd, _ = split_qubit
        hot = ExponentialHighT(tau=1.0, beta=0.0, lam=0.3)
        warm = ExponentialHighT(tau=1.0, beta=0.5, lam=0.3)
        identity = vec(np.eye(2))
        assert np.max(np.abs(second_supercumulant(2.0, 0.0, jd, hot).matrix @ identity)) < 1e-14
        assert np.max(np.abs(second_supercumulant(2.0, 0.0, jd, warm).matrix @ identity)) > 1e-4

    def test_reversed_times(self, split_qubit):
        """t before t0 is a domain error."""
        m, jd, _ = split_qubit
        with pytest.raises(DomainError):
            second_supercumulant(1.0, 2.0, jd, m)


class TestBornPropagator:
    def test_identity_at_start(self, split_qubit):
        """Lambda(t0, t0) is the identity."""
        m, jd, _ = split_qubit
        assert born_propagator(1.0, 1.0, jd, m).allclose(SuperOperator.identity(2))

    def test_richardson(self):
        """Halving the RK4 step shrinks the defect at least eightfold."""
        m = ExponentialHighT(tau=1.0, beta=0.3, lam=1.0)
        jd = jump_decomposition(np.diag([0.0, 2.0]), PAULI_X + 0.5 * PAULI_Z)
        runs = [born_propagator(2.0, 0.0, jd, m, OdeConfig(dt=dt)) for dt in (0.1, 0.05, 0.025)]
        coarse = (runs[0] - runs[1]).norm()
        fine = (runs[1] - runs[2]).norm()
        assert coarse >= 8 * fine

    def test_weak_coupling_scaling(self):
        """The Born-Davies gap at 10 tau shrinks about fourfold when lam halves."""
        gaps = []
        for lam in (0.04, 0.02):
            m = ExponentialHighT(tau=1.0, beta=0.0, lam=lam)
            jd = jump_decomposition(np.zeros((2, 2)), PAULI_X)
            rates = gamma_rates(m, jd.bohr_freqs)
            davies = superop_exp(davies_generator(jd, rates), 10.0)
            gaps.append((born_propagator(10.0, 0.0, jd, m) - davies).norm())
        assert 3.5 <= gaps[0] / gaps[1] <= 4.5

    def test_trace_drift(self, split_qubit):
        """Trace preservation holds to 1e-8 over 100 tau at lam tau = 0.05."""
        _, jd, _ = split_qubit
        m = ExponentialHighT(tau=1.0, beta=0.2, lam=0.05)
        Lam = born_propagator(100.0, 0.0, jd, m)
        drift = np.max(np.abs(trace_functional(2) @ Lam.matrix - trace_functional(2)))
        assert drift < 1e-8


class TestFamilies:
    def test_davies_family_composes(self, split_qubit):
        """Davies propagators over adjacent intervals compose."""
        _, jd, rates = split_qubit
        family = davies_family(generator_bundle(jd, rates))
        assert (family(3.0, 1.0) @ family(1.0, 0.0)).allclose(family(3.0, 0.0), atol=1e-12)

    def test_redfield_family_trace_preserving(self, split_qubit):
        """Redfield propagators preserve the trace."""
        _, jd, rates = split_qubit
        Lam = redfield_family(jd, rates)(2.5, 0.5)
        assert np.max(np.abs(trace_functional(2) @ Lam.matrix - trace_functional(2))) < 1e-12
