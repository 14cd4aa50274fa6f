import logging
import math

import numpy as np

from core.exceptions import DomainError, NumericError
from mtcpert.modules.bath.models import DEFAULT_QUADRATURE
from mtcpert.modules.bath.services import correlation_series, series_transform
from mtcpert.modules.generators.models import GeneratorBundle, JumpDecomposition, OdeConfig
from mtcpert.modules.opalg.models import SuperOperator, as_complex_matrix
from mtcpert.modules.opalg.services import is_hermitian, spectral_decompose, superop_exp

logger = logging.getLogger(__name__)

DEFAULT_ODE = OdeConfig()


def _as_coupling_list(V):
    V = np.asarray(V, dtype=complex)
    return tuple(V[np.newaxis] if V.ndim == 2 else V)


def renormalize_system(Hs0, Vs, Ve, rho_e, lam):
    """H^s = H^s_0 + lam sum_a tr(V^e_a rho_e) V^s_a."""
    Hs = np.array(as_complex_matrix(Hs0, "system hamiltonian"))
    rho = getattr(rho_e, "matrix", rho_e)
    Vs, Ve = _as_coupling_list(Vs), _as_coupling_list(Ve)
    if len(Vs) != len(Ve):
        raise DomainError(f"{len(Vs)} system couplings but {len(Ve)} bath couplings")
    for V_s, V_e in zip(Vs, Ve):
        Hs = Hs + lam * np.trace(V_e @ rho).real * V_s
    return Hs


def _bin_magnitudes(values, tol):
    """Ascending centres of |differences|, chained within ``tol``; the first centre is pinned to zero."""
    order = np.sort(values)
    groups = [[order[0]]]
    for v in order[1:]:
        if v - groups[-1][-1] <= tol:
            groups[-1].append(v)
        else:
            groups.append([v])
    centres = [float(np.mean(g)) for g in groups]
    centres[0] = 0.0
    return np.array(centres)


def jump_decomposition(Hs, V, freq_tol=None):
    """Split each coupling into Bohr-frequency components of ``Hs``.

    Frequency bins whose jump operators all vanish are dropped.
    """
    Hs = as_complex_matrix(Hs, "system hamiltonian")
    if not is_hermitian(Hs):
        raise DomainError("system hamiltonian is not hermitian")
    couplings = tuple(as_complex_matrix(Va, "system coupling") for Va in _as_coupling_list(V))
    for Va in couplings:
        if Va.shape != Hs.shape:
            raise DomainError(f"coupling of shape {Va.shape} does not match hamiltonian {Hs.shape}")
    radius = float(np.max(np.abs(np.linalg.eigvalsh(Hs))))
    if freq_tol is None:
        freq_tol = 1e-8 * (radius if radius > 0 else 1.0)

    spectrum = spectral_decompose(Hs, eig_tol=freq_tol)
    energies = np.array(spectrum.eigenvalues)
    diffs = energies[:, None] - energies[None, :]
    centres = _bin_magnitudes(np.abs(diffs).reshape(-1), freq_tol)
    freqs = np.concatenate([-centres[:0:-1], centres])

    jumps = np.zeros((len(freqs), len(couplings)) + Hs.shape, dtype=complex)
    for i, Pi in enumerate(spectrum.projectors):
        for j, Pj in enumerate(spectrum.projectors):
            d = diffs[i, j]
            centre = int(np.argmin(np.abs(centres - abs(d))))
            slot = len(centres) - 1 + (centre if d >= 0 else -centre)
            for a, Va in enumerate(couplings):
                jumps[slot, a] += Pi @ Va @ Pj

    scale = max(1.0, max(float(np.max(np.abs(Va))) for Va in couplings))
    keep = [k for k in range(len(freqs)) if np.max(np.abs(jumps[k])) > 1e-14 * scale]
    freqs, jumps = freqs[keep], jumps[keep]
    jumps.setflags(write=False)
    logger.debug("jump_decomposition: %d Bohr frequencies for dim %d", len(freqs), Hs.shape[0])
    return JumpDecomposition(Hs, couplings, tuple(float(w) for w in freqs), jumps, freq_tol)


# --------------------------------------------------------------------------------------------------
# Markov terms shared by Davies, Redfield and the Born kernel
# --------------------------------------------------------------------------------------------------


def term_basis(jd: JumpDecomposition):
    """Superoperator blocks P, Q with axes (omega, omega', a, a', d^2, d^2).

    P = V(w)V'(w') . 1 - V'(w') . V(w) and Q = 1 . V'(w')V(w) - V(w) . V'(w').
    """
    d = jd.dim
    identity = np.eye(d)
    n_f, n_a = len(jd.bohr_freqs), jd.n_couplings
    P = np.zeros((n_f, n_f, n_a, n_a, d * d, d * d), dtype=complex)
    Q = np.zeros_like(P)
    for i in range(n_f):
        for j in range(n_f):
            for a in range(n_a):
                for b in range(n_a):
                    A, B = jd.jumps[i, a], jd.jumps[j, b]
                    P[i, j, a, b] = np.kron(identity, A @ B) - np.kron(A.T, B)
                    Q[i, j, a, b] = np.kron((B @ A).T, identity) - np.kron(B.T, A)
    return P, Q


def markov_terms(jd: JumpDecomposition, gamma_fn, conj_fn, basis=None):
    """T_{w w'} = -sum_{a a'} [Gamma_{a a'}(w') P + Gamma~_{a a'}(w') Q] for every frequency pair.

    ``gamma_fn(w')`` returns lam^2 int G(s) e^{-i w' s} ds and ``conj_fn(w')`` the same
    transform of G*; both are (n_a, n_a) matrices. Every block annihilates the trace.
    """
    n_f, d2 = len(jd.bohr_freqs), jd.dim**2
    if n_f == 0:
        return np.zeros((0, 0, d2, d2), dtype=complex)
    P, Q = basis if basis is not None else term_basis(jd)
    gamma = np.array([gamma_fn(w) for w in jd.bohr_freqs]).reshape(n_f, jd.n_couplings, jd.n_couplings)
    gamma_conj = np.array([conj_fn(w) for w in jd.bohr_freqs]).reshape(gamma.shape)
    return -(np.einsum("jab,ijabxy->ijxy", gamma, P) + np.einsum("jab,ijabxy->ijxy", gamma_conj, Q))


def _rate_functions(rates):
    return rates.gamma_matrix, lambda w: rates.gamma_matrix(-w).conj()


def davies_generator(jd: JumpDecomposition, rates) -> SuperOperator:
    """Secular subset omega' = -omega of the Markov terms.

    Equals sum_w w(w) (V . V^dagger - {V^dagger V, .}/2) - (i/2) h(w) [V^dagger V, .] for one coupling.
    """
    terms = markov_terms(jd, *_rate_functions(rates))
    matrix = np.zeros((jd.dim**2, jd.dim**2), dtype=complex)
    for i in range(len(jd.bohr_freqs)):
        matrix += terms[i, jd.mirror(i)]
    return SuperOperator(jd.dim, matrix)


def phase_average(nu, t_interval):
    """(1/(b - a)) int_a^b e^{i nu t} dt, or e^{i nu a} for a degenerate interval."""
    a, b = t_interval
    if b == a or abs(nu) * (b - a) < 1e-12:
        return complex(np.exp(1j * nu * a))
    return complex((np.exp(1j * nu * b) - np.exp(1j * nu * a)) / (1j * nu * (b - a)))


def _interval(t_interval):
    if t_interval is None:
        return (0.0, 0.0)
    if np.isscalar(t_interval):
        if t_interval < 0:
            raise DomainError(f"averaging interval must be non-negative, got {t_interval}")
        return (0.0, float(t_interval))
    a, b = (float(t) for t in t_interval)
    if b < a:
        raise DomainError(f"averaging interval ({a}, {b}) is reversed")
    return (a, b)


def redfield_generator(jd: JumpDecomposition, rates, t_interval=None) -> SuperOperator:
    """Non-secular Markov generator in the interaction picture, phases e^{i(w+w')t} averaged over ``t_interval``.

    ``t_interval`` is a length (averaged over [0, length]) or a pair (a, b); ``None``
    evaluates the phases at t = 0.
    """
    interval = _interval(t_interval)
    terms = markov_terms(jd, *_rate_functions(rates))
    freqs = jd.bohr_freqs
    matrix = np.zeros((jd.dim**2, jd.dim**2), dtype=complex)
    for i, w in enumerate(freqs):
        for j, wp in enumerate(freqs):
            matrix += phase_average(w + wp, interval) * terms[i, j]
    return SuperOperator(jd.dim, matrix)


def generator_bundle(jd: JumpDecomposition, rates, t_interval=None) -> GeneratorBundle:
    return GeneratorBundle(
        davies_generator(jd, rates),
        redfield_generator(jd, rates, t_interval),
        jd,
        rates,
        None if t_interval is None else _interval(t_interval),
    )


# --------------------------------------------------------------------------------------------------
# Second super-cumulant and the Born propagator
# --------------------------------------------------------------------------------------------------


class _BornKernel:
    """t -> lam^2 L^(2)_{t, t0} with the correlation integrals truncated at min(t - t0, cutoff)."""

    def __init__(self, jd, m, t0, cutoff):
        self.jd = jd
        self.t0 = t0
        self.cutoff = cutoff
        self.lam2 = m.lam**2
        self.full = correlation_series(m, "full")
        self.conj = correlation_series(m, "conj")
        self.basis = term_basis(jd)
        freqs = np.array(jd.bohr_freqs)
        self.sums = freqs[:, None] + freqs[None, :]

    def __call__(self, t):
        upper = min(t - self.t0, self.cutoff)
        if upper < 0:
            raise DomainError(f"kernel evaluated at t = {t} before t0 = {self.t0}")
        terms = markov_terms(
            self.jd,
            lambda w: self.lam2 * series_transform(self.full, w, upper),
            lambda w: self.lam2 * series_transform(self.conj, w, upper),
            self.basis,
        )
        return np.einsum("ij,ijxy->xy", np.exp(1j * self.sums * t), terms)


def second_supercumulant(t, t0, jd: JumpDecomposition, m, quad=DEFAULT_QUADRATURE) -> SuperOperator:
    """-lam^2 int_{t0}^{t} du' tr_e[H(t), [H(u'), . rho_e]] in the interaction picture."""
    if t < t0:
        raise DomainError(f"t = {t} precedes t0 = {t0}")
    return SuperOperator(jd.dim, _BornKernel(jd, m, t0, quad.cutoff)(t))


def born_propagator(t1, t0, jd: JumpDecomposition, m, ode=DEFAULT_ODE, quad=DEFAULT_QUADRATURE) -> SuperOperator:
    """Solve dLambda/dt = lam^2 L^(2)_{t, t0} Lambda from Lambda(t0) = 1 with classical RK4."""
    if t1 < t0:
        raise DomainError(f"t1 = {t1} precedes t0 = {t0}")
    d2 = jd.dim**2
    Lam = np.eye(d2, dtype=complex)
    if t1 == t0:
        return SuperOperator(jd.dim, Lam)
    n_steps = max(1, math.ceil((t1 - t0) / ode.step - 1e-9))
    if n_steps > ode.max_steps:
        raise NumericError(f"born_propagator: {n_steps} steps of {ode.step:.3g} exceed the limit {ode.max_steps}")
    h = (t1 - t0) / n_steps
    if t0 + h == t0:
        raise NumericError(f"born_propagator: step {h:.3g} underflows at t0 = {t0}")
    kernel = _BornKernel(jd, m, t0, quad.cutoff)
    t = t0
    for step in range(n_steps):
        k1 = kernel(t) @ Lam
        mid = kernel(t + h / 2)
        k2 = mid @ (Lam + h / 2 * k1)
        k3 = mid @ (Lam + h / 2 * k2)
        k4 = kernel(t + h) @ (Lam + h * k3)
        Lam = Lam + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        t = t0 + (step + 1) * h
        if not np.all(np.isfinite(Lam)):
            raise NumericError(f"born_propagator: non-finite propagator at t = {t:.6g} after {step + 1} steps")
    return SuperOperator(jd.dim, Lam)


# --------------------------------------------------------------------------------------------------
# Propagator families Lambda(t, t_prev) in the interaction picture
# --------------------------------------------------------------------------------------------------


def davies_family(bundle: GeneratorBundle):
    davies = bundle.davies

    def propagator(t, t_prev):
        return superop_exp(davies, t - t_prev)

    return propagator


def redfield_family(jd: JumpDecomposition, rates):
    def propagator(t, t_prev):
        return superop_exp(redfield_generator(jd, rates, (t_prev, t)), t - t_prev)

    return propagator


def born_family(jd: JumpDecomposition, m, ode=DEFAULT_ODE, quad=DEFAULT_QUADRATURE):
    def propagator(t, t_prev):
        return born_propagator(t, t_prev, jd, m, ode, quad)

    return propagator
