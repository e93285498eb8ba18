"""
Brute-force validators for the closed-form pipeline.

quad_single and quad_double integrate the raw time integrands with adaptive
panel Gauss-Legendre quadrature. fock_evolve integrates the interaction-picture
Schrodinger equation of probe, qubit and a truncated set of cavity modes.
"""
import heapq
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import sparse
from scipy.special import gammaln

from .dyson_utils import DysonIntegrals, Leg, qubit_profile
from .exceptions import ConfigurationError, OracleTruncationError, QuadratureError
from .log_utils import RunLogger
from .model_utils import BellCatState, CavityConfig, ProbeConfig, QubitConfig
from .observable_utils import eta1, eta2, eta_total, transition_probability
from .qubit_state_utils import QubitDensityMatrix, reduced_qubit_state

logger = logging.getLogger(__name__)

GAUSS_ORDER = 16
MAX_PANELS = 4096
OSCILLATION_BUDGET = 1e4
DEFAULT_MODES = tuple(range(1, 9))
NORM_TOL = 1e-9
TOP_LEVEL_TOL = 1e-8
STEP_TOL = 1e-8
MAX_REFINEMENTS = 6
ORACLE_MAX_COUPLING_TIME = 1e-1
ORACLE_MAX_AMPLITUDE = 2.0

_NODES, _WEIGHTS = leggauss(GAUSS_ORDER)


def _panel(integrand: Callable, a: float, b: float) -> complex:
    x = 0.5 * (_NODES + 1.0) * (b - a) + a
    return complex(np.sum(0.5 * (b - a) * _WEIGHTS * np.asarray(integrand(x), dtype=complex)))


def quad_interval(integrand: Callable, a: float, b: float, tol: float = 1e-12,
                  max_frequency: float = 0.0, max_panels: int = MAX_PANELS) -> complex:
    """
    Adaptive panel Gauss-Legendre integral of a vectorized integrand over [a, b].

    Panels are bisected largest-error first until the summed error estimate
    drops below tol times the magnitude of the result (or tol absolutely for
    vanishing integrals).

    Raises:
        QuadratureError: oscillation budget exceeded or panel budget exhausted
    """
    width = b - a
    if width == 0:
        return 0j
    if abs(max_frequency) * abs(width) > OSCILLATION_BUDGET:
        raise QuadratureError(f"Oscillation budget exceeded: |w| T = {abs(max_frequency) * abs(width):.3e}")

    initial = max(1, int(math.ceil(abs(max_frequency) * abs(width) / np.pi)))
    edges = np.linspace(a, b, initial + 1)
    heap = []
    total = 0j
    error = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        mid = 0.5 * (lo + hi)
        coarse = _panel(integrand, lo, hi)
        fine = _panel(integrand, lo, mid) + _panel(integrand, mid, hi)
        err = abs(fine - coarse)
        total += fine
        error += err
        heapq.heappush(heap, (-err, lo, hi, fine))

    panels = len(heap)
    while error > tol * max(abs(total), 1.0):
        if panels >= max_panels:
            raise QuadratureError(f"Quadrature did not reach tol={tol:.1e} within {max_panels} panels "
                                  f"(error estimate {error:.3e})")
        neg_err, lo, hi, value = heapq.heappop(heap)
        total -= value
        error += neg_err
        mid = 0.5 * (lo + hi)
        for sub_lo, sub_hi in ((lo, mid), (mid, hi)):
            sub_mid = 0.5 * (sub_lo + sub_hi)
            coarse = _panel(integrand, sub_lo, sub_hi)
            fine = _panel(integrand, sub_lo, sub_mid) + _panel(integrand, sub_mid, sub_hi)
            err = abs(fine - coarse)
            total += fine
            error += err
            heapq.heappush(heap, (-err, sub_lo, sub_hi, fine))
        panels += 1
    return total


def quad_single(integrand: Callable, T: float, tol: float = 1e-12,
                max_frequency: float = 0.0) -> complex:
    """int_0^T integrand(t) dt."""
    return quad_interval(integrand, 0.0, T, tol=tol, max_frequency=max_frequency)


def quad_double(outer: Callable, inner: Callable, T: float, tol: float = 1e-12,
                max_frequency: float = 0.0) -> complex:
    """
    Ordered integral int_0^T dt2 outer(t2) int_0^t2 dt1 inner(t1).

    The inner integral is itself adaptive, once per outer node.
    """
    def outer_integrand(t2):
        t2 = np.atleast_1d(t2)
        inner_values = np.array([quad_interval(inner, 0.0, float(t), tol=tol, max_frequency=max_frequency)
                                 for t in t2])
        return np.asarray(outer(t2), dtype=complex) * inner_values

    return quad_interval(outer_integrand, 0.0, T, tol=tol, max_frequency=max_frequency)


def leg_integrand(kernels: DysonIntegrals, leg: Leg, gamma: int) -> Tuple[Callable, float]:
    """Time integrand of a leg as a callable, plus its largest angular frequency."""
    components = [(complex(c), float(w)) for c, w in kernels.components(leg, gamma)]

    def integrand(t):
        t = np.asarray(t, dtype=float)
        return sum(c * np.exp(1j * w * t) for c, w in components)

    return integrand, max(abs(w) for _, w in components)


@dataclass(frozen=True)
class FockTruncation:
    """Retained modes and Fock cutoff of the occupied mode; vacuum modes keep levels 0 and 1."""
    n_max: int
    modes: Tuple[int, ...] = DEFAULT_MODES
    vacuum_levels: int = 2

    @classmethod
    def for_state(cls, state: BellCatState, modes: Sequence[int] = DEFAULT_MODES) -> 'FockTruncation':
        span = abs(state.alpha) + abs(state.beta)
        n_max = math.ceil(span ** 2) + 8 * math.ceil(span) + 8
        return cls(n_max=n_max, modes=tuple(modes))

    def levels(self, kappa: int) -> List[int]:
        return [self.n_max + 1 if mode == kappa else self.vacuum_levels for mode in self.modes]


@dataclass
class OracleResult:
    overlap: complex
    p_excite: float
    rho_q: QubitDensityMatrix
    truncation_report: Dict = field(default_factory=dict)


def coherent_amplitudes(alpha: complex, levels: int) -> np.ndarray:
    """Normalized Fock amplitudes of |alpha> truncated to `levels` entries."""
    n = np.arange(levels)
    if alpha == 0:
        amplitudes = np.zeros(levels, dtype=complex)
        amplitudes[0] = 1.0
        return amplitudes
    log_abs = n * np.log(abs(alpha)) - 0.5 * gammaln(n + 1) - 0.5 * abs(alpha) ** 2
    amplitudes = np.exp(log_abs) * np.exp(1j * n * np.angle(alpha))
    return amplitudes / np.linalg.norm(amplitudes)


def _embed(op: sparse.spmatrix, position: int, dims: Sequence[int]) -> sparse.csr_matrix:
    result = None
    for i, dim in enumerate(dims):
        factor = op if i == position else sparse.identity(dim, format='csr')
        result = factor if result is None else sparse.kron(result, factor, format='csr')
    return result.tocsr()


def _annihilation(levels: int) -> sparse.csr_matrix:
    return sparse.diags(np.sqrt(np.arange(1, levels)), 1, format='csr')


class _InteractionHamiltonian:
    """
    H_I(t) of probe (factor 0), qubit (factor 1) and the retained modes.

    H_I(t) = sum_k f_k(t) O_k + conj(f_k(t)) O_k^dagger with O_k of the form
    sigma_+ a or sigma_+ a^dagger per mode and per atom.
    """

    def __init__(self, probe: ProbeConfig, qubit: QubitConfig, cavity: CavityConfig,
                 modes: Sequence[int], levels: Sequence[int]):
        self.dims = [2, 2] + list(levels)
        sigma_plus = sparse.csr_matrix(np.array([[0.0, 0.0], [1.0, 0.0]]))
        probe_raise = _embed(sigma_plus, 0, self.dims)
        qubit_raise = _embed(sigma_plus, 1, self.dims)

        self.operators = []
        self.adjoints = []
        self.amplitudes = []
        self.frequencies = []
        self.spatial = []
        for position, gamma in enumerate(modes):
            a = _embed(_annihilation(levels[position]), position + 2, self.dims)
            omega = float(cavity.frequency(gamma))
            norm = 1.0 / np.sqrt(gamma * np.pi)
            for raise_op, coupling, gap, is_probe in ((probe_raise, probe.lambda_p, probe.Omega_p, True),
                                                      (qubit_raise, qubit.lambda_q, qubit.Omega_q, False)):
                if coupling == 0:
                    continue
                for field_op, sign in ((a.getH().tocsr(), 1.0), (a, -1.0)):
                    op = (raise_op @ field_op).tocsr()
                    self.operators.append(op)
                    self.adjoints.append(op.getH().tocsr())
                    self.frequencies.append(gap + sign * omega)
                    if is_probe:
                        self.amplitudes.append(coupling * norm)
                        self.spatial.append(gamma * np.pi / probe.T)
                    else:
                        self.amplitudes.append(coupling * float(qubit_profile(gamma, qubit, cavity)))
                        self.spatial.append(None)

    @property
    def max_frequency(self) -> float:
        if not self.frequencies:
            return 0.0
        return max(abs(w) + (s or 0.0) for w, s in zip(self.frequencies, self.spatial))

    def apply(self, t: float, psi: np.ndarray) -> np.ndarray:
        out = np.zeros_like(psi)
        for op, adj, amp, w, s in zip(self.operators, self.adjoints, self.amplitudes,
                                      self.frequencies, self.spatial):
            coefficient = amp * np.exp(1j * w * t)
            if s is not None:
                coefficient *= np.sin(s * t)
            out += coefficient * (op @ psi) + np.conj(coefficient) * (adj @ psi)
        return out


def _rk4(hamiltonian: _InteractionHamiltonian, psi0: np.ndarray, T: float, steps: int) -> np.ndarray:
    h = T / steps
    psi = psi0.copy()

    def rhs(t, y):
        return -1j * hamiltonian.apply(t, y)

    for n in range(steps):
        t = n * h
        k1 = rhs(t, psi)
        k2 = rhs(t + 0.5 * h, psi + 0.5 * h * k1)
        k3 = rhs(t + 0.5 * h, psi + 0.5 * h * k2)
        k4 = rhs(t + h, psi + h * k3)
        psi = psi + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return psi


def _converged_evolution(hamiltonian: _InteractionHamiltonian, psi0: np.ndarray, T: float,
                         steps: Optional[int]) -> Tuple[np.ndarray, int, float]:
    """Halve the step until <psi0|psi(T)> moves by less than STEP_TOL."""
    if steps is None:
        steps = max(64, int(math.ceil(4.0 * hamiltonian.max_frequency * T)))
    psi = _rk4(hamiltonian, psi0, T, steps)
    overlap = np.vdot(psi0, psi)
    for _ in range(MAX_REFINEMENTS):
        steps *= 2
        refined = _rk4(hamiltonian, psi0, T, steps)
        refined_overlap = np.vdot(psi0, refined)
        change = abs(refined_overlap - overlap)
        RunLogger.oracle_step(steps, change, psi0.size)
        psi, overlap = refined, refined_overlap
        if change < STEP_TOL:
            return psi, steps, change
    raise OracleTruncationError(f"Step refinement did not converge after {steps} steps (change {change:.3e})")


def _check_oracle_regime(state: BellCatState, probe: ProbeConfig, qubit: QubitConfig,
                         cavity: CavityConfig, trunc: FockTruncation) -> None:
    kappa = cavity.kappa
    if kappa not in trunc.modes:
        raise ConfigurationError(f"Retained modes {trunc.modes} must include kappa={kappa}")
    below = [m for m in trunc.modes if m < kappa]
    above = [m for m in trunc.modes if m > kappa]
    if len(below) < min(3, kappa - 1) or len(above) < 3:
        raise ConfigurationError(f"Retained modes {trunc.modes} need 3 vacuum neighbours of kappa on each side")
    coupling_time = max(abs(probe.lambda_p), abs(qubit.lambda_q)) * probe.T
    if coupling_time > ORACLE_MAX_COUPLING_TIME:
        raise ConfigurationError(f"Oracle regime requires lambda T <= {ORACLE_MAX_COUPLING_TIME}, got {coupling_time}")
    if max(abs(state.alpha), abs(state.beta)) > ORACLE_MAX_AMPLITUDE:
        raise ConfigurationError(f"Oracle regime requires |alpha|, |beta| <= {ORACLE_MAX_AMPLITUDE}")
    required = FockTruncation.for_state(state).n_max
    if trunc.n_max < required:
        raise ConfigurationError(f"n_max={trunc.n_max} below the required {required}")


def fock_evolve(state: BellCatState, probe: ProbeConfig, qubit: QubitConfig,
                cavity: CavityConfig, trunc: Optional[FockTruncation] = None,
                steps: Optional[int] = None) -> OracleResult:
    """
    Evolve A|g_p, g, alpha> + B|g_p, e, beta> (other modes in vacuum) over [0, T].

    Args:
        state: Bell-cat state of the qubit and mode kappa
        probe: probe configuration, desk-scale internal units
        qubit: qubit configuration
        cavity: cavity configuration
        trunc: Fock truncation; defaults to FockTruncation.for_state(state)
        steps: initial RK4 step count; refined by halving until converged

    Returns:
        OracleResult with the survival overlap, probe excitation probability,
        the partial-trace qubit state and a truncation report.

    Raises:
        ConfigurationError: outside the oracle regime
        OracleTruncationError: norm loss or top-level population above tolerance
    """
    trunc = trunc or FockTruncation.for_state(state)
    _check_oracle_regime(state, probe, qubit, cavity, trunc)

    kappa = cavity.kappa
    levels = trunc.levels(kappa)
    hamiltonian = _InteractionHamiltonian(probe, qubit, cavity, trunc.modes, levels)

    kappa_position = trunc.modes.index(kappa)
    ground_probe = np.array([1.0, 0.0])

    def branch(atom: np.ndarray, amplitude: complex) -> np.ndarray:
        vector = np.kron(ground_probe, atom)
        for position, dim in enumerate(levels):
            if position == kappa_position:
                mode = coherent_amplitudes(amplitude, dim)
            else:
                mode = np.zeros(dim)
                mode[0] = 1.0
            vector = np.kron(vector, mode)
        return vector.astype(complex)

    psi0 = (state.A * branch(np.array([1.0, 0.0]), state.alpha)
            + state.B * branch(np.array([0.0, 1.0]), state.beta))
    psi0 = psi0 / np.linalg.norm(psi0)

    psi, used_steps, step_change = _converged_evolution(hamiltonian, psi0, probe.T, steps)

    norm_error = abs(np.linalg.norm(psi) - 1.0)
    if norm_error > NORM_TOL:
        raise OracleTruncationError(f"Evolved state lost unitarity: | |psi| - 1 | = {norm_error:.3e}")

    tensor = psi.reshape(hamiltonian.dims)
    occupation = np.sum(np.abs(np.moveaxis(tensor, kappa_position + 2, -1)) ** 2,
                        axis=tuple(range(len(hamiltonian.dims) - 1)))
    top_population = float(occupation[-2:].sum())
    if top_population > TOP_LEVEL_TOL:
        raise OracleTruncationError(f"Top Fock levels of mode {kappa} hold population {top_population:.3e}")

    split = psi.reshape(2, 2, -1)
    p_excite = float(np.sum(np.abs(split[1]) ** 2))
    rho = np.einsum('pir,pjr->ij', split, np.conj(split))
    rho_q = QubitDensityMatrix(rho_gg=complex(rho[0, 0]), rho_ge=complex(rho[0, 1]),
                               rho_eg=complex(rho[1, 0]), rho_ee=complex(rho[1, 1]),
                               hermiticity_residual=float(abs(rho[0, 1] - np.conj(rho[1, 0]))),
                               coupling_time=max(abs(probe.lambda_p), abs(qubit.lambda_q)) * probe.T)

    report = {
        'n_max': trunc.n_max,
        'modes': list(trunc.modes),
        'dimension': int(psi.size),
        'steps': used_steps,
        'step_change': float(step_change),
        'norm_error': float(norm_error),
        'top_level_population': top_population,
    }
    return OracleResult(overlap=complex(np.vdot(psi0, psi)), p_excite=p_excite, rho_q=rho_q,
                        truncation_report=report)


def absorption_amplitude(probe: ProbeConfig, cavity: CavityConfig, steps: Optional[int] = None) -> complex:
    """
    Amplitude <e_p, 0| U |g_p, 1> for a probe crossing a cavity with only mode kappa.

    Works for any kappa so even-mode runs can be compared with an odd control.
    """
    qubit = QubitConfig(x0=0.0, lambda_q=0.0, delta=0.0, Omega_q=1.0)
    hamiltonian = _InteractionHamiltonian(probe, qubit, cavity, [cavity.kappa], [3])
    psi0 = np.zeros(12, dtype=complex)
    psi0[np.ravel_multi_index((0, 0, 1), (2, 2, 3))] = 1.0
    psi, _, _ = _converged_evolution(hamiltonian, psi0, probe.T, steps)
    return complex(psi[np.ravel_multi_index((1, 0, 0), (2, 2, 3))])


PHASE_TOL = 1e-3
PROBABILITY_RTOL = 1e-2
RHO_ATOL = 1e-4


def oracle_compare(state: BellCatState, probe: ProbeConfig, qubit: QubitConfig,
                   cavity: CavityConfig, trunc: Optional[FockTruncation] = None,
                   steps: Optional[int] = None) -> Dict:
    """
    Run the Fock oracle and the closed-form pipeline on the same point.

    The closed-form side sums exactly over the retained modes so both sides
    see the same field.

    Returns:
        dict: mismatches, the tolerances they are held to and 'within_tolerance'
    """
    trunc = trunc or FockTruncation.for_state(state)
    oracle = fock_evolve(state, probe, qubit, cavity, trunc, steps)
    truncated = replace(cavity, fixed_modes=True, mode_cutoff=max(trunc.modes))

    eta = eta_total(state, probe, qubit, truncated)
    second = eta2(state, probe, qubit, truncated)
    residual = oracle.overlap - 1.0 - eta1(state, qubit, truncated, probe.T)
    p_analytic = transition_probability(state, probe, qubit, truncated)
    rho = reduced_qubit_state(state, probe, qubit, truncated)

    phase_mismatch = abs(np.angle(np.exp(1j * (eta.real - np.angle(oracle.overlap)))))
    p_error = abs(p_analytic - oracle.p_excite) / oracle.p_excite if oracle.p_excite > 0 else abs(p_analytic)
    eta2_error = abs(second - residual) / abs(residual) if residual != 0 else abs(second)
    rho_errors = {
        name: float(abs(getattr(rho, name) - getattr(oracle.rho_q, name)))
        for name in ('rho_gg', 'rho_ge', 'rho_eg', 'rho_ee')
    }
    within = (phase_mismatch <= PHASE_TOL and p_error <= PROBABILITY_RTOL
              and max(rho_errors.values()) <= RHO_ATOL)
    return {
        'phase_mismatch': float(phase_mismatch),
        'p_excite_oracle': oracle.p_excite,
        'p_excite_analytic': p_analytic,
        'p_excite_rel_error': float(p_error),
        # reported only; the tolerances above decide within_tolerance
        'eta2_rel_error': float(eta2_error),
        'rho_abs_errors': rho_errors,
        'tolerances': {'phase': PHASE_TOL, 'p_excite_rtol': PROBABILITY_RTOL, 'rho_atol': RHO_ATOL},
        'truncation_report': oracle.truncation_report,
        'within_tolerance': bool(within),
    }
