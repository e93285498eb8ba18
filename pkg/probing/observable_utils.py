"""
Measurable quantities of the probing protocol.

The probe's survival amplitude over the cavity is 1 + eta1 + eta2, where eta1 is
first order in the qubit coupling and eta2 collects every second-order term. The
acquired phase is eta = -i Log(1 + eta1 + eta2), compared against the phase
acquired over an empty reference cavity.

Second-order term table. Each entry is (amplitude, weight, first leg, second
leg); the contribution is -lambda^2 * amplitude^2 * weight * (first o second)
evaluated at the resonant mode kappa. Weights are taken on alpha for the A
branch and beta for the B branch:

    norm     |z|^2
    conj_sq  conj(z)^2
    sq       z^2
"""
import logging
from dataclasses import dataclass, field, replace
from typing import Dict, List, Sequence, Tuple

import numpy as np

from .dyson_utils import (I_MINUS, I_PLUS, X_MINUS, X_PLUS, DysonIntegrals,
                          probe_vacuum_sums, vacuum_sums)
from .exceptions import ConfigurationError, DegenerateAmplitudeError
from .model_utils import (BellCatState, CavityConfig, ProbeConfig, QubitConfig,
                          coherent_overlap)

logger = logging.getLogger(__name__)

DEGENERATE_AMPLITUDE = 1e-12
P_EXCITE_LIMIT = 1e-2
IM_ETA_TOL = 1e-8
NODE_TOL = 1e-12
OVERLAP_SUPPRESSION = 1e-5

ETA2_QUBIT_COHERENT = (
    ('A', 'norm', I_PLUS.star, I_PLUS),
    ('A', 'norm', I_MINUS, I_MINUS.star),
    ('A', 'conj_sq', I_MINUS, I_PLUS),
    ('A', 'sq', I_PLUS.star, I_MINUS.star),
    ('B', 'norm', I_PLUS, I_PLUS.star),
    ('B', 'norm', I_MINUS.star, I_MINUS),
    ('B', 'conj_sq', I_PLUS, I_MINUS),
    ('B', 'sq', I_MINUS.star, I_PLUS.star),
)

# Both branches share the probe legs; X- o X-* vanishes at resonance
ETA2_PROBE_COHERENT = (
    ('norm', X_PLUS.star, X_PLUS),
    ('norm', X_MINUS, X_MINUS.star),
    ('conj_sq', X_MINUS, X_PLUS),
    ('sq', X_PLUS.star, X_MINUS.star),
)


def _weight(kind: str, z: complex) -> complex:
    if kind == 'norm':
        return abs(z) ** 2
    if kind == 'conj_sq':
        return np.conj(z) ** 2
    return z ** 2


def _probe_weight(kind: str, state: BellCatState) -> complex:
    return (state.A ** 2 * _weight(kind, state.alpha)
            + state.B ** 2 * _weight(kind, state.beta))


def wrap_phase(x):
    """Map a phase into (-pi, pi]."""
    wrapped = np.pi - np.mod(np.pi - np.asarray(x, dtype=float), 2 * np.pi)
    if np.ndim(wrapped) == 0:
        return float(wrapped)
    return wrapped


@dataclass
class PhaseResult:
    """Assembled observables for one parameter point."""
    eta: complex
    eta_ref: complex
    delta_gamma: float
    visibility: float
    p_excite: float
    eta1: complex = 0j
    eta2: complex = 0j
    last_index: int = 0
    flags: List[str] = field(default_factory=list)

    @property
    def protocol_valid(self) -> bool:
        return self.p_excite < P_EXCITE_LIMIT and self.eta.imag >= -IM_ETA_TOL

    def to_dict(self) -> Dict:
        return {
            'eta_re': self.eta.real,
            'eta_im': self.eta.imag,
            'eta_ref_re': self.eta_ref.real,
            'eta_ref_im': self.eta_ref.imag,
            'delta_gamma': self.delta_gamma,
            'visibility': self.visibility,
            'p_excite': self.p_excite,
            'last_index': self.last_index,
            'flags': list(self.flags),
        }


def transition_probability(state: BellCatState, probe: ProbeConfig, qubit: QubitConfig,
                           cavity: CavityConfig) -> float:
    """
    Probability that the probe leaves the cavity excited, to second order.

    Args:
        state: Bell-cat state of qubit and resonant mode
        probe: probe configuration
        qubit: qubit configuration (does not enter at this order)
        cavity: cavity configuration

    Returns:
        lambda_p^2 times the coherent resonant-mode terms plus the vacuum sum
        of |X+|^2 over all modes.
    """
    kernels = DysonIntegrals(cavity, probe)
    x_plus = complex(kernels.single(X_PLUS, cavity.kappa))
    x_minus = complex(kernels.single(X_MINUS, cavity.kappa))
    coherent = (_probe_weight('norm', state) * (abs(x_plus) ** 2 + abs(x_minus) ** 2)
                + 2.0 * (_probe_weight('sq', state) * np.conj(x_plus) * np.conj(x_minus)).real)
    vacuum = probe_vacuum_sums(cavity, replace(probe, lambda_p=0.0))['x_norm'].real
    return float(probe.lambda_p ** 2 * (coherent + vacuum))


def eta1(state: BellCatState, qubit: QubitConfig, cavity: CavityConfig, T: float) -> complex:
    """First-order term -i lambda_q A B 2 Re[(I+* beta + I- conj(alpha)) <alpha|beta>]."""
    if state.A == 0 or state.B == 0 or qubit.lambda_q == 0:
        return 0j
    probe = ProbeConfig(v=cavity.L / T, lambda_p=0.0, Omega_p=cavity.omega_kappa, T=T)
    kernels = DysonIntegrals(cavity, probe, qubit)
    i_plus = complex(kernels.single(I_PLUS, cavity.kappa))
    i_minus = complex(kernels.single(I_MINUS, cavity.kappa))
    bracket = (np.conj(i_plus) * state.beta + i_minus * np.conj(state.alpha))
    overlap = coherent_overlap(state.beta, state.alpha)
    return complex(-1j * qubit.lambda_q * state.A * state.B * 2.0 * (bracket * overlap).real)


def eta2_terms(state: BellCatState, probe: ProbeConfig, qubit: QubitConfig,
               cavity: CavityConfig) -> Dict[str, complex]:
    """
    Named second-order contributions.

    Keys are 'qubit_coherent' (the eight resonant-mode qubit terms),
    'qubit_vacuum', 'probe_coherent' and 'probe_vacuum', plus 'last_index' of
    the mode sums.
    """
    kernels = DysonIntegrals(cavity, probe, qubit)
    kappa = cavity.kappa
    sums = vacuum_sums(cavity, probe, qubit)
    amplitudes = {'A': (state.A, state.alpha), 'B': (state.B, state.beta)}

    qubit_coherent = 0j
    for amplitude, kind, first, second in ETA2_QUBIT_COHERENT:
        scale, z = amplitudes[amplitude]
        if scale == 0:
            continue
        qubit_coherent += scale ** 2 * _weight(kind, z) * complex(kernels.circ(first, kappa, second, kappa))

    probe_coherent = 0j
    for kind, first, second in ETA2_PROBE_COHERENT:
        probe_coherent += _probe_weight(kind, state) * complex(kernels.circ(first, kappa, second, kappa))

    lq2, lp2 = qubit.lambda_q ** 2, probe.lambda_p ** 2
    return {
        'qubit_coherent': -lq2 * qubit_coherent,
        'qubit_vacuum': -lq2 * (state.A ** 2 * sums['i_plus_circ'] + state.B ** 2 * sums['i_minus_circ']),
        'probe_coherent': -lp2 * probe_coherent,
        'probe_vacuum': -lp2 * sums['x_circ'],
        'last_index': sums['last_index'],
    }


def eta2(state: BellCatState, probe: ProbeConfig, qubit: QubitConfig,
         cavity: CavityConfig) -> complex:
    terms = eta2_terms(state, probe, qubit, cavity)
    return complex(terms['qubit_coherent'] + terms['qubit_vacuum']
                   + terms['probe_coherent'] + terms['probe_vacuum'])


def _log_amplitude(amplitude: complex) -> complex:
    if abs(amplitude) < DEGENERATE_AMPLITUDE:
        raise DegenerateAmplitudeError(f"Survival amplitude is degenerate: |1 + eta1 + eta2| = {abs(amplitude):.3e}")
    return complex(-1j * np.log(amplitude))


def eta_total(state: BellCatState, probe: ProbeConfig, qubit: QubitConfig,
              cavity: CavityConfig) -> complex:
    """Acquired phase -i Log(1 + eta1 + eta2) on the principal branch."""
    return _log_amplitude(1.0 + eta1(state, qubit, cavity, probe.T) + eta2(state, probe, qubit, cavity))


def eta_reference(probe: ProbeConfig, cavity: CavityConfig) -> complex:
    """Phase acquired over an empty cavity; depends only on the probe vacuum sum."""
    sums = probe_vacuum_sums(cavity, replace(probe, lambda_p=0.0))
    return _log_amplitude(1.0 - probe.lambda_p ** 2 * sums['x_circ'])


def interferometric_phase(state: BellCatState, probe: ProbeConfig, qubit: QubitConfig,
                          cavity: CavityConfig) -> PhaseResult:
    first = eta1(state, qubit, cavity, probe.T)
    terms = eta2_terms(state, probe, qubit, cavity)
    second = complex(terms['qubit_coherent'] + terms['qubit_vacuum']
                     + terms['probe_coherent'] + terms['probe_vacuum'])
    eta = _log_amplitude(1.0 + first + second)
    eta_ref = eta_reference(probe, cavity)
    p_excite = transition_probability(state, probe, qubit, cavity)

    flags = []
    if p_excite > P_EXCITE_LIMIT:
        flags.append('p_excite_high')
    if eta.imag < 0:
        flags.append('negative_im_eta')
        logger.debug(f"Negative Im(eta)={eta.imag:.3e}, truncation artifact")

    return PhaseResult(
        eta=eta,
        eta_ref=eta_ref,
        delta_gamma=wrap_phase(eta.real - eta_ref.real),
        visibility=float(np.exp(-2.0 * eta.imag)),
        p_excite=p_excite,
        eta1=first,
        eta2=second,
        last_index=int(terms['last_index']),
        flags=flags,
    )


def phase_resolution(state: BellCatState, probe: ProbeConfig, qubit: QubitConfig,
                     cavity: CavityConfig, dalpha: float) -> float:
    """Change |delta_gamma(|alpha| + dalpha) - delta_gamma(|alpha|)|."""
    if dalpha < 0:
        raise ConfigurationError(f"Resolution step must be non-negative, got dalpha={dalpha}")
    if dalpha == 0:
        return 0.0
    base = interferometric_phase(state, probe, qubit, cavity).delta_gamma
    shifted_state = state.with_alpha_abs(abs(state.alpha) + dalpha)
    shifted = interferometric_phase(shifted_state, probe, qubit, cavity).delta_gamma
    return abs(shifted - base)


def eta1_suppression(state: BellCatState, qubit: QubitConfig, cavity: CavityConfig,
                     T: float) -> Dict:
    """Report which mechanism keeps the first-order phase term small."""
    node_factor = abs(float(np.sin(cavity.wavenumber(cavity.kappa) * qubit.x0)))
    overlap_abs = abs(coherent_overlap(state.beta, state.alpha))
    if node_factor < NODE_TOL:
        mechanism = 'node'
    elif overlap_abs < OVERLAP_SUPPRESSION:
        mechanism = 'overlap'
    else:
        mechanism = 'none'
    return {
        'mechanism': mechanism,
        'abs_im_eta1': abs(eta1(state, qubit, cavity, T).imag),
        'node_factor': node_factor,
        'overlap_abs': overlap_abs,
    }


def coherent_state_limit(alpha: complex, probe: ProbeConfig, cavity: CavityConfig,
                         qubit: QubitConfig) -> PhaseResult:
    """Pipeline for a lone coherent state: A = 1, B = 0 and no qubit coupling."""
    state = BellCatState(A=1.0, B=0.0, alpha=complex(alpha), beta=0j)
    return interferometric_phase(state, probe, replace(qubit, lambda_q=0.0), cavity)


def locate_qubit(measured_delta_gamma: float, state: BellCatState, probe: ProbeConfig,
                 qubit: QubitConfig, cavity: CavityConfig,
                 grid: Sequence[float]) -> List[float]:
    """
    Qubit positions consistent with a measured phase difference.

    Scans x0 over the grid, then refines every sign change of the residual
    delta_gamma(x0) - measured by linear interpolation.

    Returns:
        Sorted positions in the length unit of the cavity.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.size < 2:
        raise ConfigurationError("locate_qubit needs at least two grid positions")
    residual = np.array([
        interferometric_phase(state, probe, replace(qubit, x0=float(x0)), cavity).delta_gamma
        for x0 in grid
    ]) - measured_delta_gamma

    positions = [float(x0) for x0, r in zip(grid, residual) if r == 0.0]
    for i in range(grid.size - 1):
        r0, r1 = residual[i], residual[i + 1]
        if r0 * r1 < 0:
            positions.append(float(grid[i] - r0 * (grid[i + 1] - grid[i]) / (r1 - r0)))
    logger.debug(f"locate_qubit found {len(positions)} candidate positions")
    return sorted(positions)


def qubit_coherent_partial(state: BellCatState, probe: ProbeConfig, qubit: QubitConfig,
                           cavity: CavityConfig) -> Tuple[complex, complex]:
    """The eight resonant-mode qubit terms of eta2 alongside the full eta2."""
    terms = eta2_terms(state, probe, qubit, cavity)
    total = (terms['qubit_coherent'] + terms['qubit_vacuum']
             + terms['probe_coherent'] + terms['probe_vacuum'])
    return complex(terms['qubit_coherent']), complex(total)
