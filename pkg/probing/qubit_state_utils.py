"""
Reduced density matrix of the cavity qubit after the probe has crossed.

The joint state is expanded to second order in the qubit coupling; the field
and probe are traced out. Probe contributions cancel through second order, so
only the interaction time of the probe enters.

Basis: index 0 is |g>, index 1 is |e>. rho_eg is the coefficient of |e><g|.
"""
import logging
from dataclasses import dataclass
from typing import Dict, Tuple

import numpy as np
from scipy.special import entr

from .dyson_utils import I_MINUS, I_PLUS, DysonIntegrals, vacuum_sums
from .exceptions import NonPhysicalStateError
from .model_utils import BellCatState, CavityConfig, ProbeConfig, QubitConfig, coherent_overlap

logger = logging.getLogger(__name__)

EIGENVALUE_FLOOR = 1e-12

# <bra| G |ket> / <bra|ket> for the ordered second-order operators of each
# branch. Weights: 'cross' = conj(bra) ket, 'bra_sq' = conj(bra)^2, 'ket_sq' = ket^2.
ORDERED_A = (
    ('cross', I_PLUS.star, I_PLUS),
    ('cross', I_MINUS, I_MINUS.star),
    ('bra_sq', I_MINUS, I_PLUS),
    ('ket_sq', I_PLUS.star, I_MINUS.star),
)
ORDERED_B = (
    ('cross', I_PLUS, I_PLUS.star),
    ('cross', I_MINUS.star, I_MINUS),
    ('bra_sq', I_PLUS, I_MINUS),
    ('ket_sq', I_MINUS.star, I_PLUS.star),
)


@dataclass
class QubitDensityMatrix:
    rho_gg: complex
    rho_ge: complex
    rho_eg: complex
    rho_ee: complex
    hermiticity_residual: float = 0.0
    coupling_time: float = 0.0

    @property
    def trace_residual(self) -> float:
        return abs(self.rho_gg + self.rho_ee - 1.0)

    @property
    def epsilon(self) -> float:
        """Eigenvalue tolerance window 10 (lambda T)^4."""
        return max(10.0 * self.coupling_time ** 4, EIGENVALUE_FLOOR)

    def as_array(self) -> np.ndarray:
        return np.array([[self.rho_gg, self.rho_ge],
                         [self.rho_eg, self.rho_ee]], dtype=complex)

    def to_dict(self) -> Dict[str, float]:
        return {
            'rho_gg': self.rho_gg.real,
            'rho_ee': self.rho_ee.real,
            'rho_eg_re': self.rho_eg.real,
            'rho_eg_im': self.rho_eg.imag,
            'trace_residual': self.trace_residual,
            'hermiticity_residual': self.hermiticity_residual,
        }


def _weight(kind: str, bra: complex, ket: complex) -> complex:
    if kind == 'cross':
        return np.conj(bra) * ket
    if kind == 'bra_sq':
        return np.conj(bra) ** 2
    return ket ** 2


def _ordered_expectation(kernels: DysonIntegrals, table, vacuum: complex, bra: complex,
                         ket: complex, conjugate: bool = False) -> complex:
    """
    Normal-ordered second-order expectation divided by <bra|ket>.

    With conjugate set, returns the complex conjugate evaluated through
    conjugated legs rather than by conjugating the result.
    """
    kappa = kernels.cavity.kappa
    total = complex(vacuum)
    for kind, first, second in table:
        weight = _weight(kind, bra, ket)
        if conjugate:
            first, second, weight = first.star, second.star, np.conj(weight)
        total += weight * complex(kernels.circ(first, kappa, second, kappa))
    return total


def reduced_qubit_state(state: BellCatState, probe: ProbeConfig, qubit: QubitConfig,
                        cavity: CavityConfig) -> QubitDensityMatrix:
    """
    Second-order reduced qubit state.

    rho_ge is built independently of rho_eg from conjugated legs; the mismatch
    is stored as hermiticity_residual before rho_ge is replaced by conj(rho_eg).
    """
    A, B, alpha, beta = state.A, state.B, state.alpha, state.beta
    lam = qubit.lambda_q
    kernels = DysonIntegrals(cavity, probe, qubit)
    sums = vacuum_sums(cavity, probe, qubit)
    kappa = cavity.kappa

    i_plus = complex(kernels.single(I_PLUS, kappa))
    i_minus = complex(kernels.single(I_MINUS, kappa))
    ab = coherent_overlap(beta, alpha)   # <alpha|beta>
    ba = np.conj(ab)                     # <beta|alpha>

    norm_a = (sums['i_plus_norm'].real + abs(alpha) ** 2 * (abs(i_plus) ** 2 + abs(i_minus) ** 2)
              + 2.0 * (i_minus * i_plus * np.conj(alpha) ** 2).real)
    norm_b = (sums['i_minus_norm'].real + abs(beta) ** 2 * (abs(i_minus) ** 2 + abs(i_plus) ** 2)
              + 2.0 * (i_plus * i_minus * np.conj(beta) ** 2).real)
    s_a_diag = _ordered_expectation(kernels, ORDERED_A, sums['i_plus_circ'], alpha, alpha)
    s_b_diag = _ordered_expectation(kernels, ORDERED_B, sums['i_minus_circ'], beta, beta)
    c = (i_minus * np.conj(alpha) + np.conj(i_plus) * beta) * ab

    rho_gg = (A ** 2 * (1.0 - 2.0 * lam ** 2 * s_a_diag.real) + lam ** 2 * B ** 2 * norm_b
              + 2.0 * lam * A * B * c.imag)
    rho_ee = (B ** 2 * (1.0 - 2.0 * lam ** 2 * s_b_diag.real) + lam ** 2 * A ** 2 * norm_a
              - 2.0 * lam * A * B * c.imag)

    # <Phi_g|Phi_e>
    s_b_ab = _ordered_expectation(kernels, ORDERED_B, sums['i_minus_circ'], alpha, beta)
    s_a_ba_conj = _ordered_expectation(kernels, ORDERED_A, sums['i_plus_circ_star'], beta, alpha,
                                       conjugate=True)
    cross_eg = (sums['i_cross'] + 2.0 * np.conj(beta) * alpha * np.conj(i_minus) * i_plus
                + np.conj(i_minus) ** 2 * alpha ** 2 + i_plus ** 2 * np.conj(beta) ** 2)
    rho_eg = (A * B * ab * (1.0 - lam ** 2 * s_b_ab - lam ** 2 * s_a_ba_conj)
              + lam ** 2 * A * B * ba * cross_eg
              - 1j * lam * A ** 2 * (i_plus * np.conj(alpha) + np.conj(i_minus) * alpha)
              + 1j * lam * B ** 2 * (i_plus * np.conj(beta) + np.conj(i_minus) * beta))

    # <Phi_e|Phi_g>
    s_a_ba = _ordered_expectation(kernels, ORDERED_A, sums['i_plus_circ'], beta, alpha)
    s_b_ab_conj = _ordered_expectation(kernels, ORDERED_B, sums['i_minus_circ_star'], alpha, beta,
                                       conjugate=True)
    cross_ge = (sums['i_cross_star'] + 2.0 * np.conj(alpha) * beta * np.conj(i_plus) * i_minus
                + np.conj(i_plus) ** 2 * beta ** 2 + i_minus ** 2 * np.conj(alpha) ** 2)
    rho_ge = (A * B * ba * (1.0 - lam ** 2 * s_a_ba - lam ** 2 * s_b_ab_conj)
              + lam ** 2 * A * B * ab * cross_ge
              + 1j * lam * A ** 2 * (np.conj(i_plus) * alpha + i_minus * np.conj(alpha))
              - 1j * lam * B ** 2 * (i_minus * np.conj(beta) + np.conj(i_plus) * beta))

    residual = abs(rho_ge - np.conj(rho_eg))
    if residual > 1e-10:
        logger.warning(f"Reduced state off-diagonals disagree by {residual:.3e} before symmetrization")

    return QubitDensityMatrix(
        rho_gg=complex(rho_gg.real),
        rho_ge=complex(np.conj(rho_eg)),
        rho_eg=complex(rho_eg),
        rho_ee=complex(rho_ee.real),
        hermiticity_residual=float(residual),
        coupling_time=max(abs(qubit.lambda_q), abs(probe.lambda_p)) * probe.T,
    )


def eigenvalues(rho: QubitDensityMatrix) -> Tuple[float, float]:
    """
    Closed-form 2x2 eigenvalues (pi_plus, pi_minus).

    Raises:
        NonPhysicalStateError: an eigenvalue lies outside [-epsilon, 1 + epsilon]
    """
    trace = (rho.rho_gg + rho.rho_ee).real
    discriminant = (4.0 * rho.rho_ge * rho.rho_eg).real + ((rho.rho_ee - rho.rho_gg).real) ** 2
    root = np.sqrt(max(discriminant, 0.0))
    values = (0.5 * (trace + root), 0.5 * (trace - root))
    eps = rho.epsilon
    for value in values:
        if value < -eps or value > 1.0 + eps:
            raise NonPhysicalStateError(f"Eigenvalue {value:.6e} outside [-{eps:.1e}, 1 + {eps:.1e}]")
    return tuple(float(np.clip(value, 0.0, 1.0)) for value in values)


def von_neumann_entropy(rho: QubitDensityMatrix) -> float:
    """Base-2 entropy of the eigenvalues, with 0 log 0 = 0."""
    return float(np.sum(entr(np.array(eigenvalues(rho)))) / np.log(2.0))


def bloch_observables(rho: QubitDensityMatrix) -> Tuple[float, float, float, float]:
    """Return (A_I, A_z, A_x, A_y): norm, population inversion, dipole moment and current."""
    a_i = (rho.rho_ee + rho.rho_gg).real
    a_z = (rho.rho_ee - rho.rho_gg).real
    a_x = (rho.rho_eg + rho.rho_ge).real
    a_y = ((rho.rho_eg - rho.rho_ge) / 1j).real
    return float(a_i), float(a_z), float(a_x), float(a_y)
