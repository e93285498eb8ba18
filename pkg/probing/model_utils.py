"""
Physical parameter containers and the internal unit system.

Internally every length is measured in units of the cavity length L and every
time in units of L/c, so the cavity becomes L = 1, c = 1 and all frequencies are
expressed in units of c/L. Couplings are carried as rates in the same units.
"""
import logging
from dataclasses import dataclass, field, replace
from typing import NamedTuple, Optional, Tuple

import numpy as np

from .exceptions import ConfigurationError

logger = logging.getLogger(__name__)

SPEED_OF_LIGHT = 299792458.0
COLLISION_RTOL = 1e-9
RESONANCE_RTOL = 1e-12


@dataclass(frozen=True)
class CavityConfig:
    """Cavity geometry and the resonant mode carrying the cat state."""
    L: float = 1.0
    c: float = 1.0
    kappa: int = 2
    mode_cutoff: int = 200000
    mode_tol: float = 1e-9
    stall_terms: int = 20
    # When set, mode sums run over exactly 1..mode_cutoff with no stall test.
    fixed_modes: bool = False

    def wavenumber(self, gamma):
        return np.asarray(gamma, dtype=float) * np.pi / self.L

    def frequency(self, gamma):
        return self.c * self.wavenumber(gamma)

    @property
    def omega_kappa(self) -> float:
        return float(self.frequency(self.kappa))


@dataclass(frozen=True)
class ProbeConfig:
    """Probe atom crossing the cavity at constant speed, resonant with mode kappa."""
    v: float
    lambda_p: float
    Omega_p: float
    T: float

    @classmethod
    def resonant(cls, cavity: CavityConfig, v: float, lambda_p_T: float) -> 'ProbeConfig':
        """Build a probe with Omega_p = omega_kappa and lambda_p given as lambda_p * T."""
        if v <= 0:
            raise ConfigurationError(f"Probe speed must be positive, got {v}")
        T = cavity.L / v
        return cls(v=v, lambda_p=lambda_p_T / T, Omega_p=cavity.omega_kappa, T=T)

    @property
    def coupling_time(self) -> float:
        return self.lambda_p * self.T


@dataclass(frozen=True)
class QubitConfig:
    """Cavity qubit entangled with the field, held at x0 and detuned by delta."""
    x0: float
    lambda_q: float
    delta: float
    Omega_q: float

    @classmethod
    def detuned(cls, cavity: CavityConfig, x0: float, lambda_q: float,
                delta: float) -> 'QubitConfig':
        return cls(x0=x0, lambda_q=lambda_q, delta=delta,
                   Omega_q=cavity.omega_kappa - delta)


@dataclass(frozen=True)
class BellCatState:
    """Entangled state A|g, alpha> + B|e, beta> with real A, B."""
    A: float
    B: float
    alpha: complex
    beta: complex
    # phase of alpha as built; kept when |alpha| = 0
    theta: Optional[float] = field(default=None, compare=False)

    @classmethod
    def from_polar(cls, A: float, B: float, alpha_abs: float, theta: float,
                   beta_abs: float, phi: Optional[float] = None) -> 'BellCatState':
        """Build the state from magnitudes and phases; phi defaults to -theta."""
        if phi is None:
            phi = -theta
        return cls(A=float(A), B=float(B),
                   alpha=complex(alpha_abs * np.exp(1j * theta)),
                   beta=complex(beta_abs * np.exp(1j * phi)), theta=float(theta))

    def validate(self, atol: float = 1e-12) -> None:
        norm = self.A ** 2 + self.B ** 2
        if abs(norm - 1.0) > atol:
            raise ConfigurationError(f"Bell-cat amplitudes not normalized: A^2 + B^2 = {norm}")

    def with_alpha_abs(self, alpha_abs: float) -> 'BellCatState':
        if self.theta is not None:
            theta = self.theta
        else:
            theta = float(np.angle(self.alpha)) if self.alpha != 0 else 0.0
        return replace(self, alpha=complex(alpha_abs * np.exp(1j * theta)), theta=theta)


class OverlapValue(NamedTuple):
    """Coherent-state overlap kept as log-magnitude and phase."""
    log_magnitude: float
    phase: float

    @property
    def value(self) -> complex:
        # exp underflows to exactly 0.0 below about -745
        return complex(np.exp(self.log_magnitude) * np.exp(1j * self.phase))


def coherent_overlap_log(alpha: complex, beta: complex) -> OverlapValue:
    """Return <beta|alpha> as (log-magnitude, phase)."""
    exponent = (-0.5 * abs(alpha) ** 2 - 0.5 * abs(beta) ** 2
                + np.conj(beta) * alpha)
    return OverlapValue(float(exponent.real), float(np.angle(np.exp(1j * exponent.imag))))


def coherent_overlap(alpha: complex, beta: complex) -> complex:
    """
    Overlap <beta|alpha> = exp(-|alpha|^2/2 - |beta|^2/2 + conj(beta) alpha).

    Args:
        alpha: amplitude of the ket coherent state
        beta: amplitude of the bra coherent state

    Returns:
        Complex overlap; exactly 0 when the magnitude underflows. Use
        coherent_overlap_log for the log-magnitude in that regime.
    """
    return coherent_overlap_log(alpha, beta).value


def validate_configs(cavity: CavityConfig, probe: ProbeConfig,
                     qubit: QubitConfig) -> None:
    """Raise ConfigurationError when any physical invariant is violated."""
    if cavity.L <= 0 or cavity.c <= 0:
        raise ConfigurationError(f"Cavity length and light speed must be positive (L={cavity.L}, c={cavity.c})")
    if int(cavity.kappa) != cavity.kappa or cavity.kappa < 1:
        raise ConfigurationError(f"Resonant mode index must be a positive integer, got {cavity.kappa}")
    if cavity.kappa % 2:
        raise ConfigurationError(f"Resonant mode must be even for mode invisibility, got kappa={cavity.kappa}")
    if cavity.mode_cutoff < cavity.kappa:
        raise ConfigurationError(f"mode_cutoff={cavity.mode_cutoff} is below kappa={cavity.kappa}")
    if not 0 < probe.v < cavity.c:
        raise ConfigurationError(f"Probe speed must satisfy 0 < v < c, got v={probe.v}, c={cavity.c}")
    if not np.isclose(probe.T, cavity.L / probe.v, rtol=RESONANCE_RTOL, atol=0.0):
        raise ConfigurationError(f"Interaction time T={probe.T} inconsistent with L/v")
    if not np.isclose(probe.Omega_p, cavity.omega_kappa, rtol=RESONANCE_RTOL, atol=0.0):
        raise ConfigurationError(f"Probe gap {probe.Omega_p} is not resonant with omega_kappa={cavity.omega_kappa}")
    if not 0.0 <= qubit.x0 <= cavity.L:
        raise ConfigurationError(f"Qubit position x0={qubit.x0} outside [0, {cavity.L}]")
    if qubit.Omega_q <= 0:
        raise ConfigurationError(f"Qubit gap must be positive, got Omega_q={qubit.Omega_q}")

    # Omega_q must stay off every mode frequency up to the cutoff
    ratio = qubit.Omega_q / float(cavity.frequency(1))
    nearest = max(1, int(round(ratio)))
    if nearest <= cavity.mode_cutoff and abs(ratio - nearest) <= COLLISION_RTOL * nearest:
        raise ConfigurationError(
            f"Qubit gap collides with cavity mode {nearest} (Omega_q={qubit.Omega_q})")


def to_internal_units(cavity: CavityConfig, probe: ProbeConfig,
                      qubit: QubitConfig) -> Tuple[CavityConfig, ProbeConfig, QubitConfig]:
    """
    Rescale SI configurations to L = 1, c = 1.

    Args:
        cavity: cavity in SI units
        probe: probe in SI units
        qubit: qubit in SI units

    Returns:
        (cavity, probe, qubit) with lengths in units of L, times in L/c and
        frequencies and couplings in c/L.
    """
    validate_configs(cavity, probe, qubit)
    length, time = cavity.L, cavity.L / cavity.c
    internal_cavity = replace(cavity, L=1.0, c=1.0)
    internal_probe = ProbeConfig(v=probe.v * time / length,
                                 lambda_p=probe.lambda_p * time,
                                 Omega_p=probe.Omega_p * time,
                                 T=probe.T / time)
    internal_qubit = QubitConfig(x0=qubit.x0 / length,
                                 lambda_q=qubit.lambda_q * time,
                                 delta=qubit.delta * time,
                                 Omega_q=qubit.Omega_q * time)
    logger.debug(f"Internal units: v/c={internal_probe.v:.6e}, x0/L={internal_qubit.x0:.6f}, "
                 f"T={internal_probe.T:.6e}")
    return internal_cavity, internal_probe, internal_qubit


def to_si_units(cavity: CavityConfig, probe: ProbeConfig, qubit: QubitConfig,
                L: float, c: float = SPEED_OF_LIGHT) -> Tuple[CavityConfig, ProbeConfig, QubitConfig]:
    """Inverse of to_internal_units for a cavity of length L and light speed c."""
    time = L / c
    return (replace(cavity, L=L, c=c),
            ProbeConfig(v=probe.v * L / time, lambda_p=probe.lambda_p / time,
                        Omega_p=probe.Omega_p / time, T=probe.T * time),
            QubitConfig(x0=qubit.x0 * L, lambda_q=qubit.lambda_q / time,
                        delta=qubit.delta / time, Omega_q=qubit.Omega_q / time))
