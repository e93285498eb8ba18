"""
Closed-form single and time-ordered double integrals of the Dyson expansion.

Every integrand in the expansion is a sum of complex exponentials e^{i w t}
times a real spatial factor, so all integrals reduce to two kernels:

    phi1(x)            = (e^{ix} - 1) / (ix)
    double_exp(a, b, T) = int_0^T dt2 e^{i a t2} int_0^t2 dt1 e^{i b t1}

An integrand is described by a Leg: the qubit legs I(+/-) and the probe legs
X(+/-), optionally conjugated. Conjugating a leg negates its frequencies; the
ordered integral of conjugated legs is never obtained by conjugating a result
computed for the unconjugated legs in a different order.

    leg        time dependence (mode gamma)                 spatial factor
    I(s)       e^{ i (s Omega_q + omega_gamma) t}           sin(k_gamma x0) / sqrt(gamma pi)
    I(s)*      e^{-i (s Omega_q + omega_gamma) t}           sin(k_gamma x0) / sqrt(gamma pi)
    X(s)       e^{ i (s Omega_p + omega_gamma) t} sin(k_gamma v t) / sqrt(gamma pi)
    X(s)*      e^{-i (s Omega_p + omega_gamma) t} sin(k_gamma v t) / sqrt(gamma pi)

In a circle product P o Q the first leg P carries the later time t2.
"""
import functools
import logging
from dataclasses import dataclass, replace
from typing import Callable, Dict, List, NamedTuple, Optional, Tuple

import numpy as np

from .exceptions import ModeSumNotConverged
from .model_utils import CavityConfig, ProbeConfig, QubitConfig

logger = logging.getLogger(__name__)

SERIES_THRESHOLD = 1e-4
SERIES_TERMS = 8
SIMPLEX_SERIES_THRESHOLD = 1e-2
SIMPLEX_SERIES_TERMS = 14
DEFAULT_STALL_TERMS = 20
MODE_BLOCK = 1024
# relative distance of k x0 / pi from an integer treated as a node
NODE_SNAP = 1e-12
# smallest growth ratio of successive dyadic partial-sum windows used for the tail estimate
TAIL_MIN_RATIO = 1.1


def phi1(x):
    """
    Stable (e^{ix} - 1)/(ix).

    Uses the half-angle form e^{ix/2} sin(x/2)/(x/2) for |x| >= 1e-4 and the
    power series sum (ix)^n/(n+1)! below it.
    """
    x_arr = np.atleast_1d(np.asarray(x, dtype=complex))
    out = np.empty_like(x_arr)
    small = np.abs(x_arr) < SERIES_THRESHOLD

    half = 0.5 * x_arr[~small]
    out[~small] = np.exp(1j * half) * np.sin(half) / half

    z = 1j * x_arr[small]
    term = np.ones_like(z)
    total = np.ones_like(z)
    for n in range(1, SERIES_TERMS):
        term = term * z / (n + 1)
        total = total + term
    out[small] = total

    if np.ndim(x) == 0:
        return complex(out[0])
    return out.reshape(np.shape(x))


def simplex_exp(x, y):
    """
    Dimensionless ordered integral int_0^1 du e^{ixu} int_0^u dw e^{iyw}.

    This is the second divided difference of exp at the points 0, ix, i(x+y).
    The divided-difference recursion always divides by the largest of |x|,
    |y|, |x+y|; when all three are small a 14-term series is used.
    """
    x_arr, y_arr = np.broadcast_arrays(np.asarray(x, dtype=complex),
                                       np.asarray(y, dtype=complex))
    x_arr = np.atleast_1d(x_arr).ravel()
    y_arr = np.atleast_1d(y_arr).ravel()
    s_arr = x_arr + y_arr
    ax, ay, as_ = np.abs(x_arr), np.abs(y_arr), np.abs(s_arr)
    out = np.empty(x_arr.shape, dtype=complex)

    small = np.maximum(np.maximum(ax, ay), as_) < SIMPLEX_SERIES_THRESHOLD
    by_s = ~small & (as_ >= ax) & (as_ >= ay)
    by_y = ~small & ~by_s & (ay >= ax)
    by_x = ~small & ~by_s & ~by_y

    if by_s.any():
        xs, ys, ss = x_arr[by_s], y_arr[by_s], s_arr[by_s]
        out[by_s] = (np.exp(1j * xs) * phi1(ys) - phi1(xs)) / (1j * ss)
    if by_y.any():
        xs, ys, ss = x_arr[by_y], y_arr[by_y], s_arr[by_y]
        out[by_y] = (phi1(ss) - phi1(xs)) / (1j * ys)
    if by_x.any():
        xs, ys, ss = x_arr[by_x], y_arr[by_x], s_arr[by_x]
        out[by_x] = (np.exp(1j * xs) * phi1(ys) - phi1(ss)) / (1j * xs)
    if small.any():
        z1, z2 = 1j * x_arr[small], 1j * s_arr[small]
        h = np.ones_like(z1)
        z2_power = np.ones_like(z2)
        factorial = 2.0
        total = h / factorial
        for n in range(1, SIMPLEX_SERIES_TERMS):
            z2_power = z2_power * z2
            h = z1 * h + z2_power
            factorial *= n + 2
            total = total + h / factorial
        out[small] = total

    shape = np.broadcast(np.asarray(x), np.asarray(y)).shape
    if shape == ():
        return complex(out[0])
    return out.reshape(shape)


def double_exp(a, b, T):
    """Ordered double integral int_0^T dt2 e^{i a t2} int_0^t2 dt1 e^{i b t1}."""
    result = simplex_exp(np.asarray(a) * T, np.asarray(b) * T)
    return T * T * result


@dataclass(frozen=True)
class Leg:
    """One integrand of the expansion: qubit ('I') or probe ('X'), sign +/-1."""
    kind: str
    sign: int
    conj: bool = False

    @property
    def star(self) -> 'Leg':
        return replace(self, conj=not self.conj)

    def __str__(self):
        return f"{self.kind}{'+' if self.sign > 0 else '-'}{'*' if self.conj else ''}"


I_PLUS = Leg('I', +1)
I_MINUS = Leg('I', -1)
X_PLUS = Leg('X', +1)
X_MINUS = Leg('X', -1)


def qubit_profile(gamma, qubit: QubitConfig, cavity: CavityConfig):
    """Spatial factor sin(k_gamma x0) / sqrt(gamma pi), exactly zero on mode nodes."""
    gamma = np.asarray(gamma, dtype=float)
    turns = cavity.wavenumber(gamma) * qubit.x0 / np.pi
    on_node = np.abs(turns - np.rint(turns)) <= NODE_SNAP * np.maximum(1.0, np.abs(turns))
    spatial = np.where(on_node, 0.0, np.sin(cavity.wavenumber(gamma) * qubit.x0))
    return spatial / np.sqrt(gamma * np.pi)


class DysonIntegrals:
    """
    Evaluates single, ordered and symmetrized integrals for one configuration.

    All arguments are expected in internal units (L = c = 1), although the
    formulas hold in any consistent unit system.
    """

    def __init__(self, cavity: CavityConfig, probe: ProbeConfig,
                 qubit: Optional[QubitConfig] = None):
        self.cavity = cavity
        self.probe = probe
        self.qubit = qubit
        self.T = probe.T

    def components(self, leg: Leg, gamma) -> List[Tuple[np.ndarray, np.ndarray]]:
        """Decompose a leg into (coefficient, angular frequency) exponentials."""
        gamma = np.asarray(gamma, dtype=float)
        omega = self.cavity.frequency(gamma)
        norm = 1.0 / np.sqrt(gamma * np.pi)
        parity = -1.0 if leg.conj else 1.0

        if leg.kind == 'I':
            nu = leg.sign * self.qubit.Omega_q + omega
            spatial = qubit_profile(gamma, self.qubit, self.cavity)
            return [(spatial, parity * nu)]

        nu = leg.sign * self.probe.Omega_p + omega
        # k_gamma v = gamma pi / T exactly because T = L / v
        kv = gamma * np.pi / self.T
        half = norm / 2j
        return [(half, parity * nu + kv), (-half, parity * nu - kv)]

    def single(self, leg: Leg, gamma):
        total = 0.0
        for coefficient, frequency in self.components(leg, gamma):
            total = total + coefficient * self.T * phi1(frequency * self.T)
        return total

    def circ(self, first: Leg, g1, second: Leg, g2):
        """Ordered product first o second (first leg on the later time)."""
        total = 0.0
        for c1, w1 in self.components(first, g1):
            for c2, w2 in self.components(second, g2):
                total = total + c1 * c2 * double_exp(w1, w2, self.T)
        return total

    def anticirc(self, first: Leg, g1, second: Leg, g2):
        """Symmetrized product {first, second} = first o second + second o first."""
        return self.circ(first, g1, second, g2) + self.circ(second, g2, first, g1)


def I_single(sign: int, gamma, qubit: QubitConfig, cavity: CavityConfig, T: float):
    """Qubit integral I(+/-, gamma) = sin(k x0)/sqrt(gamma pi) * T * phi1((+/-Omega_q + omega) T)."""
    gamma = np.asarray(gamma, dtype=float)
    nu = sign * qubit.Omega_q + cavity.frequency(gamma)
    spatial = qubit_profile(gamma, qubit, cavity)
    return spatial * T * phi1(nu * T)


def X_single(sign: int, gamma, probe: ProbeConfig, cavity: CavityConfig):
    """Probe integral X(+/-, gamma) along the trajectory x = v t."""
    gamma = np.asarray(gamma, dtype=float)
    T = probe.T
    nu_T = (sign * probe.Omega_p + cavity.frequency(gamma)) * T
    spatial_T = gamma * np.pi
    prefactor = T / (2j * np.sqrt(gamma * np.pi))
    return prefactor * (phi1(nu_T + spatial_T) - phi1(nu_T - spatial_T))


def I_circ(s1: int, g1, s2: int, g2, qubit: QubitConfig, cavity: CavityConfig, T: float,
           conj1: bool = False, conj2: bool = False):
    """Ordered qubit product I(s1,g1) o I(s2,g2); conjugation via frequency negation."""
    g1, g2 = np.asarray(g1, dtype=float), np.asarray(g2, dtype=float)
    spatial = qubit_profile(g1, qubit, cavity) * qubit_profile(g2, qubit, cavity)
    w1 = (s1 * qubit.Omega_q + cavity.frequency(g1)) * (-1.0 if conj1 else 1.0)
    w2 = (s2 * qubit.Omega_q + cavity.frequency(g2)) * (-1.0 if conj2 else 1.0)
    return spatial * double_exp(w1, w2, T)


def X_circ(s1: int, g1, s2: int, g2, probe: ProbeConfig, cavity: CavityConfig,
           conj1: bool = False, conj2: bool = False):
    """Ordered probe product X(s1,g1) o X(s2,g2) as a four-kernel sum."""
    kernels = DysonIntegrals(cavity, probe)
    return kernels.circ(Leg('X', s1, conj1), g1, Leg('X', s2, conj2), g2)


class ModeSumResult(NamedTuple):
    value: complex
    last_index: int
    converged: bool
    tail: complex = 0j


def _dyadic_tail(partials: np.ndarray) -> Tuple[complex, complex]:
    """
    Extrapolate a converging partial-sum sequence S(1..N) past its last term.

    The windows (m, 2m] and (2m, 4m] with even m are compared; when their
    ratio is that of a power-law tail the geometric remainder is added.
    Real and imaginary parts are extrapolated independently.

    Returns:
        (value, tail): the extrapolated sum and the part added to S(N)
    """
    last = partials[-1]
    m = (partials.size // 4) & ~1
    if m < 2:
        return complex(last), 0j

    points = partials[[m - 1, 2 * m - 1, 4 * m - 1, partials.size - 1]]
    parts = []
    for s1, s2, s4, sn in (points.real, points.imag):
        d1, d2 = s4 - s2, s2 - s1
        if d1 != 0 and d2 / d1 > TAIL_MIN_RATIO:
            parts.append(s4 + d1 / (d2 / d1 - 1.0))
        else:
            parts.append(sn)
    value = complex(parts[0], parts[1])
    return value, value - complex(last)


def mode_sum(term: Callable[[np.ndarray], np.ndarray], tol: float = 1e-9,
             mode_cutoff: int = 200000, stall_terms: int = DEFAULT_STALL_TERMS,
             fixed: bool = False, block: int = MODE_BLOCK) -> ModeSumResult:
    """
    Sum term(gamma) over gamma = 1, 2, ... until it stalls.

    A term is negligible when its magnitude is at most tol times the larger of
    the running sum and the largest term seen so far, so sums that cancel
    towards zero still stop. The stalled partial sum is then extrapolated
    over its power-law tail.

    Args:
        term: vectorized function of an integer mode array returning complex values
        tol: relative tolerance of the stall criterion
        mode_cutoff: largest mode index ever evaluated
        stall_terms: number of consecutive negligible terms that stop the sum
        fixed: sum exactly over 1..mode_cutoff without the stall test or extrapolation
        block: number of modes evaluated per vectorized call

    Returns:
        ModeSumResult with the extrapolated sum, the last mode index included
        and the extrapolated tail

    Raises:
        ModeSumNotConverged: cutoff reached before the stall criterion held
    """
    if fixed:
        gammas = np.arange(1, mode_cutoff + 1)
        return ModeSumResult(complex(np.sum(term(gammas))), mode_cutoff, True)

    history: List[np.ndarray] = []
    partial = 0.0 + 0.0j
    peak = 0.0
    streak = 0
    start = 1
    while start <= mode_cutoff:
        stop = min(start + block, mode_cutoff + 1)
        gammas = np.arange(start, stop)
        values = np.asarray(term(gammas), dtype=complex)
        running = partial + np.cumsum(values)
        peaks = np.maximum(peak, np.maximum.accumulate(np.abs(values)))
        negligible = np.abs(values) <= tol * np.maximum(np.abs(running), peaks)

        index = np.arange(values.size)
        last_break = np.maximum.accumulate(np.where(~negligible, index, -1))
        run_length = np.where(last_break >= 0, index - last_break, index + 1 + streak)
        hits = np.nonzero(run_length >= stall_terms)[0]
        if hits.size:
            hit = hits[0]
            history.append(running[:hit + 1])
            value, tail = _dyadic_tail(np.concatenate(history))
            return ModeSumResult(value, int(gammas[hit]), True, tail)

        history.append(running)
        partial = complex(running[-1])
        peak = float(peaks[-1])
        streak = int(run_length[-1])
        start = stop

    logger.warning(f"Mode sum reached cutoff {mode_cutoff} without stalling (partial={partial})")
    raise ModeSumNotConverged(f"Mode sum did not converge within {mode_cutoff} modes",
                              partial=partial, last_index=mode_cutoff)


def _run_sums(cavity: CavityConfig, terms: Dict[str, Callable]) -> Dict[str, complex]:
    sums = {}
    last_index = 0
    for name, term in terms.items():
        result = mode_sum(term, tol=cavity.mode_tol, mode_cutoff=cavity.mode_cutoff,
                          stall_terms=cavity.stall_terms, fixed=cavity.fixed_modes)
        logger.debug(f"Vacuum sum {name} = {result.value} truncated at mode {result.last_index}")
        sums[name] = result.value
        last_index = max(last_index, result.last_index)
    sums['last_index'] = last_index
    return sums


@functools.lru_cache(maxsize=256)
def probe_vacuum_sums(cavity: CavityConfig, probe: ProbeConfig) -> Dict[str, complex]:
    """Vacuum mode sums of the probe legs: sum |X+|^2 and sum X+* o X+."""
    kernels = DysonIntegrals(cavity, probe)
    return _run_sums(cavity, {
        'x_norm': lambda g: np.abs(kernels.single(X_PLUS, g)) ** 2,
        'x_circ': lambda g: kernels.circ(X_PLUS.star, g, X_PLUS, g),
    })


@functools.lru_cache(maxsize=512)
def qubit_vacuum_sums(cavity: CavityConfig, probe: ProbeConfig,
                      qubit: QubitConfig) -> Dict[str, complex]:
    """
    Vacuum mode sums of the qubit legs.

    Both orderings of every diagonal circle product are summed separately so
    the reduced state can be assembled along two independent paths.
    """
    kernels = DysonIntegrals(cavity, probe, qubit)
    return _run_sums(cavity, {
        'i_plus_circ': lambda g: kernels.circ(I_PLUS.star, g, I_PLUS, g),
        'i_minus_circ': lambda g: kernels.circ(I_MINUS.star, g, I_MINUS, g),
        'i_plus_circ_star': lambda g: kernels.circ(I_PLUS, g, I_PLUS.star, g),
        'i_minus_circ_star': lambda g: kernels.circ(I_MINUS, g, I_MINUS.star, g),
        'i_plus_norm': lambda g: np.abs(kernels.single(I_PLUS, g)) ** 2,
        'i_minus_norm': lambda g: np.abs(kernels.single(I_MINUS, g)) ** 2,
        'i_cross': lambda g: np.conj(kernels.single(I_MINUS, g)) * kernels.single(I_PLUS, g),
        'i_cross_star': lambda g: kernels.single(I_MINUS, g) * np.conj(kernels.single(I_PLUS, g)),
    })


def vacuum_sums(cavity: CavityConfig, probe: ProbeConfig,
                qubit: QubitConfig) -> Dict[str, complex]:
    """All vacuum sums for a configuration, cached per geometry (couplings ignored)."""
    geometry_probe = replace(probe, lambda_p=0.0)
    sums = dict(probe_vacuum_sums(cavity, geometry_probe))
    qubit_sums = qubit_vacuum_sums(cavity, geometry_probe, replace(qubit, lambda_q=0.0))
    sums.update({key: value for key, value in qubit_sums.items() if key != 'last_index'})
    sums['last_index'] = max(sums['last_index'], qubit_sums['last_index'])
    return sums
