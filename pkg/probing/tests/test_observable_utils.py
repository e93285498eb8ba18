import math
from dataclasses import replace
from unittest.mock import patch

import numpy as np
from django.test import SimpleTestCase

from probing.dyson_utils import X_single, probe_vacuum_sums
from probing.exceptions import ConfigurationError, DegenerateAmplitudeError
from probing.model_utils import BellCatState, CavityConfig, ProbeConfig, QubitConfig
from probing.observable_utils import (coherent_state_limit, eta1, eta1_suppression, eta2, eta_reference,
                                      eta_total, interferometric_phase, locate_qubit, phase_resolution,
                                      qubit_coherent_partial, transition_probability, wrap_phase)

EQUAL = 1 / math.sqrt(2)


def desk_models(x0=0.25, lambda_T=1e-2, ratio=1.0, cavity=None):
    cavity = cavity or CavityConfig()
    probe = ProbeConfig.resonant(cavity, 0.1, lambda_T)
    qubit = QubitConfig.detuned(cavity, x0, ratio * probe.lambda_p, 0.25 * cavity.omega_kappa)
    return cavity, probe, qubit


def cat(alpha_abs=1.0, beta_abs=1.0, theta=math.pi / 2, A=EQUAL, B=EQUAL):
    return BellCatState.from_polar(A, B, alpha_abs, theta, beta_abs)


class WrapPhaseTests(SimpleTestCase):

    def test_range_is_half_open(self):
        self.assertEqual(wrap_phase(math.pi), math.pi)
        self.assertAlmostEqual(wrap_phase(-math.pi), math.pi, places=15)
        self.assertAlmostEqual(wrap_phase(0.3), 0.3, places=15)

    def test_invariant_under_full_turns(self):
        for x in np.linspace(-10.0, 10.0, 41):
            self.assertAlmostEqual(wrap_phase(x + 2 * math.pi), wrap_phase(x), places=12)
            self.assertGreater(wrap_phase(x), -math.pi)
            self.assertLessEqual(wrap_phase(x), math.pi)


class TransitionProbabilityTests(SimpleTestCase):

    def test_uncoupled_probe_never_excites(self):
        cavity, probe, qubit = desk_models(lambda_T=0.0)
        self.assertEqual(transition_probability(cat(), probe, qubit, cavity), 0.0)

    def test_product_state_reduces_to_probe_sums(self):
        cavity, probe, qubit = desk_models()
        state = cat(A=1.0, B=0.0, alpha_abs=1.3, theta=0.4)
        x_plus = complex(X_single(1, cavity.kappa, probe, cavity))
        x_minus = complex(X_single(-1, cavity.kappa, probe, cavity))
        vacuum = probe_vacuum_sums(cavity, replace(probe, lambda_p=0.0))['x_norm'].real
        expected = probe.lambda_p ** 2 * (
            abs(state.alpha) ** 2 * (abs(x_plus) ** 2 + abs(x_minus) ** 2)
            + 2.0 * (state.alpha ** 2 * np.conj(x_plus) * np.conj(x_minus)).real + vacuum)
        self.assertAlmostEqual(transition_probability(state, probe, qubit, cavity), expected, places=15)
        self.assertLess(transition_probability(state, probe, qubit, cavity), 1e-2)


class FirstOrderTests(SimpleTestCase):

    def test_vanishes_without_excited_branch(self):
        cavity, probe, qubit = desk_models()
        self.assertEqual(eta1(cat(A=1.0, B=0.0), qubit, cavity, probe.T), 0j)

    def test_purely_imaginary(self):
        cavity, probe, qubit = desk_models(x0=0.37)
        value = eta1(cat(alpha_abs=0.4, beta_abs=0.6, theta=0.2), qubit, cavity, probe.T)
        self.assertEqual(value.real, 0.0)
        self.assertGreater(abs(value.imag), 0.0)

    def test_node_suppression(self):
        cavity, probe, qubit = desk_models(x0=0.5)
        state = cat(alpha_abs=0.5, beta_abs=0.5, theta=0.0)
        self.assertLess(abs(eta1(state, qubit, cavity, probe.T)), 1e-15)
        self.assertEqual(eta1_suppression(state, qubit, cavity, probe.T)['mechanism'], 'node')

    def test_overlap_suppression(self):
        cavity, probe, qubit = desk_models()
        state = cat(alpha_abs=3.0, beta_abs=3.0)
        report = eta1_suppression(state, qubit, cavity, probe.T)
        self.assertEqual(report['mechanism'], 'overlap')
        self.assertAlmostEqual(report['overlap_abs'], math.exp(-18.0), places=15)
        self.assertLessEqual(report['abs_im_eta1'], 1e-5)

    def test_unsuppressed_regime(self):
        cavity, probe, qubit = desk_models()
        state = cat(alpha_abs=0.5, beta_abs=0.5, theta=0.0)
        self.assertEqual(eta1_suppression(state, qubit, cavity, probe.T)['mechanism'], 'none')


class SecondOrderTests(SimpleTestCase):

    def test_vanishes_without_couplings(self):
        cavity, probe, qubit = desk_models(lambda_T=0.0)
        self.assertEqual(eta2(cat(), probe, qubit, cavity), 0j)

    def test_resonant_qubit_terms_real_for_conjugate_amplitudes(self):
        """
        The eight resonant-mode qubit terms carry no imaginary part, so they
        leave the visibility untouched. Their sum is not asserted to vanish:
        with beta = conj(alpha) the alpha^2 and beta^2 weights are real but
        nonzero, and only the imaginary part cancels.
        """
        cavity, probe, qubit = desk_models()
        partial, total = qubit_coherent_partial(cat(alpha_abs=1.5, beta_abs=1.5), probe, qubit, cavity)
        self.assertLess(abs(partial.imag), 1e-12 * abs(total))
        self.assertGreater(abs(partial), 0.0)


class PhaseTests(SimpleTestCase):

    def test_degenerate_amplitude_raises(self):
        cavity, probe, qubit = desk_models()
        with patch('probing.observable_utils.eta2', return_value=-1.0 + 0j):
            with self.assertRaises(DegenerateAmplitudeError):
                eta_total(cat(A=1.0, B=0.0), probe, qubit, cavity)

    def test_large_imaginary_second_order_saturates_phase(self):
        cavity, probe, qubit = desk_models()
        with patch('probing.observable_utils.eta2', return_value=-1.0 + 1e6j):
            eta = eta_total(cat(A=1.0, B=0.0), probe, qubit, cavity)
        self.assertAlmostEqual(eta.real, math.pi / 2, places=12)

    def test_reference_matches_empty_cavity_run(self):
        cavity, probe, qubit = desk_models(ratio=0.0)
        vacuum = cat(A=1.0, B=0.0, alpha_abs=0.0, beta_abs=0.0)
        self.assertAlmostEqual(eta_total(vacuum, probe, qubit, cavity), eta_reference(probe, cavity), places=15)

    def test_vacuum_in_both_arms_gives_no_phase_difference(self):
        cavity, probe, qubit = desk_models(ratio=0.0)
        result = interferometric_phase(cat(A=1.0, B=0.0, alpha_abs=0.0, beta_abs=0.0), probe, qubit, cavity)
        self.assertEqual(result.delta_gamma, 0.0)
        self.assertAlmostEqual(result.visibility, math.exp(-2.0 * result.eta_ref.imag), places=15)

    def test_desk_point_is_a_valid_protocol_point(self):
        cavity, probe, qubit = desk_models()
        result = interferometric_phase(cat(), probe, qubit, cavity)
        self.assertTrue(result.protocol_valid)
        self.assertEqual(result.flags, [])
        self.assertLessEqual(result.visibility, 1.0 + 1e-8)
        self.assertAlmostEqual(result.visibility, math.exp(-2.0 * result.eta.imag), places=15)
        self.assertGreater(result.last_index, cavity.kappa)
        self.assertGreater(abs(result.delta_gamma), 0.0)

    def test_uncoupled_qubit_matches_coherent_state(self):
        cavity, probe, qubit = desk_models(x0=0.0)
        state = cat(A=1.0, B=0.0, alpha_abs=1.2, theta=0.7)
        full = interferometric_phase(state, probe, qubit, cavity)
        limit = coherent_state_limit(state.alpha, probe, cavity, qubit)
        self.assertAlmostEqual(full.delta_gamma, limit.delta_gamma, places=15)
        self.assertAlmostEqual(full.eta, limit.eta, places=15)
        self.assertAlmostEqual(full.p_excite, limit.p_excite, places=15)


class ResolutionTests(SimpleTestCase):

    def test_zero_step(self):
        cavity, probe, qubit = desk_models()
        self.assertEqual(phase_resolution(cat(), probe, qubit, cavity, 0.0), 0.0)

    def test_negative_step_rejected(self):
        cavity, probe, qubit = desk_models()
        with self.assertRaises(ConfigurationError):
            phase_resolution(cat(), probe, qubit, cavity, -0.1)

    def test_step_compares_two_pipeline_runs(self):
        cavity, probe, qubit = desk_models()
        state = cat(alpha_abs=0.8)
        base = interferometric_phase(state, probe, qubit, cavity).delta_gamma
        shifted = interferometric_phase(state.with_alpha_abs(1.3), probe, qubit, cavity).delta_gamma
        self.assertAlmostEqual(phase_resolution(state, probe, qubit, cavity, 0.5), abs(shifted - base), places=15)

    def test_step_from_empty_amplitude_keeps_alpha_phase(self):
        cavity, probe, qubit = desk_models(ratio=5.0)
        state = cat(alpha_abs=0.0)
        base = interferometric_phase(state, probe, qubit, cavity).delta_gamma
        shifted = interferometric_phase(cat(alpha_abs=1.0), probe, qubit, cavity).delta_gamma
        self.assertAlmostEqual(phase_resolution(state, probe, qubit, cavity, 1.0), abs(shifted - base), places=15)


class LocateQubitTests(SimpleTestCase):

    def test_recovers_position_from_phase(self):
        cavity, probe, qubit = desk_models(ratio=5.0, cavity=CavityConfig(fixed_modes=True, mode_cutoff=512))
        state = cat(A=1.0, B=0.0)
        measured = interferometric_phase(state, probe, replace(qubit, x0=0.3), cavity).delta_gamma
        positions = locate_qubit(measured, state, probe, qubit, cavity, np.linspace(0.2, 0.4, 40))
        self.assertTrue(any(abs(position - 0.3) < 5e-3 for position in positions), positions)

    def test_needs_two_positions(self):
        cavity, probe, qubit = desk_models()
        with self.assertRaises(ConfigurationError):
            locate_qubit(0.0, cat(), probe, qubit, cavity, [0.3])
