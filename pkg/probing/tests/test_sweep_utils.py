import json
import math
import tempfile
from pathlib import Path

from django.test import SimpleTestCase

from cavity_probe.celery import app as celery_app
from probing.config_utils import build_models
from probing.exceptions import ConfigurationError
from probing.observable_utils import interferometric_phase
from probing.sweep_utils import (COLUMNS, SweepSpec, evaluate_point, preset, rows_to_csv, run_sweep,
                                 shape_report, spec_from_document, spec_from_manifest, write_outputs)

FAST_MODES = {'fixed_modes': True, 'mode_cutoff': 64}


def small_spec(**kwargs):
    options = dict(experiment='unit-scan', parameter='alpha_abs', grid=[0.5, 1.0, 1.5],
                   ratios=[1.0, 2.0], base=dict(FAST_MODES))
    options.update(kwargs)
    return SweepSpec(**options)


class SweepSpecTests(SimpleTestCase):

    def test_points_run_ratio_then_curve_then_grid(self):
        spec = small_spec(curves=[{'beta_abs': 1.0}, {'beta_abs': 2.0}])
        points = spec.points()
        self.assertEqual(len(points), 12)
        self.assertEqual([p['alpha_abs'] for p in points[:3]], [0.5, 1.0, 1.5])
        self.assertEqual([p['beta_abs'] for p in points[:6]], [1.0] * 3 + [2.0] * 3)
        self.assertEqual({p['lambda_q_over_lambda_p'] for p in points[6:]}, {2.0})

    def test_amplitude_sweep_keeps_state_normalized(self):
        points = small_spec(parameter='A', grid=[0.0, 0.6, 1.0], ratios=[1.0]).points()
        for point, expected in zip(points, (1.0, 0.8, 0.0)):
            self.assertAlmostEqual(point['B'], expected, places=15)

    def test_empty_grid_rejected(self):
        with self.assertRaises(ConfigurationError):
            run_sweep(small_spec(grid=[]))

    def test_non_monotone_grid_rejected(self):
        with self.assertRaises(ConfigurationError):
            small_spec(grid=[0.5, 1.5, 1.0]).validate()

    def test_document_with_empty_values_rejected(self):
        document = {'sweep': {'parameter': 'alpha_abs', 'grid': {'values': []}}}
        with self.assertRaises(ConfigurationError):
            spec_from_document(document)

    def test_document_grid_expansion(self):
        document = {'v': 0.2, 'sweep': {'parameter': 'x0_over_L', 'grid': {'start': 0.1, 'stop': 0.3, 'num': 3},
                                        'ratios': [3.0]}}
        spec = spec_from_document(document, {'mode_cutoff': 64})
        self.assertEqual(spec.experiment, 'custom')
        self.assertEqual(len(spec.grid), 3)
        self.assertAlmostEqual(spec.grid[-1], 0.3, places=15)
        self.assertEqual(spec.base, {'v': 0.2, 'mode_cutoff': 64})


class PresetTests(SimpleTestCase):

    def test_phase_vs_alpha_caption_values(self):
        spec = preset('fig2')
        self.assertEqual(spec.experiment, 'fig2-phase-vs-alpha')
        self.assertEqual(spec.ratios, [5.0, 1.0, 1e-2])
        self.assertEqual([c['beta_abs'] for c in spec.curves], [1.0, 10.0, 15.0, 300.0])
        self.assertEqual((spec.grid[0], spec.grid[80], spec.grid[-1]), (0.0, 40.0, 400.0))
        self.assertEqual(spec.base['lambda_p_T'], 150.0)
        self.assertEqual(spec.base['L'], 0.019)
        self.assertEqual(spec.base['v'], 1e3)
        self.assertAlmostEqual(spec.base['phi'], -math.pi / 2)
        self.assertEqual(len(spec.points()), 3 * 4 * 153)

    def test_phase_vs_alpha_curves_saturate(self):
        spec = preset('fig2')
        spec.ratios = [5.0, 1.0]
        spec.curves = [{'beta_abs': 1.0}, {'beta_abs': 300.0}]
        spec.grid = [0.0, 20.0, 40.0, 100.0, 200.0, 300.0, 350.0, 400.0]
        points = spec.points()
        for start in range(0, len(points), len(spec.grid)):
            curve = points[start:start + len(spec.grid)]
            phases = []
            for point in curve:
                models = build_models(point)
                phases.append(interferometric_phase(models.state, models.probe, models.qubit,
                                                    models.cavity).delta_gamma)
            label = (curve[0]['lambda_q_over_lambda_p'], curve[0]['beta_abs'])
            self.assertTrue(all(b >= a - 1e-12 for a, b in zip(phases, phases[1:])), (label, phases))
            self.assertLess(abs(phases[-1] - math.pi / 2), 1e-2, label)

    def test_position_preset_curves(self):
        spec = preset('fig3-phase-vs-position')
        self.assertEqual(len(spec.curves), 12)
        self.assertEqual(spec.ratios, [3.0])

    def test_overrides_are_recorded(self):
        spec = preset('fig4', {'mode_cutoff': 5000})
        self.assertEqual(spec.base['mode_cutoff'], 5000)

    def test_unknown_preset(self):
        with self.assertRaises(ConfigurationError):
            preset('fig99')


class EvaluatePointTests(SimpleTestCase):

    def test_successful_row(self):
        row = evaluate_point(dict(FAST_MODES, dalpha=0.5))
        self.assertTrue(row['success'])
        self.assertEqual(row['status'], 'ok')
        self.assertTrue(row['protocol_valid'])
        self.assertGreaterEqual(row['resolution'], 0.0)
        self.assertEqual(row['suppression'], 'none')
        self.assertLessEqual(row['A_z'] ** 2 + row['A_x'] ** 2 + row['A_y'] ** 2, 1.0 + 1e-7)

    def test_failure_is_captured(self):
        row = evaluate_point({'kappa': 3})
        self.assertFalse(row['success'])
        self.assertEqual(row['status'], 'failed')
        self.assertIn('even', row['error'])


class RunSweepTests(SimpleTestCase):

    def test_rows_identical_across_worker_counts(self):
        spec = small_spec()
        serial = rows_to_csv(run_sweep(spec, workers=1))
        threaded = rows_to_csv(run_sweep(spec, workers=3))
        self.assertEqual(serial, threaded)

    def test_celery_group_matches_in_process_rows(self):
        spec = small_spec(ratios=[1.0])
        previous = celery_app.conf.task_always_eager
        celery_app.conf.task_always_eager = True
        try:
            dispatched = rows_to_csv(run_sweep(spec, use_celery=True))
        finally:
            celery_app.conf.task_always_eager = previous
        self.assertEqual(dispatched, rows_to_csv(run_sweep(spec)))

    def test_failed_point_does_not_stop_the_sweep(self):
        # delta = omega_kappa / 2 puts the qubit gap on mode 1
        spec = small_spec(parameter='delta_over_omega', grid=[0.25, 0.5], ratios=[1.0])
        rows = run_sweep(spec)
        self.assertEqual([row['status'] for row in rows], ['ok', 'failed'])
        self.assertEqual([row['index'] for row in rows], [0, 1])
        self.assertIn('collides', rows[1]['error'])


class OutputTests(SimpleTestCase):

    def test_zero_rows_still_write_header(self):
        spec = small_spec(grid=[1.0])
        with tempfile.TemporaryDirectory() as tmp:
            paths = write_outputs([], spec, tmp)
            self.assertEqual(Path(paths['csv']).read_text(), ','.join(COLUMNS) + '\n')
            manifest = json.loads(Path(paths['manifest']).read_text())
            self.assertEqual(manifest['rows'], 0)
            self.assertEqual(manifest['failed_rows'], [])

    def test_plot_script_is_valid_python(self):
        spec = small_spec(ratios=[1.0], curves=[{'beta_abs': 1.0}], curve_label='beta_abs')
        rows = run_sweep(spec)
        with tempfile.TemporaryDirectory() as tmp:
            paths = write_outputs(rows, spec, tmp)
            script = Path(paths['plot']).read_text()
        compile(script, paths['plot'], 'exec')
        self.assertIn("X = 'alpha_abs'", script)
        self.assertIn("CURVE = 'beta_abs'", script)
        self.assertIn('unit-scan.csv', script)

    def test_manifest_reproduces_csv(self):
        spec = small_spec(ratios=[1.0], curves=[{'dalpha': 0.25}])
        rows = run_sweep(spec)
        with tempfile.TemporaryDirectory() as tmp:
            paths = write_outputs(rows, spec, tmp, wall_time=1.5, run_id='abc')
            original = Path(paths['csv']).read_text()
            rebuilt = spec_from_manifest(paths['manifest'])
            manifest = json.loads(Path(paths['manifest']).read_text())
        self.assertEqual(rebuilt, spec)
        self.assertEqual(rows_to_csv(run_sweep(rebuilt)), original)
        self.assertEqual(manifest['truncation'], {'mode_cutoff': 64, 'mode_tol': 1e-9, 'stall_terms': 20,
                                                  'fixed_modes': True})
        self.assertEqual(manifest['run_id'], 'abc')


class ShapeReportTests(SimpleTestCase):

    def test_monotone_phase_curves(self):
        rows = [{'success': True, 'lambda_q_over_lambda_p': 1.0, 'beta_abs': 1.0, 'delta_gamma': value}
                for value in (0.1, 0.5, 1.2, 1.5)]
        report = shape_report(rows, 'fig2-phase-vs-alpha')
        curve = report['curves'][0]
        self.assertTrue(curve['monotone'])
        self.assertAlmostEqual(curve['distance_to_half_pi'], abs(1.5 - math.pi / 2))

    def test_failed_rows_only(self):
        report = shape_report([{'success': False}], 'fig-visibility')
        self.assertEqual(report, {'experiment': 'fig-visibility', 'rows': 1, 'ok_rows': 0})
