import json
import tempfile
from io import StringIO
from pathlib import Path

import yaml
from django.conf import settings
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase

DESK_CONFIG = settings.BASE_DIR / 'configs' / 'desk_scale.yaml'


def write_config(directory, document):
    path = Path(directory) / 'run.yaml'
    path.write_text(yaml.safe_dump(document))
    return str(path)


class ValidateCommandTests(SimpleTestCase):

    def test_valid_config(self):
        out = StringIO()
        call_command('validate', str(DESK_CONFIG), stdout=out)
        self.assertIn('is valid', out.getvalue())
        self.assertIn('kappa=2', out.getvalue())

    def test_schema_errors(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = write_config(tmp, {'kappa': 2, 'speed': 0.1})
            with self.assertRaises(CommandError):
                call_command('validate', path, stdout=StringIO(), stderr=StringIO())

    def test_physical_invariant_violation(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = write_config(tmp, {'kappa': 3})
            with self.assertRaises(CommandError) as caught:
                call_command('validate', path, stdout=StringIO())
        self.assertIn('even', str(caught.exception))


class SweepCommandTests(SimpleTestCase):

    def sweep_document(self, grid):
        return {
            'fixed_modes': True,
            'mode_cutoff': 32,
            'sweep': {'experiment': 'cli-scan', 'parameter': 'delta_over_omega',
                      'grid': {'values': grid}, 'ratios': [1.0]},
        }

    def test_custom_sweep_writes_artifacts(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = write_config(tmp, self.sweep_document([0.2, 0.25]))
            out = StringIO()
            call_command('sweep', path, output_dir=tmp, stdout=out)
            self.assertIn('All 2 rows succeeded', out.getvalue())
            names = sorted(p.name for p in Path(tmp).iterdir())
            self.assertIn('cli-scan.csv', names)
            self.assertIn('cli-scan.manifest.json', names)
            self.assertIn('plot_cli_scan.py', names)
            manifest = json.loads((Path(tmp) / 'cli-scan.manifest.json').read_text())
            self.assertEqual(manifest['spec']['base']['mode_cutoff'], 32)
            self.assertEqual(manifest['spec']['base']['stall_terms'], settings.PROBING_STALL_TERMS)

    def test_failed_rows_give_non_zero_exit(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = write_config(tmp, self.sweep_document([0.25, 0.5]))
            with self.assertRaises(CommandError):
                call_command('sweep', path, output_dir=tmp, stdout=StringIO())
            csv_text = (Path(tmp) / 'cli-scan.csv').read_text()
        self.assertEqual(len(csv_text.strip().splitlines()), 3)

    def test_cli_truncation_overrides(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = write_config(tmp, self.sweep_document([0.25]))
            call_command('sweep', path, output_dir=tmp, mode_cutoff=16, stdout=StringIO())
            manifest = json.loads((Path(tmp) / 'cli-scan.manifest.json').read_text())
        self.assertEqual(manifest['truncation']['mode_cutoff'], 16)

    def test_manifest_rerun(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = write_config(tmp, self.sweep_document([0.2]))
            call_command('sweep', path, output_dir=tmp, stdout=StringIO())
            first = (Path(tmp) / 'cli-scan.csv').read_text()
            rerun = Path(tmp) / 'rerun'
            call_command('sweep', str(Path(tmp) / 'cli-scan.manifest.json'), output_dir=str(rerun),
                         stdout=StringIO())
            self.assertEqual((rerun / 'cli-scan.csv').read_text(), first)

    def test_unknown_preset(self):
        with self.assertRaises(CommandError):
            call_command('sweep', 'fig42', stdout=StringIO())


class OracleCompareCommandTests(SimpleTestCase):

    def test_missing_config(self):
        with self.assertRaises(CommandError):
            call_command('oracle_compare', 'does-not-exist.yaml', stdout=StringIO())

    def test_outside_regime_fails(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = write_config(tmp, {'alpha_abs': 4.0, 'beta_abs': 4.0, 'fixed_modes': True, 'mode_cutoff': 8})
            with self.assertRaises(CommandError) as caught:
                call_command('oracle_compare', path, stdout=StringIO())
        self.assertIn('Oracle regime', str(caught.exception))
