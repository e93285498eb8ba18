from django.conf import settings
from django.core.management.base import BaseCommand, CommandError

from probing.config_utils import load_document
from probing.exceptions import ProbingError
from probing.sweep_utils import PRESET_ALIASES, PRESETS, preset, spec_from_document, spec_from_manifest, timed_sweep


class Command(BaseCommand):
    help = 'Run a figure preset or a custom sweep configuration and write CSV, manifest and plot script'

    def add_arguments(self, parser):
        parser.add_argument('target', help=f"Preset ({', '.join(sorted(PRESETS))}, or an alias "
                                           f"{', '.join(sorted(PRESET_ALIASES))}), a YAML config or a *.manifest.json")
        parser.add_argument('--output-dir', default=None, help='Directory for the artifacts')
        parser.add_argument('--workers', type=int, default=None, help='Threads for in-process execution')
        parser.add_argument('--celery', action='store_true', help='Dispatch points as a Celery group')
        parser.add_argument('--mode-cutoff', type=int, default=None, help='Largest mode index in mode sums')
        parser.add_argument('--mode-tol', type=float, default=None, help='Relative stall tolerance of mode sums')
        parser.add_argument('--stall-terms', type=int, default=None,
                            help='Consecutive negligible terms that end a mode sum')

    def handle(self, *args, **options):
        target = options['target']
        overrides = {key: options[key] for key in ('mode_cutoff', 'mode_tol', 'stall_terms')
                     if options[key] is not None}
        defaults = {
            'mode_cutoff': settings.PROBING_MODE_CUTOFF,
            'mode_tol': settings.PROBING_MODE_TOL,
            'stall_terms': settings.PROBING_STALL_TERMS,
        }
        workers = options['workers'] or settings.PROBING_DEFAULT_WORKERS
        output_dir = options['output_dir'] or settings.PROBING_OUTPUT_DIR

        try:
            if target.endswith('.manifest.json'):
                spec = spec_from_manifest(target)
            elif target.endswith(('.yaml', '.yml')):
                spec = spec_from_document(load_document(target), overrides)
            else:
                spec = preset(target, overrides)
            if not target.endswith('.manifest.json'):
                for key, value in defaults.items():
                    spec.base.setdefault(key, value)

            self.stdout.write(f"Running {spec.experiment}: {len(spec.points())} points")
            rows, paths = timed_sweep(spec, output_dir, workers=workers, use_celery=options['celery'])
        except ProbingError as e:
            raise CommandError(str(e))

        failed = [row for row in rows if not row.get('success')]
        invalid = [row for row in rows if row.get('success') and not row.get('protocol_valid')]
        for name, path in paths.items():
            self.stdout.write(f"  {name}: {path}")

        if failed or invalid:
            raise CommandError(f"{len(failed)} rows failed and {len(invalid)} rows are outside the protocol regime")
        self.stdout.write(self.style.SUCCESS(f"All {len(rows)} rows succeeded"))
