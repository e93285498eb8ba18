from django.core.management.base import BaseCommand, CommandError

from probing.config_utils import build_models, load_document, validate_document
from probing.exceptions import ProbingError


class Command(BaseCommand):
    help = 'Validate a YAML run configuration against the schema and the physical invariants'

    def add_arguments(self, parser):
        parser.add_argument('config', help='Path to a YAML configuration')

    def handle(self, *args, **options):
        try:
            document = load_document(options['config'])
        except ProbingError as e:
            raise CommandError(str(e))

        report = validate_document(document)
        if not report['valid']:
            for message in report['errors']:
                self.stderr.write(f"  {message}")
            raise CommandError(f"{len(report['errors'])} schema errors in {options['config']}")

        try:
            models = build_models(document)
        except ProbingError as e:
            raise CommandError(f"Invalid configuration: {e}")

        probe, qubit = models.probe, models.qubit
        self.stdout.write(f"kappa={models.cavity.kappa}  v/c={probe.v:.6e}  T={probe.T:.6e}")
        self.stdout.write(f"lambda_p T={probe.coupling_time:.3e}  lambda_q T={qubit.lambda_q * probe.T:.3e}  "
                          f"x0/L={qubit.x0:.4f}  Omega_q={qubit.Omega_q:.6e}")
        self.stdout.write(self.style.SUCCESS(f"{options['config']} is valid"))
