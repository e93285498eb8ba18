import json

from django.core.management.base import BaseCommand, CommandError

from probing.config_utils import load_document
from probing.exceptions import ProbingError
from probing.tasks import oracle_compare_task


class Command(BaseCommand):
    help = 'Compare the truncated-Fock oracle with the closed-form pipeline for one desk-scale configuration'

    def add_arguments(self, parser):
        parser.add_argument('config', help='Path to a YAML configuration (internal units)')
        parser.add_argument('--steps', type=int, default=None, help='Initial RK4 step count')
        parser.add_argument('--celery', action='store_true', help='Run the comparison in a Celery worker')

    def handle(self, *args, **options):
        try:
            document = load_document(options['config'])
        except ProbingError as e:
            raise CommandError(str(e))

        if options['celery']:
            result = oracle_compare_task.delay(document, options['steps']).get()
        else:
            result = oracle_compare_task(document, options['steps'])

        if not result.get('success'):
            raise CommandError(f"Oracle comparison failed: {result.get('error')}")

        self.stdout.write(json.dumps(result, indent=2, sort_keys=True))
        if not result['within_tolerance']:
            raise CommandError('Closed-form pipeline disagrees with the Fock oracle beyond tolerance')
        self.stdout.write(self.style.SUCCESS('Closed-form pipeline agrees with the Fock oracle'))
