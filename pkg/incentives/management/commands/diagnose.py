import json

from django.core.management.base import CommandError

from incentives import settings as mech_settings
from incentives.core.constants import EXIT_LOAD
from incentives.core.model import validate_scenario
from incentives.management.commands._base import ScenarioCommand
from incentives.services.experiment_service import ExperimentService


class Command(ScenarioCommand):
    help = 'Validate a scenario and check equilibrium uniqueness (positive definiteness of G + G^T).'

    def add_arguments(self, parser):
        self.add_scenario_arguments(parser)
        parser.add_argument('--samples', type=int, default=mech_settings.UNIQUENESS_SAMPLES,
                            help='Number of Latin-hypercube samples for the uniqueness check.')
        parser.add_argument('--json', metavar='PATH', help='Also write the report as JSON.')

    def handle(self, *args, **options):
        if options['samples'] < 0:
            raise self.usage_error('--samples must be >= 0')

        def run():
            scenario = self.load(options, validate=False)
            return scenario, ExperimentService.diagnose(scenario, options['samples'])

        scenario, report = self.execute_guarded(run)
        for check in report.checks:
            status = self.style.SUCCESS('PASS') if check.passed else self.style.ERROR('FAIL')
            self.stdout.write(f"[{status}] {check.name}: {check.message}")
        if report.jacobian_verdict is not None:
            self.stdout.write(f"verdict: {report.jacobian_verdict} "
                              f"({report.samples_checked} samples, {report.samples_skipped} skipped)")
        if report.clamped_players:
            self.stdout.write(f"clamped players: {report.clamped_players}")
        if options['json']:
            with open(options['json'], 'w', encoding='utf-8') as handle:
                json.dump(report.to_dict(), handle, indent=2, sort_keys=True)
                handle.write('\n')

        if not validate_scenario(scenario).passed:
            raise CommandError(f"scenario failed validation: {report.first_failure.name}", returncode=EXIT_LOAD)
