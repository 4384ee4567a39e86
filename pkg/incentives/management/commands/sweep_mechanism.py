from incentives.core.constants import ITERATIVE_MECHANISMS
from incentives.management.commands._base import ScenarioCommand
from incentives.services.experiment_service import ExperimentService
from incentives.services.report_service import ReportService


class Command(ScenarioCommand):
    help = 'Run an iterative mechanism over a grid of designer step sizes and relaxation constants.'

    def add_arguments(self, parser):
        self.add_scenario_arguments(parser)
        parser.add_argument('--mech', required=True, choices=ITERATIVE_MECHANISMS)
        parser.add_argument('--kappa-d', type=float, nargs='+', required=True, help='Designer step sizes.')
        parser.add_argument('--phi', type=float, nargs='+', required=True, help='Relaxation constants in (0, 1).')
        parser.add_argument('--out', required=True, metavar='CSV')

    def handle(self, *args, **options):
        mech = options['mech']

        def run():
            scenario = self.load(options, mech)
            table = ExperimentService.sweep(scenario, mech, options['kappa_d'], options['phi'])
            ReportService.write_csv(table, options['out'])
            return table

        table = self.execute_guarded(run)
        unconverged = int((table['converged_at'] < 0).sum())
        self.stdout.write(f"{len(table)} runs, {unconverged} unconverged")
        self.stdout.write(self.style.SUCCESS(f"Wrote {options['out']}"))
