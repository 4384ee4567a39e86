from dataclasses import replace

from django.core.management.base import CommandError

from incentives.core.constants import (
    DIRECT_MECHANISMS, EXIT_NUMERICAL, ITERATIVE_MECHANISMS, MECH_NONE,
)
from incentives.management.commands._base import ScenarioCommand
from incentives.services.experiment_service import ExperimentService
from incentives.services.report_service import ReportService


class Command(ScenarioCommand):
    help = 'Run an incentive mechanism on a scenario and write its trajectory (or solution) as CSV.'

    def add_arguments(self, parser):
        self.add_scenario_arguments(parser)
        parser.add_argument('--mech', required=True, choices=ITERATIVE_MECHANISMS + DIRECT_MECHANISMS + (MECH_NONE,))
        parser.add_argument('--out', required=True, metavar='CSV', help='Trajectory or solution CSV.')
        parser.add_argument('--summary', metavar='JSON', help='Optional summary JSON.')
        parser.add_argument('--max-iters', type=int, help='Iteration limit for iterative runs.')
        parser.add_argument('--tol', type=float, help='Convergence tolerance on the state change.')
        parser.add_argument('--literal-lambda-projection', action='store_true',
                            help='Only let the dual variable grow (non-negative increments).')
        parser.add_argument('--baseline-zero-p', action='store_true',
                            help="With --mech none, hold incentives at 0 instead of the scenario's p0.")
        parser.add_argument('--allow-unconverged', action='store_true',
                            help='Exit 0 even when an iterative run hits the iteration limit.')

    def handle(self, *args, **options):
        mech = options['mech']

        def run():
            scenario = self.load(options, mech)
            overrides = {}
            if options['max_iters'] is not None:
                overrides['max_iters'] = options['max_iters']
            if options['tol'] is not None:
                overrides['conv_tol'] = options['tol']
            if options['literal_lambda_projection']:
                overrides['literal_projection'] = True
            cfg = replace(scenario.iteration, **overrides)

            table, summary, converged = ExperimentService.run(
                scenario, mech, cfg, baseline_zero_p=options['baseline_zero_p'],
            )
            ReportService.write_csv(table, options['out'])
            if options['summary']:
                ReportService.write_json(summary, options['summary'])
            return summary, converged

        summary, converged = self.execute_guarded(run)
        self.stdout.write(
            f"{mech}: lambda={summary['lambda']:.9g} spend={summary['spend']:.9g} "
            f"objective={summary['objective']:.9g} converged_at={summary['converged_at']}"
        )
        if summary.get('threshold_note'):
            self.stdout.write(summary['threshold_note'])
        if not converged and not options['allow_unconverged']:
            raise CommandError(f"{mech} did not converge; pass --allow-unconverged to accept",
                               returncode=EXIT_NUMERICAL)
        self.stdout.write(self.style.SUCCESS(f"Wrote {options['out']}"))
