from incentives.core.constants import DIRECT_MECHANISMS, ITERATIVE_MECHANISMS
from incentives.management.commands._base import ScenarioCommand
from incentives.services.experiment_service import ExperimentService
from incentives.services.report_service import ReportService


class Command(ScenarioCommand):
    help = ('Probe strategy-proofness: per-step costs of a shifted action (iterative mechanisms) '
            'or the gain from misreporting a utility (direct mechanisms).')

    def add_arguments(self, parser):
        self.add_scenario_arguments(parser)
        parser.add_argument('--mech', required=True, choices=ITERATIVE_MECHANISMS + DIRECT_MECHANISMS)
        parser.add_argument('--player', required=True, type=int, help='1-based player index.')
        deviation = parser.add_mutually_exclusive_group(required=True)
        deviation.add_argument('--delta', type=float, help='Action shift for iterative mechanisms.')
        deviation.add_argument('--scale', type=float, help='Utility report scale for direct mechanisms.')
        parser.add_argument('--out', metavar='CSV', help='Per-step cost table (iterative mechanisms).')
        parser.add_argument('--summary', metavar='JSON', help='Misreport record (direct mechanisms).')

    def handle(self, *args, **options):
        mech = options['mech']
        if mech in ITERATIVE_MECHANISMS and options['delta'] is None:
            raise self.usage_error('iterative mechanisms are probed with --delta')
        if mech in DIRECT_MECHANISMS and options['scale'] is None:
            raise self.usage_error('direct mechanisms are probed with --scale')

        def run():
            scenario = self.load(options, mech)
            player = options['player']
            if not 1 <= player <= scenario.n:
                raise self.usage_error(f"--player must lie in 1..{scenario.n}")
            return ExperimentService.probe(
                scenario, mech, player - 1, delta=options['delta'], scale=options['scale'],
            )

        result = self.execute_guarded(run)
        if mech in ITERATIVE_MECHANISMS:
            feasible = result[result['target_in_domain']]
            if feasible.empty:
                self.stdout.write(f"{len(result)} steps; the deviation is never feasible at the best-response target")
            else:
                margin = (feasible['cost_target_deviated'] - feasible['cost_target']).min()
                self.stdout.write(
                    f"{len(result)} steps ({len(feasible)} feasible); "
                    f"smallest cost increase at the best-response target: {margin:.6g}"
                )
            if options['out']:
                ReportService.write_csv(result, options['out'])
                self.stdout.write(self.style.SUCCESS(f"Wrote {options['out']}"))
        else:
            self.stdout.write(
                f"cost_truthful={result['cost_truthful']:.9g} cost_misreport={result['cost_misreport']:.9g} "
                f"advantage={result['advantage']:.9g}"
            )
            if options['summary']:
                ReportService.write_json(result, options['summary'])
