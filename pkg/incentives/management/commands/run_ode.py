from dataclasses import replace

from incentives.core.constants import ITERATIVE_MECHANISMS
from incentives.core.dynamics import equilibrium_state
from incentives.management.commands._base import ScenarioCommand
from incentives.services.experiment_service import ExperimentService
from incentives.services.report_service import ReportService


class Command(ScenarioCommand):
    help = 'Integrate the continuous-time mechanism dynamics and fit their exponential decay rate.'

    def add_arguments(self, parser):
        self.add_scenario_arguments(parser)
        parser.add_argument('--mech', required=True, choices=ITERATIVE_MECHANISMS)
        parser.add_argument('--t-end', type=float, help='Integration horizon.')
        parser.add_argument('--dt', type=float, help='Fixed RK4 step.')
        parser.add_argument('--record-every', type=int, help='Record every k-th step.')
        parser.add_argument('--equilibrium-init', action='store_true',
                            help='Start at the direct-mechanism equilibrium.')
        parser.add_argument('--out', required=True, metavar='CSV', help='Time-series CSV (t, lambda, V_L, x_i).')
        parser.add_argument('--summary', metavar='JSON', help='Optional summary JSON with the fitted rate.')

    def handle(self, *args, **options):
        mech = options['mech']

        def run():
            scenario = self.load(options, mech)
            overrides = {
                key: options[key] for key in ('t_end', 'dt', 'record_every') if options[key] is not None
            }
            cfg = replace(scenario.ode, **overrides)
            init = equilibrium_state(scenario, mech) if options['equilibrium_init'] else None
            table, summary = ExperimentService.ode(scenario, mech, cfg, init=init)
            ReportService.write_csv(table, options['out'])
            if options['summary']:
                ReportService.write_json(summary, options['summary'])
            return summary

        summary = self.execute_guarded(run)
        fit = summary['fit']
        if fit is not None:
            self.stdout.write(f"fit: alpha={fit['alpha']:.6g} beta={fit['beta']:.6g} r2={fit['r2']:.6f}")
        else:
            self.stdout.write(f"no fit: {summary['fit_note']}")
        self.stdout.write(self.style.SUCCESS(f"Wrote {options['out']}"))
