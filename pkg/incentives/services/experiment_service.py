import itertools
from dataclasses import replace
import logging
from typing import Any, Dict, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from incentives import settings as mech_settings
from incentives.core.constants import (
    CONVERGENCE_FRACTION, DIRECT_MECHANISMS, ITERATIVE_MECHANISMS, MECH_M1, MECH_NONE,
    REPORTED_STEPS_RANGE,
)
from incentives.core.direct import misreport_gain, solve_m1, solve_m2
from incentives.core.dynamics import equilibrium_state, fit_exponential_rate, integrate, lyapunov
from incentives.core.exceptions import InsufficientDataError, MarginalRangeError
from incentives.core.game import check_uniqueness, pseudo_gradient, solve_ne
from incentives.core.iterative import cheat_probe, default_lambda_init, run_mechanism, steps_to_within
from incentives.core.model import Scenario, validate_scenario
from incentives.core.types import DiagnosticsReport, GameState, IterationConfig, OdeConfig, OdeState
from incentives.services.report_service import ReportService

logger = logging.getLogger(__name__)


class ExperimentService:
    """Runs the mechanisms on a scenario and packages the results for output."""

    @staticmethod
    def run(
        scenario: Scenario,
        mech: str,
        cfg: Optional[IterationConfig] = None,
        baseline_zero_p: bool = False,
    ) -> Tuple[pd.DataFrame, Dict[str, Any], bool]:
        """
        Run one mechanism.

        Returns:
            (table, summary, converged). Direct mechanisms produce a single-row
            table and always count as converged.
        """
        if mech in DIRECT_MECHANISMS:
            solution = solve_m1(scenario) if mech == MECH_M1 else solve_m2(scenario)
            summary = ReportService.summary(
                scenario, mech, solution.x, solution.p, solution.lambda_,
                solution.budget_spend, solution.objective_value, converged_at=None,
            )
            return ReportService.solution_frame(scenario, solution), summary, True

        p0 = np.zeros(scenario.n) if baseline_zero_p else scenario.p0()
        trajectory = run_mechanism(scenario, cfg or scenario.iteration, mech, p0=p0)
        final = trajectory.final
        within = steps_to_within(trajectory, CONVERGENCE_FRACTION)
        if mech != MECH_NONE:
            logger.info(f"{mech} reached 1% of its limit after {within} iterations "
                        f"(reported: {REPORTED_STEPS_RANGE} steps)")
        summary = ReportService.summary(
            scenario, mech, final.x, final.p, final.lambda_, final.budget_spend, final.objective,
            converged_at=trajectory.converged_at,
            steps_to_within_1pct=within,
            reported_steps=REPORTED_STEPS_RANGE,
            iterations=final.n,
        )
        return ReportService.trajectory_frame(trajectory), summary, trajectory.converged

    @staticmethod
    def ode(scenario: Scenario, mech: str, cfg: Optional[OdeConfig] = None,
            init: Optional[OdeState] = None) -> Tuple[pd.DataFrame, Dict[str, Any]]:
        """Integrate the continuous-time system and fit the exponential envelope."""
        cfg = cfg or scenario.ode
        if init is None:
            lam0 = default_lambda_init(scenario, mech, scenario.p0(), scenario.iteration)
            init = OdeState(x=scenario.x0(), lambda_=lam0)
        target = equilibrium_state(scenario, mech)
        trajectory = integrate(scenario, mech, init, cfg)

        fit = None
        fit_note = None
        try:
            fit = fit_exponential_rate(trajectory, target).to_dict()
        except (InsufficientDataError, ValueError) as exc:
            fit_note = str(exc)
            logger.warning(f"No exponential fit: {exc}")

        final = trajectory.final
        summary = {
            'mechanism': mech,
            't_end': trajectory.times[-1],
            'lambda': final.lambda_,
            'x': final.x.tolist(),
            'V_L': lyapunov(scenario, mech, final),
            'equilibrium': {'lambda': target.lambda_, 'x': target.x.tolist()},
            'distance_to_equilibrium': float(np.linalg.norm(final.x - target.x)),
            'fit': fit,
            'fit_note': fit_note,
        }
        return ReportService.ode_frame(scenario, trajectory), summary

    @staticmethod
    def diagnose(scenario: Scenario, samples: int = mech_settings.UNIQUENESS_SAMPLES) -> DiagnosticsReport:
        """Scenario validation, pseudo-gradient at the equilibrium and the uniqueness check."""
        report = validate_scenario(scenario)
        if not report.passed:
            return report

        p = scenario.p0()
        caller_samples = []
        try:
            ne = solve_ne(scenario, p)
        except MarginalRangeError as exc:
            report.add('equilibrium exists', False, str(exc))
        else:
            state = GameState(x=ne.x, p=p)
            norm = float(np.max(np.abs(pseudo_gradient(scenario, state))))
            report.pseudo_gradient_norm = norm
            report.clamped_players.extend(ne.clamped)
            report.add('equilibrium exists', True,
                       f"pseudo-gradient sup-norm {norm:.3e} after {ne.iterations} sweeps", value=norm)
            caller_samples.append(GameState(x=ne.x, p=np.zeros(scenario.n)))
        return report.merge(check_uniqueness(scenario, caller_samples, n_samples=samples))

    @staticmethod
    def probe(scenario: Scenario, mech: str, player: int,
              delta: Optional[float] = None, scale: Optional[float] = None):
        """
        Iterative mechanisms: per-step honest versus deviated costs (table).
        Direct mechanisms: the misreport record (dict).
        """
        if mech in ITERATIVE_MECHANISMS:
            if delta is None:
                raise ValueError('iterative probes need a deviation delta')
            return ReportService.probe_frame(cheat_probe(scenario, scenario.iteration, mech, player, delta))
        if scale is None:
            raise ValueError('direct probes need a report scale')
        return misreport_gain(scenario, player, scale).to_dict()

    @staticmethod
    def sweep(scenario: Scenario, mech: str, kappas: Sequence[float], phis: Sequence[float]) -> pd.DataFrame:
        """Convergence behaviour over a grid of designer step sizes and relaxation constants."""
        rows = []
        for kappa_d, phi in itertools.product(kappas, phis):
            cfg = replace(scenario.iteration, kappa_d=kappa_d, phi=phi)
            trajectory = run_mechanism(scenario, cfg, mech)
            rows.append([
                kappa_d, phi,
                trajectory.converged_at if trajectory.converged else -1,
                steps_to_within(trajectory, CONVERGENCE_FRACTION) if trajectory.converged else -1,
                trajectory.final.lambda_,
                trajectory.final.budget_spend,
                trajectory.final.objective,
            ])
        return pd.DataFrame(rows, columns=[
            'kappa_d', 'phi', 'converged_at', 'steps_to_within_1pct', 'lambda', 'spend', 'objective',
        ])
