"""
Tabular and JSON output for mechanism runs.

Every CSV goes through ``write_csv`` so that float rendering (17 significant
digits), line endings and encoding are identical across runs.
"""
import json
import logging
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Tuple, Union

import numpy as np
import pandas as pd

from incentives import settings as mech_settings
from incentives.core.dynamics import lyapunov
from incentives.core.game import player_costs
from incentives.core.model import Scenario
from incentives.core.types import MechanismSolution, OdeTrajectory, ProbeRecord, Trajectory

logger = logging.getLogger(__name__)


def _indexed(prefix: str, n: int) -> List[str]:
    return [f"{prefix}_{i}" for i in range(1, n + 1)]


class ReportService:
    """Builds DataFrames and summary dictionaries from solver results."""

    @staticmethod
    def trajectory_columns(n: int) -> List[str]:
        return ['n', 'lambda', 'spend', 'objective'] + _indexed('x', n) + _indexed('p', n) + _indexed('cost', n)

    @staticmethod
    def trajectory_frame(trajectory: Trajectory) -> pd.DataFrame:
        """One row per iteration: n, lambda, spend, objective, x_i, p_i, cost_i."""
        n = trajectory.final.x.size
        rows = [
            [step.n, step.lambda_, step.budget_spend, step.objective]
            + step.x.tolist() + step.p.tolist() + step.player_costs.tolist()
            for step in trajectory.steps
        ]
        return pd.DataFrame(rows, columns=ReportService.trajectory_columns(n))

    @staticmethod
    def solution_frame(scenario: Scenario, solution: MechanismSolution) -> pd.DataFrame:
        """Single-row table of a direct-mechanism solution in the trajectory layout."""
        costs = player_costs(scenario, solution.x, solution.p)
        row = [0, solution.lambda_, solution.budget_spend, solution.objective_value] \
            + solution.x.tolist() + solution.p.tolist() + costs.tolist()
        return pd.DataFrame([row], columns=ReportService.trajectory_columns(scenario.n))

    @staticmethod
    def ode_frame(scenario: Scenario, trajectory: OdeTrajectory) -> pd.DataFrame:
        """Columns t, lambda, V_L, x_1..x_N."""
        n = scenario.n
        rows = [
            [t, state.lambda_, lyapunov(scenario, trajectory.mechanism, state)] + state.x.tolist()
            for t, state in zip(trajectory.times, trajectory.states)
        ]
        return pd.DataFrame(rows, columns=['t', 'lambda', 'V_L'] + _indexed('x', n))

    @staticmethod
    def probe_frame(records: Iterable[ProbeRecord]) -> pd.DataFrame:
        return pd.DataFrame(
            [[r.n, r.cost_honest, r.cost_deviated, r.cost_target, r.cost_target_deviated,
              r.honest_in_domain, r.target_in_domain] for r in records],
            columns=['n', 'cost_honest', 'cost_deviated', 'cost_target', 'cost_target_deviated',
                     'honest_in_domain', 'target_in_domain'],
        )

    @staticmethod
    def write_csv(frame: pd.DataFrame, path: Union[str, Path]) -> None:
        frame.to_csv(
            path,
            index=False,
            float_format=mech_settings.CSV_FLOAT_FORMAT,
            lineterminator='\n',
            encoding='utf-8',
        )
        logger.info(f"Wrote {len(frame)} rows to {path}")

    @staticmethod
    def write_json(data: Dict[str, Any], path: Union[str, Path]) -> None:
        Path(path).write_text(json.dumps(data, indent=2, sort_keys=True) + '\n', encoding='utf-8')
        logger.info(f"Wrote summary to {path}")

    @staticmethod
    def threshold_verdict(scenario: Scenario, objective: float) -> Tuple[Optional[bool], Optional[str]]:
        """
        Compare the reached objective with the scenario's success threshold.

        The note records the gap when the threshold is missed, so summaries
        make a shortfall visible instead of hiding it.
        """
        threshold = scenario.success_threshold
        if threshold is None:
            return None, None
        passed = bool(objective > threshold)
        if passed:
            return True, f"objective {objective:.6g} exceeds the success threshold {threshold:g}"
        note = (f"objective {objective:.6g} does not reach the success threshold {threshold:g}; "
                f"the equilibrium of these parameters cannot pass it")
        logger.warning(note)
        return False, note

    @staticmethod
    def summary(
        scenario: Scenario,
        mechanism: str,
        x: np.ndarray,
        p: np.ndarray,
        lam: float,
        spend: float,
        objective: float,
        converged_at: Optional[int] = None,
        **extra: Any,
    ) -> Dict[str, Any]:
        threshold_pass, note = ReportService.threshold_verdict(scenario, objective)
        data = {
            'mechanism': mechanism,
            'converged_at': converged_at,
            'lambda': float(lam),
            'x': [float(v) for v in x],
            'p': [float(v) for v in p],
            'spend': float(spend),
            'objective': float(objective),
            'threshold': scenario.success_threshold,
            'threshold_pass': threshold_pass,
            'threshold_note': note,
        }
        data.update(extra)
        return data
