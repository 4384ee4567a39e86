"""
Iterative mechanisms IM2 (linear global objective) and IM1 (welfare).

Each step the designer moves the dual variable with the budget residual and
publishes incentives; players then move part of the way towards their best
response. Only observed investments flow back to the designer, so no player
has anything to gain by misrepresenting its utility.
"""
from typing import List, Optional
import logging
import math

import numpy as np

from incentives.core.constants import (
    CONVERGENCE_FRACTION, ITERATIVE_MECHANISMS, MECH_IM1, MECH_IM2, MECH_NONE,
)
from incentives.core.exceptions import (
    ConvergenceError, DimensionError, DomainError, NumericalError, UnsupportedModelError,
)
from incentives.core.game import best_response, best_responses, budget_spend, player_cost, player_costs
from incentives.core.model import Scenario
from incentives.core.types import GameState, IterationConfig, ProbeRecord, StepRecord, Trajectory

logger = logging.getLogger(__name__)

__all__ = [
    'budget_spend', 'im1_incentives', 'im2_incentives', 'update_lambda', 'relaxed_response',
    'make_record', 'im2_step', 'im1_step', 'default_lambda_init', 'run_mechanism',
    'detect_convergence', 'steps_to_within', 'cheat_probe',
]


def update_lambda(lam: float, spend: float, budget: float, cfg: IterationConfig) -> float:
    """Projected dual step; ``literal_projection`` only lets lambda grow."""
    increment = cfg.kappa_d * (spend - budget)
    if cfg.literal_projection:
        increment = max(increment, 0.0)
    return max(cfg.lambda_min, lam + increment)


def im2_incentives(scenario: Scenario, lam: float, cfg: IterationConfig) -> np.ndarray:
    return np.minimum(scenario.gammas / lam, cfg.p_cap_fraction * scenario.betas)


def im1_incentives(scenario: Scenario, lam: float, cfg: IterationConfig) -> np.ndarray:
    """Solve (W^T + lambda I) p = W^T beta, then cap."""
    Wt = scenario.W.T
    system = Wt + lam * np.eye(scenario.n)
    try:
        p = np.linalg.solve(system, Wt @ scenario.betas)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(
            f"singular incentive system at lambda={lam:.6g} (condition {np.linalg.cond(system):.3e})"
        ) from exc
    if not np.all(np.isfinite(p)):
        raise NumericalError(f"non-finite incentives at lambda={lam:.6g}")
    return np.minimum(p, cfg.p_cap_fraction * scenario.betas)


def relaxed_response(scenario: Scenario, x: np.ndarray, p: np.ndarray, phi: float) -> np.ndarray:
    """x' = phi x + (1 - phi) BR(x, p)."""
    return phi * x + (1.0 - phi) * best_responses(scenario, x, p)


def make_record(scenario: Scenario, n: int, x, p, lam: float) -> StepRecord:
    x = np.asarray(x, dtype=float)
    p = np.asarray(p, dtype=float)
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(p)) and np.isfinite(lam)):
        raise NumericalError(f"non-finite state at iteration {n}")
    return StepRecord(
        n=n,
        x=x,
        p=p,
        lambda_=float(lam),
        budget_spend=budget_spend(p, x),
        objective=scenario.objective_value(x),
        player_costs=player_costs(scenario, x, p),
    )


def _step(scenario: Scenario, prev: StepRecord, cfg: IterationConfig, incentives) -> StepRecord:
    lam = update_lambda(prev.lambda_, prev.budget_spend, scenario.budget, cfg)
    p = incentives(scenario, lam, cfg)
    respond_to = prev.p if cfg.simultaneous else p
    x = relaxed_response(scenario, prev.x, respond_to, cfg.phi)
    return make_record(scenario, prev.n + 1, x, p, lam)


def im2_step(scenario: Scenario, prev: StepRecord, cfg: IterationConfig) -> StepRecord:
    if not scenario.objective.is_linear_global:
        raise UnsupportedModelError("IM2 requires a linear_global objective")
    return _step(scenario, prev, cfg, im2_incentives)


def im1_step(scenario: Scenario, prev: StepRecord, cfg: IterationConfig) -> StepRecord:
    if not scenario.objective.is_welfare:
        raise UnsupportedModelError("IM1 requires a welfare objective")
    return _step(scenario, prev, cfg, im1_incentives)


_STEPS = {MECH_IM1: im1_step, MECH_IM2: im2_step}


def default_lambda_init(scenario: Scenario, mech: str, p0: np.ndarray, cfg: IterationConfig) -> float:
    """
    Starting dual variable whose incentives match ``p0`` on average:
    mean(gamma)/mean(p0) for IM2, mean(beta)/mean(p0) - 1 for IM1.
    """
    if cfg.lambda_init is not None:
        return max(cfg.lambda_min, cfg.lambda_init)
    if mech == MECH_NONE:
        return 0.0
    mean_p0 = float(np.mean(p0))
    if mean_p0 <= 0:
        logger.warning("Initial incentives are not positive on average; starting from lambda=1")
        return 1.0
    if mech == MECH_IM2:
        lam = float(np.mean(scenario.gammas)) / mean_p0
    else:
        lam = float(np.mean(scenario.betas)) / mean_p0 - 1.0
    return max(cfg.lambda_min, lam)


def _change(a: StepRecord, b: StepRecord) -> float:
    return max(float(np.max(np.abs(b.x - a.x))), abs(b.lambda_ - a.lambda_))


def run_mechanism(
    scenario: Scenario,
    cfg: Optional[IterationConfig] = None,
    mech: str = MECH_IM2,
    x0=None,
    p0=None,
) -> Trajectory:
    """
    Run the designer-player loop from (x0, p0, lambda_init).

    Iteration 0 records the start; at iteration 1 players respond to ``p0``
    while the designer waits; from iteration 2 on the mechanism step runs.
    Convergence is only tested once the designer has acted.
    ``mech='none'`` keeps p fixed at ``p0`` throughout.
    """
    if mech not in ITERATIVE_MECHANISMS + (MECH_NONE,):
        raise ValueError(f"unknown iterative mechanism '{mech}'")
    cfg = cfg or scenario.iteration
    x0 = scenario.x0() if x0 is None else np.asarray(x0, dtype=float)
    p0 = scenario.p0() if p0 is None else np.asarray(p0, dtype=float)
    if x0.size != scenario.n or p0.size != scenario.n:
        raise DimensionError(f"initial state sized {x0.size}/{p0.size} for {scenario.n} players")
    if np.any(x0 <= 0):
        raise DomainError("initial investments must be strictly positive", bound='x0 > 0')

    lam0 = default_lambda_init(scenario, mech, p0, cfg)
    trajectory = Trajectory(scenario_id=scenario.name, mechanism=mech, config=cfg)
    trajectory.steps.append(make_record(scenario, 0, x0, p0, lam0))
    trajectory.steps.append(
        make_record(scenario, 1, relaxed_response(scenario, x0, p0, cfg.phi), p0, lam0)
    )
    logger.info(f"Running {mech} on '{scenario.name}' (lambda_init={lam0:.6g}, kappa_d={cfg.kappa_d}, phi={cfg.phi})")

    step = _STEPS.get(mech)
    first_check = 1 if step is None else 2
    n = 1
    while True:
        change = _change(trajectory.steps[-2], trajectory.steps[-1])
        logger.debug(f"{mech} iteration {n}: change={change:.3e}, spend={trajectory.final.budget_spend:.9g}")
        if n >= first_check and change < cfg.conv_tol:
            trajectory.converged_at = n
            break
        if n >= cfg.max_iters:
            break
        prev = trajectory.final
        if step is None:
            record = make_record(scenario, n + 1, relaxed_response(scenario, prev.x, prev.p, cfg.phi), prev.p, prev.lambda_)
        else:
            record = step(scenario, prev, cfg)
        trajectory.steps.append(record)
        n += 1

    if trajectory.converged:
        logger.info(f"{mech} converged at iteration {trajectory.converged_at}: "
                    f"lambda={trajectory.final.lambda_:.9g}, objective={trajectory.final.objective:.9g}")
    else:
        residual = _change(trajectory.steps[-2], trajectory.steps[-1])
        if cfg.fail_on_max_iters:
            raise ConvergenceError(f"{mech} did not converge in {cfg.max_iters} iterations", residual=residual)
        logger.warning(f"{mech} stopped unconverged after {cfg.max_iters} iterations (change {residual:.3e})")
    return trajectory


def detect_convergence(trajectory: Trajectory, tol: float, first: int = 1) -> Optional[int]:
    """
    First n >= ``first`` with max(|x(n) - x(n-1)|_inf, |lambda(n) - lambda(n-1)|) < tol.

    Mechanism runs pass ``first=2``: iteration 1 is the players' response to
    p0 and says nothing about the designer.
    """
    steps = trajectory.steps
    for k in range(max(1, first), len(steps)):
        if _change(steps[k - 1], steps[k]) < tol:
            return steps[k].n
    return None


def steps_to_within(trajectory: Trajectory, fraction: float = CONVERGENCE_FRACTION, limit=None) -> Optional[int]:
    """First iteration whose investments are within ``fraction`` (sup-norm, relative) of the limit."""
    limit = trajectory.final.x if limit is None else np.asarray(limit, dtype=float)
    threshold = fraction * float(np.max(np.abs(limit)))
    for record in trajectory.steps:
        if float(np.max(np.abs(record.x - limit))) <= threshold:
            return record.n
    return None


def _cost_with(scenario: Scenario, record: StepRecord, i: int, action: float) -> float:
    x = record.x.copy()
    x[i] = action
    return player_cost(scenario, GameState(x=x, p=record.p), i)


def cheat_probe(
    scenario: Scenario,
    cfg: Optional[IterationConfig],
    mech: str,
    i: int,
    delta: float,
    x0=None,
    p0=None,
) -> List[ProbeRecord]:
    """
    Player i's instantaneous cost at each step of an honest run versus after
    shifting its action by ``delta``. Costs are evaluated both at the relaxed
    action the player actually took and at its best-response target.
    """
    if mech not in ITERATIVE_MECHANISMS:
        raise ValueError(f"cheat probe needs an iterative mechanism, got '{mech}'")
    trajectory = run_mechanism(scenario, cfg, mech, x0=x0, p0=p0)
    records = []
    skipped = 0
    for record in trajectory.steps:
        honest = record.x[i]
        target = best_response(scenario, GameState(x=record.x, p=record.p), i)
        honest_ok = bool(honest + delta > 0)
        target_ok = bool(target + delta > 0)
        skipped += (not honest_ok) + (not target_ok)
        records.append(ProbeRecord(
            n=record.n,
            cost_honest=_cost_with(scenario, record, i, honest),
            cost_deviated=_cost_with(scenario, record, i, honest + delta) if honest_ok else math.nan,
            cost_target=_cost_with(scenario, record, i, target),
            cost_target_deviated=_cost_with(scenario, record, i, target + delta) if target_ok else math.nan,
            honest_in_domain=honest_ok,
            target_in_domain=target_ok,
        ))
    if skipped == 2 * len(records):
        raise DomainError(
            f"deviation {delta} pushes player {i} to x <= 0 at every step", bound='x_i + delta > 0',
        )
    if skipped:
        logger.warning(f"deviation {delta} pushes player {i} to x <= 0 in {skipped} evaluations; those costs are NaN")
    return records
