"""
Direct (one-shot) mechanisms.

M2 aligns the equilibrium with a linear global objective F(x) = gamma . x:
p_i = gamma_i / lambda with the budget spent exactly. M1 aligns it with social
welfare: in the separable case p_i = beta_i / (1 + lambda). Both need every
player to report its utility, which is what ``misreport_gain`` exploits.
"""
from dataclasses import replace
from typing import Callable
import logging
import math

import numpy as np
from scipy import optimize

from incentives import settings as mech_settings
from incentives.core.constants import MECH_M1, MECH_M2, MECH_NONE
from incentives.core.exceptions import (
    ConvergenceError, DomainError, InfeasibleError, UnsupportedModelError,
)
from incentives.core.game import best_response_target, budget_spend, player_cost, solve_ne
from incentives.core.model import InfluenceMatrix, Scenario, X_MIN, effective_investment
from incentives.core.types import GameState, MechanismSolution, MisreportResult

logger = logging.getLogger(__name__)

# Residual returned to the root finder when a trial point leaves a utility domain
_OUT_OF_DOMAIN = 1e6


def _separable_investments(scenario: Scenario, p: np.ndarray) -> np.ndarray:
    return np.array([max(X_MIN, best_response_target(scenario, p[i], i)) for i in range(scenario.n)])


def _find_dual_root(
    residual: Callable[[float], float],
    pole: float,
    lower: float,
    upper: float,
    tol: float,
) -> float:
    """
    Root of a budget residual that is positive near ``pole`` and negative for
    large lambda. The bracket [lower, upper] is shrunk towards the pole or
    expanded upwards geometrically until the sign changes.
    """
    expansions = mech_settings.BRACKET_EXPANSIONS
    lo, hi = lower, upper
    for _ in range(expansions):
        if residual(lo) > 0:
            break
        lo = pole + (lo - pole) / 10.0
        logger.debug(f"Budget residual non-positive at lower bracket end, shrinking to {lo:.6g}")
    else:
        raise InfeasibleError(
            f"budget cannot be spent: residual stays non-positive as lambda approaches {pole:.6g}"
        )
    for _ in range(expansions):
        if residual(hi) < 0:
            break
        hi *= 10.0
        logger.debug(f"Budget residual non-negative at upper bracket end, expanding to {hi:.6g}")
    else:
        raise InfeasibleError(f"no sign change of the budget residual up to lambda={hi:.6g}")
    return optimize.brentq(residual, lo, hi, xtol=tol, rtol=4 * np.finfo(float).eps, maxiter=500)


def _root_stacked(system: Callable[[np.ndarray], np.ndarray], z0: np.ndarray, tol: float, label: str) -> np.ndarray:
    def guarded(z):
        try:
            values = system(z)
        except (DomainError, OverflowError, FloatingPointError):
            return np.full(z.size, _OUT_OF_DOMAIN)
        return values if np.all(np.isfinite(values)) else np.full(z.size, _OUT_OF_DOMAIN)

    result = optimize.root(guarded, z0, method='hybr', tol=tol)
    residual = float(np.max(np.abs(guarded(result.x))))
    if not result.success or residual > math.sqrt(tol):
        logger.error(f"{label} stacked system did not converge: {result.message} (residual {residual:.3e})")
        raise ConvergenceError(f"{label} stacked system did not converge: {result.message}", residual=residual)
    return result.x


def _solution(scenario: Scenario, mechanism: str, x, p, lam: float, stationarity: float) -> MechanismSolution:
    spend = budget_spend(p, x)
    return MechanismSolution(
        mechanism=mechanism,
        x=np.asarray(x, dtype=float),
        p=np.asarray(p, dtype=float),
        lambda_=float(lam),
        objective_value=scenario.objective_value(x),
        budget_spend=spend,
        budget_residual=spend - scenario.budget,
        stationarity_residual=float(stationarity),
    )


def solve_m2(scenario: Scenario, tol: float = mech_settings.DIRECT_TOL) -> MechanismSolution:
    """Efficient mechanism for a linear global objective."""
    if not scenario.objective.is_linear_global:
        raise UnsupportedModelError("M2 requires a linear_global objective")
    gamma, beta, B = scenario.gammas, scenario.betas, scenario.budget
    pole = float(np.max(gamma / beta))
    lower = float(np.max(gamma / (mech_settings.P_CAP_FRACTION * beta)))

    separable = scenario if scenario.is_separable else replace(
        scenario, influence=InfluenceMatrix.identity(scenario.n)
    )

    def residual(lam):
        p = gamma / lam
        return budget_spend(p, _separable_investments(separable, p)) - B

    lam = _find_dual_root(residual, pole, lower, mech_settings.M2_LAMBDA_HI, tol)
    p = gamma / lam
    x = _separable_investments(separable, p)

    if scenario.is_separable:
        stationarity = float(np.max(np.abs(p * lam - gamma)))
        logger.info(f"M2 solved for '{scenario.name}': lambda={lam:.9g}, F={scenario.objective_value(x):.9g}")
        return _solution(scenario, MECH_M2, x, p, lam, stationarity)

    n = scenario.n
    utilities = scenario.utilities

    def system(z):
        xs, lam_ = np.exp(z[:n]), math.exp(z[n])
        ps = gamma / lam_
        xe = effective_investment(scenario.influence, xs)
        focs = beta - ps - np.array([u.marginal(v) for u, v in zip(utilities, xe)])
        return np.append(focs, budget_spend(ps, xs) - B)

    z = _root_stacked(system, np.append(np.log(x), math.log(lam)), tol, 'M2')
    x, lam = np.exp(z[:n]), math.exp(z[n])
    p = gamma / lam
    stationarity = float(np.max(np.abs(system(z)[:n])))
    logger.info(f"M2 solved for nonseparable '{scenario.name}': lambda={lam:.9g}")
    return _solution(scenario, MECH_M2, x, p, lam, stationarity)


def solve_m1(scenario: Scenario, tol: float = mech_settings.DIRECT_TOL) -> MechanismSolution:
    """Welfare-aligned mechanism."""
    if not scenario.objective.is_welfare:
        raise UnsupportedModelError("M1 requires a welfare objective")
    beta, B, n = scenario.betas, scenario.budget, scenario.n

    if scenario.is_separable and scenario.all_log:
        lam = float(np.sum(scenario.weights)) / B
        p = beta / (1.0 + lam)
        x = scenario.weights / (beta - p)
        logger.info(f"M1 closed form for '{scenario.name}': lambda={lam:.9g}")
        return _solution(scenario, MECH_M1, x, p, lam, np.max(np.abs(beta - p - lam * p)))

    separable = scenario if scenario.is_separable else replace(
        scenario, influence=InfluenceMatrix.identity(n)
    )

    def residual(lam):
        p = beta / (1.0 + lam)
        return budget_spend(p, _separable_investments(separable, p)) - B

    lower = 1.0 / mech_settings.P_CAP_FRACTION - 1.0
    lam = _find_dual_root(residual, 0.0, lower, mech_settings.M2_LAMBDA_HI, tol)
    p = beta / (1.0 + lam)
    x = _separable_investments(separable, p)
    if scenario.is_separable:
        return _solution(scenario, MECH_M1, x, p, lam, np.max(np.abs(beta - p - lam * p)))

    W = scenario.W
    utilities = scenario.utilities
    off_diagonal = W - np.diag(np.diag(W))

    def system(z):
        xs, ps, lam_ = np.exp(z[:n]), z[n:2 * n], math.exp(z[2 * n])
        xe = effective_investment(scenario.influence, xs)
        marginals = np.array([u.marginal(v) for u, v in zip(utilities, xe)])
        focs = beta - ps - marginals
        alignment = beta - ps + off_diagonal.T @ marginals - lam_ * ps
        return np.concatenate([focs, alignment, [budget_spend(ps, xs) - B]])

    z = _root_stacked(system, np.concatenate([np.log(x), p, [math.log(lam)]]), tol, 'M1')
    x, p, lam = np.exp(z[:n]), z[n:2 * n], math.exp(z[2 * n])
    stationarity = float(np.max(np.abs(system(z)[:2 * n])))
    logger.info(f"M1 solved for nonseparable '{scenario.name}': lambda={lam:.9g}")
    return _solution(scenario, MECH_M1, x, p, lam, stationarity)


def solve_direct(scenario: Scenario, tol: float = mech_settings.DIRECT_TOL) -> MechanismSolution:
    """M1 for welfare objectives, M2 for linear global ones."""
    if scenario.objective.is_welfare:
        return solve_m1(scenario, tol)
    return solve_m2(scenario, tol)


def no_mechanism_baseline(scenario: Scenario, p=None) -> MechanismSolution:
    """Selfish equilibrium under fixed incentives (zero by default)."""
    p = np.zeros(scenario.n) if p is None else np.asarray(p, dtype=float)
    ne = solve_ne(scenario, p)
    return MechanismSolution(
        mechanism=MECH_NONE,
        x=ne.x,
        p=p,
        lambda_=0.0,
        objective_value=scenario.objective_value(ne.x),
        budget_spend=budget_spend(p, ne.x),
        budget_residual=budget_spend(p, ne.x) - scenario.budget,
        stationarity_residual=ne.residual,
    )


def misreport_gain(
    scenario: Scenario,
    i: int,
    report_scale: float,
    tol: float = mech_settings.DIRECT_TOL,
) -> MisreportResult:
    """
    Cost of player i when it reports its utility scaled by ``report_scale``.

    The designer solves the mechanism on the reported scenario; every player
    then plays the equilibrium of the true game under the resulting
    incentives. A positive advantage means misreporting pays.
    """
    if not report_scale > 0:
        raise ValueError(f"report_scale must be > 0, got {report_scale}")

    def realised_cost(reported: Scenario) -> float:
        solution = solve_direct(reported, tol)
        ne = solve_ne(scenario, solution.p)
        return player_cost(scenario, GameState(x=ne.x, p=solution.p), i)

    truthful = realised_cost(scenario)
    reported = scenario.with_utility(i, scenario.players[i].utility.scaled(report_scale))
    misreport = realised_cost(reported)
    result = MisreportResult(player=i, report_scale=report_scale, cost_truthful=truthful, cost_misreport=misreport)
    logger.info(f"Player {i} reporting x{report_scale}: advantage {result.advantage:.6g}")
    return result
