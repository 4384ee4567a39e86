"""
The investment game: player costs, best responses, Nash equilibria and the
diagonal-strict-concavity diagnostics.

Player i pays J_i(x) = beta_i x_i - U_i((Wx)_i) - p_i x_i.
"""
from typing import Iterable, List, Optional, Tuple
import logging

import numpy as np
from scipy.stats import qmc

from incentives import settings as mech_settings
from incentives.core.constants import FD_STEP_JACOBIAN
from incentives.core.exceptions import (
    ConvergenceError, DimensionError, DomainError, MarginalRangeError, NumericalError,
)
from incentives.core.model import Scenario, X_MIN, effective_investment
from incentives.core.types import DiagnosticsReport, GameState, NashEquilibrium, NeSolveConfig

logger = logging.getLogger(__name__)

VERDICT_PD = 'PD at all samples'
VERDICT_PSD = 'inconclusive (PSD, not PD)'
VERDICT_INDEFINITE = 'indefinite at sample {k}'


def _check_dims(scenario: Scenario, state: GameState) -> None:
    if state.x.size != scenario.n:
        raise DimensionError(f"state has {state.x.size} players, scenario has {scenario.n}")


def player_cost(scenario: Scenario, state: GameState, i: int) -> float:
    _check_dims(scenario, state)
    xe = effective_investment(scenario.influence, state.x)
    player = scenario.players[i]
    return float(
        player.cost_factor * state.x[i] - player.utility.value(xe[i]) - state.p[i] * state.x[i]
    )


def budget_spend(p, x) -> float:
    """Designer outlay sum_i p_i x_i."""
    p = np.asarray(p, dtype=float)
    x = np.asarray(x, dtype=float)
    if p.shape != x.shape:
        raise DimensionError(f"incentive and investment lengths differ: {p.size} vs {x.size}")
    return float(np.dot(p, x))


def player_costs(scenario: Scenario, x, p) -> np.ndarray:
    state = GameState(x=x, p=p)
    return np.array([player_cost(scenario, state, i) for i in range(scenario.n)])


def best_response_target(scenario: Scenario, p_i: float, i: int) -> float:
    """Effective investment at which player i's marginal utility equals beta_i - p_i."""
    player = scenario.players[i]
    margin = player.cost_factor - p_i
    if not margin > 0:
        raise MarginalRangeError(
            f"player {i}: incentive {p_i} >= cost factor {player.cost_factor}, demand is unbounded"
        )
    if margin >= player.utility.max_marginal:
        return 0.0
    return player.utility.inverse_marginal(margin)


def best_response(scenario: Scenario, state: GameState, i: int) -> float:
    """Cost-minimising x_i given the other players' investments."""
    _check_dims(scenario, state)
    target = best_response_target(scenario, state.p[i], i)
    row = scenario.W[i]
    spillover = float(np.dot(row, state.x) - row[i] * state.x[i])
    return max(X_MIN, target - spillover)


def best_responses(scenario: Scenario, x, p) -> np.ndarray:
    """Simultaneous best responses of every player to ``x``."""
    state = GameState(x=x, p=p)
    return np.array([best_response(scenario, state, i) for i in range(scenario.n)])


def pseudo_gradient(scenario: Scenario, state: GameState) -> np.ndarray:
    """g_i = dJ_i/dx_i = beta_i - p_i - U_i'((Wx)_i)."""
    _check_dims(scenario, state)
    xe = effective_investment(scenario.influence, state.x)
    marginals = np.array([u.marginal(v) for u, v in zip(scenario.utilities, xe)])
    return scenario.betas - state.p - marginals


def _equilibrium_residual(scenario: Scenario, x: np.ndarray, p: np.ndarray, br: np.ndarray) -> Tuple[float, List[int]]:
    """Sup-norm of the best-response gap and of the pseudo-gradient of unclamped players."""
    clamped = [i for i in range(scenario.n) if br[i] <= X_MIN]
    residual = float(np.max(np.abs(br - x)))
    free = [i for i in range(scenario.n) if i not in clamped]
    if free:
        try:
            g = pseudo_gradient(scenario, GameState(x=x, p=p))
            residual = max(residual, float(np.max(np.abs(g[free]))))
        except DomainError:
            residual = np.inf
    return residual, clamped


def solve_ne(scenario: Scenario, p, cfg: Optional[NeSolveConfig] = None, x0=None) -> NashEquilibrium:
    """
    Nash equilibrium under fixed incentives ``p``.

    Damped simultaneous best response x <- (1 - d) x + d BR(x). Separable
    scenarios decouple, so a single sweep is exact.
    """
    cfg = cfg or NeSolveConfig()
    p = np.asarray(p, dtype=float)
    if p.size != scenario.n:
        raise DimensionError(f"{p.size} incentives for {scenario.n} players")
    margins = scenario.betas - p
    if np.any(margins <= 0):
        bad = np.flatnonzero(margins <= 0).tolist()
        raise MarginalRangeError(f"incentives at or above cost factor for players {bad}")

    if scenario.is_separable:
        x = best_responses(scenario, np.zeros(scenario.n), p)
        residual, clamped = _equilibrium_residual(scenario, x, p, x)
        if clamped:
            logger.warning(f"Players {clamped} clamped to x_min={X_MIN} at the equilibrium")
        return NashEquilibrium(x=x, residual=residual, iterations=1, clamped=clamped)

    x = np.array(x0, dtype=float) if x0 is not None else best_responses(scenario, np.zeros(scenario.n), p)
    residual = np.inf
    for iteration in range(1, cfg.max_iters + 1):
        br = best_responses(scenario, x, p)
        residual, clamped = _equilibrium_residual(scenario, x, p, br)
        if residual < cfg.tol:
            if clamped:
                logger.warning(f"Players {clamped} clamped to x_min={X_MIN} at the equilibrium")
            logger.debug(f"Best-response iteration converged after {iteration} sweeps (residual {residual:.3e})")
            return NashEquilibrium(x=x, residual=residual, iterations=iteration, clamped=clamped)
        x = (1.0 - cfg.damping) * x + cfg.damping * br

    logger.error(f"Best-response iteration did not converge in {cfg.max_iters} sweeps (residual {residual:.3e})")
    raise ConvergenceError(
        f"no equilibrium within {cfg.max_iters} best-response sweeps", residual=residual
    )


def jacobian_G(scenario: Scenario, state: GameState, method: str = 'auto') -> np.ndarray:
    """
    Jacobian of the pseudo-gradient, G_ij = -U_i''((Wx)_i) W_ij.

    ``method``: 'analytic', 'fd' (central differences of the pseudo-gradient)
    or 'auto' (analytic for all-Log scenarios, finite differences otherwise).
    """
    if method not in ('auto', 'analytic', 'fd'):
        raise ValueError(f"unknown jacobian method '{method}'")
    if method == 'auto':
        method = 'analytic' if scenario.all_log else 'fd'

    _check_dims(scenario, state)
    W = scenario.W
    if method == 'analytic':
        xe = effective_investment(scenario.influence, state.x)
        curvatures = np.array([u.curvature(v) for u, v in zip(scenario.utilities, xe)])
        return -curvatures[:, None] * W

    n = scenario.n
    G = np.empty((n, n))
    h = FD_STEP_JACOBIAN
    for j in range(n):
        step = np.zeros(n)
        step[j] = h
        g_plus = pseudo_gradient(scenario, GameState(x=state.x + step, p=state.p))
        g_minus = pseudo_gradient(scenario, GameState(x=state.x - step, p=state.p))
        G[:, j] = (g_plus - g_minus) / (2.0 * h)
    return G


def constraint_box(scenario: Scenario) -> Tuple[np.ndarray, np.ndarray]:
    """
    Box [lo, hi] standing in for the strategy set X.

    hi = 10 * max_i inverse_marginal(u_i, 0.01 beta_i), capped inside each
    player's utility domain; lo = 1e-3 * hi.
    """
    reach = []
    for player in scenario.players:
        margin = 0.01 * player.cost_factor
        if margin < player.utility.max_marginal:
            reach.append(player.utility.inverse_marginal(margin))
    x_max = 10.0 * max(reach) if reach else 1.0
    hi = np.array([min(x_max, 0.999 * p.utility.domain_upper) for p in scenario.players])
    lo = 1e-3 * hi
    return lo, hi


def sample_states(scenario: Scenario, count: int, seed: int = mech_settings.UNIQUENESS_SEED) -> List[GameState]:
    """Latin-hypercube sample of interior investments (p = 0)."""
    if count <= 0:
        return []
    lo, hi = constraint_box(scenario)
    sampler = qmc.LatinHypercube(d=scenario.n, seed=seed)
    points = qmc.scale(sampler.random(n=count), lo, hi)
    return [GameState(x=point, p=np.zeros(scenario.n)) for point in points]


def check_uniqueness(
    scenario: Scenario,
    state_samples: Optional[Iterable[GameState]] = None,
    n_samples: int = mech_settings.UNIQUENESS_SAMPLES,
    seed: int = mech_settings.UNIQUENESS_SEED,
    tol: float = mech_settings.PD_TOLERANCE,
    method: str = 'auto',
) -> DiagnosticsReport:
    """
    Test positive definiteness of G(x) + G(x)^T over sampled states.

    Caller samples come first, followed by ``n_samples`` Latin-hypercube
    points of the constraint box. Samples outside a utility domain are
    skipped and counted. A PD verdict is evidence of a unique equilibrium,
    not a proof.
    """
    report = DiagnosticsReport()
    lo, hi = constraint_box(scenario)
    box_ok = bool(np.all(np.isfinite(hi)) and np.all(lo < hi) and np.all(lo >= 0))
    report.add('constraint set bounded with nonempty interior', box_ok,
               f"box lo={lo.tolist()} hi={hi.tolist()}")

    samples = list(state_samples or []) + sample_states(scenario, n_samples, seed)
    min_eigenvalue = np.inf
    first_indefinite = None
    any_boundary = False
    for k, state in enumerate(samples):
        try:
            G = jacobian_G(scenario, state, method=method)
        except DomainError:
            report.samples_skipped += 1
            continue
        try:
            eigenvalues = np.linalg.eigvalsh(G + G.T)
        except np.linalg.LinAlgError as exc:
            raise NumericalError(f"eigensolve failed at sample {k}: {exc}") from exc
        if not np.all(np.isfinite(eigenvalues)):
            raise NumericalError(f"non-finite eigenvalues at sample {k}")
        report.samples_checked += 1
        smallest = float(eigenvalues[0])
        if smallest < min_eigenvalue:
            min_eigenvalue = smallest
        if smallest < -tol and first_indefinite is None:
            first_indefinite = (k, smallest)
        elif abs(smallest) <= tol:
            any_boundary = True

    if report.samples_checked == 0:
        report.add('G + G^T positive definite', False, 'no sample inside the utility domains')
        report.jacobian_verdict = 'no usable samples'
        return report

    if first_indefinite is not None:
        verdict = VERDICT_INDEFINITE.format(k=first_indefinite[0])
        message = f"{verdict}: eigenvalue {first_indefinite[1]:.6g}"
    elif any_boundary:
        verdict = VERDICT_PSD
        message = f"{verdict}: min eigenvalue {min_eigenvalue:.3e}"
    else:
        verdict = VERDICT_PD
        message = f"{verdict} ({report.samples_checked} checked), min eigenvalue {min_eigenvalue:.6g}"
    report.jacobian_verdict = verdict
    report.min_eigenvalue = float(min_eigenvalue)
    report.add('G + G^T positive definite', verdict == VERDICT_PD, message, value=float(min_eigenvalue))
    logger.info(f"Uniqueness check for '{scenario.name}': {message}")
    return report
