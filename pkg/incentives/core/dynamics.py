"""
Continuous-time approximations of the iterative mechanisms.

Both systems assume Log utilities and no spillovers (W = I). With the spend
residual r = sum_i p_i x_i - B the dual variable moves on a log scale:

    IM2:  p = gamma / lambda,       lambda' = k_lambda * lambda * r
    IM1:  p = beta / (1 + lambda),  lambda' = k_lambda * (1 + lambda) * r
    both: x_i' = k_i * (alpha_i / x_i + p_i - beta_i)

V = r**2 / 2 + sum_i (alpha_i / x_i + p_i - beta_i)**2 / 2 then decreases
strictly along trajectories (for k_i = k_lambda) and vanishes exactly at the
direct-mechanism solution.
"""
from typing import Callable, Dict, Optional, Tuple
import logging
import math

import numpy as np
from scipy import stats

from incentives import settings as mech_settings
from incentives.core.constants import (
    FIT_MAX_FRACTION, FIT_MIN_DISTANCE, FIT_MIN_SAMPLES, MECH_IM1, MECH_IM2,
)
from incentives.core.direct import solve_m1, solve_m2
from incentives.core.exceptions import (
    InsufficientDataError, IntegrationError, NumericalError, UnsupportedModelError,
)
from incentives.core.model import Scenario, X_MIN
from incentives.core.types import ExponentialFit, OdeConfig, OdeState, OdeTrajectory

logger = logging.getLogger(__name__)


def _require_log_separable(scenario: Scenario, objective_ok: bool, label: str) -> None:
    if not scenario.all_log:
        raise UnsupportedModelError(f"{label} dynamics require Log utilities")
    if not objective_ok:
        raise UnsupportedModelError(f"{label} dynamics require a {'linear_global' if label == 'IM2' else 'welfare'} objective")
    if not scenario.is_separable:
        raise UnsupportedModelError(f"{label} dynamics require W = identity")


def _im2_terms(scenario: Scenario, st: OdeState) -> Tuple[np.ndarray, float, np.ndarray]:
    _require_log_separable(scenario, scenario.objective.is_linear_global, 'IM2')
    p = scenario.gammas / st.lambda_
    residual = float(np.dot(p, st.x)) - scenario.budget
    gaps = scenario.weights / st.x + p - scenario.betas
    return p, residual, gaps


def _im1_terms(scenario: Scenario, st: OdeState) -> Tuple[np.ndarray, float, np.ndarray]:
    _require_log_separable(scenario, scenario.objective.is_welfare, 'IM1')
    p = scenario.betas / (1.0 + st.lambda_)
    residual = float(np.dot(p, st.x)) - scenario.budget
    gaps = scenario.weights / st.x + p - scenario.betas
    return p, residual, gaps


def ode_rhs_im2(scenario: Scenario, st: OdeState, cfg: Optional[OdeConfig] = None) -> OdeState:
    """Time derivative (x', lambda') of the IM2 system."""
    cfg = cfg or scenario.ode
    _, residual, gaps = _im2_terms(scenario, st)
    return OdeState(
        x=cfg.player_gains(scenario.n) * gaps,
        lambda_=cfg.kappa_lambda * st.lambda_ * residual,
    )


def ode_rhs_im1(scenario: Scenario, st: OdeState, cfg: Optional[OdeConfig] = None) -> OdeState:
    """Time derivative (x', lambda') of the IM1 system."""
    cfg = cfg or scenario.ode
    _, residual, gaps = _im1_terms(scenario, st)
    return OdeState(
        x=cfg.player_gains(scenario.n) * gaps,
        lambda_=cfg.kappa_lambda * (1.0 + st.lambda_) * residual,
    )


def lyapunov_im2(scenario: Scenario, st: OdeState) -> float:
    _, residual, gaps = _im2_terms(scenario, st)
    return 0.5 * residual ** 2 + 0.5 * float(np.dot(gaps, gaps))


def lyapunov_im1(scenario: Scenario, st: OdeState) -> float:
    _, residual, gaps = _im1_terms(scenario, st)
    return 0.5 * residual ** 2 + 0.5 * float(np.dot(gaps, gaps))


RHS: Dict[str, Callable[..., OdeState]] = {MECH_IM1: ode_rhs_im1, MECH_IM2: ode_rhs_im2}
LYAPUNOV: Dict[str, Callable[[Scenario, OdeState], float]] = {MECH_IM1: lyapunov_im1, MECH_IM2: lyapunov_im2}


def _lookup(table: Dict, rhs: str):
    try:
        return table[rhs]
    except KeyError:
        raise ValueError(f"no continuous-time system for mechanism '{rhs}'") from None


def lyapunov(scenario: Scenario, rhs: str, st: OdeState) -> float:
    return _lookup(LYAPUNOV, rhs)(scenario, st)


def equilibrium_state(scenario: Scenario, rhs: str) -> OdeState:
    """Rest point of the system: the matching direct-mechanism solution."""
    solver = solve_m2 if _lookup(RHS, rhs) is ode_rhs_im2 else solve_m1
    solution = solver(scenario)
    return OdeState(x=solution.x, lambda_=solution.lambda_)


def _rk4_step(f: Callable[[np.ndarray], np.ndarray], y: np.ndarray, dt: float) -> np.ndarray:
    k1 = f(y)
    k2 = f(y + 0.5 * dt * k1)
    k3 = f(y + 0.5 * dt * k2)
    k4 = f(y + dt * k3)
    return y + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def integrate(scenario: Scenario, rhs: str, init: OdeState, cfg: Optional[OdeConfig] = None) -> OdeTrajectory:
    """
    Classical fixed-step RK4 from ``init`` to ``cfg.t_end``.

    States are recorded every ``record_every`` steps and at the end. Leaving
    the interior (x_i <= x_min or lambda <= lambda_min) aborts.
    """
    cfg = cfg or scenario.ode
    derivative = _lookup(RHS, rhs)
    lambda_min = mech_settings.LAMBDA_MIN

    def f(y: np.ndarray) -> np.ndarray:
        return derivative(scenario, OdeState.from_array(y), cfg).as_array()

    y = init.as_array()
    if np.any(init.x <= X_MIN) or init.lambda_ <= lambda_min:
        raise IntegrationError("initial state is not interior", t=0.0)
    n_steps = int(round(cfg.t_end / cfg.dt))
    trajectory = OdeTrajectory(mechanism=rhs, config=cfg)
    trajectory.append(0.0, init)
    logger.info(f"Integrating {rhs} dynamics for '{scenario.name}': {n_steps} steps of dt={cfg.dt}")

    with np.errstate(over='raise', invalid='raise', divide='raise'):
        for k in range(1, n_steps + 1):
            t = k * cfg.dt
            try:
                y = _rk4_step(f, y, cfg.dt)
            except FloatingPointError as exc:
                raise NumericalError(f"floating-point failure at t={t:.6g}: {exc}") from exc
            if not np.all(np.isfinite(y)):
                raise NumericalError(f"non-finite state at t={t:.6g}")
            if np.any(y[:-1] <= X_MIN) or y[-1] <= lambda_min:
                logger.error(f"Trajectory left the interior at t={t:.6g}")
                raise IntegrationError(f"state left the interior at t={t:.6g}", t=t)
            if k % cfg.record_every == 0 or k == n_steps:
                trajectory.append(t, OdeState.from_array(y))
    return trajectory


def self_convergence_order(scenario: Scenario, rhs: str, init: OdeState, cfg: Optional[OdeConfig] = None) -> float:
    """Observed order from terminal states at dt, dt/2 and dt/4."""
    cfg = cfg or scenario.ode
    terminals = []
    for factor in (1, 2, 4):
        run_cfg = OdeConfig(
            kappa_lambda=cfg.kappa_lambda, kappa_i=cfg.kappa_i, dt=cfg.dt / factor,
            t_end=cfg.t_end, record_every=max(1, int(round(cfg.t_end / cfg.dt)) * factor),
        )
        terminals.append(integrate(scenario, rhs, init, run_cfg).final.as_array())
    coarse = np.linalg.norm(terminals[0] - terminals[1])
    fine = np.linalg.norm(terminals[1] - terminals[2])
    if fine == 0.0:
        raise NumericalError("terminal states identical under step halving; order undefined")
    return math.log2(coarse / fine)


def fit_exponential_rate(traj: OdeTrajectory, target: OdeState) -> ExponentialFit:
    """
    Fit ||x(t) - x*|| ~ alpha ||x(0) - x*|| exp(-beta t) by least squares on
    the log distance, using samples between 1e-8 and half the initial distance.
    """
    times = np.asarray(traj.times, dtype=float)
    distances = np.array([np.linalg.norm(state.x - target.x) for state in traj.states])
    initial = float(distances[0])
    if not distances[-1] < initial:
        raise ValueError("trajectory does not approach the target")
    window = (distances >= FIT_MIN_DISTANCE) & (distances <= FIT_MAX_FRACTION * initial)
    samples = int(np.count_nonzero(window))
    if samples < FIT_MIN_SAMPLES:
        raise InsufficientDataError(f"only {samples} samples inside the fit window, need {FIT_MIN_SAMPLES}")
    fit = stats.linregress(times[window], np.log(distances[window]))
    result = ExponentialFit(
        alpha=math.exp(fit.intercept) / initial,
        beta=-fit.slope,
        r2=fit.rvalue ** 2,
        samples=samples,
    )
    logger.info(f"Exponential fit over {samples} samples: beta={result.beta:.6g}, r2={result.r2:.6f}")
    return result
