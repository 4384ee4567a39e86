"""
Domain model: utilities, players, influence structure and scenarios.

All types are frozen; scenarios are built once (usually by the scenario
service) and shared read-only by the solvers. Player indices are 0-based
everywhere in the core package.
"""
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence, Tuple
import logging
import math

import numpy as np

from incentives import settings as mech_settings
from incentives.core.constants import (
    FAMILY_LOG, FAMILY_POWER, FAMILY_QUADRATIC, UTILITY_FAMILIES,
    OBJECTIVE_WELFARE, OBJECTIVE_LINEAR_GLOBAL,
)
from incentives.core.exceptions import DomainError, MarginalRangeError, DimensionError
from incentives.core.types import DiagnosticsReport, IterationConfig, OdeConfig

logger = logging.getLogger(__name__)

X_MIN = mech_settings.X_MIN


@dataclass(frozen=True)
class UtilityFunction:
    """
    Strictly concave one-dimensional utility.

    Log:       U(x) = alpha * ln(x),           x > 0
    Power:     U(x) = alpha * x**rho,          x > 0, 0 < rho < 1
    Quadratic: U(x) = a * x - b * x**2 / 2,    0 <= x < a / b
    """
    family: str
    alpha: Optional[float] = None
    rho: Optional[float] = None
    a: Optional[float] = None
    b: Optional[float] = None

    @classmethod
    def log(cls, alpha: float) -> 'UtilityFunction':
        return cls(family=FAMILY_LOG, alpha=float(alpha))

    @classmethod
    def power(cls, alpha: float, rho: float) -> 'UtilityFunction':
        return cls(family=FAMILY_POWER, alpha=float(alpha), rho=float(rho))

    @classmethod
    def quadratic(cls, a: float, b: float) -> 'UtilityFunction':
        return cls(family=FAMILY_QUADRATIC, a=float(a), b=float(b))

    def parameter_errors(self) -> List[str]:
        """Human-readable parameter violations; empty when the utility is well formed."""
        errors = []
        if self.family not in UTILITY_FAMILIES:
            return [f"unknown utility family '{self.family}'"]
        if self.family in (FAMILY_LOG, FAMILY_POWER):
            if self.alpha is None or not self.alpha > 0:
                errors.append(f"alpha must be > 0, got {self.alpha}")
        if self.family == FAMILY_POWER:
            if self.rho is None or not 0 < self.rho < 1:
                errors.append(f"rho must lie in (0, 1), got {self.rho}")
        if self.family == FAMILY_QUADRATIC:
            if self.a is None or not self.a > 0:
                errors.append(f"a must be > 0, got {self.a}")
            if self.b is None or not self.b > 0:
                errors.append(f"b must be > 0, got {self.b}")
        return errors

    @property
    def weight(self) -> float:
        """Scale parameter: alpha for Log/Power, a for Quadratic."""
        return self.a if self.family == FAMILY_QUADRATIC else self.alpha

    @property
    def domain_upper(self) -> float:
        if self.family == FAMILY_QUADRATIC:
            return self.a / self.b
        return math.inf

    @property
    def max_marginal(self) -> float:
        """Supremum of the marginal utility over the domain."""
        if self.family == FAMILY_QUADRATIC:
            return self.a
        return math.inf

    def check_domain(self, x: float) -> None:
        if self.family == FAMILY_QUADRATIC:
            if not 0 <= x < self.domain_upper:
                raise DomainError(
                    f"x={x} outside quadratic domain [0, {self.domain_upper})",
                    bound='0 <= x < a/b',
                )
        elif not x > 0:
            raise DomainError(f"x={x} outside {self.family} domain (0, inf)", bound='x > 0')

    def value(self, x: float) -> float:
        self.check_domain(x)
        if self.family == FAMILY_LOG:
            return self.alpha * math.log(x)
        if self.family == FAMILY_POWER:
            return self.alpha * x ** self.rho
        return self.a * x - 0.5 * self.b * x * x

    def marginal(self, x: float) -> float:
        self.check_domain(x)
        if self.family == FAMILY_LOG:
            return self.alpha / x
        if self.family == FAMILY_POWER:
            return self.alpha * self.rho * x ** (self.rho - 1.0)
        return self.a - self.b * x

    def curvature(self, x: float) -> float:
        """Second derivative U''(x) (negative on the domain)."""
        self.check_domain(x)
        if self.family == FAMILY_LOG:
            return -self.alpha / (x * x)
        if self.family == FAMILY_POWER:
            return self.alpha * self.rho * (self.rho - 1.0) * x ** (self.rho - 2.0)
        return -self.b

    def inverse_marginal(self, m: float) -> float:
        if not m > 0:
            raise MarginalRangeError(
                f"marginal value {m} <= 0 has no preimage (incentive at or above unit cost)"
            )
        if m > self.max_marginal:
            raise MarginalRangeError(
                f"marginal value {m} exceeds the supremum {self.max_marginal} of the {self.family} marginal"
            )
        if self.family == FAMILY_LOG:
            return self.alpha / m
        if self.family == FAMILY_POWER:
            return (m / (self.alpha * self.rho)) ** (1.0 / (self.rho - 1.0))
        return (self.a - m) / self.b

    def scaled(self, factor: float) -> 'UtilityFunction':
        """The utility multiplied by ``factor`` (a reported exaggeration or understatement)."""
        if not factor > 0:
            raise ValueError(f"scale factor must be > 0, got {factor}")
        if self.family == FAMILY_QUADRATIC:
            return replace(self, a=self.a * factor, b=self.b * factor)
        return replace(self, alpha=self.alpha * factor)


@dataclass(frozen=True)
class PlayerSpec:
    """A unit with its utility and per-unit investment cost beta."""
    id: int
    utility: UtilityFunction
    cost_factor: float


@dataclass(frozen=True)
class InfluenceMatrix:
    """Linear influence model W: effective investments are W @ x."""
    entries: Tuple[Tuple[float, ...], ...]

    def __post_init__(self):
        object.__setattr__(self, 'entries', tuple(tuple(float(v) for v in row) for row in self.entries))

    @classmethod
    def identity(cls, n: int) -> 'InfluenceMatrix':
        return cls(entries=tuple(tuple(1.0 if i == j else 0.0 for j in range(n)) for i in range(n)))

    @classmethod
    def from_array(cls, matrix) -> 'InfluenceMatrix':
        return cls(entries=tuple(tuple(row) for row in np.asarray(matrix, dtype=float)))

    @property
    def n(self) -> int:
        return len(self.entries)

    @property
    def array(self) -> np.ndarray:
        return np.array(self.entries, dtype=float).reshape(self.n, self.n)

    @property
    def is_square(self) -> bool:
        return all(len(row) == self.n for row in self.entries)

    @property
    def is_identity(self) -> bool:
        return self.is_square and bool(np.array_equal(self.array, np.eye(self.n)))


@dataclass(frozen=True)
class DesignerObjective:
    """Welfare (sum of utilities) or linear global objective F(x) = gamma . x."""
    kind: str
    gamma: Optional[Tuple[float, ...]] = None

    def __post_init__(self):
        if self.gamma is not None:
            object.__setattr__(self, 'gamma', tuple(float(g) for g in self.gamma))

    @classmethod
    def welfare(cls) -> 'DesignerObjective':
        return cls(kind=OBJECTIVE_WELFARE)

    @classmethod
    def linear_global(cls, gamma: Sequence[float]) -> 'DesignerObjective':
        return cls(kind=OBJECTIVE_LINEAR_GLOBAL, gamma=tuple(gamma))

    @property
    def is_welfare(self) -> bool:
        return self.kind == OBJECTIVE_WELFARE

    @property
    def is_linear_global(self) -> bool:
        return self.kind == OBJECTIVE_LINEAR_GLOBAL


@dataclass(frozen=True)
class Scenario:
    """
    A complete game instance: players, influence, designer objective, budget.

    The optional run fields (initial state, iteration and ODE settings) let a
    scenario file describe a full experiment. Invariants are not enforced on
    construction; use ``validate_scenario``.
    """
    players: Tuple[PlayerSpec, ...]
    objective: DesignerObjective
    budget: float
    influence: Optional[InfluenceMatrix] = None
    success_threshold: Optional[float] = None
    name: str = 'scenario'
    initial_investment: Optional[Tuple[float, ...]] = None
    initial_incentive: Optional[Tuple[float, ...]] = None
    iteration: IterationConfig = field(default_factory=IterationConfig)
    ode: OdeConfig = field(default_factory=OdeConfig)

    def __post_init__(self):
        object.__setattr__(self, 'players', tuple(self.players))
        object.__setattr__(self, 'budget', float(self.budget))
        if self.influence is None:
            object.__setattr__(self, 'influence', InfluenceMatrix.identity(len(self.players)))
        for attr in ('initial_investment', 'initial_incentive'):
            value = getattr(self, attr)
            if value is not None:
                object.__setattr__(self, attr, tuple(float(v) for v in value))

    @property
    def n(self) -> int:
        return len(self.players)

    @property
    def utilities(self) -> List[UtilityFunction]:
        return [player.utility for player in self.players]

    @property
    def betas(self) -> np.ndarray:
        return np.array([player.cost_factor for player in self.players], dtype=float)

    @property
    def weights(self) -> np.ndarray:
        return np.array([player.utility.weight for player in self.players], dtype=float)

    @property
    def gammas(self) -> np.ndarray:
        if not self.objective.is_linear_global:
            raise ValueError(f"objective '{self.objective.kind}' carries no gamma weights")
        return np.array(self.objective.gamma, dtype=float)

    @property
    def W(self) -> np.ndarray:
        return self.influence.array

    @property
    def is_separable(self) -> bool:
        return self.influence.is_identity

    @property
    def all_log(self) -> bool:
        return all(player.utility.family == FAMILY_LOG for player in self.players)

    def x0(self) -> np.ndarray:
        """Initial investments; defaults to half of each player's unsubsidised best response."""
        if self.initial_investment is not None:
            return np.array(self.initial_investment, dtype=float)
        return np.array([
            0.5 * inverse_marginal(p.utility, p.cost_factor) if p.cost_factor < p.utility.max_marginal else X_MIN
            for p in self.players
        ])

    def p0(self) -> np.ndarray:
        if self.initial_incentive is not None:
            return np.array(self.initial_incentive, dtype=float)
        return np.zeros(self.n)

    def objective_value(self, x) -> float:
        """F(x) for a linear global objective, sum of U_i((Wx)_i) for welfare."""
        x = np.asarray(x, dtype=float)
        if self.objective.is_linear_global:
            return float(np.dot(self.gammas, x))
        xe = effective_investment(self.influence, x)
        return float(sum(u.value(v) for u, v in zip(self.utilities, xe)))

    def with_utility(self, i: int, utility: UtilityFunction) -> 'Scenario':
        players = list(self.players)
        players[i] = replace(players[i], utility=utility)
        return replace(self, players=tuple(players))

    def with_objective(self, objective: DesignerObjective) -> 'Scenario':
        return replace(self, objective=objective)


def utility_value(u: UtilityFunction, x: float) -> float:
    return u.value(x)


def marginal_utility(u: UtilityFunction, x: float) -> float:
    return u.marginal(x)


def inverse_marginal(u: UtilityFunction, m: float) -> float:
    return u.inverse_marginal(m)


def effective_investment(W, x) -> np.ndarray:
    """Return W @ x; ``W`` may be an InfluenceMatrix or an array."""
    matrix = W.array if isinstance(W, InfluenceMatrix) else np.asarray(W, dtype=float)
    x = np.asarray(x, dtype=float)
    if matrix.ndim != 2 or matrix.shape[1] != x.shape[0]:
        raise DimensionError(f"influence matrix of shape {matrix.shape} cannot act on {x.shape[0]} investments")
    if np.any(x < 0):
        raise DomainError(f"investments must be non-negative, got min {float(np.min(x)):.6g}", bound='x >= 0')
    return matrix @ x


def validate_scenario(scenario: Scenario) -> DiagnosticsReport:
    """
    Check every model invariant and record the outcome.

    The report keeps going after a failure so that all violations are listed;
    ``report.first_failure`` names the first one.
    """
    report = DiagnosticsReport()
    n = scenario.n
    report.add('players nonempty', n > 0, f"{n} players")

    bad_costs = [p.id for p in scenario.players if not p.cost_factor > 0]
    report.add('cost_factor > 0', not bad_costs,
               f"non-positive cost factor for players {bad_costs}" if bad_costs else 'all positive')

    utility_errors = [f"player {p.id}: {err}" for p in scenario.players for err in p.utility.parameter_errors()]
    report.add('utility parameters', not utility_errors, '; '.join(utility_errors) or 'all valid')

    influence = scenario.influence
    dims_ok = influence.is_square and influence.n == n
    report.add('influence dimension', dims_ok,
               f"influence is {influence.n}x{len(influence.entries[0]) if influence.entries else 0} for {n} players")
    if dims_ok and n > 0:
        W = influence.array
        bad_diag = [i for i in range(n) if W[i, i] != 1.0]
        report.add('diagonal must be 1', not bad_diag,
                   f"W_ii != 1 at rows {bad_diag}" if bad_diag else 'unit diagonal')
        off = W[~np.eye(n, dtype=bool)]
        off_ok = bool(np.all((off >= 0.0) & (off <= 1.0)))
        report.add('off-diagonal in [0, 1]', off_ok,
                   'all off-diagonal entries in [0, 1]' if off_ok else f"entries outside [0, 1]: {off[(off < 0) | (off > 1)].tolist()}")

    objective = scenario.objective
    if objective.is_linear_global:
        gamma = objective.gamma or ()
        report.add('gamma length ≠ N', len(gamma) == n, f"{len(gamma)} weights for {n} players")
        report.add('gamma > 0', all(g > 0 for g in gamma), f"gamma = {list(gamma)}")
    else:
        report.add('objective kind', objective.is_welfare, f"objective '{objective.kind}'")

    report.add('budget > 0', scenario.budget > 0, f"B = {scenario.budget}")

    for attr in ('initial_investment', 'initial_incentive'):
        value = getattr(scenario, attr)
        if value is not None:
            report.add(f"{attr} dimension", len(value) == n, f"{len(value)} entries for {n} players")

    if not report.passed:
        logger.info(f"Scenario '{scenario.name}' failed validation: {report.first_failure.name}")
    return report
