"""
Core data types for the incentives app.

Configuration objects validate themselves on construction; result objects are
plain containers produced by the solvers.
"""
from dataclasses import dataclass, field, asdict
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from incentives import settings as mech_settings


def as_vector(values, name: str = 'vector') -> np.ndarray:
    """Return a 1-D float array copy of ``values``."""
    arr = np.array(values, dtype=float)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {arr.shape}")
    return arr


# --- Diagnostics ---

@dataclass
class DiagnosticCheck:
    """One pass/fail entry of a diagnostics report."""
    name: str
    passed: bool
    message: str = ''
    value: Optional[float] = None


@dataclass
class DiagnosticsReport:
    """
    Outcome of scenario validation and equilibrium diagnostics.

    Violations are recorded as failed checks rather than raised.
    """
    checks: List[DiagnosticCheck] = field(default_factory=list)
    pseudo_gradient_norm: Optional[float] = None
    jacobian_verdict: Optional[str] = None
    min_eigenvalue: Optional[float] = None
    samples_checked: int = 0
    samples_skipped: int = 0
    clamped_players: List[int] = field(default_factory=list)

    def add(self, name: str, passed: bool, message: str = '', value: Optional[float] = None) -> DiagnosticCheck:
        check = DiagnosticCheck(name=name, passed=bool(passed), message=message, value=value)
        self.checks.append(check)
        return check

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    @property
    def first_failure(self) -> Optional[DiagnosticCheck]:
        return next((check for check in self.checks if not check.passed), None)

    def merge(self, other: 'DiagnosticsReport') -> 'DiagnosticsReport':
        """Append the checks of ``other`` and adopt any diagnostics it carries."""
        self.checks.extend(other.checks)
        for attr in ('pseudo_gradient_norm', 'jacobian_verdict', 'min_eigenvalue'):
            if getattr(other, attr) is not None:
                setattr(self, attr, getattr(other, attr))
        self.samples_checked += other.samples_checked
        self.samples_skipped += other.samples_skipped
        self.clamped_players.extend(other.clamped_players)
        return self

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data['passed'] = self.passed
        return data


# --- Game ---

@dataclass(frozen=True)
class GameState:
    """Investments x and incentive factors p (negative p is a penalty)."""
    x: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, 'x', as_vector(self.x, 'x'))
        object.__setattr__(self, 'p', as_vector(self.p, 'p'))
        if self.x.shape != self.p.shape:
            raise ValueError(f"x and p lengths differ: {self.x.size} vs {self.p.size}")


@dataclass(frozen=True)
class NeSolveConfig:
    """Damped simultaneous best-response settings."""
    max_iters: int = mech_settings.NE_MAX_ITERS
    tol: float = mech_settings.NE_TOL
    damping: float = mech_settings.NE_DAMPING

    def __post_init__(self):
        if self.tol <= 0:
            raise ValueError(f"tol must be > 0, got {self.tol}")
        if not 0 < self.damping < 1:
            raise ValueError(f"damping must lie in (0, 1), got {self.damping}")
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be >= 1, got {self.max_iters}")


@dataclass
class NashEquilibrium:
    """Result of the equilibrium solver."""
    x: np.ndarray
    residual: float
    iterations: int
    clamped: List[int] = field(default_factory=list)


# --- Direct mechanisms ---

@dataclass
class MechanismSolution:
    """Solution (x, p, lambda) of a direct mechanism."""
    mechanism: str
    x: np.ndarray
    p: np.ndarray
    lambda_: float
    objective_value: float
    budget_spend: float
    budget_residual: float = 0.0
    stationarity_residual: float = 0.0

    def to_dict(self) -> Dict[str, Any]:
        return {
            'mechanism': self.mechanism,
            'x': self.x.tolist(),
            'p': self.p.tolist(),
            'lambda': self.lambda_,
            'objective': self.objective_value,
            'spend': self.budget_spend,
            'budget_residual': self.budget_residual,
            'stationarity_residual': self.stationarity_residual,
        }


@dataclass
class MisreportResult:
    """Realised cost of one player when reporting truthfully versus scaled."""
    player: int
    report_scale: float
    cost_truthful: float
    cost_misreport: float

    @property
    def advantage(self) -> float:
        return self.cost_truthful - self.cost_misreport

    def to_dict(self) -> Dict[str, Any]:
        return {
            'player': self.player,
            'report_scale': self.report_scale,
            'cost_truthful': self.cost_truthful,
            'cost_misreport': self.cost_misreport,
            'advantage': self.advantage,
        }


# --- Iterative mechanisms ---

@dataclass(frozen=True)
class IterationConfig:
    """Designer step size, player relaxation and stopping rules."""
    kappa_d: float = mech_settings.KAPPA_D
    phi: float = mech_settings.PHI
    lambda_init: Optional[float] = None
    lambda_min: float = mech_settings.LAMBDA_MIN
    p_cap_fraction: float = mech_settings.P_CAP_FRACTION
    max_iters: int = mech_settings.ITER_MAX_ITERS
    conv_tol: float = mech_settings.ITER_CONV_TOL
    literal_projection: bool = False
    simultaneous: bool = False
    fail_on_max_iters: bool = False

    def __post_init__(self):
        if self.kappa_d <= 0:
            raise ValueError(f"kappa_d must be > 0, got {self.kappa_d}")
        if not 0 < self.phi < 1:
            raise ValueError(f"phi must lie in (0, 1), got {self.phi}")
        if self.lambda_min <= 0:
            raise ValueError(f"lambda_min must be > 0, got {self.lambda_min}")
        if self.lambda_init is not None and self.lambda_init <= 0:
            raise ValueError(f"lambda_init must be > 0, got {self.lambda_init}")
        if not 0 < self.p_cap_fraction < 1:
            raise ValueError(f"p_cap_fraction must lie in (0, 1), got {self.p_cap_fraction}")
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be >= 1, got {self.max_iters}")
        if self.conv_tol <= 0:
            raise ValueError(f"conv_tol must be > 0, got {self.conv_tol}")


@dataclass
class StepRecord:
    """State of the designer-player loop after iteration n."""
    n: int
    x: np.ndarray
    p: np.ndarray
    lambda_: float
    budget_spend: float
    objective: float
    player_costs: np.ndarray


@dataclass
class Trajectory:
    """Ordered iteration records of one mechanism run."""
    scenario_id: str
    mechanism: str
    config: IterationConfig
    steps: List[StepRecord] = field(default_factory=list)
    converged_at: Optional[int] = None

    @property
    def final(self) -> StepRecord:
        return self.steps[-1]

    @property
    def converged(self) -> bool:
        return self.converged_at is not None


@dataclass
class ProbeRecord:
    """
    Instantaneous costs of an honest versus a deviated action at step n.

    A deviated cost is NaN when the shifted action is not positive; the matching
    ``*_in_domain`` flag is then False.
    """
    n: int
    cost_honest: float
    cost_deviated: float
    cost_target: float
    cost_target_deviated: float
    honest_in_domain: bool = True
    target_in_domain: bool = True


# --- Continuous-time dynamics ---

@dataclass(frozen=True)
class OdeState:
    """State (x, lambda) of the continuous-time approximation."""
    x: np.ndarray
    lambda_: float

    def __post_init__(self):
        object.__setattr__(self, 'x', as_vector(self.x, 'x'))
        object.__setattr__(self, 'lambda_', float(self.lambda_))

    def as_array(self) -> np.ndarray:
        return np.append(self.x, self.lambda_)

    @classmethod
    def from_array(cls, values: np.ndarray) -> 'OdeState':
        return cls(x=values[:-1], lambda_=values[-1])


@dataclass(frozen=True)
class OdeConfig:
    """Step-size constants and fixed-step integration settings."""
    kappa_lambda: float = mech_settings.ODE_KAPPA_LAMBDA
    kappa_i: Optional[Tuple[float, ...]] = None  # None means 1 for every player
    dt: float = mech_settings.ODE_DT
    t_end: float = mech_settings.ODE_T_END
    record_every: int = mech_settings.ODE_RECORD_EVERY

    def __post_init__(self):
        if self.kappa_i is not None:
            object.__setattr__(self, 'kappa_i', tuple(float(k) for k in self.kappa_i))
            if any(k <= 0 for k in self.kappa_i):
                raise ValueError("kappa_i entries must be > 0")
        if self.kappa_lambda <= 0:
            raise ValueError(f"kappa_lambda must be > 0, got {self.kappa_lambda}")
        if self.dt <= 0:
            raise ValueError(f"dt must be > 0, got {self.dt}")
        if self.t_end < 0:
            raise ValueError(f"t_end must be >= 0, got {self.t_end}")
        if self.record_every < 1:
            raise ValueError(f"record_every must be >= 1, got {self.record_every}")

    def player_gains(self, n: int) -> np.ndarray:
        if self.kappa_i is None:
            return np.ones(n)
        if len(self.kappa_i) != n:
            raise ValueError(f"kappa_i has {len(self.kappa_i)} entries for {n} players")
        return np.array(self.kappa_i, dtype=float)


@dataclass
class OdeTrajectory:
    """Time-stamped states of an integration run."""
    mechanism: str
    config: OdeConfig
    times: List[float] = field(default_factory=list)
    states: List[OdeState] = field(default_factory=list)

    def append(self, t: float, state: OdeState) -> None:
        self.times.append(t)
        self.states.append(state)

    @property
    def final(self) -> OdeState:
        return self.states[-1]


@dataclass
class ExponentialFit:
    """Fitted envelope ||x(t) - x*|| ~ alpha ||x(0) - x*|| exp(-beta t)."""
    alpha: float
    beta: float
    r2: float
    samples: int = 0

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)
