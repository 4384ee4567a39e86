"""
Serializers for scenario documents.

A scenario file is a JSON object; these serializers validate its structure
and convert between the document and the immutable core types. Model
invariants (unit diagonal, gamma length, ...) are checked afterwards by
``validate_scenario`` so that every violation is named consistently.
"""
import logging
from typing import Any, Dict

from rest_framework import serializers

from incentives.core.constants import (
    FAMILY_LOG, FAMILY_POWER, FAMILY_QUADRATIC, UTILITY_FAMILIES,
    OBJECTIVE_KINDS, OBJECTIVE_LINEAR_GLOBAL,
)
from incentives.core.model import (
    DesignerObjective, InfluenceMatrix, PlayerSpec, Scenario, UtilityFunction,
)
from incentives.core.types import IterationConfig, OdeConfig

logger = logging.getLogger(__name__)

_FAMILY_PARAMETERS = {
    FAMILY_LOG: ('alpha',),
    FAMILY_POWER: ('alpha', 'rho'),
    FAMILY_QUADRATIC: ('a', 'b'),
}


class UtilitySerializer(serializers.Serializer):
    """Tagged utility record: the family decides which parameters are required."""
    family = serializers.ChoiceField(choices=UTILITY_FAMILIES, help_text="Utility family: 'log', 'power' or 'quadratic'.")
    alpha = serializers.FloatField(required=False, help_text="Weight alpha (log and power families).")
    rho = serializers.FloatField(required=False, help_text="Exponent rho in (0, 1) (power family).")
    a = serializers.FloatField(required=False, help_text="Slope a (quadratic family).")
    b = serializers.FloatField(required=False, help_text="Curvature b (quadratic family).")

    def validate(self, data):
        required = _FAMILY_PARAMETERS[data['family']]
        missing = [name for name in required if name not in data]
        if missing:
            raise serializers.ValidationError(
                {name: f"required for the {data['family']} family" for name in missing}
            )
        extra = [name for name in ('alpha', 'rho', 'a', 'b') if name in data and name not in required]
        if extra:
            raise serializers.ValidationError(
                {name: f"not a parameter of the {data['family']} family" for name in extra}
            )
        return data


class PlayerSerializer(serializers.Serializer):
    """A player: either a Log weight ``alpha`` or a full ``utility`` record, plus ``beta``."""
    alpha = serializers.FloatField(required=False, help_text="Shorthand for a log utility with this weight.")
    utility = UtilitySerializer(required=False)
    beta = serializers.FloatField(help_text="Cost per unit of investment.")

    def validate(self, data):
        if ('alpha' in data) == ('utility' in data):
            raise serializers.ValidationError({'utility': "give exactly one of 'alpha' or 'utility'"})
        return data


class ObjectiveSerializer(serializers.Serializer):
    kind = serializers.ChoiceField(choices=OBJECTIVE_KINDS, help_text="'welfare' or 'linear_global'.")
    gamma = serializers.ListField(child=serializers.FloatField(), required=False,
                                  help_text="Weights of F(x) = sum gamma_i x_i (linear_global only).")

    def validate(self, data):
        if data['kind'] == OBJECTIVE_LINEAR_GLOBAL and 'gamma' not in data:
            raise serializers.ValidationError({'gamma': 'required for a linear_global objective'})
        if data['kind'] != OBJECTIVE_LINEAR_GLOBAL and 'gamma' in data:
            raise serializers.ValidationError({'gamma': 'only allowed for a linear_global objective'})
        return data


class IterationConfigSerializer(serializers.Serializer):
    """Overrides for the iterative mechanisms; omitted keys keep their defaults."""
    kappa_d = serializers.FloatField(required=False)
    phi = serializers.FloatField(required=False)
    lambda_init = serializers.FloatField(required=False, allow_null=True)
    lambda_min = serializers.FloatField(required=False)
    p_cap_fraction = serializers.FloatField(required=False)
    max_iters = serializers.IntegerField(required=False)
    conv_tol = serializers.FloatField(required=False)
    literal_projection = serializers.BooleanField(required=False)
    simultaneous = serializers.BooleanField(required=False)
    fail_on_max_iters = serializers.BooleanField(required=False)

    def validate(self, data):
        try:
            IterationConfig(**data)
        except ValueError as exc:
            raise serializers.ValidationError(str(exc))
        return data


class OdeConfigSerializer(serializers.Serializer):
    """Overrides for the continuous-time integration."""
    kappa_lambda = serializers.FloatField(required=False)
    kappa_i = serializers.ListField(child=serializers.FloatField(), required=False, allow_null=True)
    dt = serializers.FloatField(required=False)
    t_end = serializers.FloatField(required=False)
    record_every = serializers.IntegerField(required=False)

    def validate(self, data):
        try:
            OdeConfig(**data)
        except ValueError as exc:
            raise serializers.ValidationError(str(exc))
        return data


class ScenarioSerializer(serializers.Serializer):
    """Top-level scenario document."""
    name = serializers.CharField(max_length=200, required=False, default='scenario')
    players = PlayerSerializer(many=True, allow_empty=True)
    influence = serializers.ListField(
        child=serializers.ListField(child=serializers.FloatField()),
        required=False, allow_null=True,
        help_text="Row-major N x N influence matrix; identity when omitted.",
    )
    objective = ObjectiveSerializer()
    budget = serializers.FloatField(help_text="Designer budget B.")
    success_threshold = serializers.FloatField(required=False, allow_null=True)
    initial_investment = serializers.ListField(child=serializers.FloatField(), required=False, allow_null=True)
    initial_incentive = serializers.ListField(child=serializers.FloatField(), required=False, allow_null=True)
    iteration = IterationConfigSerializer(required=False)
    ode = OdeConfigSerializer(required=False)

    def to_scenario(self) -> Scenario:
        """Build the core Scenario from ``validated_data``."""
        data = self.validated_data
        players = []
        for index, player in enumerate(data['players']):
            if 'utility' in player:
                params = dict(player['utility'])
                utility = UtilityFunction(**params)
            else:
                utility = UtilityFunction.log(player['alpha'])
            players.append(PlayerSpec(id=index, utility=utility, cost_factor=player['beta']))

        objective_data = data['objective']
        objective = DesignerObjective(kind=objective_data['kind'], gamma=objective_data.get('gamma'))
        influence = data.get('influence')
        ode_data = dict(data.get('ode', {}))
        if ode_data.get('kappa_i') is not None:
            ode_data['kappa_i'] = tuple(ode_data['kappa_i'])
        return Scenario(
            players=tuple(players),
            objective=objective,
            budget=data['budget'],
            influence=InfluenceMatrix(entries=influence) if influence is not None else None,
            success_threshold=data.get('success_threshold'),
            name=data.get('name', 'scenario'),
            initial_investment=data.get('initial_investment'),
            initial_incentive=data.get('initial_incentive'),
            iteration=IterationConfig(**data.get('iteration', {})),
            ode=OdeConfig(**ode_data),
        )


def _utility_document(utility: UtilityFunction) -> Dict[str, Any]:
    document = {'family': utility.family}
    for name in _FAMILY_PARAMETERS.get(utility.family, ()):
        document[name] = getattr(utility, name)
    return document


def scenario_to_document(scenario: Scenario) -> Dict[str, Any]:
    """Canonical JSON-ready form of a scenario; loading it reproduces the scenario exactly."""
    iteration = scenario.iteration
    ode = scenario.ode
    document = {
        'name': scenario.name,
        'players': [
            {'utility': _utility_document(p.utility), 'beta': p.cost_factor} for p in scenario.players
        ],
        'influence': [list(row) for row in scenario.influence.entries],
        'objective': {'kind': scenario.objective.kind},
        'budget': scenario.budget,
        'success_threshold': scenario.success_threshold,
        'initial_investment': list(scenario.initial_investment) if scenario.initial_investment is not None else None,
        'initial_incentive': list(scenario.initial_incentive) if scenario.initial_incentive is not None else None,
        'iteration': {
            'kappa_d': iteration.kappa_d,
            'phi': iteration.phi,
            'lambda_init': iteration.lambda_init,
            'lambda_min': iteration.lambda_min,
            'p_cap_fraction': iteration.p_cap_fraction,
            'max_iters': iteration.max_iters,
            'conv_tol': iteration.conv_tol,
            'literal_projection': iteration.literal_projection,
            'simultaneous': iteration.simultaneous,
            'fail_on_max_iters': iteration.fail_on_max_iters,
        },
        'ode': {
            'kappa_lambda': ode.kappa_lambda,
            'kappa_i': list(ode.kappa_i) if ode.kappa_i is not None else None,
            'dt': ode.dt,
            't_end': ode.t_end,
            'record_every': ode.record_every,
        },
    }
    if scenario.objective.gamma is not None:
        document['objective']['gamma'] = list(scenario.objective.gamma)
    return document
