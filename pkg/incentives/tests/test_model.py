import unittest

import numpy as np

from incentives.core.exceptions import DimensionError, DomainError, MarginalRangeError
from incentives.core.model import (
    DesignerObjective, InfluenceMatrix, PlayerSpec, Scenario, UtilityFunction,
    effective_investment, inverse_marginal, marginal_utility, utility_value, validate_scenario,
)
from incentives.tests.factories import USE_CASE_ALPHA, log_players, use_case


def _domain_points(utility, rng, count=100):
    if utility.family == 'quadratic':
        return rng.uniform(0.01, 0.99, count) * utility.domain_upper
    return rng.uniform(0.05, 5.0, count)


UTILITIES = [
    UtilityFunction.log(0.9),
    UtilityFunction.log(2.5),
    UtilityFunction.power(1.0, 0.5),
    UtilityFunction.power(0.7, 0.3),
    UtilityFunction.quadratic(2.0, 1.0),
    UtilityFunction.quadratic(3.0, 0.5),
]


class TestUtilityFunction(unittest.TestCase):
    def test_log_values(self):
        self.assertEqual(utility_value(UtilityFunction.log(0.9), 1.0), 0.0)
        self.assertAlmostEqual(utility_value(UtilityFunction.log(0.9), 0.5), -0.623832, places=6)

    def test_quadratic_value(self):
        self.assertAlmostEqual(utility_value(UtilityFunction.quadratic(2, 1), 1.0), 1.5, places=12)

    def test_power_value(self):
        self.assertAlmostEqual(utility_value(UtilityFunction.power(1.0, 0.5), 4.0), 2.0, places=12)

    def test_domain_violations_name_the_bound(self):
        with self.assertRaises(DomainError) as ctx:
            utility_value(UtilityFunction.log(0.9), 0.0)
        self.assertEqual(ctx.exception.bound, 'x > 0')
        with self.assertRaises(DomainError):
            marginal_utility(UtilityFunction.power(1.0, 0.5), -1.0)
        with self.assertRaises(DomainError) as ctx:
            utility_value(UtilityFunction.quadratic(2, 1), 2.0)
        self.assertEqual(ctx.exception.bound, '0 <= x < a/b')

    def test_marginal_examples(self):
        self.assertAlmostEqual(marginal_utility(UtilityFunction.log(0.9), 0.5), 1.8, places=12)
        self.assertAlmostEqual(marginal_utility(UtilityFunction.log(0.9), 1.0), 0.9, places=12)
        self.assertAlmostEqual(marginal_utility(UtilityFunction.power(1.0, 0.5), 4.0), 0.25, places=12)

    def test_inverse_marginal_examples(self):
        self.assertAlmostEqual(inverse_marginal(UtilityFunction.log(0.9), 2.7), 1 / 3, places=12)
        self.assertAlmostEqual(inverse_marginal(UtilityFunction.log(0.9), 0.9), 1.0, places=12)
        self.assertAlmostEqual(inverse_marginal(UtilityFunction.quadratic(2, 1), 1.0), 1.0, places=12)

    def test_inverse_marginal_out_of_range(self):
        for m in (0.0, -1.0):
            with self.assertRaises(MarginalRangeError):
                inverse_marginal(UtilityFunction.log(0.9), m)
        with self.assertRaises(MarginalRangeError):
            inverse_marginal(UtilityFunction.quadratic(2, 1), 3.0)

    def test_marginal_matches_central_differences(self):
        rng = np.random.default_rng(11)
        h = 1e-6
        for utility in UTILITIES:
            for x in _domain_points(utility, rng):
                fd = (utility.value(x + h) - utility.value(x - h)) / (2 * h)
                exact = utility.marginal(x)
                self.assertLess(abs(exact - fd) / max(1.0, abs(exact)), 1e-6, msg=f"{utility} at x={x}")

    def test_inverse_of_marginal_is_identity(self):
        rng = np.random.default_rng(12)
        for utility in UTILITIES:
            for x in _domain_points(utility, rng):
                recovered = utility.inverse_marginal(utility.marginal(x))
                self.assertLess(abs(recovered - x) / x, 1e-10, msg=f"{utility} at x={x}")

    def test_marginal_strictly_decreasing(self):
        rng = np.random.default_rng(13)
        for utility in UTILITIES:
            points = np.sort(_domain_points(utility, rng, 50))
            marginals = [utility.marginal(x) for x in points]
            self.assertTrue(all(a > b for a, b in zip(marginals, marginals[1:])))

    def test_curvature_negative(self):
        for utility in UTILITIES:
            self.assertLess(utility.curvature(0.5), 0.0)

    def test_scaled_utility(self):
        self.assertEqual(UtilityFunction.log(0.9).scaled(0.5).alpha, 0.45)
        quad = UtilityFunction.quadratic(2.0, 1.0).scaled(2.0)
        self.assertEqual((quad.a, quad.b), (4.0, 2.0))
        self.assertAlmostEqual(quad.value(1.0), 2.0 * UtilityFunction.quadratic(2.0, 1.0).value(1.0))
        with self.assertRaises(ValueError):
            UtilityFunction.log(1.0).scaled(0.0)

    def test_parameter_errors(self):
        self.assertEqual(UtilityFunction.log(0.9).parameter_errors(), [])
        self.assertTrue(UtilityFunction.power(1.0, 1.5).parameter_errors())
        self.assertTrue(UtilityFunction(family='exp', alpha=1.0).parameter_errors())


class TestEffectiveInvestment(unittest.TestCase):
    def test_identity_returns_input_exactly(self):
        x = np.array([0.3, 0.5])
        np.testing.assert_array_equal(effective_investment(InfluenceMatrix.identity(2), x), x)

    def test_coupled_product(self):
        W = InfluenceMatrix(entries=((1.0, 0.5), (0.2, 1.0)))
        np.testing.assert_allclose(effective_investment(W, [1.0, 1.0]), [1.5, 1.2], rtol=0, atol=1e-15)

    def test_zero_investment(self):
        W = InfluenceMatrix(entries=((1.0, 0.5), (0.2, 1.0)))
        np.testing.assert_array_equal(effective_investment(W, [0.0, 0.0]), [0.0, 0.0])

    def test_dimension_mismatch(self):
        with self.assertRaises(DimensionError):
            effective_investment(InfluenceMatrix.identity(2), [1.0, 2.0, 3.0])

    def test_negative_investment(self):
        with self.assertRaises(DomainError) as ctx:
            effective_investment(InfluenceMatrix.identity(2), [1.0, -0.1])
        self.assertEqual(ctx.exception.bound, 'x >= 0')


class TestScenario(unittest.TestCase):
    def test_influence_defaults_to_identity(self):
        scenario = use_case()
        self.assertTrue(scenario.is_separable)
        np.testing.assert_array_equal(scenario.W, np.eye(6))

    def test_objective_value(self):
        scenario = use_case()
        x = np.array(USE_CASE_ALPHA) / 3.0
        self.assertAlmostEqual(scenario.objective_value(x), 0.52, places=12)
        welfare = use_case(welfare=True)
        self.assertAlmostEqual(welfare.objective_value(np.ones(6)), 0.0, places=12)

    def test_with_utility_leaves_original_untouched(self):
        scenario = use_case()
        changed = scenario.with_utility(0, UtilityFunction.log(0.45))
        self.assertEqual(scenario.players[0].utility.alpha, 0.9)
        self.assertEqual(changed.players[0].utility.alpha, 0.45)

    def test_gammas_unavailable_for_welfare(self):
        with self.assertRaises(ValueError):
            use_case(welfare=True).gammas


class TestValidateScenario(unittest.TestCase):
    def test_use_case_passes(self):
        report = validate_scenario(use_case())
        self.assertTrue(report.passed, msg=report.first_failure)
        self.assertIsNone(report.first_failure)

    def test_diagonal_must_be_one(self):
        scenario = Scenario(
            players=log_players((1.0, 1.0), 2.0),
            objective=DesignerObjective.welfare(),
            budget=1.0,
            influence=InfluenceMatrix(entries=((0.9, 0.0), (0.0, 1.0))),
        )
        report = validate_scenario(scenario)
        self.assertFalse(report.passed)
        self.assertEqual(report.first_failure.name, 'diagonal must be 1')

    def test_cost_factor_positive(self):
        players = (
            PlayerSpec(id=0, utility=UtilityFunction.log(1.0), cost_factor=2.0),
            PlayerSpec(id=1, utility=UtilityFunction.log(1.0), cost_factor=-1.0),
        )
        report = validate_scenario(Scenario(players=players, objective=DesignerObjective.welfare(), budget=1.0))
        self.assertEqual(report.first_failure.name, 'cost_factor > 0')

    def test_gamma_length(self):
        scenario = use_case(objective=DesignerObjective.linear_global((0.8, 0.4)))
        self.assertEqual(validate_scenario(scenario).first_failure.name, 'gamma length ≠ N')

    def test_off_diagonal_range_and_budget(self):
        scenario = Scenario(
            players=log_players((1.0, 1.0), 2.0),
            objective=DesignerObjective.welfare(),
            budget=0.0,
            influence=InfluenceMatrix(entries=((1.0, 1.5), (0.0, 1.0))),
        )
        failures = [check.name for check in validate_scenario(scenario).checks if not check.passed]
        self.assertEqual(failures, ['off-diagonal in [0, 1]', 'budget > 0'])

    def test_empty_players(self):
        report = validate_scenario(Scenario(players=(), objective=DesignerObjective.welfare(), budget=1.0))
        self.assertEqual(report.first_failure.name, 'players nonempty')

    def test_non_square_influence(self):
        scenario = Scenario(
            players=log_players((1.0, 1.0), 2.0),
            objective=DesignerObjective.welfare(),
            budget=1.0,
            influence=InfluenceMatrix(entries=((1.0, 0.0, 0.0), (0.0, 1.0, 0.0))),
        )
        self.assertEqual(validate_scenario(scenario).first_failure.name, 'influence dimension')


if __name__ == '__main__':
    unittest.main()
