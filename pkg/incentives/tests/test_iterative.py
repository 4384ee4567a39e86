from dataclasses import replace
import unittest

import numpy as np

from incentives.core.direct import solve_m1, solve_m2
from incentives.core.exceptions import ConvergenceError, DomainError, UnsupportedModelError
from incentives.core.game import budget_spend, solve_ne
from incentives.core.iterative import (
    cheat_probe, default_lambda_init, detect_convergence, im1_incentives, im1_step, im2_step,
    make_record, relaxed_response, run_mechanism, steps_to_within, update_lambda,
)
from incentives.core.types import IterationConfig, Trajectory
from incentives.tests.factories import USE_CASE_ALPHA, USE_CASE_GAMMA, coupled_pair, single_player, use_case

PROBE_DELTAS = (0.01, -0.01, 0.1, -0.1)


class TestDesignerUpdate(unittest.TestCase):
    def test_lambda_step_from_equilibrium_spend(self):
        scenario = use_case()
        p = np.array(USE_CASE_GAMMA) / 0.5
        spend = budget_spend(p, solve_ne(scenario, p).x)
        self.assertAlmostEqual(spend, 1.785, delta=1e-3)
        self.assertAlmostEqual(update_lambda(0.5, spend, 3.0, IterationConfig()), 0.43924, places=5)

    def test_lambda_step_signed(self):
        self.assertAlmostEqual(update_lambda(0.5, 1.785, 3.0, IterationConfig()), 0.43925, places=12)

    def test_literal_projection_never_decreases(self):
        cfg = IterationConfig(literal_projection=True)
        self.assertEqual(update_lambda(0.5, 1.785, 3.0, cfg), 0.5)
        self.assertAlmostEqual(update_lambda(0.5, 4.0, 3.0, cfg), 0.55, places=12)

    def test_lambda_floor(self):
        cfg = IterationConfig(lambda_min=1e-6)
        self.assertEqual(update_lambda(0.01, 0.0, 3.0, cfg), 1e-6)

    def test_im1_incentives_separable(self):
        np.testing.assert_allclose(
            im1_incentives(use_case(welfare=True), 1.2, IterationConfig()), np.full(6, 3 / 2.2), rtol=1e-12,
        )

    def test_im1_incentives_coupled(self):
        scenario = coupled_pair(0.5, 0.2, betas=(3.0, 3.0))
        p = im1_incentives(scenario, 1.0, IterationConfig())
        np.testing.assert_allclose(p, [6.3 / 3.9, 7.2 / 3.9], rtol=1e-12)
        self.assertAlmostEqual(p[0], 1.61538, places=5)
        self.assertAlmostEqual(p[1], 1.84615, places=5)

    def test_incentives_capped_below_cost(self):
        scenario = use_case()
        record = make_record(scenario, 0, np.full(6, 0.5), np.zeros(6), 1e-3)
        step = im2_step(scenario, record, IterationConfig())
        np.testing.assert_allclose(step.p, 0.99 * scenario.betas)


class TestPlayerUpdate(unittest.TestCase):
    def test_relaxed_response(self):
        scenario = single_player(alpha=0.9, beta=3.0)
        x = relaxed_response(scenario, np.array([0.5]), np.array([0.3]), 0.3)
        self.assertAlmostEqual(x[0], 0.38333, places=5)


class TestFixedPoints(unittest.TestCase):
    def test_im2_fixed_point(self):
        scenario = use_case()
        solution = solve_m2(scenario)
        record = make_record(scenario, 10, solution.x, solution.p, solution.lambda_)
        following = im2_step(scenario, record, IterationConfig())
        np.testing.assert_allclose(following.x, solution.x, rtol=0, atol=1e-10)
        self.assertAlmostEqual(following.lambda_, solution.lambda_, places=10)

    def test_im1_fixed_point(self):
        scenario = use_case(welfare=True)
        solution = solve_m1(scenario)
        record = make_record(scenario, 10, solution.x, solution.p, solution.lambda_)
        following = im1_step(scenario, record, IterationConfig())
        np.testing.assert_allclose(following.x, solution.x, rtol=0, atol=1e-12)
        np.testing.assert_allclose(following.p, solution.p, rtol=0, atol=1e-12)

    def test_objective_mismatch(self):
        record = make_record(use_case(), 0, np.full(6, 0.5), np.full(6, 0.3), 1.0)
        with self.assertRaises(UnsupportedModelError):
            im1_step(use_case(), record, IterationConfig())
        with self.assertRaises(UnsupportedModelError):
            im2_step(use_case(welfare=True), record, IterationConfig())


class TestRunMechanism(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.scenario = use_case()
        cls.im2 = run_mechanism(cls.scenario, mech='im2')
        cls.welfare = use_case(welfare=True)
        cls.im1 = run_mechanism(cls.welfare, mech='im1')

    def test_default_lambda_init(self):
        p0 = np.full(6, 0.3)
        self.assertAlmostEqual(default_lambda_init(self.scenario, 'im2', p0, IterationConfig()), 2.3 / 6 / 0.3)
        self.assertAlmostEqual(default_lambda_init(self.welfare, 'im1', p0, IterationConfig()), 9.0)
        self.assertEqual(default_lambda_init(self.scenario, 'im2', p0, IterationConfig(lambda_init=2.0)), 2.0)

    def test_first_player_update_uses_initial_incentives(self):
        first = self.im2.steps[1]
        np.testing.assert_array_equal(first.p, np.full(6, 0.3))
        expected = 0.3 * 0.5 + 0.7 * np.array(USE_CASE_ALPHA) / 2.7
        np.testing.assert_allclose(first.x, expected, rtol=1e-12)

    def test_im2_limit_matches_direct_solution(self):
        self.assertTrue(self.im2.converged)
        solution = solve_m2(self.scenario)
        final = self.im2.final
        np.testing.assert_allclose(final.x, solution.x, rtol=0, atol=1e-4)
        self.assertLess(np.max(np.abs(final.p * final.lambda_ - np.array(USE_CASE_GAMMA))), 1e-6)
        self.assertLess(abs(final.budget_spend - 3.0), 1e-6)

    def test_im2_beats_selfish_baseline(self):
        self.assertGreater(self.im2.final.objective, 0.52)

    def test_im2_converges_fast(self):
        steps = steps_to_within(self.im2, 0.01, limit=solve_m2(self.scenario).x)
        self.assertIsNotNone(steps)
        self.assertLessEqual(steps, 50)

    def test_im1_closed_form_limit(self):
        self.assertTrue(self.im1.converged)
        final = self.im1.final
        self.assertAlmostEqual(final.lambda_, 1.2, delta=1e-5)
        np.testing.assert_allclose(final.p, np.full(6, 3 / 2.2), rtol=0, atol=1e-5)
        np.testing.assert_allclose(final.x, np.array(USE_CASE_ALPHA) * 2.2 / 3.6, rtol=0, atol=1e-5)
        self.assertAlmostEqual(final.budget_spend, 3.0, delta=1e-5)

    def test_bounds_hold_at_every_step(self):
        for trajectory, scenario in ((self.im2, self.scenario), (self.im1, self.welfare)):
            for record in trajectory.steps:
                self.assertGreaterEqual(record.lambda_, 1e-6)
                self.assertTrue(np.all(record.p < scenario.betas))

    def test_deterministic(self):
        repeat = run_mechanism(self.scenario, mech='im2')
        self.assertEqual(len(repeat.steps), len(self.im2.steps))
        for a, b in zip(repeat.steps, self.im2.steps):
            np.testing.assert_array_equal(a.x, b.x)
            self.assertEqual(a.lambda_, b.lambda_)

    def test_converged_at_satisfies_predicate(self):
        cfg = self.scenario.iteration
        self.assertEqual(detect_convergence(self.im2, cfg.conv_tol, first=2), self.im2.converged_at)

    def test_fixed_incentives_reach_selfish_equilibrium(self):
        trajectory = run_mechanism(self.scenario, mech='none', p0=np.zeros(6))
        self.assertTrue(trajectory.converged)
        np.testing.assert_allclose(trajectory.final.x, np.array(USE_CASE_ALPHA) / 3.0, rtol=0, atol=1e-7)
        self.assertEqual(trajectory.final.budget_spend, 0.0)

    def test_start_at_selfish_equilibrium_still_runs_the_designer(self):
        x0 = np.array(USE_CASE_ALPHA) / 3.0
        trajectory = run_mechanism(self.scenario, mech='im2', x0=x0, p0=np.zeros(6))
        self.assertTrue(trajectory.converged)
        self.assertGreaterEqual(trajectory.converged_at, 2)
        solution = solve_m2(self.scenario)
        np.testing.assert_allclose(trajectory.final.x, solution.x, rtol=0, atol=1e-4)
        self.assertAlmostEqual(trajectory.final.budget_spend, 3.0, delta=1e-6)
        self.assertAlmostEqual(trajectory.final.objective, solution.objective_value, delta=1e-4)

    def test_explicit_lambda_init_is_floored(self):
        cfg = IterationConfig(lambda_init=1e-9, lambda_min=1e-6)
        self.assertEqual(default_lambda_init(self.scenario, 'im2', np.full(6, 0.3), cfg), 1e-6)

    def test_unconverged_run(self):
        cfg = replace(self.scenario.iteration, max_iters=5)
        trajectory = run_mechanism(self.scenario, cfg, mech='im2')
        self.assertFalse(trajectory.converged)
        self.assertEqual(trajectory.final.n, 5)
        with self.assertRaises(ConvergenceError):
            run_mechanism(self.scenario, replace(cfg, fail_on_max_iters=True), mech='im2')

    def test_simultaneous_variant_converges_to_same_limit(self):
        cfg = replace(self.scenario.iteration, simultaneous=True)
        trajectory = run_mechanism(self.scenario, cfg, mech='im2')
        self.assertTrue(trajectory.converged)
        np.testing.assert_allclose(trajectory.final.x, self.im2.final.x, rtol=0, atol=1e-6)

    def test_rejects_non_interior_start(self):
        with self.assertRaises(DomainError):
            run_mechanism(self.scenario, mech='im2', x0=np.zeros(6))


class TestDetectConvergence(unittest.TestCase):
    def _trajectory(self, values):
        scenario = single_player()
        trajectory = Trajectory(scenario_id='t', mechanism='im2', config=IterationConfig())
        for n, x in enumerate(values):
            trajectory.steps.append(make_record(scenario, n, [x], [0.5], 1.0))
        return trajectory

    def test_constant_trajectory(self):
        self.assertEqual(detect_convergence(self._trajectory([0.5, 0.5, 0.5]), 1e-8), 1)

    def test_two_cycle_never_converges(self):
        self.assertIsNone(detect_convergence(self._trajectory([0.5, 0.7] * 5), 1e-8))


class TestCheatProbe(unittest.TestCase):
    def _assert_deviation_costs_more(self, scenario, mech):
        for i in range(scenario.n):
            for delta in PROBE_DELTAS:
                records = cheat_probe(scenario, None, mech, i, delta)
                for record in records:
                    label = f"{mech} player {i} delta {delta} step {record.n}"
                    if record.target_in_domain:
                        self.assertGreater(record.cost_target_deviated, record.cost_target, msg=label)
                    else:
                        self.assertTrue(np.isnan(record.cost_target_deviated), msg=label)

    def test_im2_deviation_never_pays(self):
        self._assert_deviation_costs_more(use_case(), 'im2')

    def test_im1_deviation_never_pays(self):
        self._assert_deviation_costs_more(use_case(welfare=True), 'im1')

    def test_zero_deviation(self):
        for record in cheat_probe(use_case(), None, 'im2', 0, 0.0):
            self.assertEqual(record.cost_deviated, record.cost_honest)

    def test_positive_deviation_from_relaxed_action(self):
        records = cheat_probe(use_case(), None, 'im2', 0, 0.1)
        for record in records[-5:]:
            self.assertGreater(record.cost_deviated, record.cost_honest)

    def test_out_of_domain_steps_are_flagged(self):
        # smallest unit: best-response target 0.2/2.7 at the start, about 0.0895 at the IM2 limit
        records = cheat_probe(use_case(), None, 'im2', 4, -0.1)
        first, last = records[0], records[-1]
        self.assertFalse(first.target_in_domain)
        self.assertTrue(np.isnan(first.cost_target_deviated))
        self.assertTrue(first.honest_in_domain)
        self.assertTrue(np.isfinite(first.cost_deviated))
        self.assertFalse(last.target_in_domain)

        welfare = cheat_probe(use_case(welfare=True), None, 'im1', 4, -0.1)
        self.assertFalse(welfare[0].target_in_domain)
        self.assertTrue(welfare[-1].target_in_domain)
        self.assertGreater(welfare[-1].cost_target_deviated, welfare[-1].cost_target)

    def test_deviation_never_admissible(self):
        with self.assertRaises(DomainError):
            cheat_probe(use_case(), None, 'im2', 0, -10.0)

    def test_requires_iterative_mechanism(self):
        with self.assertRaises(ValueError):
            cheat_probe(use_case(), None, 'm2', 0, 0.1)


if __name__ == '__main__':
    unittest.main()
