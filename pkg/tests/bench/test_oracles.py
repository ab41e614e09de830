import unittest
from unittest.mock import patch

import numpy as np

from dcrelax.bench.generators import gen_random_l1
from dcrelax.bench.oracles import (
    OracleResult,
    brute_force_oracle,
    naive_enumeration,
    projected_subgradient_baseline,
)
from dcrelax.errors import OracleMismatchError, OracleSizeError
from dcrelax.model import ProblemInstance, operator_norm_estimate, true_objective
from dcrelax.prox import SeparableLoss


def _toy_instance():
    return ProblemInstance(A=np.eye(2), b=[0.5, -0.5], loss=SeparableLoss.l1(2))


class BruteForceOracleTest(unittest.TestCase):

    def test_toy_problem(self):
        result = brute_force_oracle(_toy_instance())
        np.testing.assert_array_equal(result.z, [1, -1])
        self.assertEqual(result.objective, 1.0)

    def test_single_variable(self):
        inst = ProblemInstance(A=[[1.0]], b=[0.8], loss=SeparableLoss.l1(1))
        result = brute_force_oracle(inst)
        np.testing.assert_array_equal(result.z, [1])
        self.assertAlmostEqual(result.objective, 0.2)

    def test_first_candidate_is_kept_when_it_is_optimal(self):
        inst = ProblemInstance(A=np.eye(3), b=[-1.0, -1.0, -1.0], loss=SeparableLoss.l1(3))
        result = brute_force_oracle(inst)
        np.testing.assert_array_equal(result.z, [-1, -1, -1])
        self.assertEqual(result.objective, 0.0)

    def test_exact_fit(self):
        A = np.random.default_rng(0).standard_normal((6, 5))
        inst = ProblemInstance(A=A, b=A @ np.ones(5), loss=SeparableLoss.l1(6))
        result = brute_force_oracle(inst)
        np.testing.assert_array_equal(result.z, np.ones(5))
        self.assertAlmostEqual(result.objective, 0.0, places=12)

    def test_matches_naive_enumeration(self):
        # 13 and 14 variables also walk the Gray code over the high bits
        for n, seed in ((3, 0), (8, 1), (12, 2), (13, 3), (14, 4)):
            inst = gen_random_l1(8, n, seed)
            fast = brute_force_oracle(inst)
            naive = naive_enumeration(inst)
            with self.subTest(n=n):
                np.testing.assert_array_equal(fast.z, naive.z)
                self.assertAlmostEqual(fast.objective, naive.objective, delta=1e-12)

    def test_matches_naive_enumeration_with_linear_rows(self):
        loss = SeparableLoss.concat(SeparableLoss.l1(5), SeparableLoss.linear([0.3, -1.0]))
        rng = np.random.default_rng(5)
        inst = ProblemInstance(A=rng.standard_normal((7, 13)), b=rng.standard_normal(7),
                               loss=loss)
        self.assertAlmostEqual(brute_force_oracle(inst).objective,
                               naive_enumeration(inst).objective, delta=1e-12)

    def test_optimum_is_a_lower_bound(self):
        inst = gen_random_l1(6, 7, 6)
        optimum = brute_force_oracle(inst).objective
        rng = np.random.default_rng(7)
        for _ in range(100):
            z = np.where(rng.random(7) < 0.5, -1, 1)
            self.assertGreaterEqual(true_objective(inst, z), optimum)

    def test_ties_go_to_the_lexicographically_smallest(self):
        for n in (4, 14):
            inst = ProblemInstance(A=np.zeros((2, n)), b=[1.0, -2.0], loss=SeparableLoss.l1(2))
            with self.subTest(n=n):
                result = brute_force_oracle(inst)
                np.testing.assert_array_equal(result.z, -np.ones(n))
                self.assertEqual(result.objective, 3.0)

    def test_single_flip_tie(self):
        # z and -z fit equally well when b = 0
        A = np.random.default_rng(8).standard_normal((4, 3))
        inst = ProblemInstance(A=A, b=np.zeros(4), loss=SeparableLoss.l1(4))
        result = brute_force_oracle(inst)
        self.assertEqual(result.z[0], -1)

    def test_offset_is_reported(self):
        inst = ProblemInstance(A=np.eye(2), b=[0.5, -0.5], loss=SeparableLoss.l1(2), offset=2.0)
        self.assertEqual(brute_force_oracle(inst).objective, 3.0)

    def test_disagreement_with_naive_enumeration_should_fail(self):
        inst = gen_random_l1(6, 5, 9)
        wrong = OracleResult(np.ones(5, dtype=int), -1.0)
        with patch("dcrelax.bench.oracles.naive_enumeration", return_value=wrong):
            with self.assertRaises(OracleMismatchError):
                brute_force_oracle(inst)

    def test_cross_check_is_skipped_for_larger_instances(self):
        inst = gen_random_l1(6, 11, 9)
        with patch("dcrelax.bench.oracles.naive_enumeration") as naive:
            brute_force_oracle(inst)
        naive.assert_not_called()
        with patch("dcrelax.bench.oracles.naive_enumeration") as naive:
            brute_force_oracle(inst, cross_check_cap=0)
        naive.assert_not_called()

    def test_too_many_variables_should_fail(self):
        with self.assertRaises(OracleSizeError):
            brute_force_oracle(gen_random_l1(2, 5, 0), n_cap=4)
        with self.assertRaises(OracleSizeError):
            naive_enumeration(gen_random_l1(2, 17, 0))


class SubgradientBaselineTest(unittest.TestCase):

    def test_zero_matrix(self):
        inst = ProblemInstance(A=np.zeros((3, 4)), b=[1.0, -2.0, 0.5], loss=SeparableLoss.l1(3))
        result = projected_subgradient_baseline(inst, 10, seed=0)
        self.assertEqual(result.objective, 3.5)

    def test_single_step_from_the_origin(self):
        inst = gen_random_l1(5, 4, 1)
        result = projected_subgradient_baseline(inst, 1, seed=0)
        a = 1.0 / operator_norm_estimate(inst.A)
        step = a * inst.A.T @ np.sign(inst.b)
        np.testing.assert_array_equal(result.z, np.where(step < 0, -1, 1))

    def test_never_below_the_optimum(self):
        for seed in range(5):
            inst = gen_random_l1(10, 12, seed)
            optimum = brute_force_oracle(inst).objective
            result = projected_subgradient_baseline(inst, 200, seed=seed)
            self.assertGreaterEqual(result.objective, optimum - 1e-12)
            self.assertEqual(result.objective, true_objective(inst, result.z))

    def test_seeded(self):
        inst = gen_random_l1(10, 8, 2)
        first = projected_subgradient_baseline(inst, 50, seed=3, restarts=3)
        second = projected_subgradient_baseline(inst, 50, seed=3, restarts=3)
        np.testing.assert_array_equal(first.z, second.z)

    def test_restarts_never_hurt(self):
        inst = gen_random_l1(10, 8, 4)
        single = projected_subgradient_baseline(inst, 50, seed=1)
        several = projected_subgradient_baseline(inst, 50, seed=1, restarts=4)
        self.assertLessEqual(several.objective, single.objective)

    def test_invalid_counts_should_fail(self):
        with self.assertRaises(ValueError):
            projected_subgradient_baseline(_toy_instance(), 0, seed=0)
        with self.assertRaises(ValueError):
            projected_subgradient_baseline(_toy_instance(), 5, seed=0, restarts=0)
