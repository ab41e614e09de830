import unittest

import numpy as np
from pydantic import ValidationError
from scipy.optimize import minimize_scalar

from dcrelax.errors import DimensionError, ParameterError
from dcrelax.prox import (
    HuberBlock,
    L1Block,
    LinearBlock,
    LossBlock,
    LossKind,
    SeparableLoss,
    envelope,
    envelope_and_gradient,
    envelope_gradient,
    huber_value_grad,
    lipschitz_modulus,
    loss_subgradient,
    loss_value,
    loss_values,
    prox,
)

from .utils import finite_difference


def _losses():
    return {
        "l1": SeparableLoss.l1(4, weight=1.5),
        "linear": SeparableLoss.linear([0.5, -1.0, 2.0, 0.0]),
        "huber": SeparableLoss.huber(4, mu=0.7),
        "mixed": SeparableLoss.concat(SeparableLoss.l1(2), SeparableLoss.linear([1.0, -2.0])),
    }


class LossBlockTest(unittest.TestCase):

    def test_create_from_dict_picks_subtype(self):
        block = LossBlock.create({"kind": "huber", "row_count": 3, "huber_mu": 0.5})
        self.assertIsInstance(block, HuberBlock)
        self.assertEqual(block.kind, LossKind.HUBER)

    def test_create_unknown_kind_should_fail(self):
        with self.assertRaises(ValueError):
            LossBlock.create({"kind": "hinge", "row_count": 3})

    def test_linear_needs_matching_coeffs(self):
        with self.assertRaises(ValidationError):
            LinearBlock(row_count=3, coeffs=[1.0, 2.0])
        with self.assertRaises(ValidationError):
            LinearBlock(row_count=2)

    def test_coeffs_only_on_linear_blocks(self):
        with self.assertRaises(ValidationError):
            L1Block(row_count=2, coeffs=[1.0, 2.0])

    def test_huber_needs_positive_mu(self):
        with self.assertRaises(ValidationError):
            HuberBlock(row_count=2, huber_mu=0.0)
        with self.assertRaises(ValidationError):
            HuberBlock(row_count=2)

    def test_row_count_and_weight_are_checked(self):
        with self.assertRaises(ValidationError):
            L1Block(row_count=0)
        with self.assertRaises(ValidationError):
            L1Block(row_count=2, weight=-1.0)

    def test_separable_loss_from_dicts(self):
        loss = SeparableLoss(blocks=[
            {"kind": "l1", "row_count": 3},
            {"kind": "linear", "row_count": 2, "coeffs": [1.0, 1.0]},
        ])
        self.assertEqual(loss.total_rows, 5)
        self.assertTrue(loss.has_kind(LossKind.LINEAR))
        self.assertFalse(loss.has_kind(LossKind.HUBER))


class LossValueTest(unittest.TestCase):

    def test_l1(self):
        self.assertAlmostEqual(loss_value(SeparableLoss.l1(3), [2, -0.3, 0]), 2.3)

    def test_linear(self):
        self.assertEqual(loss_value(SeparableLoss.linear([2, 0]), [1, 1]), 2.0)

    def test_block_sum(self):
        loss = SeparableLoss.concat(SeparableLoss.l1(2), SeparableLoss.linear([1]))
        self.assertEqual(loss_value(loss, [1, -1, 3]), 5.0)

    def test_wrong_length_should_fail(self):
        with self.assertRaises(DimensionError):
            loss_value(SeparableLoss.l1(3), [1.0, 2.0])

    def test_batch_values_match_single_values(self):
        rng = np.random.default_rng(1)
        for name, loss in _losses().items():
            U = rng.standard_normal((loss.total_rows, 7))
            expected = [loss_value(loss, U[:, k]) for k in range(7)]
            with self.subTest(loss=name):
                np.testing.assert_allclose(loss_values(loss, U), expected, rtol=1e-12)


class ProxTest(unittest.TestCase):

    def test_l1_soft_threshold(self):
        np.testing.assert_allclose(prox(SeparableLoss.l1(3), [2, -0.3, 0], 0.5), [1.5, 0, 0])

    def test_linear_shift(self):
        np.testing.assert_allclose(prox(SeparableLoss.linear([2, 0]), [1, 1], 0.5), [0, 1])

    def test_weighted_l1_threshold_scales(self):
        np.testing.assert_allclose(prox(SeparableLoss.l1(1, weight=2.0), [3.0], 0.5), [2.0])

    def test_vanishing_step_returns_x(self):
        x = np.array([0.8, -1.3, 2.0, 0.4])
        for name, loss in _losses().items():
            with self.subTest(loss=name):
                np.testing.assert_allclose(prox(loss, x, 1e-12), x, atol=1e-10)

    def test_nonpositive_gamma_should_fail(self):
        for gamma in (0.0, -1.0, float("inf")):
            with self.subTest(gamma=gamma):
                with self.assertRaises(ParameterError):
                    prox(SeparableLoss.l1(1), [1.0], gamma)

    def test_huber_prox_against_scalar_minimization(self):
        rng = np.random.default_rng(2)
        mu = 0.7
        loss = SeparableLoss.huber(1, mu)
        for _ in range(50):
            x = rng.uniform(-4, 4)
            gamma = rng.uniform(0.05, 2.0)

            def objective(y):
                return huber_value_grad(np.array([y]), mu)[0] + (y - x) ** 2 / (2 * gamma)

            oracle = minimize_scalar(objective, bounds=(-abs(x) - 1, abs(x) + 1),
                                     method="bounded", options={"xatol": 1e-11})
            self.assertAlmostEqual(prox(loss, [x], gamma)[0], oracle.x, places=6)

    def test_nonexpansive(self):
        rng = np.random.default_rng(3)
        for name, loss in _losses().items():
            for _ in range(200):
                x, y = rng.standard_normal((2, loss.total_rows)) * 3
                gamma = rng.uniform(0.01, 3.0)
                distance = np.linalg.norm(prox(loss, x, gamma) - prox(loss, y, gamma))
                self.assertLessEqual(distance, np.linalg.norm(x - y) + 1e-12, name)


class EnvelopeTest(unittest.TestCase):

    def test_l1_linear_branch(self):
        self.assertAlmostEqual(envelope(SeparableLoss.l1(1), [2.0], 0.5), 1.75)

    def test_l1_quadratic_branch(self):
        self.assertAlmostEqual(envelope(SeparableLoss.l1(1), [0.3], 0.5), 0.09)

    def test_linear(self):
        self.assertAlmostEqual(envelope(SeparableLoss.linear([2, 0]), [1, 1], 0.5), 1.0)

    def test_envelope_prox_identity(self):
        rng = np.random.default_rng(4)
        for name, loss in _losses().items():
            for _ in range(1000):
                x = rng.standard_normal(loss.total_rows) * rng.uniform(0.1, 5)
                gamma = rng.uniform(0.01, 3.0)
                p = prox(loss, x, gamma)
                expected = loss_value(loss, p) + np.sum((x - p) ** 2) / (2 * gamma)
                value = envelope(loss, x, gamma)
                self.assertLessEqual(abs(value - expected), 1e-10 * max(1.0, abs(expected)), name)

    def test_envelope_minorizes_loss(self):
        rng = np.random.default_rng(5)
        for name, loss in _losses().items():
            for _ in range(200):
                x = rng.standard_normal(loss.total_rows) * 2
                gamma = rng.uniform(0.01, 3.0)
                self.assertLessEqual(envelope(loss, x, gamma), loss_value(loss, x) + 1e-12, name)

    def test_envelope_decreases_in_gamma(self):
        rng = np.random.default_rng(6)
        for name, loss in _losses().items():
            for _ in range(200):
                x = rng.standard_normal(loss.total_rows) * 2
                small, large = sorted(rng.uniform(0.01, 3.0, 2))
                self.assertGreaterEqual(
                    envelope(loss, x, small), envelope(loss, x, large) - 1e-12, name
                )


class EnvelopeGradientTest(unittest.TestCase):

    def test_l1(self):
        np.testing.assert_allclose(envelope_gradient(SeparableLoss.l1(1), [2.0], 0.5), [1.0])

    def test_l1_at_zero(self):
        np.testing.assert_allclose(envelope_gradient(SeparableLoss.l1(1), [0.0], 0.3), [0.0])

    def test_matches_finite_differences(self):
        rng = np.random.default_rng(7)
        h = 1e-6
        for name, loss in _losses().items():
            gamma = 0.4
            x = rng.standard_normal(loss.total_rows) * 2
            # stay away from the kinks at |x| = gamma * weight and mu + gamma
            for kink in (0.4, 0.6, 1.1):
                x = np.where(np.abs(np.abs(x) - kink) < 10 * h, x + 0.05, x)
            numeric = finite_difference(lambda v: envelope(loss, v, gamma), x, h)
            gradient = envelope_gradient(loss, x, gamma)
            with self.subTest(loss=name):
                np.testing.assert_allclose(gradient, numeric, rtol=1e-6, atol=1e-7)

    def test_envelope_and_gradient_in_one_pass(self):
        loss = _losses()["mixed"]
        x = np.array([0.1, -3.0, 2.0, 0.5])
        value, gradient = envelope_and_gradient(loss, x, 0.25)
        self.assertAlmostEqual(value, envelope(loss, x, 0.25), places=14)
        np.testing.assert_allclose(gradient, envelope_gradient(loss, x, 0.25))


class HuberValueGradTest(unittest.TestCase):

    def test_origin(self):
        value, gradient = huber_value_grad(np.array([[0.0]]), 1.0)
        self.assertEqual(value, 0.0)
        np.testing.assert_array_equal(gradient, [[0.0]])

    def test_linear_branch(self):
        value, gradient = huber_value_grad(np.array([[2.0]]), 1.0)
        self.assertEqual(value, 1.5)
        np.testing.assert_array_equal(gradient, [[1.0]])

    def test_gradient_matches_finite_differences(self):
        R = np.random.default_rng(8).standard_normal((3, 3))
        numeric = finite_difference(lambda M: huber_value_grad(M, 0.5)[0], R)
        np.testing.assert_allclose(huber_value_grad(R, 0.5)[1], numeric, rtol=1e-6, atol=1e-8)

    def test_nonpositive_mu_should_fail(self):
        with self.assertRaises(ParameterError):
            huber_value_grad(np.ones((2, 2)), 0.0)


class SubgradientAndModulusTest(unittest.TestCase):

    def test_l1_subgradient_picks_zero_at_kink(self):
        np.testing.assert_array_equal(
            loss_subgradient(SeparableLoss.l1(3), [2.0, 0.0, -1.0]), [1.0, 0.0, -1.0]
        )

    def test_linear_subgradient_is_coeffs(self):
        np.testing.assert_array_equal(
            loss_subgradient(SeparableLoss.linear([3.0, -1.0]), [5.0, 5.0]), [3.0, -1.0]
        )

    def test_lipschitz_modulus_combines_blocks(self):
        loss = SeparableLoss.concat(SeparableLoss.l1(4), SeparableLoss.linear([3.0, 0.0]))
        self.assertAlmostEqual(lipschitz_modulus(loss), np.sqrt(4 + 9))
