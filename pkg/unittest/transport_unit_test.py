import functools
import logging
import math
import sys
import unittest
from pathlib import Path

import colorlog
import numpy as np
from parameterized import parameterized

RED = "\033[91m"
GREEN = "\033[92m"
BLUE = "\033[94m"
RESET = "\033[0m"

hw_path: str = str(Path(__file__).resolve().parent.parent.joinpath("src"))
sys.path.append(hw_path)

from config.config import settings
from exceptions import ConvergenceError, UserInputError
from schemas.transport import SinkhornConfig, UnbalancedOTConfig
from services.transport import cost_matrix, emd, emd_exact, growth_targets, sinkhorn, unbalanced_sinkhorn

logger = logging.getLogger(f"{settings.app_name}")
logger.setLevel(logging.INFO)

formatter = colorlog.ColoredFormatter(
    "%(yellow)s - %(name)s - %(levelname)s - %(message)s",
    datefmt=None,
    reset=True,
)

handler = colorlog.StreamHandler()
handler.setFormatter(formatter)
logger.addHandler(handler)


class TestTransport(unittest.TestCase):
    def setUp(self):
        self.rng = np.random.default_rng(21)

    def log_assertion_result(self, test_name, result, expected=None):
        test_name_parts = test_name.split("::")
        if len(test_name_parts) > 1:
            test_name = test_name_parts[-1]
        if result == expected:
            test_name = f"{BLUE}{test_name}{RESET}"
            logger.info(f"{test_name}: {GREEN}Assertion successful.---> Result matches expected value.{RESET}")
        else:
            logger.error(f"{test_name}: {RED}Assertion failed.---> Result does not match expected value.{RESET}")

    @staticmethod
    def wrap_assertion_result(func):
        @functools.wraps(func)
        def wrapper(self, *args, **kwargs):
            result = func(self, *args, **kwargs)
            self.log_assertion_result(func.__name__, result)
            return result

        return wrapper

    @parameterized.expand([(1, [[1.0, 2.0], [0.0, 1.0]]), (2, [[1.0, 4.0], [0.0, 1.0]])])
    @wrap_assertion_result
    def test_cost_matrix(self, p, expected):
        X = np.array([[0.0], [1.0]])
        Y = np.array([[1.0], [2.0]])
        np.testing.assert_allclose(cost_matrix(X, Y, p), expected)

    @wrap_assertion_result
    def test_identical_clouds_cost_nothing(self):
        X = self.rng.normal(size=(6, 3))
        self.assertAlmostEqual(emd(X, X[::-1]), 0.0, places=12)

    @wrap_assertion_result
    def test_translation_cost(self):
        X = self.rng.normal(size=(5, 2))
        self.assertAlmostEqual(emd(X, X + np.array([3.0, 4.0]), p=2), 5.0, places=9)

    @wrap_assertion_result
    def test_unequal_sizes_split_mass(self):
        cost, coupling = emd_exact(np.array([[0.0]]), np.array([[1.0], [3.0]]), p=1)
        self.assertAlmostEqual(cost, 2.0)
        np.testing.assert_allclose(coupling.plan, [[0.5, 0.5]])

    @parameterized.expand([("uniform", None), ("weighted", [0.2, 0.3, 0.5])])
    @wrap_assertion_result
    def test_exact_plan_marginals(self, _, weights):
        X, Y = self.rng.normal(size=(3, 2)), self.rng.normal(size=(4, 2))
        a = None if weights is None else np.array(weights)
        _, coupling = emd_exact(X, Y, a=a)
        self.assertLess(coupling.marginal_residual(), 1e-9)
        self.assertAlmostEqual(coupling.plan.sum(), 1.0)

    @wrap_assertion_result
    def test_sinkhorn_plan_is_positive(self):
        X, Y = self.rng.normal(size=(8, 2)), self.rng.normal(size=(8, 2))
        coupling = sinkhorn(X, Y, 1.0)
        self.assertTrue(np.all(coupling.plan > 0))
        self.assertLess(coupling.marginal_residual(), 1e-8)

    @wrap_assertion_result
    def test_sinkhorn_rejects_bad_regularization(self):
        X = self.rng.normal(size=(3, 2))
        with self.assertRaises(UserInputError):
            sinkhorn(X, X, 0.0)

    @wrap_assertion_result
    def test_sinkhorn_iteration_limit(self):
        X, Y = self.rng.normal(size=(6, 2)), self.rng.normal(size=(6, 2))
        with self.assertRaises(ConvergenceError):
            sinkhorn(X, Y, 0.01, SinkhornConfig(max_iter=1, tol=1e-15))

    @wrap_assertion_result
    def test_balanced_config_flag(self):
        self.assertTrue(UnbalancedOTConfig(alpha=math.inf, beta=math.inf).balanced)
        self.assertFalse(UnbalancedOTConfig().balanced)

    @wrap_assertion_result
    def test_unbalanced_growth_rates_are_positive(self):
        X, Y = self.rng.normal(size=(10, 2)), self.rng.normal(size=(12, 2)) + 0.5
        rates = growth_targets(unbalanced_sinkhorn(X, Y, UnbalancedOTConfig()))
        self.assertEqual(rates.shape, (10,))
        self.assertTrue(np.all(rates > 0))


if __name__ == "__main__":
    unittest.main()
