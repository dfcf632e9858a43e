import functools
import logging
import sys
import unittest
from pathlib import Path

import colorlog
from parameterized import parameterized

RED = "\033[91m"
GREEN = "\033[92m"
BLUE = "\033[94m"
RESET = "\033[0m"

hw_path: str = str(Path(__file__).resolve().parent.parent.joinpath("src"))
sys.path.append(hw_path)

from config.config import Settings, settings
from config.runconfig import flatten, nest, with_overrides
from exceptions import ConfigError
from schemas.solver import SolverConfig
from schemas.training import RunConfig
from services.trainer import regularizer_for_method

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


class TestRunConfig(unittest.TestCase):
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

    @wrap_assertion_result
    def test_settings_from_dict(self):
        custom = Settings.from_dict({"app_name": "other", "max_workers": 2})
        self.assertEqual(custom.app_name, "other")
        self.assertEqual(custom.max_workers, 2)
        self.assertEqual(custom.checkpoint_format_version, 1)

    @wrap_assertion_result
    def test_nest_builds_sections(self):
        nested = nest({"regularizer.lambda_v": "0.1", "solver.method": "dopri5", "seed": "4"})
        self.assertEqual(nested, {"regularizer": {"lambda_v": "0.1"}, "solver": {"method": "dopri5"}, "seed": "4"})

    @parameterized.expand([("rk4", 0.05), ("dopri5", 0.05)])
    @wrap_assertion_result
    def test_solver_method_override(self, method, step):
        cfg = with_overrides(RunConfig(), {"solver.method": method})
        self.assertEqual(cfg.solver, SolverConfig(method=method, step_size=step))

    @parameterized.expand(
        [
            ("iterations", "iterations", "3000"),
            ("nested", "regularizer.k", "5"),
            ("bool", "regularizer.growth_enabled", "false"),
            ("tuple", "eval.seeds", "0,1,2"),
            ("evaluation solver", "eval_solver.method", "dopri5"),
        ]
    )
    @wrap_assertion_result
    def test_flatten_defaults(self, _, key, value):
        self.assertEqual(flatten(RunConfig())[key], value)

    @wrap_assertion_result
    def test_method_weights_can_be_configured(self):
        cfg = with_overrides(RunConfig(), {"regularizer.lambda_v": "0.001"})
        self.assertEqual(regularizer_for_method("base+v", cfg.regularizer).lambda_v, 0.001)

    @wrap_assertion_result
    def test_section_assignment_is_rejected(self):
        with self.assertRaises(ConfigError):
            with_overrides(RunConfig(), {"eval": "1"})


if __name__ == "__main__":
    unittest.main()
