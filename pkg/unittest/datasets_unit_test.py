import functools
import logging
import sys
import tempfile
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
from exceptions import DatasetFormatError, DimensionError, HoldoutError
from models.dataset import TimeMap, TimeSeriesDataset
from repository.datasets import load_dataset, save_dataset

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


class TestDatasets(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.path = Path(self.tmp.name)
        rng = np.random.default_rng(2)
        self.data = TimeSeriesDataset(
            (0.0, 1.0, 3.0),
            tuple(rng.normal(size=(4, 2)) for _ in range(3)),
            pair_ids=tuple(np.arange(4) for _ in range(3)),
            name="toy",
        )

    def tearDown(self):
        self.tmp.cleanup()

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
    def test_save_and_load(self):
        save_dataset(self.data, self.path / "toy.csv")
        loaded = load_dataset(self.path / "toy.csv")
        self.assertEqual(loaded.labels, self.data.labels)
        self.assertTrue(loaded.has_pairing)
        self.assertFalse(loaded.has_velocities)
        np.testing.assert_array_equal(loaded.points_at(3.0), self.data.points_at(3.0))

    @wrap_assertion_result
    def test_paired_points_follow_ids(self):
        start, end = self.data.paired(0.0, 3.0)
        np.testing.assert_array_equal(start, self.data.points_at(0.0))
        np.testing.assert_array_equal(end, self.data.points_at(3.0))

    @wrap_assertion_result
    def test_without_drops_one_label(self):
        self.assertEqual(self.data.without(1.0).labels, (0.0, 3.0))

    @wrap_assertion_result
    def test_unsorted_labels_are_rejected(self):
        with self.assertRaises(DatasetFormatError):
            TimeSeriesDataset((1.0, 0.0), (np.zeros((1, 2)), np.zeros((1, 2))))

    @wrap_assertion_result
    def test_mixed_dimensions_are_rejected(self):
        with self.assertRaises(DimensionError):
            TimeSeriesDataset((0.0, 1.0), (np.zeros((1, 2)), np.zeros((1, 3))))

    @parameterized.expand([("index", (1.0, 2.0, 3.0)), ("explicit", (1.0, 2.0, 4.0))])
    @wrap_assertion_result
    def test_time_map_modes(self, mode, times):
        time_map = TimeMap.from_labels(self.data.labels, mode=mode)
        self.assertEqual(time_map.times, times)
        self.assertEqual(time_map.label_of(times[1]), 1.0)

    @wrap_assertion_result
    def test_time_map_neighbors(self):
        time_map = TimeMap.from_labels(self.data.labels, held_out=1.0)
        self.assertEqual(time_map.neighbors(1.0), (0.0, 3.0))
        self.assertEqual(time_map.training_labels, (0.0, 3.0))
        with self.assertRaises(HoldoutError):
            TimeMap.from_labels(self.data.labels, held_out=2.0)

    @wrap_assertion_result
    def test_missing_column_names_field(self):
        target = self.path / "bad.csv"
        target.write_text("t,x0,x2\n0,1,2\n", encoding="utf-8")
        with self.assertRaises(DatasetFormatError) as info:
            load_dataset(target)
        self.assertEqual(info.exception.line, 1)


if __name__ == "__main__":
    unittest.main()
