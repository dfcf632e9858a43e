import math
import zlib

import numpy as np
import pytest

from exceptions import DatasetFormatError, HoldoutError, UserInputError
from models.dataset import TimeMap, TimeSeriesDataset
from schemas.evaluation import EvalRecord, EvalReport
from schemas.solver import SolverConfig
from services.datagen import gen_arch, gen_cycle, rotation_field
from services.evaluation import (
    BaselinePredictor,
    EvalCell,
    FlowPredictor,
    baseline_predict,
    default_holdout,
    evaluate_cell,
    expand_grid,
    grid_search,
    holdout_eval,
    noise_floor,
    path_straightness,
    run_table,
    trajectory_mse,
    velocity_alignment,
)

from helpers import constant_field, zero_field

CYCLE_TIMES = TimeMap((0.0, 0.5, 1.0), (1.0, 1.5, 2.0))


class TruthPredictor:
    """Returns exactly the held-out sample the evaluator draws."""

    def predict(self, data, label, n, seed):
        return data.sample(label, n, np.random.default_rng([seed, 1]))

    def transport(self, data, label_from, label_to, x, seed):
        return None


@pytest.fixture(scope="module")
def big_arch():
    return gen_arch(2000, seed=0)


@pytest.fixture(scope="module")
def big_cycle():
    return gen_cycle(2000, seed=1)


def test_exact_prediction_scores_zero(arch):
    assert holdout_eval(arch, 0.5, TruthPredictor(), 100, seed=3) == pytest.approx(0.0, abs=1e-12)


def test_arch_baseline_scores(big_arch):
    prev = holdout_eval(big_arch, 0.5, BaselinePredictor("prev"), 1000, seed=0)
    ot = holdout_eval(big_arch, 0.5, BaselinePredictor("ot", 1000), 1000, seed=0)
    assert 0.923 <= prev <= 1.249
    assert 0.515 <= ot <= 0.773
    assert ot < prev


def test_cycle_neighbors_score_like_the_noise_floor(big_cycle):
    floor = noise_floor(big_cycle, 0.5, 500, seed=0, repeats=3)
    prev = holdout_eval(big_cycle, 0.5, BaselinePredictor("prev"), 500, seed=0)
    after = holdout_eval(big_cycle, 0.5, BaselinePredictor("next"), 500, seed=0)
    assert abs(prev - after) < 0.5 * floor.mean
    assert abs(after - floor.mean) < 0.3 * floor.mean


def test_true_rotation_reaches_radial_noise_floor(big_cycle):
    predictor = FlowPredictor(rotation_field(), CYCLE_TIMES, SolverConfig(method="dopri5", rtol=1e-8, atol=1e-8))
    mse = trajectory_mse(predictor, big_cycle, 0.5, 5000, seed=0)
    assert 0.015 < mse < 0.025


def test_stationary_baseline_mse(big_cycle):
    mse = trajectory_mse(BaselinePredictor("prev"), big_cycle, 0.5, 5000, seed=0)
    assert 0.11 <= mse <= 0.126


def test_ot_baseline_transports_points(big_arch):
    mse_ot = trajectory_mse(BaselinePredictor("ot", 500), big_arch, 0.5, 500, seed=0)
    mse_prev = trajectory_mse(BaselinePredictor("prev"), big_arch, 0.5, 500, seed=0)
    assert mse_ot < mse_prev


def test_baselines_without_point_transport_give_nan(arch):
    assert math.isnan(trajectory_mse(BaselinePredictor("next"), arch, 0.5, 100, seed=0))
    assert math.isnan(trajectory_mse(BaselinePredictor("rand"), arch, 0.5, 100, seed=0))


def test_trajectory_mse_needs_pairing():
    rng = np.random.default_rng(0)
    data = TimeSeriesDataset((0.0, 1.0, 2.0), tuple(rng.normal(size=(10, 2)) for _ in range(3)))
    with pytest.raises(DatasetFormatError):
        trajectory_mse(BaselinePredictor("prev"), data, 1.0, 5, seed=0)


def test_baseline_predictions_have_requested_size(arch):
    for kind in ("prev", "next", "rand", "ot"):
        assert baseline_predict(kind, arch, 0.5, 37, seed=1, ot_subsample=100).shape == (37, 2)
    with pytest.raises(UserInputError):
        BaselinePredictor("mean")


def test_boundary_holdout_is_rejected(arch):
    with pytest.raises(HoldoutError):
        holdout_eval(arch, 0.0, BaselinePredictor("prev"), 10, seed=0)
    with pytest.raises(HoldoutError):
        baseline_predict("next", arch, 1.0, 10, seed=0)


def test_default_holdout(arch):
    assert default_holdout(arch) == 0.5
    with pytest.raises(HoldoutError):
        default_holdout(arch.without(0.5))


def test_noise_floor_statistics(arch):
    floor = noise_floor(arch, 1.0, 100, seed=0, repeats=4)
    assert len(floor.values) == 4
    assert floor.mean > 0 and floor.std >= 0


def test_path_straightness():
    starts = np.array([[0.0, 0.0], [1.0, 1.0]])
    ratios = path_straightness(constant_field([1.0, 2.0]), starts, 0.0, 1.0, SolverConfig(), n_grid=11)
    np.testing.assert_allclose(ratios, 1.0, rtol=1e-12)
    assert np.all(np.isnan(path_straightness(zero_field(2), starts, 0.0, 1.0, SolverConfig(), n_grid=5)))
    curved = path_straightness(
        rotation_field(math.pi), np.array([[1.0, 0.0]]), 0.0, 1.0, SolverConfig(step_size=0.01), n_grid=401
    )
    assert curved[0] == pytest.approx(math.pi / 2, rel=1e-3)


def test_velocity_alignment_of_true_field(cycle):
    assert velocity_alignment(rotation_field(), cycle, TimeMap.from_labels(cycle.labels)) > 0.999
    assert velocity_alignment(rotation_field(-1.0), cycle, TimeMap.from_labels(cycle.labels)) < -0.999


def test_velocity_alignment_needs_velocities():
    data = TimeSeriesDataset((0.0, 1.0), (np.ones((3, 2)), np.ones((3, 2))))
    with pytest.raises(DatasetFormatError):
        velocity_alignment(zero_field(2), data, TimeMap.from_labels(data.labels))


def test_baseline_table_is_reproducible(arch, tiny_run_config):
    datasets = {"arch": arch}
    first = run_table(datasets, ["prev", "ot"], tiny_run_config, max_workers=1)
    second = run_table(datasets, ["prev", "ot"], tiny_run_config, max_workers=1)
    assert [r.emd for r in first.records] == [r.emd for r in second.records]
    assert [(r.method, r.seed) for r in first.records] == [("prev", 0), ("ot", 0)]
    stream = zlib.crc32(b"arch:0.5")
    eval_seed = int(np.random.default_rng([0, stream]).integers(2**31))
    expected = holdout_eval(arch, 0.5, BaselinePredictor("prev"), tiny_run_config.eval.n_eval, eval_seed)
    assert first.records[0].emd == expected
    assert first.cell("arch", "prev").emd == expected
    assert first.config["eval.n_eval"] == "50"


def test_flow_cell_trains_and_scores(arch, tiny_run_config):
    report = run_table({"arch": arch}, ["base"], tiny_run_config, max_workers=1)
    (record,) = report.records
    assert not record.failed
    assert record.emd > 0 and record.mse > 0
    assert record.wall_time_s > 0


def test_failed_cell_is_recorded(arch, tiny_run_config):
    record = evaluate_cell(EvalCell("arch", "prev", arch, 0.0, 0, tiny_run_config, baseline="prev"))
    assert record.failed
    assert record.error.startswith("HoldoutError")
    assert math.isnan(record.emd)


@pytest.mark.parametrize(
    "target, error",
    [
        ("services.evaluation.holdout_eval", FloatingPointError("overflow encountered in exp")),
        ("services.evaluation.trajectory_mse", ValueError("array must not contain infs or NaNs")),
    ],
)
def test_stray_numerical_failure_becomes_nan_cell(arch, tiny_run_config, mocker, target, error):
    mocker.patch(target, side_effect=error)
    record = evaluate_cell(EvalCell("arch", "prev", arch, 0.5, 0, tiny_run_config, baseline="prev"))
    assert record.failed
    assert record.error.startswith(type(error).__name__)
    assert math.isnan(record.emd) and math.isnan(record.mse)


def test_stray_failure_does_not_stop_the_table(arch, tiny_run_config, mocker):
    real = holdout_eval

    def flaky(data, held_out, predictor, *args):
        if isinstance(predictor, BaselinePredictor) and predictor.kind == "next":
            raise FloatingPointError("overflow encountered in exp")
        return real(data, held_out, predictor, *args)

    mocker.patch("services.evaluation.holdout_eval", side_effect=flaky)
    report = run_table({"arch": arch}, ["prev", "next"], tiny_run_config, max_workers=1)
    prev, nxt = report.records
    assert not prev.failed and prev.emd > 0
    assert nxt.failed and math.isnan(nxt.emd)


def test_summary_skips_failed_seeds():
    report = EvalReport(
        records=[
            EvalRecord(dataset="d", method="m", held_out_time=0.5, seed=0, emd=1.0, mse=2.0),
            EvalRecord(dataset="d", method="m", held_out_time=0.5, seed=1, emd=3.0),
            EvalRecord(dataset="d", method="m", held_out_time=0.5, seed=2, error="SolverError: boom"),
        ]
    )
    cell = report.cell("d", "m")
    assert cell.emd == 2.0 and cell.mse == 2.0
    assert cell.n_seeds == 2 and cell.failed == 1
    with pytest.raises(KeyError):
        report.cell("d", "other")


def test_expand_grid_is_sorted_cartesian_product():
    combos = expand_grid({"b": (1, 2), "a": (0.5,)})
    assert combos == [{"a": "0.5", "b": "1"}, {"a": "0.5", "b": "2"}]


def test_grid_search_names_methods_by_assignment(arch, tiny_run_config):
    cfg = tiny_run_config.model_copy(update={"iterations": 0})
    report = grid_search(arch, 0.5, cfg, {"regularizer.lambda_v": (0.0, 0.5)}, max_workers=1)
    assert [r.method for r in report.records] == ["lambda_v=0.0", "lambda_v=0.5"]
    assert not any(r.failed for r in report.records)
