import numpy as np
import pytest

from exceptions import ConfigError, HoldoutError
from models.dataset import TimeMap
from models.networks import init_dynamics
from schemas.regularizer import RegularizerConfig
from schemas.solver import SolverConfig
from schemas.training import TrainConfig
from services.datagen import gen_arch, gen_gaussian_shift
from services.optim import Adam
from services.trainer import (
    build_time_map,
    chained_vs_direct_nll,
    make_batch,
    regularizer_for_method,
    sample,
    train,
    trajectory,
)

from helpers import constant_field, linear_field, zero_field

FAST_SOLVER = {"method": "rk4", "step_size": 0.25}


def test_adam_first_step_moves_by_learning_rate():
    params = [np.array([1.0, -2.0]), np.array([[0.5]])]
    grads = [np.array([3.0, -0.1]), np.array([[-7.0]])]
    optimizer = Adam([p.shape for p in params], learning_rate=0.01)
    updated = optimizer.step(params, grads)
    np.testing.assert_allclose(updated[0], [0.99, -1.99], rtol=1e-6)
    np.testing.assert_allclose(updated[1], [[0.51]], rtol=1e-6)
    np.testing.assert_array_equal(params[0], [1.0, -2.0])


def test_adam_minimizes_quadratic():
    target = np.array([1.0, -3.0, 2.0])
    params = [np.zeros(3)]
    optimizer = Adam([(3,)], learning_rate=0.05)
    for _ in range(2000):
        params = optimizer.step(params, [2.0 * (params[0] - target)])
    np.testing.assert_allclose(params[0], target, atol=1e-3)


def test_weight_decay_shrinks_parameters():
    optimizer = Adam([(1,)], learning_rate=0.1, weight_decay=1.0)
    (updated,) = optimizer.step([np.array([2.0])], [np.array([0.0])])
    assert updated[0] < 2.0


def test_time_map_keeps_held_out_slot():
    data = gen_arch(20, seed=0)
    time_map = build_time_map(data, TrainConfig(), held_out=0.5)
    assert time_map.times == (1.0, 2.0, 3.0)
    assert time_map.training_labels == (0.0, 1.0)
    assert time_map.final_time == 3.0
    explicit = build_time_map(data, TrainConfig(time_mode="explicit"))
    assert explicit.times == (1.0, 1.5, 2.0)
    with pytest.raises(HoldoutError):
        build_time_map(data, TrainConfig(), held_out=0.25)


def test_batch_draws_every_training_timepoint(rng):
    data = gen_arch(30, seed=1)
    time_map = TimeMap.from_labels(data.labels, held_out=0.5)
    batch = make_batch(data, time_map, 12, rng)
    assert [g.time for g in batch.groups] == [1.0, 3.0]
    assert all(g.points.shape == (12, 2) and g.velocities.shape == (12, 2) for g in batch.groups)
    assert 0.0 < batch.density_time < 3.0
    oversized = make_batch(data, time_map, 50, rng)
    assert oversized.groups[0].points.shape == (50, 2)


def test_zero_iterations_return_initial_network():
    data = gen_gaussian_shift(50, seed=0)
    net = init_dynamics(2, seed=0, hidden=(8,))
    trained, report = train(data, TrainConfig(iterations=0, solver=FAST_SOLVER), net=net)
    assert report.records == []
    for before, after in zip(net.parameters(), trained.parameters()):
        np.testing.assert_array_equal(before, after)


def test_training_reduces_loss():
    data = gen_gaussian_shift(300, seed=0)
    cfg = TrainConfig(iterations=40, batch_size=64, learning_rate=1e-2, solver=FAST_SOLVER, log_every=0)
    _, report = train(data, cfg, net=init_dynamics(2, seed=0, hidden=(16, 16)))
    assert len(report.records) == 40
    assert report.n_parameters > 0 and report.wall_time_s > 0
    assert np.mean(report.totals[-5:]) < np.mean(report.totals[:5])


def test_training_is_deterministic():
    data = gen_arch(40, seed=2)
    cfg = TrainConfig(
        iterations=3,
        batch_size=8,
        solver=FAST_SOLVER,
        regularizer=RegularizerConfig(lambda_e=0.1, lambda_d=0.1, lambda_v=0.5),
    )
    first, first_report = train(data, cfg, held_out=0.5, net=init_dynamics(2, seed=0, hidden=(8,)))
    second, second_report = train(data, cfg, held_out=0.5, net=init_dynamics(2, seed=0, hidden=(8,)))
    assert first_report.totals == second_report.totals
    for a, b in zip(first.parameters(), second.parameters()):
        np.testing.assert_array_equal(a, b)


def test_growth_flag_needs_growth_network():
    cfg = TrainConfig(iterations=1, regularizer=RegularizerConfig(growth_enabled=True))
    with pytest.raises(ConfigError):
        train(gen_arch(10, seed=0), cfg)


def test_sample_at_zero_is_base_draw():
    net = init_dynamics(2, seed=0, hidden=(4,))
    expected = np.random.default_rng(3).standard_normal((7, 2))
    np.testing.assert_array_equal(sample(net, 7, 0.0, SolverConfig(), seed=3), expected)


def test_sample_pushes_base_through_flow():
    z = np.random.default_rng(4).standard_normal((5, 2))
    out = sample(constant_field([1.0, -1.0]), 5, 2.0, SolverConfig(), seed=4)
    np.testing.assert_allclose(out, z + np.array([2.0, -2.0]), atol=1e-12)


def test_trajectory_runs_forwards_and_backwards():
    net = constant_field([0.5, 0.0])
    path = trajectory(net, np.array([1.0, 1.0]), [2.0, 1.0, 0.0], SolverConfig())
    np.testing.assert_allclose(path[:, 0], [1.0, 0.5, 0.0], atol=1e-12)


def test_chained_and_direct_nll_agree_without_growth():
    data = gen_gaussian_shift(40, seed=0)
    data = type(data)((1.0, 2.0), (data.points[0], data.points[0] + 1.0), name="two")
    time_map = TimeMap.from_labels(data.labels)
    cfg = SolverConfig(method="dopri5", rtol=1e-9, atol=1e-9)
    comparisons = chained_vs_direct_nll(linear_field([[0.1, 0.2], [-0.2, 0.0]]), data, time_map, cfg, 20, seed=0)
    assert [c.time for c in comparisons] == [1.0, 2.0]
    for comparison in comparisons:
        assert comparison.gap == pytest.approx(0.0, abs=1e-6)
    zero = chained_vs_direct_nll(zero_field(2), data, time_map, cfg, 20, seed=0)
    assert all(c.gap == 0.0 for c in zero)


@pytest.mark.parametrize(
    "method, expected",
    [
        ("base", {"lambda_e": 0.0, "lambda_j": 0.0, "lambda_d": 0.0, "lambda_v": 0.0, "growth_enabled": False}),
        ("base+v", {"lambda_v": 1.0}),
        ("base+e", {"lambda_e": 0.1, "lambda_j": 1.0}),
        ("base+d+g", {"lambda_d": 0.1, "growth_enabled": True}),
        ("Base+E+D+V", {"lambda_e": 0.1, "lambda_d": 0.1, "lambda_v": 1.0}),
    ],
)
def test_method_names_map_to_regularizers(method, expected):
    cfg = regularizer_for_method(method)
    for key, value in expected.items():
        assert getattr(cfg, key) == value


def test_method_keeps_configured_weights():
    base = RegularizerConfig(lambda_v=0.3, lambda_e=0.05, lambda_j=0.5)
    cfg = regularizer_for_method("base+v", base)
    assert cfg.lambda_v == 0.3 and cfg.lambda_e == 0.0 and cfg.lambda_j == 0.0
    assert regularizer_for_method("base+e", base).lambda_j == 0.5


@pytest.mark.parametrize("method", ["ot", "base+x", "v+base"])
def test_bad_method_names(method):
    with pytest.raises(ConfigError):
        regularizer_for_method(method)
