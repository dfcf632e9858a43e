"""
Flow training, sampling and trajectories.
"""
import logging
import time
from dataclasses import dataclass

import numpy as np

from autodiff import Tape
from config.config import settings
from exceptions import ConfigError
from models.dataset import TimeMap, TimeSeriesDataset
from models.networks import DynamicsNet, GrowthNet, init_dynamics
from schemas.regularizer import RegularizerConfig
from schemas.solver import SolverConfig
from schemas.training import IterationRecord, TrainConfig, TrainReport
from services.growth import log_mass
from services.ode import AugmentedState, Track, integrate, integrate_path
from services.optim import Adam
from services.regularizers import DatasetIndex, LossBatch, LossGroup, total_loss

logger = logging.getLogger(f"{settings.app_name}.{__name__}")


def build_time_map(data: TimeSeriesDataset, cfg: TrainConfig, held_out: float | None = None) -> TimeMap:
    return TimeMap.from_labels(data.labels, cfg.time_mode, held_out)


def make_batch(
    data: TimeSeriesDataset,
    time_map: TimeMap,
    batch_size: int,
    rng: np.random.Generator,
    index: DatasetIndex | None = None,
) -> LossBatch:
    """
    Draw ``batch_size`` points (with their velocities) from every training timepoint and a
    density time uniform on ``(0, t_k)``.
    """
    groups = []
    for label in time_map.training_labels:
        points = data.points_at(label)
        idx = rng.choice(points.shape[0], size=batch_size, replace=points.shape[0] < batch_size)
        velocities = data.velocities_at(label)
        groups.append(
            LossGroup(time_map.time_of(label), points[idx], None if velocities is None else velocities[idx])
        )
    density_time = float(rng.uniform(0.0, time_map.final_time))
    return LossBatch(tuple(groups), density_time, index)


def _log_record(record: IterationRecord) -> None:
    logger.info(
        f"iteration {record.iteration}: total {record.total:.5g} "
        f"(nll {record.nll:.5g}, energy {record.energy:.5g}, "
        f"density {record.density:.5g}, velocity {record.velocity:.5g})"
    )


def train(
    data: TimeSeriesDataset,
    cfg: TrainConfig,
    growth: GrowthNet | None = None,
    held_out: float | None = None,
    net: DynamicsNet | None = None,
) -> tuple[DynamicsNet, TrainReport]:
    """
    Train the velocity field with the chained backward objective and Adam.

    :param data: measured timepoints; labels are mapped to model times 1..k (base Gaussian at 0).
    :type data: TimeSeriesDataset
    :param cfg: optimizer, batching, loss and solver settings.
    :type cfg: TrainConfig
    :param growth: frozen growth network, required when ``cfg.regularizer.growth_enabled``.
    :type growth: GrowthNet | None
    :param held_out: label excluded from training; it keeps its slot in the time map.
    :type held_out: float | None
    :param net: starting network, a fresh one seeded by ``cfg.seed`` when omitted.
    :type net: DynamicsNet | None
    :return: trained network and one loss record per iteration.
    :rtype: tuple[DynamicsNet, TrainReport]
    :raises DivergentLossError: a loss term became non-finite; names the term and iteration.
    """
    regularizer = cfg.regularizer
    if regularizer.growth_enabled and growth is None:
        raise ConfigError("regularizer.growth_enabled needs a fitted growth network")
    time_map = build_time_map(data, cfg, held_out)
    net = net or init_dynamics(data.dim, cfg.seed)
    index = None
    if regularizer.lambda_d > 0:
        exclude = time_map.held_out
        index = DatasetIndex(data.pooled(exclude=exclude))
    rng = np.random.default_rng(cfg.seed)
    params = net.parameters()
    optimizer = Adam([p.shape for p in params], cfg.learning_rate, weight_decay=cfg.weight_decay)
    report = TrainReport(seed=cfg.seed, n_parameters=net.n_parameters)
    started = time.perf_counter()
    for iteration in range(cfg.iterations):
        batch = make_batch(data, time_map, cfg.batch_size, rng, index)
        tape = Tape()
        leaves = [tape.leaf(p) for p in params]
        breakdown = total_loss(
            batch, net, regularizer, growth, params=leaves, solver=cfg.solver, iteration=iteration
        )
        grads = tape.backward(breakdown.total).of(leaves)
        params = optimizer.step(params, grads)
        record = IterationRecord(
            iteration=iteration,
            total=breakdown.total_value,
            nll=breakdown.nll,
            energy=breakdown.energy,
            density=breakdown.density,
            velocity=breakdown.velocity,
            degenerate_velocity=breakdown.degenerate_velocity,
        )
        report.records.append(record)
        if cfg.log_every and iteration % cfg.log_every == 0:
            _log_record(record)
    report.wall_time_s = time.perf_counter() - started
    logger.info(f"trained {cfg.iterations} iterations in {report.wall_time_s:.1f}s")
    return net.with_parameters(params), report


def sample(net: DynamicsNet, n: int, t_target: float, cfg: SolverConfig, seed: int) -> np.ndarray:
    """
    Draw ``n`` base Gaussian points and push them to ``t_target``.

    :return: points ``(n, d)``; raw base samples when ``t_target`` is 0.
    :rtype: np.ndarray
    """
    z = np.random.default_rng(seed).standard_normal((n, net.dim))
    if t_target == 0.0:
        return z
    state = integrate(net, AugmentedState.start(z), 0.0, t_target, cfg, Track.NONE)
    return np.array(state.x)


def trajectory(net: DynamicsNet, start: np.ndarray, times: list[float], cfg: SolverConfig) -> np.ndarray:
    """Positions of one particle (or a batch) at every time, forwards or backwards from ``times[0]``."""
    return integrate_path(net, start, times, cfg)


@dataclass(frozen=True)
class NllComparison:
    label: float
    time: float
    chained: float
    direct: float

    @property
    def gap(self) -> float:
        return self.chained - self.direct


def chained_vs_direct_nll(
    net: DynamicsNet,
    data: TimeSeriesDataset,
    time_map: TimeMap,
    cfg: SolverConfig,
    n: int,
    seed: int,
    growth: GrowthNet | None = None,
) -> list[NllComparison]:
    """
    Compounded-error diagnostic: NLL of each timepoint from the chained backward pass
    (stopping at every measured time) against a single direct integration to the base.
    """
    rng = np.random.default_rng(seed)
    measured = [time_map.time_of(label) for label in time_map.training_labels]
    comparisons = []
    for label in time_map.training_labels:
        points = data.sample(label, min(n, data.points_at(label).shape[0]), rng)
        t = time_map.time_of(label)
        chained = -float(np.mean(log_mass(net, points, t, measured, cfg, growth)))
        direct = -float(np.mean(log_mass(net, points, t, [], cfg)))
        comparisons.append(NllComparison(label, t, chained, direct))
        logger.info(f"t={label:g}: chained nll {chained:.4f}, direct nll {direct:.4f}")
    return comparisons


def regularizer_for_method(method: str, base: RegularizerConfig | None = None) -> RegularizerConfig:
    """
    Regularizer flags for a method name such as ``base``, ``base+v`` or ``base+e+d+v+g``.

    Enabled terms keep their weights from ``base`` (or the defaults below when zero there).
    """
    base = base or RegularizerConfig()
    defaults = {"e": ("lambda_e", 0.1), "d": ("lambda_d", 0.1), "v": ("lambda_v", 1.0)}
    parts = method.lower().split("+")
    if parts[0] != "base":
        raise ConfigError(f"method '{method}' must start with 'base'")
    updates = {"lambda_e": 0.0, "lambda_j": 0.0, "lambda_d": 0.0, "lambda_v": 0.0, "growth_enabled": False}
    for flag in parts[1:]:
        if flag == "g":
            updates["growth_enabled"] = True
            continue
        if flag not in defaults:
            raise ConfigError(f"unknown method flag '{flag}' in '{method}'")
        key, default = defaults[flag]
        updates[key] = getattr(base, key) or default
        if flag == "e":
            updates["lambda_j"] = base.lambda_j or 1.0
    return base.model_copy(update=updates)
