"""
Growth model: regression of a growth network onto unbalanced-transport growth rates,
and the log-mass bookkeeping that applies the frozen network between measured times.
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from autodiff import Tape, ops
from config.config import settings
from exceptions import InsufficientPointsError, NonFiniteInputError
from models.dataset import TimeMap, TimeSeriesDataset
from models.networks import DynamicsNet, GrowthNet, evaluate_g, init_growth
from schemas.solver import SolverConfig
from schemas.training import GrowthTrainConfig
from schemas.transport import UnbalancedOTConfig
from services.ode import AugmentedState, Track, integrate
from services.optim import Adam
from services.transport import growth_targets, log_growth_range, unbalanced_sinkhorn

logger = logging.getLogger(f"{settings.app_name}.{__name__}")

RELATIVE_SE_LIMIT = 0.05


@dataclass(frozen=True, eq=False)
class GrowthTrainingSet:
    """
    Positive examples ``(x, t) -> rate`` from every consecutive pair of timepoints.

    Negative examples are drawn per batch in :func:`fit_growth`: an equal number of points
    uniform on ``[-1, 1]^d`` with target 1.
    """

    x: np.ndarray
    t: np.ndarray
    target: np.ndarray
    ranges: dict[float, tuple[float, float, float]] = field(default_factory=dict)

    @property
    def size(self) -> int:
        return self.x.shape[0]


@dataclass
class GrowthFit:
    net: GrowthNet
    loss_trace: list[float]
    examples: GrowthTrainingSet

    @property
    def final_mse(self) -> float:
        return self.loss_trace[-1] if self.loss_trace else math.nan


def _pair_targets(args) -> tuple[np.ndarray, np.ndarray]:
    source, target, ot_cfg = args
    coupling = unbalanced_sinkhorn(source, target, ot_cfg)
    return source, growth_targets(coupling)


def growth_targets_for_dataset(
    data: TimeSeriesDataset,
    ot_cfg: UnbalancedOTConfig,
    time_map: TimeMap | None = None,
    max_points: int = 2000,
    seed: int = 0,
) -> GrowthTrainingSet:
    """
    Growth-rate targets for the source points of every consecutive pair of training timepoints.

    Pairs are solved in parallel threads. Timepoints larger than ``max_points`` are subsampled.
    """
    time_map = time_map or TimeMap.from_labels(data.labels)
    labels = [label for label in time_map.training_labels if label in data.labels]
    if len(labels) < 2:
        raise InsufficientPointsError("growth targets need at least two timepoints")
    rng = np.random.default_rng(seed)
    clouds = []
    for label in labels:
        points = data.points_at(label)
        if points.shape[0] > max_points:
            points = points[np.sort(rng.choice(points.shape[0], max_points, replace=False))]
        clouds.append(points)
    jobs = [(clouds[i], clouds[i + 1], ot_cfg) for i in range(len(labels) - 1)]
    with ThreadPoolExecutor(max_workers=max(1, min(settings.max_workers, len(jobs)))) as pool:
        results = list(pool.map(_pair_targets, jobs))

    xs, ts, targets, ranges = [], [], [], {}
    for label, (source, rates) in zip(labels, results):
        log_growth_range(rates, f"t={label:g}")
        xs.append(source)
        ts.append(np.full(source.shape[0], time_map.time_of(label)))
        targets.append(rates)
        q = np.quantile(rates, [0.0, 0.5, 1.0])
        ranges[label] = (float(q[0]), float(q[1]), float(q[2]))
    return GrowthTrainingSet(np.vstack(xs), np.concatenate(ts), np.concatenate(targets), ranges)


def fit_growth(
    data: TimeSeriesDataset,
    ot_cfg: UnbalancedOTConfig,
    train_cfg: GrowthTrainConfig,
    time_map: TimeMap | None = None,
) -> GrowthFit:
    """
    Train a growth network by mean squared error on positives plus an equal batch of negatives.

    :param data: dataset with at least two timepoints.
    :type data: TimeSeriesDataset
    :param ot_cfg: unbalanced transport settings producing the targets.
    :type ot_cfg: UnbalancedOTConfig
    :param train_cfg: regression settings.
    :type train_cfg: GrowthTrainConfig
    :param time_map: label to model time assignment; index mode over the data labels by default.
    :type time_map: TimeMap | None
    :return: trained network, per-iteration loss and the training targets.
    :rtype: GrowthFit
    """
    if data.n_timepoints < 2:
        raise InsufficientPointsError("growth model needs at least two timepoints")
    examples = growth_targets_for_dataset(data, ot_cfg, time_map, train_cfg.ot_points, train_cfg.seed)
    net = init_growth(data.dim, train_cfg.seed)
    params = net.parameters()
    optimizer = Adam(
        [p.shape for p in params], train_cfg.learning_rate, weight_decay=train_cfg.weight_decay
    )
    rng = np.random.default_rng(train_cfg.seed)
    batch = min(train_cfg.batch_size, examples.size)
    loss_trace = []
    for iteration in range(train_cfg.iterations):
        idx = rng.choice(examples.size, size=batch, replace=examples.size < batch)
        negatives = rng.uniform(-1.0, 1.0, size=(batch, data.dim))
        x = np.vstack([examples.x[idx], negatives])
        t = np.concatenate([examples.t[idx], examples.t[idx]])
        target = np.concatenate([examples.target[idx], np.ones(batch)])

        tape = Tape()
        leaves = [tape.leaf(p) for p in params]
        prediction = evaluate_g(net, x, t, leaves)
        loss = ops.reduce_mean(ops.square(ops.sub(prediction, target)))
        grads = tape.backward(loss).of(leaves)
        params = optimizer.step(params, grads)
        loss_trace.append(float(loss.value))
        if iteration % 100 == 0:
            logger.debug(f"growth fit iteration {iteration}: mse {loss_trace[-1]:.4g}")
    net = net.with_parameters(params)
    if loss_trace:
        logger.info(f"growth fit finished: mse {loss_trace[-1]:.4g}")
    return GrowthFit(net, loss_trace, examples)


def mass_update(logM_prev, trace_integral, growth: GrowthNet | None, x_prev, t_prev: float):
    """
    ``log M_i(x) = log M_{i-1}(x_prev) - integral(Tr df/dx) + log G(x_prev, t_prev)``.

    Without a growth net this is the plain log-density recursion.

    :param logM_prev: log-mass before the hop (array or Var).
    :param trace_integral: integral of the Jacobian trace over the hop.
    :param growth: frozen growth network or None.
    :type growth: GrowthNet | None
    :param x_prev: positions at the lower end of the hop.
    :param t_prev: model time at the lower end of the hop.
    :type t_prev: float
    :return: updated log-mass.
    """
    out = ops.sub(logM_prev, trace_integral)
    if growth is not None:
        out = ops.add(out, ops.log(evaluate_g(growth, x_prev, t_prev)))
    if not np.all(np.isfinite(ops.value(out))):
        raise NonFiniteInputError("log-mass update produced a non-finite value")
    return out


def log_mass(
    net: DynamicsNet,
    x: np.ndarray,
    time: float,
    measured_times: list[float],
    cfg: SolverConfig,
    growth: GrowthNet | None = None,
) -> np.ndarray:
    """
    Log-mass of points observed at ``time``: integrate back through the measured times
    below it to the base Gaussian, applying growth at every measured time above 0.
    """
    lower = sorted(t for t in measured_times if 0.0 < t < time)
    stops = [time, *reversed(lower), 0.0]
    state = AugmentedState.start(np.asarray(x, dtype=np.float64))
    offset = np.zeros(state.size)
    for t_upper, t_lower in zip(stops, stops[1:]):
        hop = integrate(net, AugmentedState.start(state.x), t_upper, t_lower, cfg, Track.LOGP)
        offset = mass_update(offset, hop.logp, growth if t_lower > 0.0 else None, hop.x, t_lower)
        state = hop
    d = state.dim
    base = -0.5 * np.sum(np.square(state.x), axis=1) - 0.5 * d * math.log(2.0 * math.pi)
    return base + offset


@dataclass(frozen=True)
class MassNormalization:
    label: float
    time: float
    z: float
    standard_error: float

    @property
    def relative_se(self) -> float:
        return self.standard_error / abs(self.z) if self.z else math.inf

    @property
    def insufficient(self) -> bool:
        return self.relative_se > RELATIVE_SE_LIMIT


def normalize_mass(
    net: DynamicsNet,
    growth: GrowthNet | None,
    time_map: TimeMap,
    n_mc_samples: int,
    seed: int,
    cfg: SolverConfig | None = None,
) -> list[MassNormalization]:
    """
    Monte-Carlo total mass per measured timepoint.

    Base samples are pushed forward by the flow; the mass at ``t_i`` is the mean product of
    growth rates met at the measured times ``t_1 .. t_{i-1}`` (the flow Jacobian cancels).

    :return: one estimate per training label with its standard error; estimates whose
        relative standard error exceeds 5% are flagged and logged.
    :rtype: list[MassNormalization]
    """
    cfg = cfg or SolverConfig(method="dopri5")
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n_mc_samples, net.dim))
    weights = np.ones(n_mc_samples)
    t_current = 0.0
    results = []
    for label in time_map.training_labels:
        t_next = time_map.time_of(label)
        if results and growth is not None:
            weights = weights * ops.value(evaluate_g(growth, x, t_current))
        state = integrate(net, AugmentedState.start(x), t_current, t_next, cfg, Track.NONE)
        x = ops.value(state.x)
        t_current = t_next
        z = float(np.mean(weights))
        se = float(np.std(weights, ddof=1) / math.sqrt(n_mc_samples)) if n_mc_samples > 1 else math.inf
        normalization = MassNormalization(label, t_next, z, se)
        if normalization.insufficient:
            logger.warning(
                f"mass normalization at t={label:g} has relative standard error "
                f"{normalization.relative_se:.1%}; draw more samples"
            )
        results.append(normalization)
    return results
