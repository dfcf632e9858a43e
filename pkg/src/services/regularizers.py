"""
Loss terms of flow training and their assembly.

- :func:`energy_loss`   weighted path energy and Jacobian Frobenius accumulators.
- :func:`density_loss`  hinge on the k nearest pooled data points, pulling flow positions onto the data.
- :func:`velocity_loss` 1 - cosine between the field and measured velocities.
- :func:`total_loss`    the chained backward pass from the last timepoint to the base Gaussian,
  producing the negative log-likelihood and every enabled penalty on one tape.
"""
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from autodiff import ops
from config.config import settings
from exceptions import DimensionError, DivergentLossError, InsufficientPointsError, NegativeAccumulatorError
from models.networks import DynamicsNet, GrowthNet
from schemas.regularizer import RegularizerConfig
from schemas.solver import SolverConfig
from services.growth import mass_update
from services.ode import AugmentedState, Track, integrate

logger = logging.getLogger(f"{settings.app_name}.{__name__}")

ACCUMULATOR_SLACK = 1e-12
TIE_EXTRA = 8


def energy_loss(energy_acc, jacnorm_acc, cfg: RegularizerConfig):
    """
    ``lambda_e * energy + lambda_j * jacnorm``.

    :raises NegativeAccumulatorError: an accumulator is negative, which means the
        integration direction bookkeeping upstream is broken.
    """
    for name, acc in (("energy", energy_acc), ("jacnorm", jacnorm_acc)):
        if np.any(ops.value(acc) < -ACCUMULATOR_SLACK):
            raise NegativeAccumulatorError(f"{name} accumulator is negative: {float(np.min(ops.value(acc)))}")
    return ops.add(ops.scalar_mul(energy_acc, cfg.lambda_e), ops.scalar_mul(jacnorm_acc, cfg.lambda_j))


class DatasetIndex:
    """Immutable k-NN index over the points of all timepoints pooled together."""

    def __init__(self, points: np.ndarray) -> None:
        points = np.array(points, dtype=np.float64)
        if points.ndim != 2:
            raise DimensionError(f"pooled points must be (n, d), got {points.shape}")
        points.setflags(write=False)
        self.points = points
        self._tree = cKDTree(points)

    @property
    def size(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def neighbors(self, x: np.ndarray, k: int) -> np.ndarray:
        """Indices ``(B, k)`` of the k nearest points; equal distances resolve to the smaller index."""
        if self.size < k:
            raise InsufficientPointsError(f"density penalty needs at least k={k} pooled points, got {self.size}")
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        k_query = min(self.size, k + TIE_EXTRA)
        distances, indices = self._tree.query(x, k=k_query)
        distances = distances.reshape(x.shape[0], k_query)
        indices = indices.reshape(x.shape[0], k_query)
        out = np.empty((x.shape[0], k), dtype=np.int64)
        for row in range(x.shape[0]):
            order = np.lexsort((indices[row], distances[row]))
            out[row] = indices[row, order[:k]]
        return out


def density_loss(x, t_d: float, index: DatasetIndex, cfg: RegularizerConfig):
    """
    Sum over the k nearest pooled points z of ``max(0, |x - z| - h)``.

    Neighbors are chosen from the current values and held fixed, so gradients flow
    through ``x`` only.

    :param x: flow positions at time ``t_d``, one point ``(d,)`` or a batch ``(B, d)``.
    :param t_d: model time of the positions.
    :type t_d: float
    :param index: pooled data of all timepoints.
    :type index: DatasetIndex
    :return: penalty per point (scalar for a single point).
    """
    x_shape = ops.shape(x)
    single = len(x_shape) == 1
    if single:
        x = ops.reshape(x, (1, x_shape[0]))
    batch, d = ops.shape(x)
    if d != index.dim:
        raise DimensionError(f"positions have dimension {d}, data has {index.dim}")
    neighbor_idx = index.neighbors(ops.value(x), cfg.k)
    anchors = index.points[neighbor_idx]
    distances = ops.norm(ops.sub(ops.reshape(x, (batch, 1, d)), anchors))
    hinge = ops.leaky_relu(ops.sub(distances, cfg.h), slope=0.0)
    per_point = ops.reduce_sum(hinge, axis=-1)
    logger.debug(f"density penalty at t={t_d:.4f}: mean {float(np.mean(ops.value(per_point))):.4g}")
    return ops.reshape(per_point, ()) if single else per_point


def degenerate_rows(f_val, v_hat) -> np.ndarray:
    """Mask of rows where either vector has zero norm."""
    f_norm = np.linalg.norm(np.atleast_2d(ops.value(f_val)), axis=-1)
    v_norm = np.linalg.norm(np.atleast_2d(np.asarray(v_hat, dtype=np.float64)), axis=-1)
    return (f_norm == 0.0) | (v_norm == 0.0)


def velocity_loss(f_val, v_hat):
    """
    ``1 - cos(f_val, v_hat)`` per row, in [0, 2].

    Rows where either vector has zero norm contribute 0; count them with :func:`degenerate_rows`.
    """
    v_hat = np.asarray(v_hat, dtype=np.float64)
    f_shape = ops.shape(f_val)
    single = len(f_shape) == 1
    if single:
        f_val = ops.reshape(f_val, (1, f_shape[0]))
        v_hat = v_hat.reshape(1, -1)
    if ops.shape(f_val) != v_hat.shape:
        raise DimensionError(f"field shape {ops.shape(f_val)} does not match velocity shape {v_hat.shape}")
    bad = degenerate_rows(f_val, v_hat)
    keep = (~bad).astype(np.float64)
    safe_f = ops.add(ops.mul(f_val, keep[:, None]), (1.0 - keep)[:, None])
    safe_v = v_hat * keep[:, None] + (1.0 - keep)[:, None]
    loss = ops.mul(ops.sub(1.0, ops.cosine_similarity(safe_f, safe_v)), keep)
    return ops.reshape(loss, ()) if single else loss


@dataclass(frozen=True, eq=False)
class LossGroup:
    """Measured points of one training timepoint."""

    time: float
    points: np.ndarray
    velocities: np.ndarray | None = None


@dataclass(frozen=True, eq=False)
class LossBatch:
    """
    One training batch: groups sorted by model time, the density time and the pooled index.

    :ivar groups: measured points per training timepoint, ascending in time.
    :ivar density_time: interpolated time at which the density penalty is evaluated.
    :ivar index: pooled data for the density penalty (needed when ``lambda_d > 0``).
    """

    groups: tuple[LossGroup, ...]
    density_time: float | None = None
    index: DatasetIndex | None = None


@dataclass
class LossBreakdown:
    """Total loss and its weighted terms; the terms add up to the total."""

    total: object
    nll: float = 0.0
    energy: float = 0.0
    density: float = 0.0
    velocity: float = 0.0
    degenerate_velocity: int = 0
    terms: dict = field(default_factory=dict)

    @property
    def total_value(self) -> float:
        return float(ops.value(self.total))


def base_log_density(z):
    """Log density of the standard Gaussian at each row of ``z``."""
    d = ops.shape(z)[-1]
    quadratic = ops.scalar_mul(ops.reduce_sum(ops.square(z), axis=-1), -0.5)
    return ops.add(quadratic, -0.5 * d * math.log(2.0 * math.pi))


def _tracks(cfg: RegularizerConfig) -> Track:
    track = Track.LOGP
    if cfg.needs_energy:
        track |= Track.ENERGY
    if cfg.needs_jacnorm:
        track |= Track.JACNORM
    return track


def _append_rows(state: AugmentedState | None, offset, points: np.ndarray):
    zeros = np.zeros(points.shape[0])
    if state is None:
        return AugmentedState(points, zeros, zeros, zeros), zeros
    state = AugmentedState(
        ops.concat([state.x, points], axis=0),
        ops.concat([state.logp, zeros], axis=0),
        ops.concat([state.energy, zeros], axis=0),
        ops.concat([state.jacnorm, zeros], axis=0),
    )
    return state, ops.concat([offset, zeros], axis=0)


def _check_term(name: str, term, iteration: int | None) -> float:
    number = float(np.sum(ops.value(term)))
    if not math.isfinite(number):
        logger.error(f"loss term '{name}' diverged: {number}")
        raise DivergentLossError(name, iteration, number)
    return number


def total_loss(
    batch: LossBatch,
    net: DynamicsNet,
    cfg: RegularizerConfig,
    growth: GrowthNet | None = None,
    *,
    params: list | None = None,
    solver: SolverConfig | None = None,
    iteration: int | None = None,
) -> LossBreakdown:
    """
    Assemble the training objective with one backward pass through all timepoints.

    Starting from the last group, the current rows are integrated back to the previous
    measured time, the group measured there is appended, and so on down to the base
    Gaussian at time 0. Each hop contributes its trace integral (and, between measured
    times, the log growth rate of the frozen growth net) to the log-mass of every row.

    :param batch: training groups and density settings.
    :type batch: LossBatch
    :param net: velocity field; its parameters may be replaced by taped leaves via ``params``.
    :type net: DynamicsNet
    :param cfg: loss weights.
    :type cfg: RegularizerConfig
    :param growth: frozen growth net, used when ``cfg.growth_enabled``.
    :type growth: GrowthNet | None
    :return: total loss (a Var when ``params`` are taped) and per-term values.
    :rtype: LossBreakdown
    :raises DivergentLossError: a term is NaN or infinite.
    """
    solver = solver or SolverConfig()
    groups = sorted(batch.groups, key=lambda g: g.time)
    if not groups:
        raise DimensionError("loss batch has no groups")
    if any(g.time <= 0.0 for g in groups):
        raise DimensionError("measured model times must be positive; the base Gaussian sits at 0")
    use_growth = cfg.growth_enabled and growth is not None
    use_density = cfg.lambda_d > 0 and batch.density_time is not None
    if use_density and batch.index is None:
        raise DimensionError("density penalty needs a pooled dataset index")
    track = _tracks(cfg)

    sizes = [g.points.shape[0] for g in groups]
    state, offset = None, None
    density_positions = None
    for position in range(len(groups) - 1, -1, -1):
        group = groups[position]
        state, offset = _append_rows(state, offset, group.points)
        t_upper = group.time
        t_lower = groups[position - 1].time if position > 0 else 0.0
        hop_start = AugmentedState(state.x, np.zeros(state.size), state.energy, state.jacnorm)
        if use_density and t_lower < batch.density_time <= t_upper:
            middle = integrate(net, hop_start, t_upper, batch.density_time, solver, track, params)
            density_positions = middle.x
            after = integrate(net, middle, batch.density_time, t_lower, solver, track, params)
        else:
            after = integrate(net, hop_start, t_upper, t_lower, solver, track, params)
        hop_growth = growth if (use_growth and t_lower > 0.0) else None
        offset = mass_update(offset, after.logp, hop_growth, after.x, t_lower)
        state = after

    # rows are ordered last group first
    log_mass = ops.add(base_log_density(state.x), offset)
    nll = None
    start = 0
    for size in reversed(sizes):
        group_nll = ops.neg(ops.reduce_mean(ops.getitem(log_mass, slice(start, start + size))))
        nll = group_nll if nll is None else ops.add(nll, group_nll)
        start += size

    breakdown_terms = {"nll": ops.scalar_mul(nll, cfg.lambda_nll)}
    if cfg.needs_energy or cfg.needs_jacnorm:
        breakdown_terms["energy"] = energy_loss(
            ops.reduce_mean(state.energy), ops.reduce_mean(state.jacnorm), cfg
        )
    if use_density:
        if density_positions is None:
            raise DimensionError(f"density time {batch.density_time} is outside (0, {groups[-1].time}]")
        penalty = ops.reduce_mean(density_loss(density_positions, batch.density_time, batch.index, cfg))
        breakdown_terms["density"] = ops.scalar_mul(penalty, cfg.lambda_d)
    degenerate = 0
    if cfg.lambda_v > 0:
        velocity_total = None
        for group in groups:
            if group.velocities is None:
                continue
            f_val = net.forward(group.points, group.time, params)
            degenerate += int(np.sum(degenerate_rows(f_val, group.velocities)))
            term = ops.reduce_mean(velocity_loss(f_val, group.velocities))
            velocity_total = term if velocity_total is None else ops.add(velocity_total, term)
        if velocity_total is not None:
            breakdown_terms["velocity"] = ops.scalar_mul(velocity_total, cfg.lambda_v)
        if degenerate:
            logger.debug(f"{degenerate} degenerate velocity rows skipped")

    values = {name: _check_term(name, term, iteration) for name, term in breakdown_terms.items()}
    total = None
    for term in breakdown_terms.values():
        total = term if total is None else ops.add(total, term)
    _check_term("total", total, iteration)
    return LossBreakdown(
        total=total,
        nll=values.get("nll", 0.0),
        energy=values.get("energy", 0.0),
        density=values.get("density", 0.0),
        velocity=values.get("velocity", 0.0),
        degenerate_velocity=degenerate,
        terms=breakdown_terms,
    )
