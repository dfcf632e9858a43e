"""
Integration of the augmented flow ODE.

The state of every point is ``[x, logp, energy, jacnorm]`` with dynamics

    dx/dt       = f(x, t)
    dlogp/dt    = -Tr(df/dx)
    denergy/dt  = |f|^2        (times the integration direction, so it never decreases)
    djacnorm/dt = |df/dx|_F^2  (same)

Solvers are written against :mod:`autodiff.ops`, so a state made of taped Vars is
integrated step by step on the tape and gradients flow through every stage.
"""
import enum
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from autodiff import jvp, ops
from autodiff.dual import Dual
from config.config import settings
from exceptions import (
    DimensionError,
    NonFiniteInputError,
    NonFiniteStateError,
    SolverError,
    StepLimitExceededError,
    TraceDimensionError,
)
from models.networks import DynamicsNet
from schemas.solver import SolverConfig

logger = logging.getLogger(f"{settings.app_name}.{__name__}")


class Track(enum.Flag):
    NONE = 0
    LOGP = enum.auto()
    ENERGY = enum.auto()
    JACNORM = enum.auto()
    ALL = LOGP | ENERGY | JACNORM


@dataclass(frozen=True, eq=False)
class AugmentedState:
    """Batch of flow positions ``(B, d)`` and their three accumulators ``(B,)``."""

    x: object
    logp: object
    energy: object
    jacnorm: object

    @classmethod
    def start(cls, x, logp=None) -> "AugmentedState":
        x_value = ops.value(x)
        if x_value.ndim != 2:
            raise DimensionError(f"state positions must be (B, d), got {x_value.shape}")
        zeros = np.zeros(x_value.shape[0])
        return cls(x, zeros if logp is None else logp, zeros, zeros)

    @property
    def dim(self) -> int:
        return ops.shape(self.x)[-1]

    @property
    def size(self) -> int:
        return ops.shape(self.x)[0]

    def values(self) -> "AugmentedState":
        """Numeric copy detached from any tape."""
        return AugmentedState(*(np.array(ops.value(a)) for a in (self.x, self.logp, self.energy, self.jacnorm)))


@dataclass
class IntegrationStats:
    nfe: int = 0
    accepted: int = 0
    rejected: int = 0
    steps: list[float] = field(default_factory=list)


def jacobian_terms(net: DynamicsNet, x, t: float, params: list | None = None, trace_limit: int = 10):
    """
    Velocity, exact Jacobian trace and squared Frobenius norm in one dual pass.

    Identity tangents ``(d, B, d)`` give all Jacobian columns at once; this is the
    batched form of d jvp calls.

    :return: ``(f, trace, frobenius_sq)`` with shapes ``(B, d)``, ``(B,)``, ``(B,)``.
    """
    x_shape = ops.shape(x)
    d = x_shape[-1]
    if d > trace_limit:
        raise TraceDimensionError(d, trace_limit)
    eye = np.eye(d)
    tangent = np.broadcast_to(eye[:, None, :], (d, x_shape[0], d))
    out = net.forward(Dual(x, tangent), t, params)
    f = out.primal
    if out.tangent is None:
        zeros = np.zeros(x_shape[0])
        return f, zeros, zeros
    columns = out.tangent
    trace = ops.reduce_sum(ops.mul(columns, eye[:, None, :]), axis=(0, 2))
    frobenius_sq = ops.reduce_sum(ops.square(columns), axis=(0, 2))
    return f, trace, frobenius_sq


def solve_trace(net: DynamicsNet, x, t: float, trace_limit: int = 10) -> float | np.ndarray:
    """
    Exact trace of df/dx at one point ``(d,)`` or a batch ``(B, d)`` from d jvp calls.

    :raises TraceDimensionError: when d exceeds ``trace_limit``.
    """
    x = np.asarray(x, dtype=np.float64)
    d = x.shape[-1]
    if d > trace_limit:
        raise TraceDimensionError(d, trace_limit)
    trace = np.zeros(x.shape[:-1])
    for i in range(d):
        direction = np.zeros_like(x)
        direction[..., i] = 1.0
        trace = trace + jvp(lambda z: net.forward(z, t), x, direction)[..., i]
    return float(trace) if trace.ndim == 0 else trace


class _Field:
    def __init__(self, net, params, track: Track, direction: float, trace_limit: int, stats: IntegrationStats):
        self.net = net
        self.params = params
        self.track = track
        self.direction = direction
        self.trace_limit = trace_limit
        self.stats = stats

    def __call__(self, t: float, y):
        self.stats.nfe += 1
        y_shape = ops.shape(y)
        batch, d = y_shape[0], y_shape[1] - 3
        x = ops.getitem(y, (slice(None), slice(0, d)))
        zeros = np.zeros((batch, 1))
        if self.track & (Track.LOGP | Track.JACNORM):
            f, trace, frobenius_sq = jacobian_terms(self.net, x, t, self.params, self.trace_limit)
        else:
            f = self.net.forward(x, t, self.params)
        columns = [f]
        if self.track & Track.LOGP:
            columns.append(ops.reshape(ops.neg(trace), (batch, 1)))
        else:
            columns.append(zeros)
        if self.track & Track.ENERGY:
            energy_rate = ops.reduce_sum(ops.square(f), axis=-1)
            columns.append(ops.reshape(ops.scalar_mul(energy_rate, self.direction), (batch, 1)))
        else:
            columns.append(zeros)
        if self.track & Track.JACNORM:
            columns.append(ops.reshape(ops.scalar_mul(frobenius_sq, self.direction), (batch, 1)))
        else:
            columns.append(zeros)
        return ops.concat(columns, axis=1)


def _combine(y, h: float, stages: list, coefficients: list[float]):
    increment = None
    for k, c in zip(stages, coefficients):
        if c == 0.0:
            continue
        term = ops.scalar_mul(k, c * h)
        increment = term if increment is None else ops.add(increment, term)
    return y if increment is None else ops.add(y, increment)


def _check_finite(y, t: float) -> None:
    if not np.all(np.isfinite(ops.value(y))):
        logger.error(f"non-finite state at t={t:.6g}")
        raise NonFiniteStateError("integration produced a non-finite state", time=t)


def _rk4(field_fn: _Field, y, t0: float, t1: float, cfg: SolverConfig):
    n_steps = max(1, math.ceil(abs(t1 - t0) / cfg.step_size - 1e-9))
    if n_steps > cfg.max_steps:
        raise StepLimitExceededError(f"rk4 needs {n_steps} steps, more than max_steps={cfg.max_steps}", time=t0)
    h = (t1 - t0) / n_steps
    t = t0
    for step in range(n_steps):
        k1 = field_fn(t, y)
        k2 = field_fn(t + 0.5 * h, _combine(y, h, [k1], [0.5]))
        k3 = field_fn(t + 0.5 * h, _combine(y, h, [k2], [0.5]))
        k4 = field_fn(t + h, _combine(y, h, [k3], [1.0]))
        y = _combine(y, h, [k1, k2, k3, k4], [1 / 6, 1 / 3, 1 / 3, 1 / 6])
        t = t0 + (step + 1) * h
        _check_finite(y, t)
        field_fn.stats.accepted += 1
        field_fn.stats.steps.append(h)
    return y


# Dormand-Prince 5(4) coefficients
_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_E = (71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40)

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 10.0
PI_BETA = 0.04
PI_ALPHA = 0.2 - 0.75 * PI_BETA


def _rms(a: np.ndarray) -> float:
    return float(np.sqrt(np.mean(np.square(a))))


def _initial_step(field_fn, t0: float, y0: np.ndarray, f0: np.ndarray, direction: float, cfg: SolverConfig) -> float:
    scale = cfg.atol + np.abs(y0) * cfg.rtol
    d0, d1 = _rms(y0 / scale), _rms(f0 / scale)
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    y1 = y0 + direction * h0 * f0
    f1 = ops.value(field_fn(t0 + direction * h0, y1))
    d2 = _rms((f1 - f0) / scale) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1 / 5)
    return min(100 * h0, h1)


def _dopri5(field_fn: _Field, y, t0: float, t1: float, cfg: SolverConfig):
    direction = 1.0 if t1 > t0 else -1.0
    span = abs(t1 - t0)
    k1 = field_fn(t0, y)
    y_value = ops.value(y)
    h = min(_initial_step(field_fn, t0, y_value, ops.value(k1), direction, cfg), span)
    t = t0
    err_prev = 1e-4
    rejected_last = False
    steps = 0
    while direction * (t1 - t) > 1e-12 * max(1.0, abs(t1)):
        steps += 1
        if steps > cfg.max_steps:
            logger.error(f"dopri5 exceeded {cfg.max_steps} steps at t={t:.6g}")
            raise StepLimitExceededError(f"dopri5 exceeded max_steps={cfg.max_steps}", time=t)
        h = min(h, direction * (t1 - t))
        if h < 1e-14 * max(1.0, abs(t)):
            raise SolverError("step size underflow", time=t)
        signed_h = direction * h
        stages = [k1]
        for i in range(1, 7):
            y_stage = _combine(y, signed_h, stages, list(_A[i]))
            if i == 6:
                y_new = y_stage
            stages.append(field_fn(t + _C[i] * signed_h, y_stage))
        y_new_value = ops.value(y_new)
        _check_finite(y_new_value, t + signed_h)
        error = signed_h * sum(e * ops.value(k) for e, k in zip(_E, stages) if e != 0.0)
        scale = cfg.atol + cfg.rtol * np.maximum(np.abs(ops.value(y)), np.abs(y_new_value))
        err = _rms(error / scale)
        if not math.isfinite(err):
            raise NonFiniteStateError("error estimate is not finite", time=t)
        if err <= 1.0:
            t = t + signed_h
            if direction * (t1 - t) <= 1e-12 * max(1.0, abs(t1)):
                t = t1
            y = y_new
            k1 = stages[6]
            _check_finite(y, t)
            field_fn.stats.accepted += 1
            field_fn.stats.steps.append(signed_h)
            factor = SAFETY * err ** (-PI_ALPHA) * err_prev**PI_BETA if err > 0 else MAX_FACTOR
            factor = min(MAX_FACTOR, max(MIN_FACTOR, factor))
            if rejected_last:
                factor = min(1.0, factor)
            h = h * factor
            err_prev = max(err, 1e-4)
            rejected_last = False
        else:
            field_fn.stats.rejected += 1
            factor = max(MIN_FACTOR, SAFETY * err ** (-PI_ALPHA))
            h = h * factor
            rejected_last = True
    return y


def _pack(state: AugmentedState):
    batch = state.size
    accumulators = [ops.reshape(a, (batch, 1)) for a in (state.logp, state.energy, state.jacnorm)]
    return ops.concat([state.x, *accumulators], axis=1)


def _unpack(y, d: int) -> AugmentedState:
    return AugmentedState(
        ops.getitem(y, (slice(None), slice(0, d))),
        ops.getitem(y, (slice(None), d)),
        ops.getitem(y, (slice(None), d + 1)),
        ops.getitem(y, (slice(None), d + 2)),
    )


def integrate(
    net: DynamicsNet,
    s0: AugmentedState,
    t0: float,
    t1: float,
    cfg: SolverConfig,
    track: Track = Track.ALL,
    params: list | None = None,
    stats: IntegrationStats | None = None,
) -> AugmentedState:
    """
    Integrate the augmented state from ``t0`` to ``t1`` (either order).

    :param net: velocity field.
    :type net: DynamicsNet
    :param s0: starting state; its arrays may be taped Vars.
    :type s0: AugmentedState
    :param cfg: solver settings.
    :type cfg: SolverConfig
    :param track: accumulators to integrate; untracked ones are carried unchanged.
    :type track: Track
    :param params: parameter list overriding ``net.parameters()``.
    :param stats: receives function-evaluation and step counts.
    :return: state at ``t1``.
    :rtype: AugmentedState
    :raises StepLimitExceededError: more than ``cfg.max_steps`` steps.
    :raises NonFiniteStateError: a step produced NaN or inf.
    """
    if not (math.isfinite(t0) and math.isfinite(t1)):
        raise NonFiniteInputError("integration bounds must be finite")
    if s0.dim != net.dim:
        raise DimensionError(f"state dimension {s0.dim} does not match network dimension {net.dim}")
    if not np.all(np.isfinite(ops.value(s0.x))):
        raise NonFiniteInputError("initial state must be finite")
    if t0 == t1:
        return s0
    stats = stats if stats is not None else IntegrationStats()
    direction = 1.0 if t1 > t0 else -1.0
    field_fn = _Field(net, params, track, direction, cfg.trace_limit, stats)
    y0 = _pack(s0)
    if cfg.method == "rk4":
        y1 = _rk4(field_fn, y0, t0, t1, cfg)
    else:
        y1 = _dopri5(field_fn, y0, t0, t1, cfg)
    return _unpack(y1, s0.dim)


def integrate_batch(
    net: DynamicsNet,
    states: list[AugmentedState],
    t0: float,
    t1: float,
    cfg: SolverConfig,
    track: Track = Track.ALL,
    params: list | None = None,
    stats: IntegrationStats | None = None,
) -> list[AugmentedState]:
    """One solver run on the stacked states, so the whole batch shares its step sequence."""
    if not states:
        return []
    dims = {s.dim for s in states}
    if len(dims) != 1:
        raise DimensionError(f"batch mixes state dimensions {sorted(dims)}")
    stacked = AugmentedState(
        *(ops.concat([getattr(s, name) for s in states], axis=0) for name in ("x", "logp", "energy", "jacnorm"))
    )
    out = integrate(net, stacked, t0, t1, cfg, track, params, stats)
    results, offset = [], 0
    for s in states:
        rows = slice(offset, offset + s.size)
        results.append(
            AugmentedState(
                ops.getitem(out.x, (rows, slice(None))),
                ops.getitem(out.logp, rows),
                ops.getitem(out.energy, rows),
                ops.getitem(out.jacnorm, rows),
            )
        )
        offset += s.size
    return results


def integrate_path(
    net: DynamicsNet, x, times, cfg: SolverConfig, params: list | None = None
) -> np.ndarray:
    """
    Positions at every requested time, chaining integrate calls from ``times[0]``.

    :param x: start positions ``(d,)`` or ``(B, d)`` at ``times[0]``.
    :param times: monotone sequence of times; backward sequences integrate backwards.
    :return: array ``(len(times), ...)`` with the layout of ``x``.
    :rtype: np.ndarray
    """
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    state = AugmentedState.start(x[None, :] if single else x)
    times = [float(t) for t in times]
    diffs = np.diff(times)
    if len(diffs) and not (np.all(diffs >= 0) or np.all(diffs <= 0)):
        raise ValueError("trajectory times must be sorted")
    path = [ops.value(state.x)]
    for t_prev, t_next in zip(times, times[1:]):
        state = integrate(net, state, t_prev, t_next, cfg, Track.NONE, params)
        path.append(ops.value(state.x))
    out = np.stack(path)
    return out[:, 0, :] if single else out
