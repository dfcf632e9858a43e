"""
Cost of the exact-trace field evaluation as the data dimension grows.
"""
import logging
import time
from dataclasses import dataclass

import numpy as np

from config.config import settings
from models.networks import init_dynamics
from schemas.solver import SolverConfig
from services.ode import AugmentedState, IntegrationStats, Track, integrate, jacobian_terms

logger = logging.getLogger(f"{settings.app_name}.{__name__}")


@dataclass(frozen=True)
class DimensionTiming:
    dim: int
    batch_size: int
    seconds_per_eval: float
    nfe: int
    seconds_per_solve: float


def bench_dim(
    dims: list[int],
    batch_size: int = 256,
    repeats: int = 5,
    seed: int = 0,
    cfg: SolverConfig | None = None,
) -> list[DimensionTiming]:
    """
    Time one augmented field evaluation and one solve over [0, 1] for every dimension.

    The trace limit is raised to the largest requested dimension for the duration of the run.

    :param dims: dimensions to measure.
    :type dims: list[int]
    :param batch_size: points per evaluation.
    :type batch_size: int
    :param repeats: evaluations per dimension; the fastest one is reported.
    :type repeats: int
    :param seed: network and data seed.
    :type seed: int
    :param cfg: solver of the timed solve, dopri5 by default.
    :type cfg: SolverConfig | None
    :rtype: list[DimensionTiming]
    """
    if not dims or min(dims) < 1:
        raise ValueError(f"dimensions must be positive, got {dims}")
    cfg = (cfg or SolverConfig(method="dopri5")).model_copy(update={"trace_limit": max(dims)})
    results = []
    for dim in dims:
        net = init_dynamics(dim, seed)
        x = np.random.default_rng(seed).standard_normal((batch_size, dim))
        timings = []
        for _ in range(repeats):
            started = time.perf_counter()
            jacobian_terms(net, x, 0.5, trace_limit=cfg.trace_limit)
            timings.append(time.perf_counter() - started)
        stats = IntegrationStats()
        started = time.perf_counter()
        integrate(net, AugmentedState.start(x), 0.0, 1.0, cfg, Track.ALL, stats=stats)
        solve = time.perf_counter() - started
        timing = DimensionTiming(dim, batch_size, min(timings), stats.nfe, solve)
        logger.info(f"d={dim}: {timing.seconds_per_eval * 1e3:.2f} ms per evaluation, {stats.nfe} evaluations per solve")
        results.append(timing)
    return results
