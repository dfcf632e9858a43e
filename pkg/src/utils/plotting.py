import io
import logging
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import numpy as np
from matplotlib import rc_context
from matplotlib.figure import Figure

from config.config import settings
from exceptions import DimensionError
from models.dataset import TimeMap, TimeSeriesDataset
from models.networks import DynamicsNet
from schemas.solver import SolverConfig, evaluation_solver
from services.ode import integrate_path
from utils.files import atomic_write

logger = logging.getLogger(f"{settings.app_name}.{__name__}")


def _projection(dim: int, projection: tuple[int, int] | None) -> tuple[int, int]:
    if projection is None:
        if dim != 2:
            raise DimensionError(f"plots are 2-D; data has d={dim}, pass a projection such as 0,1")
        return 0, 1
    i, j = projection
    if not (0 <= i < dim and 0 <= j < dim) or i == j:
        raise DimensionError(f"projection {projection} is not a pair of distinct columns of d={dim} data")
    return i, j


def plot_paths(
    net: DynamicsNet,
    data: TimeSeriesDataset,
    out: Path | str,
    time_map: TimeMap,
    n_trajectories: int = 20,
    seed: int = 0,
    projection: tuple[int, int] | None = None,
    cfg: SolverConfig | None = None,
) -> None:
    """
    Scatter of the data colored by timepoint with sampled flow trajectories as polylines.

    Trajectories start from base Gaussian samples at time 0 and run to the last model time
    on a grid of ``settings.plot_grid_points`` times.

    :param net: trained velocity field.
    :type net: DynamicsNet
    :param data: measured points.
    :type data: TimeSeriesDataset
    :param out: SVG destination, replaced atomically.
    :type out: Path | str
    :param time_map: label to model time assignment of the network.
    :type time_map: TimeMap
    :param n_trajectories: number of polylines; 0 draws the scatter only.
    :type n_trajectories: int
    :param seed: seed of the trajectory starts.
    :type seed: int
    :param projection: pair of columns to draw when d is not 2.
    :type projection: tuple[int, int] | None
    :raises DimensionError: d is not 2 and no projection is given.
    """
    i, j = _projection(data.dim, projection)
    cfg = cfg or evaluation_solver()
    figure = Figure(figsize=(6, 6))
    ax = figure.add_subplot()
    colors = matplotlib.colormaps["viridis"](np.linspace(0.0, 1.0, data.n_timepoints))
    for color, label, points in zip(colors, data.labels, data.points):
        ax.scatter(points[:, i], points[:, j], s=2, color=color, alpha=0.5, label=f"t={label:g}", rasterized=False)
    if n_trajectories > 0:
        starts = np.random.default_rng(seed).standard_normal((n_trajectories, data.dim))
        times = np.linspace(0.0, max(time_map.times), settings.plot_grid_points)
        paths = integrate_path(net, starts, times, cfg)
        for k in range(n_trajectories):
            ax.plot(paths[:, k, i], paths[:, k, j], color="black", linewidth=0.8, alpha=0.7)
    ax.set_xlabel(f"x{i}")
    ax.set_ylabel(f"x{j}")
    ax.set_aspect("equal", adjustable="datalim")
    ax.legend(loc="upper right", markerscale=4)
    buffer = io.BytesIO()
    with rc_context({"svg.hashsalt": settings.svg_hashsalt}):
        figure.savefig(buffer, format="svg", metadata={"Date": None})
    atomic_write(out, buffer.getvalue())
    logger.info(f"saved plot with {n_trajectories} trajectories to {out}")
