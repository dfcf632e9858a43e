"""
Leave-one-out evaluation.

A timepoint is held out of training and each method predicts it:

- flows push base samples to the held-out time;
- baselines resample the previous, next or a random other timepoint, or draw the
  displacement interpolant of the exact coupling between the two neighbors.

Predictions are scored by EMD against the held-out data and, on synthetic data with
ground-truth trajectories, by the mean squared error of transported points.
"""
import itertools
import logging
import math
import time
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Protocol

import numpy as np
from scipy.spatial import cKDTree

from config.config import settings
from config.runconfig import flatten, with_overrides
from exceptions import DatasetFormatError, HoldoutError, TrajnetError, UserInputError
from models.dataset import TimeMap, TimeSeriesDataset
from models.networks import DynamicsNet, evaluate_f
from schemas.evaluation import EvalRecord, EvalReport
from schemas.solver import SolverConfig
from schemas.training import RunConfig
from services.growth import fit_growth
from services.ode import AugmentedState, Track, integrate, integrate_path
from services.regularizers import degenerate_rows
from services.trainer import build_time_map, regularizer_for_method, sample, train
from services.transport import emd, emd_exact, mccann_interpolate

logger = logging.getLogger(f"{settings.app_name}.{__name__}")

BASELINES = ("prev", "next", "rand", "ot")
DEFAULT_GRID: dict[str, tuple[float, ...]] = {
    "regularizer.lambda_d": (0.0, 0.1, 0.01),
    "regularizer.lambda_v": (0.0, 0.001, 0.0001),
}


def _fraction(label: float, before: float, after: float) -> float:
    return (label - before) / (after - before)


class Predictor(Protocol):
    def predict(self, data: TimeSeriesDataset, label: float, n: int, seed: int) -> np.ndarray:
        """``n`` points predicted at the held-out ``label``."""

    def transport(
        self, data: TimeSeriesDataset, label_from: float, label_to: float, x: np.ndarray, seed: int
    ) -> np.ndarray | None:
        """Where each row of ``x`` (observed at ``label_from``) is at ``label_to``; None if undefined."""


@dataclass(frozen=True, eq=False)
class FlowPredictor:
    net: DynamicsNet
    time_map: TimeMap
    solver: SolverConfig

    def predict(self, data: TimeSeriesDataset, label: float, n: int, seed: int) -> np.ndarray:
        return sample(self.net, n, self.time_map.time_of(label), self.solver, seed)

    def transport(self, data, label_from, label_to, x, seed):
        t0, t1 = self.time_map.time_of(label_from), self.time_map.time_of(label_to)
        state = integrate(self.net, AugmentedState.start(x), t0, t1, self.solver, Track.NONE)
        return np.asarray(state.x)


@dataclass(frozen=True)
class BaselinePredictor:
    """
    prev / next: the adjacent timepoint; rand: a uniformly chosen other timepoint;
    ot: displacement interpolation along the exact coupling of the two neighbors.
    """

    kind: str
    ot_subsample: int = 1000

    def __post_init__(self) -> None:
        if self.kind not in BASELINES:
            raise UserInputError(f"unknown baseline '{self.kind}', choose from {BASELINES}")

    def predict(self, data: TimeSeriesDataset, label: float, n: int, seed: int) -> np.ndarray:
        return baseline_predict(self.kind, data, label, n, seed, self.ot_subsample)

    def transport(self, data, label_from, label_to, x, seed):
        if self.kind == "prev":
            return np.array(x, dtype=np.float64)
        if self.kind != "ot":
            return None
        _, after = TimeMap.from_labels(data.labels).neighbors(label_to)
        rng = np.random.default_rng(seed)
        source = _subsample(data.points_at(label_from), self.ot_subsample, rng)
        target = _subsample(data.points_at(after), self.ot_subsample, rng)
        _, coupling = emd_exact(source, target, p=2)
        rows = coupling.row_sums
        image = (coupling.plan @ target) / rows[:, None]
        s = _fraction(label_to, label_from, after)
        _, nearest = cKDTree(source).query(x)
        return (1.0 - s) * x + s * image[nearest]


def _subsample(points: np.ndarray, cap: int, rng: np.random.Generator) -> np.ndarray:
    if points.shape[0] <= cap:
        return points
    return points[np.sort(rng.choice(points.shape[0], cap, replace=False))]


def baseline_predict(
    kind: str, data: TimeSeriesDataset, held_out: float, n: int, seed: int, ot_subsample: int = 1000
) -> np.ndarray:
    """
    Baseline prediction of the held-out timepoint.

    :param kind: ``prev``, ``next``, ``rand`` or ``ot``.
    :type kind: str
    :param data: full dataset; the held-out label is never read.
    :type data: TimeSeriesDataset
    :param held_out: intermediate label to predict.
    :type held_out: float
    :param n: number of points to return.
    :type n: int
    :param seed: sampling seed.
    :type seed: int
    :param ot_subsample: cap on the points entering the exact coupling.
    :type ot_subsample: int
    :rtype: np.ndarray
    :raises HoldoutError: ``held_out`` is the first or last label.
    """
    before, after = TimeMap.from_labels(data.labels).neighbors(held_out)
    rng = np.random.default_rng(seed)
    if kind == "prev":
        return data.sample(before, n, rng)
    if kind == "next":
        return data.sample(after, n, rng)
    if kind == "rand":
        others = [label for label in data.labels if not np.isclose(label, held_out)]
        return data.sample(others[int(rng.integers(len(others)))], n, rng)
    if kind == "ot":
        source = _subsample(data.points_at(before), ot_subsample, rng)
        target = _subsample(data.points_at(after), ot_subsample, rng)
        _, coupling = emd_exact(source, target, p=2)
        return mccann_interpolate(coupling, source, target, _fraction(held_out, before, after), n, seed)
    raise UserInputError(f"unknown baseline '{kind}', choose from {BASELINES}")


def holdout_eval(
    data: TimeSeriesDataset, held_out: float, predictor: Predictor, n_eval: int, seed: int, p: int = 1
) -> float:
    """
    EMD between ``n_eval`` predicted points and ``n_eval`` held-out points.

    :raises HoldoutError: ``held_out`` is not an intermediate label.
    """
    TimeMap.from_labels(data.labels).neighbors(held_out)
    truth = data.sample(held_out, n_eval, np.random.default_rng([seed, 1]))
    predicted = predictor.predict(data, held_out, n_eval, seed)
    return emd(predicted, truth, p)


def trajectory_mse(predictor: Predictor, data: TimeSeriesDataset, held_out: float, n_traj: int, seed: int) -> float:
    """
    Mean squared distance between transported starting points and their true positions.

    Starting points are the previous timepoint's points that share a trajectory id with a
    held-out point. NaN when the predictor cannot transport individual points.

    :raises DatasetFormatError: the dataset carries no trajectory pairing.
    """
    if not data.has_pairing:
        raise DatasetFormatError("trajectory MSE needs ground-truth trajectory ids", field="pair_id")
    before, _ = TimeMap.from_labels(data.labels).neighbors(held_out)
    starts, truth = data.paired(before, held_out)
    rng = np.random.default_rng([seed, 2])
    if starts.shape[0] > n_traj:
        keep = np.sort(rng.choice(starts.shape[0], n_traj, replace=False))
        starts, truth = starts[keep], truth[keep]
    predicted = predictor.transport(data, before, held_out, starts, seed)
    if predicted is None:
        return math.nan
    return float(np.mean(np.sum(np.square(predicted - truth), axis=1)))


@dataclass(frozen=True)
class NoiseFloor:
    label: float
    values: tuple[float, ...]

    @property
    def mean(self) -> float:
        return float(np.mean(self.values))

    @property
    def std(self) -> float:
        return float(np.std(self.values, ddof=1)) if len(self.values) > 1 else 0.0


def noise_floor(
    data: TimeSeriesDataset, label: float, n_eval: int, seed: int, repeats: int = 5, p: int = 1
) -> NoiseFloor:
    """EMD between two resamples of the same timepoint, disjoint when enough points exist."""
    points = data.points_at(label)
    rng = np.random.default_rng([seed, 3])
    values = []
    for _ in range(repeats):
        if points.shape[0] >= 2 * n_eval:
            idx = rng.permutation(points.shape[0])
            first, second = points[idx[:n_eval]], points[idx[n_eval : 2 * n_eval]]
        else:
            first = points[rng.choice(points.shape[0], n_eval)]
            second = points[rng.choice(points.shape[0], n_eval)]
        values.append(emd(first, second, p))
    floor = NoiseFloor(label, tuple(values))
    logger.info(f"EMD noise floor at t={label:g}: {floor.mean:.4f} +- {floor.std:.4f}")
    return floor


def path_straightness(
    net: DynamicsNet, starts: np.ndarray, t0: float, t1: float, cfg: SolverConfig, n_grid: int | None = None
) -> np.ndarray:
    """
    Path length over chord length of each trajectory from ``t0`` to ``t1``; 1 is a straight line.

    :param n_grid: time grid size, ``settings.plot_grid_points`` by default.
    :type n_grid: int | None
    :rtype: np.ndarray
    """
    n_grid = n_grid or settings.plot_grid_points
    path = integrate_path(net, np.atleast_2d(starts), np.linspace(t0, t1, n_grid), cfg)
    length = np.sum(np.linalg.norm(np.diff(path, axis=0), axis=-1), axis=0)
    chord = np.linalg.norm(path[-1] - path[0], axis=-1)
    return np.divide(length, chord, out=np.full_like(length, np.nan), where=chord > 0)


def velocity_alignment(net: DynamicsNet, data: TimeSeriesDataset, time_map: TimeMap) -> float:
    """Mean cosine between the field and the measured velocities, degenerate rows skipped."""
    if not data.has_velocities:
        raise DatasetFormatError("velocity alignment needs velocity columns", field="v0")
    cosines = []
    for label in time_map.training_labels:
        x, v = data.points_at(label), data.velocities_at(label)
        f = np.asarray(evaluate_f(net, x, time_map.time_of(label)))
        keep = ~degenerate_rows(f, v)
        dots = np.sum(f[keep] * v[keep], axis=1)
        cosines.append(dots / (np.linalg.norm(f[keep], axis=1) * np.linalg.norm(v[keep], axis=1)))
    values = np.concatenate(cosines)
    return float(np.mean(values)) if values.size else math.nan


@dataclass(frozen=True, eq=False)
class EvalCell:
    dataset: str
    method: str
    data: TimeSeriesDataset
    held_out: float
    seed: int
    run_cfg: RunConfig
    baseline: str | None = None

    @property
    def stream(self) -> int:
        return zlib.crc32(f"{self.dataset}:{self.held_out:g}".encode())


def default_holdout(data: TimeSeriesDataset) -> float:
    if data.n_timepoints < 3:
        raise HoldoutError(f"dataset '{data.name}' has no intermediate timepoint to hold out")
    return data.labels[data.n_timepoints // 2]


def _predictor(cell: EvalCell) -> Predictor:
    if cell.baseline is not None:
        return BaselinePredictor(cell.baseline, cell.run_cfg.eval.ot_subsample)
    cfg = cell.run_cfg.model_copy(update={"seed": cell.seed})
    train_cfg = cfg.train_config()
    time_map = build_time_map(cell.data, train_cfg, cell.held_out)
    growth = None
    if cfg.regularizer.growth_enabled:
        growth_cfg = cfg.growth.model_copy(update={"seed": cell.seed})
        growth = fit_growth(cell.data, cfg.ot, growth_cfg, time_map).net
    net, _ = train(cell.data, train_cfg, growth, held_out=cell.held_out)
    return FlowPredictor(net, time_map, train_cfg.eval_solver)


def evaluate_cell(cell: EvalCell) -> EvalRecord:
    """
    Train (or build) one method and score it.

    Package errors and stray numerical failures (``ValueError``, ``ArithmeticError``) become a failed
    record with NaN scores.
    """
    started = time.perf_counter()
    record = EvalRecord(dataset=cell.dataset, method=cell.method, held_out_time=cell.held_out, seed=cell.seed)
    eval_cfg = cell.run_cfg.eval
    eval_seed = int(np.random.default_rng([cell.seed, cell.stream]).integers(2**31))
    try:
        predictor = _predictor(cell)
        record.emd = holdout_eval(cell.data, cell.held_out, predictor, eval_cfg.n_eval, eval_seed, eval_cfg.emd_order)
        if cell.data.has_pairing:
            record.mse = trajectory_mse(predictor, cell.data, cell.held_out, eval_cfg.n_traj, eval_seed)
    except (TrajnetError, ValueError, ArithmeticError) as err:
        record.emd = record.mse = math.nan
        record.error = f"{type(err).__name__}: {err}"
        logger.error(f"cell {cell.dataset}/{cell.method}/seed {cell.seed} failed: {record.error}")
    record.wall_time_s = time.perf_counter() - started
    return record


def run_cells(cells: list[EvalCell], max_workers: int | None = None) -> list[EvalRecord]:
    """Evaluate cells in worker processes; results keep the order of ``cells``."""
    max_workers = max_workers or settings.max_workers
    if max_workers <= 1 or len(cells) <= 1:
        return [evaluate_cell(cell) for cell in cells]
    with ProcessPoolExecutor(max_workers=min(max_workers, len(cells))) as pool:
        return list(pool.map(evaluate_cell, cells))


def _method_cell(name: str, data: TimeSeriesDataset, method: str, held_out: float, seed: int, run_cfg: RunConfig):
    if method in BASELINES:
        return EvalCell(name, method, data, held_out, seed, run_cfg, baseline=method)
    regularizer = regularizer_for_method(method, run_cfg.regularizer)
    return EvalCell(name, method, data, held_out, seed, run_cfg.model_copy(update={"regularizer": regularizer}))


def run_table(
    datasets: dict[str, TimeSeriesDataset],
    methods: list[str],
    run_cfg: RunConfig,
    held_out: dict[str, float] | None = None,
    max_workers: int | None = None,
) -> EvalReport:
    """
    Every (dataset, method, seed) cell of a results table.

    :param datasets: named datasets; each holds out its middle label unless ``held_out`` says otherwise.
    :type datasets: dict[str, TimeSeriesDataset]
    :param methods: flow methods (``base``, ``base+v``, ...) and baselines (``prev``, ``next``, ``rand``, ``ot``).
    :type methods: list[str]
    :param run_cfg: shared training and evaluation settings; ``run_cfg.eval.seeds`` gives the seeds.
    :type run_cfg: RunConfig
    :return: one record per cell, failed cells included with their error.
    :rtype: EvalReport
    """
    held_out = held_out or {}
    cells = [
        _method_cell(name, data, method, held_out.get(name, default_holdout(data)), seed, run_cfg)
        for name, data in datasets.items()
        for method in methods
        for seed in run_cfg.eval.seeds
    ]
    logger.info(f"evaluating {len(cells)} cells")
    return EvalReport(records=run_cells(cells, max_workers), config=flatten(run_cfg))


def expand_grid(grid: dict[str, tuple]) -> list[dict[str, str]]:
    """Cartesian product of the grid as dotted overrides."""
    keys = sorted(grid)
    return [
        {key: str(value) for key, value in zip(keys, combination)}
        for combination in itertools.product(*(grid[key] for key in keys))
    ]


def grid_search(
    data: TimeSeriesDataset,
    held_out: float,
    run_cfg: RunConfig,
    grid: dict[str, tuple] | None = None,
    max_workers: int | None = None,
) -> EvalReport:
    """
    Evaluate every combination of ``grid`` (dotted key -> values) for every seed of ``run_cfg.eval``.

    Methods in the report are named by their assignments, e.g. ``lambda_d=0.1,lambda_v=0.001``.
    """
    grid = grid or DEFAULT_GRID
    cells = []
    for overrides in expand_grid(grid):
        cfg = with_overrides(run_cfg, overrides)
        method = ",".join(f"{key.rpartition('.')[2]}={value}" for key, value in overrides.items())
        for seed in cfg.eval.seeds:
            cells.append(EvalCell(data.name or "data", method, data, held_out, seed, cfg))
    logger.info(f"grid search over {len(cells)} cells")
    return EvalReport(records=run_cells(cells, max_workers), config=flatten(run_cfg))
