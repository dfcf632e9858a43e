"""
Time series of point clouds.

TimeSeriesDataset:
    - Labeled point clouds over strictly increasing time labels.
        - Attributes:
            - labels: time labels as read from the data file.
            - points: one (n_i, d) array per label.
            - velocities: optional (n_i, d) arrays of measured velocities, or None per label.
            - pair_ids: optional integer arrays linking points of one ground-truth trajectory across labels.
            - name: free-form dataset name used in reports.

TimeMap:
    - Assignment of data labels to model times; the base Gaussian sits at time 0.
        - ``index`` mode maps the sorted labels to 1..k.
        - ``explicit`` mode keeps the label spacing: t = label - first_label + 1.
        - a held-out label keeps its slot in the map but contributes no training data.
"""
from dataclasses import dataclass, field

import numpy as np

from exceptions import DatasetFormatError, DimensionError, HoldoutError


def _readonly(array, dtype=np.float64) -> np.ndarray:
    out = np.array(array, dtype=dtype)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class TimeSeriesDataset:
    labels: tuple[float, ...]
    points: tuple[np.ndarray, ...]
    velocities: tuple[np.ndarray | None, ...] = field(default=())
    pair_ids: tuple[np.ndarray | None, ...] = field(default=())
    name: str = ""

    def __post_init__(self) -> None:
        labels = tuple(float(label) for label in self.labels)
        if not labels:
            raise DatasetFormatError("dataset has no timepoints")
        if len(self.points) != len(labels):
            raise DatasetFormatError("one point array per label is required")
        if any(b <= a for a, b in zip(labels, labels[1:])):
            raise DatasetFormatError("time labels must be strictly increasing")
        points = tuple(_readonly(p) for p in self.points)
        dims = {p.shape[1] if p.ndim == 2 else -1 for p in points}
        if len(dims) != 1 or -1 in dims:
            raise DimensionError(f"all timepoints must share one dimension, got {sorted(dims)}")
        velocities = self.velocities or (None,) * len(labels)
        pair_ids = self.pair_ids or (None,) * len(labels)
        if len(velocities) != len(labels) or len(pair_ids) != len(labels):
            raise DatasetFormatError("velocities and pair ids need one entry per label")
        velocities = tuple(None if v is None else _readonly(v) for v in velocities)
        for label, p, v in zip(labels, points, velocities):
            if v is not None and v.shape != p.shape:
                raise DimensionError(f"velocity shape {v.shape} does not match points {p.shape} at t={label:g}")
        pair_ids = tuple(None if ids is None else _readonly(ids, np.int64) for ids in pair_ids)
        for label, p, ids in zip(labels, points, pair_ids):
            if ids is not None and ids.shape != (p.shape[0],):
                raise DimensionError(f"pair ids at t={label:g} must have one entry per point")
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "velocities", velocities)
        object.__setattr__(self, "pair_ids", pair_ids)

    @property
    def dim(self) -> int:
        return self.points[0].shape[1]

    @property
    def n_timepoints(self) -> int:
        return len(self.labels)

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(p.shape[0] for p in self.points)

    @property
    def has_velocities(self) -> bool:
        return any(v is not None for v in self.velocities)

    @property
    def has_pairing(self) -> bool:
        return sum(ids is not None for ids in self.pair_ids) >= 2

    def index_of(self, label: float) -> int:
        for i, known in enumerate(self.labels):
            if np.isclose(known, label, rtol=0.0, atol=1e-9):
                return i
        raise HoldoutError(f"time label {label:g} is not in the dataset (labels: {self.labels})")

    def points_at(self, label: float) -> np.ndarray:
        return self.points[self.index_of(label)]

    def velocities_at(self, label: float) -> np.ndarray | None:
        return self.velocities[self.index_of(label)]

    def pooled(self, exclude: float | None = None) -> np.ndarray:
        """All points stacked across timepoints, optionally without one label."""
        keep = [p for label, p in zip(self.labels, self.points) if exclude is None or not np.isclose(label, exclude)]
        return np.vstack(keep)

    def without(self, label: float) -> "TimeSeriesDataset":
        i = self.index_of(label)
        pick = lambda items: tuple(item for j, item in enumerate(items) if j != i)
        return TimeSeriesDataset(
            pick(self.labels), pick(self.points), pick(self.velocities), pick(self.pair_ids), self.name
        )

    def sample(self, label: float, n: int, rng: np.random.Generator, replace: bool | None = None) -> np.ndarray:
        """``n`` points of one timepoint; without replacement when enough points exist."""
        points = self.points_at(label)
        if replace is None:
            replace = n > points.shape[0]
        idx = rng.choice(points.shape[0], size=n, replace=replace)
        return points[idx]

    def paired(self, label_a: float, label_b: float) -> tuple[np.ndarray, np.ndarray]:
        """Points of two labels matched by ground-truth trajectory id, ordered by id."""
        ids_a = self.pair_ids[self.index_of(label_a)]
        ids_b = self.pair_ids[self.index_of(label_b)]
        if ids_a is None or ids_b is None:
            raise DatasetFormatError(f"no trajectory pairing between t={label_a:g} and t={label_b:g}")
        common, ia, ib = np.intersect1d(ids_a, ids_b, assume_unique=True, return_indices=True)
        if common.size == 0:
            raise DatasetFormatError(f"no shared pair ids between t={label_a:g} and t={label_b:g}")
        return self.points_at(label_a)[ia], self.points_at(label_b)[ib]


@dataclass(frozen=True)
class TimeMap:
    labels: tuple[float, ...]
    times: tuple[float, ...]
    held_out: float | None = None
    mode: str = "index"

    @classmethod
    def from_labels(cls, labels, mode: str = "index", held_out: float | None = None) -> "TimeMap":
        labels = tuple(sorted(float(label) for label in labels))
        if mode == "index":
            times = tuple(float(i + 1) for i in range(len(labels)))
        elif mode == "explicit":
            times = tuple(label - labels[0] + 1.0 for label in labels)
        else:
            raise ValueError(f"unknown time map mode '{mode}'")
        time_map = cls(labels, times, None, mode)
        if held_out is not None:
            time_map.time_of(held_out)
            time_map = cls(labels, times, float(held_out), mode)
        return time_map

    def time_of(self, label: float) -> float:
        for known, time in zip(self.labels, self.times):
            if np.isclose(known, label, rtol=0.0, atol=1e-9):
                return time
        raise HoldoutError(f"time label {label:g} is not mapped (labels: {self.labels})")

    def label_of(self, time: float) -> float:
        for label, known in zip(self.labels, self.times):
            if np.isclose(known, time, rtol=0.0, atol=1e-9):
                return label
        raise HoldoutError(f"model time {time:g} has no label")

    def is_held_out(self, label: float) -> bool:
        return self.held_out is not None and np.isclose(label, self.held_out, rtol=0.0, atol=1e-9)

    @property
    def training_labels(self) -> tuple[float, ...]:
        return tuple(label for label in self.labels if not self.is_held_out(label))

    @property
    def final_time(self) -> float:
        return max(self.time_of(label) for label in self.training_labels)

    def neighbors(self, label: float) -> tuple[float, float]:
        """Adjacent labels around an intermediate label."""
        i = self.labels.index(self.label_of(self.time_of(label)))
        if i == 0 or i == len(self.labels) - 1:
            raise HoldoutError(
                f"held-out time {label:g} must be intermediate, not the first or last timepoint {self.labels}"
            )
        return self.labels[i - 1], self.labels[i + 1]
