"""
Dataset CSV files.

Header ``t, x0 .. x{d-1}`` followed by optional ``v0 .. v{d-1}`` velocity columns and an
optional integer ``pair_id`` column linking points of one ground-truth trajectory. Rows are
grouped by ``t``; empty velocity or pair id cells mean the timepoint has none.
"""
import io
import logging
import re
from pathlib import Path

import numpy as np
import pandas as pd

from config.config import settings
from exceptions import DatasetFormatError
from models.dataset import TimeSeriesDataset
from utils.files import atomic_write

logger = logging.getLogger(f"{settings.app_name}.{__name__}")

FLOAT_FORMAT = "%.17g"
_COLUMN = re.compile(r"^([xv])(\d+)$")


def dataset_frame(data: TimeSeriesDataset) -> pd.DataFrame:
    """One row per point, labels ascending, point order kept within a label."""
    d = data.dim
    frames = []
    for label, points, velocities, ids in zip(data.labels, data.points, data.velocities, data.pair_ids):
        frame = pd.DataFrame(points, columns=[f"x{i}" for i in range(d)])
        frame.insert(0, "t", label)
        if data.has_velocities:
            values = velocities if velocities is not None else np.full(points.shape, np.nan)
            for i in range(d):
                frame[f"v{i}"] = values[:, i]
        if any(p is not None for p in data.pair_ids):
            frame["pair_id"] = pd.array(ids if ids is not None else [None] * points.shape[0], dtype="Int64")
        frames.append(frame)
    return pd.concat(frames, ignore_index=True)


def save_dataset(data: TimeSeriesDataset, path: Path | str) -> None:
    """
    Write a dataset as CSV, every float with 17 significant digits.

    :param data: dataset to store.
    :type data: TimeSeriesDataset
    :param path: output file, replaced atomically.
    :type path: Path | str
    """
    buffer = io.StringIO()
    dataset_frame(data).to_csv(buffer, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    atomic_write(path, buffer.getvalue())
    logger.info(f"saved dataset '{data.name}' ({data.n_timepoints} timepoints, d={data.dim}) to {path}")


def _check_header(columns: list[str]) -> tuple[int, bool, bool]:
    if not columns or columns[0] != "t":
        raise DatasetFormatError("the first column must be 't'", line=1, field=columns[0] if columns else None)
    xs, vs, has_ids = [], [], False
    for name in columns[1:]:
        match = _COLUMN.match(name)
        if match:
            (xs if match.group(1) == "x" else vs).append(int(match.group(2)))
        elif name == "pair_id":
            has_ids = True
        else:
            raise DatasetFormatError("unknown column", line=1, field=name)
    d = len(xs)
    if d == 0 or xs != list(range(d)):
        raise DatasetFormatError(f"position columns must be x0..x{max(d - 1, 0)} in order", line=1, field="x0")
    if vs and vs != list(range(d)):
        raise DatasetFormatError(f"velocity columns must be v0..v{d - 1} in order", line=1, field="v0")
    expected = ["t", *(f"x{i}" for i in range(d)), *(f"v{i}" for i in vs)] + (["pair_id"] if has_ids else [])
    if columns != expected:
        raise DatasetFormatError(f"columns must appear as {expected}", line=1)
    return d, bool(vs), has_ids


def _numeric(frame: pd.DataFrame, column: str, required: bool) -> pd.Series:
    raw = frame[column].fillna("").astype(str).str.strip()
    values = pd.to_numeric(raw.where(raw != ""), errors="coerce")
    bad = raw.ne("") & values.isna()
    if required:
        bad |= raw.eq("")
    if bad.any():
        row = int(np.flatnonzero(bad.to_numpy())[0])
        raise DatasetFormatError(f"'{raw.iloc[row]}' is not a number", line=row + 2, field=column)
    if not np.all(np.isfinite(values.dropna().to_numpy(dtype=np.float64))):
        row = int(np.flatnonzero(~np.isfinite(values.fillna(0.0).to_numpy(dtype=np.float64)))[0])
        raise DatasetFormatError("value is not finite", line=row + 2, field=column)
    return values


def _optional_block(values: np.ndarray, rows: np.ndarray, field: str) -> np.ndarray | None:
    missing = np.isnan(values)
    if missing.all():
        return None
    if missing.any():
        row = int(rows[np.flatnonzero(missing.any(axis=1) if missing.ndim == 2 else missing)[0]])
        raise DatasetFormatError("cell is empty while other rows of this timepoint are filled", line=row + 2, field=field)
    return values


def load_dataset(path: Path | str, name: str | None = None) -> TimeSeriesDataset:
    """
    Read a dataset CSV.

    :param path: CSV file.
    :type path: Path | str
    :param name: dataset name for reports, the file stem by default.
    :type name: str | None
    :rtype: TimeSeriesDataset
    :raises DatasetFormatError: malformed header or cell; the message names the line and field.
    """
    path = Path(path)
    if not path.is_file():
        raise DatasetFormatError(f"dataset file '{path}' does not exist")
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, skipinitialspace=True)
    except pd.errors.ParserError as err:
        raise DatasetFormatError(f"malformed CSV: {err}") from None
    except pd.errors.EmptyDataError:
        raise DatasetFormatError("dataset file is empty", line=1) from None
    frame.columns = [str(c).strip() for c in frame.columns]
    d, has_velocities, has_ids = _check_header(list(frame.columns))
    if frame.empty:
        raise DatasetFormatError("dataset has no rows", line=2)

    t = _numeric(frame, "t", required=True).to_numpy(dtype=np.float64)
    x = np.column_stack([_numeric(frame, f"x{i}", required=True).to_numpy(dtype=np.float64) for i in range(d)])
    v = (
        np.column_stack([_numeric(frame, f"v{i}", required=False).to_numpy(dtype=np.float64) for i in range(d)])
        if has_velocities
        else None
    )
    ids = _numeric(frame, "pair_id", required=False).to_numpy(dtype=np.float64) if has_ids else None
    if ids is not None:
        fractional = ~np.isnan(ids) & (ids != np.round(ids))
        if fractional.any():
            raise DatasetFormatError("pair ids must be integers", line=int(np.flatnonzero(fractional)[0]) + 2, field="pair_id")

    labels = np.unique(t)
    points, velocities, pair_ids = [], [], []
    for label in labels:
        rows = np.flatnonzero(t == label)
        points.append(x[rows])
        velocities.append(None if v is None else _optional_block(v[rows], rows, "v0"))
        block = None if ids is None else _optional_block(ids[rows], rows, "pair_id")
        pair_ids.append(None if block is None else block.astype(np.int64))
    data = TimeSeriesDataset(tuple(labels), tuple(points), tuple(velocities), tuple(pair_ids), name or path.stem)
    logger.info(f"loaded {path}: {data.n_timepoints} timepoints of sizes {data.sizes}, d={d}")
    return data
