"""
Versioned text checkpoints.

Layout::

    trajnet checkpoint
    format_version = 1
    dim = 2
    ...                                   scalar metadata, one ``key = value`` per line
    regularizer = {"h": 0.1, ...}         configuration sections as sorted JSON
    [dynamics.W0] 3 64                    parameter block: name and shape
    0x1.9a5c...p-3 -0x1.2f...p-4 ...      one matrix row per line, hexadecimal floats
    ...
    checksum = sha256:<hex digest of every preceding byte>

Hexadecimal floats keep every binary64 value exactly, so load-save is byte-identical.
"""
import hashlib
import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from pydantic import ValidationError

from config.config import settings
from exceptions import ChecksumError, CheckpointError, DimensionError, TruncatedCheckpointError, VersionMismatchError
from models.dataset import TimeMap, TimeSeriesDataset
from models.networks import DynamicsNet, GrowthNet
from schemas.checkpoint import CheckpointMeta
from utils.files import atomic_write

logger = logging.getLogger(f"{settings.app_name}.{__name__}")

MAGIC = "trajnet checkpoint"
CHECKSUM_PREFIX = "checksum = sha256:"
SECTIONS = ("regularizer", "solver", "effective_config")


@dataclass(frozen=True, eq=False)
class Checkpoint:
    meta: CheckpointMeta
    net: DynamicsNet
    growth: GrowthNet | None = None

    @property
    def time_map(self) -> TimeMap:
        return TimeMap(self.meta.labels, self.meta.times, self.meta.held_out, self.meta.time_mode)

    def check_dimension(self, data: TimeSeriesDataset) -> None:
        if data.dim != self.meta.dim:
            raise DimensionError(f"checkpoint was trained on d={self.meta.dim}, data has d={data.dim}")


def _hex(value: float) -> str:
    return float(value).hex()


def _scalar(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, float):
        return _hex(value)
    if isinstance(value, tuple):
        return ",".join(_scalar(item) for item in value)
    return str(value)


def _block(name: str, array: np.ndarray) -> list[str]:
    lines = [f"[{name}] {' '.join(str(n) for n in array.shape)}"]
    rows = array if array.ndim == 2 else array[None, :]
    lines.extend(" ".join(_hex(v) for v in row) for row in rows)
    return lines


def render_checkpoint(checkpoint: Checkpoint) -> str:
    meta = checkpoint.meta
    lines = [MAGIC, f"format_version = {meta.format_version}"]
    for key in type(meta).model_fields:
        if key == "format_version":
            continue
        value = getattr(meta, key)
        if key in SECTIONS:
            dumped = value if isinstance(value, dict) else value.model_dump()
            lines.append(f"{key} = {json.dumps(dumped, sort_keys=True)}")
        else:
            lines.append(f"{key} = {_scalar(value)}")
    for prefix, net in (("dynamics", checkpoint.net), ("growth", checkpoint.growth)):
        if net is None:
            continue
        for i, (w, b) in enumerate(zip(net.weights, net.biases)):
            lines.extend(_block(f"{prefix}.W{i}", w))
            lines.extend(_block(f"{prefix}.b{i}", b))
    body = "\n".join(lines) + "\n"
    digest = hashlib.sha256(body.encode("utf-8")).hexdigest()
    return f"{body}{CHECKSUM_PREFIX}{digest}\n"


def save_checkpoint(checkpoint: Checkpoint, path: Path | str) -> None:
    """
    Write a checkpoint atomically.

    :param checkpoint: networks and metadata.
    :type checkpoint: Checkpoint
    :param path: destination file.
    :type path: Path | str
    """
    atomic_write(path, render_checkpoint(checkpoint))
    logger.info(f"saved checkpoint (d={checkpoint.meta.dim}, {checkpoint.net.n_parameters} parameters) to {path}")


def _verify(text: str) -> list[str]:
    if not text.endswith("\n"):
        raise TruncatedCheckpointError("checkpoint does not end with a complete line")
    body, sep, last = text[:-1].rpartition("\n")
    if not sep or not last.startswith(CHECKSUM_PREFIX):
        raise TruncatedCheckpointError("checkpoint has no checksum line; the file is truncated")
    expected = last[len(CHECKSUM_PREFIX) :]
    actual = hashlib.sha256((body + "\n").encode("utf-8")).hexdigest()
    if actual != expected:
        raise ChecksumError(f"checksum mismatch: file says {expected}, content hashes to {actual}")
    return body.split("\n")


def _parse_scalar(key: str, raw: str, line: int):
    if raw == "none":
        return None
    try:
        if key in ("labels", "times"):
            return tuple(float.fromhex(item) for item in raw.split(",") if item)
        if key in ("dynamics_hidden", "growth_hidden"):
            return tuple(int(item) for item in raw.split(",") if item)
        if key in ("held_out", "slope"):
            return float.fromhex(raw)
    except ValueError:
        raise CheckpointError(f"line {line}: cannot parse value of '{key}'") from None
    return raw


def _parse_blocks(lines: list[str], start: int) -> dict[str, np.ndarray]:
    blocks: dict[str, np.ndarray] = {}
    i = start
    while i < len(lines):
        header = lines[i]
        if not header.startswith("["):
            raise CheckpointError(f"line {i + 1}: expected a parameter block header")
        name, _, shape_text = header[1:].partition("] ")
        try:
            shape = tuple(int(n) for n in shape_text.split())
        except ValueError:
            raise CheckpointError(f"line {i + 1}: bad shape in block '{name}'") from None
        n_rows = shape[0] if len(shape) == 2 else 1
        rows = lines[i + 1 : i + 1 + n_rows]
        if len(rows) != n_rows:
            raise TruncatedCheckpointError(f"block '{name}' ends early")
        try:
            values = np.array([[float.fromhex(v) for v in row.split()] for row in rows], dtype=np.float64)
        except ValueError:
            raise CheckpointError(f"block '{name}' near line {i + 2}: bad hexadecimal float") from None
        if values.size != int(np.prod(shape)):
            raise CheckpointError(f"block '{name}' holds {values.size} values, shape {shape} needs {int(np.prod(shape))}")
        blocks[name] = values.reshape(shape)
        i += 1 + n_rows
    return blocks


def _network(blocks: dict[str, np.ndarray], prefix: str, cls, slope: float):
    weights, biases = [], []
    while f"{prefix}.W{len(weights)}" in blocks:
        weights.append(blocks[f"{prefix}.W{len(weights)}"])
        biases.append(blocks[f"{prefix}.b{len(biases)}"])
    if not weights:
        return None
    return cls(tuple(weights), tuple(biases), slope)


def parse_checkpoint(text: str) -> Checkpoint:
    lines = _verify(text)
    if lines[0] != MAGIC:
        raise CheckpointError("line 1: not a trajnet checkpoint")
    version_key, _, version = lines[1].partition(" = ")
    if version_key != "format_version" or not version.isdigit():
        raise CheckpointError("line 2: missing format_version")
    if int(version) != settings.checkpoint_format_version:
        raise VersionMismatchError(
            f"checkpoint format version {version} is not supported (expected {settings.checkpoint_format_version})"
        )
    fields: dict = {"format_version": int(version)}
    i = 2
    while i < len(lines) and not lines[i].startswith("["):
        key, sep, raw = lines[i].partition(" = ")
        if not sep:
            raise CheckpointError(f"line {i + 1}: expected 'key = value'")
        if key in SECTIONS:
            try:
                fields[key] = json.loads(raw)
            except json.JSONDecodeError:
                raise CheckpointError(f"line {i + 1}: section '{key}' is not valid JSON") from None
        else:
            fields[key] = _parse_scalar(key, raw, i + 1)
        i += 1
    try:
        meta = CheckpointMeta.model_validate(fields)
    except ValidationError as err:
        raise CheckpointError(f"invalid checkpoint metadata: {err}") from None
    blocks = _parse_blocks(lines, i)
    try:
        net = _network(blocks, "dynamics", DynamicsNet, meta.slope)
        growth = _network(blocks, "growth", GrowthNet, meta.slope)
    except KeyError as err:
        raise TruncatedCheckpointError(f"missing parameter block {err}") from None
    if net is None:
        raise CheckpointError("checkpoint holds no dynamics parameters")
    if net.dim != meta.dim or net.hidden != meta.dynamics_hidden:
        raise CheckpointError(f"dynamics parameters do not match dim={meta.dim}, hidden={meta.dynamics_hidden}")
    return Checkpoint(meta, net, growth)


def load_checkpoint(path: Path | str) -> Checkpoint:
    """
    Read and verify a checkpoint.

    The checksum is verified before anything else is interpreted.

    :param path: checkpoint file.
    :type path: Path | str
    :rtype: Checkpoint
    :raises ChecksumError: content does not match the stored digest.
    :raises TruncatedCheckpointError: the file ends before the checksum line.
    :raises VersionMismatchError: the format version is not the supported one.
    """
    path = Path(path)
    if not path.is_file():
        raise CheckpointError(f"checkpoint '{path}' does not exist")
    try:
        text = path.read_text(encoding="utf-8")
    except UnicodeDecodeError:
        raise ChecksumError(f"checkpoint '{path}' is not valid UTF-8 text") from None
    checkpoint = parse_checkpoint(text)
    logger.debug(f"loaded checkpoint {path}: d={checkpoint.meta.dim}, labels {checkpoint.meta.labels}")
    return checkpoint
