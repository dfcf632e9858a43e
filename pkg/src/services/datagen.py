"""
Synthetic datasets with ground-truth velocities and held-out midpoints.

Arch and tree:
    - A 1-D coordinate ``u`` is drawn from a half Gaussian folded to the positive side of 0
      (time 0) and one folded to the negative side of 1 (time 1), standard deviation ``1 / (2 pi)``.
    - ``u`` is embedded on the upper half circle of radius 1 around (1, 0) at angle ``pi (1 - u)``,
      so u = 0 is the origin and u = 1 is (2, 0); the radius gets N(0, 0.1) noise.
    - The midpoint (label 0.5) is the 1-D monotone transport interpolant of ``u`` lifted the same way,
      with its own radial noise. Points of one ground-truth trajectory share a ``pair_id``.
    - Tree: every trajectory draws one coin; points with x > 1 whose coin is heads are mirrored over y = 1.

Cycle:
    - Uniform angles, radius N(1, 0.1), velocities tangent with magnitude pi / 5 (counterclockwise).
    - Time 1 is the time-0 cloud rotated by pi / 5, the midpoint by pi / 10, each with fresh radial noise.

S-curve:
    - Standard normal source (label 0) and the scikit-learn s-curve (noise 0.05), first and third
      coordinates scaled by 1.5 (label 1).
"""
import math

import numpy as np
from sklearn.datasets import make_moons, make_s_curve

from models.dataset import TimeSeriesDataset
from models.networks import DynamicsNet

HALF_GAUSSIAN_STD = 1.0 / (2.0 * math.pi)
RADIUS_NOISE = 0.1
ARCH_CENTER = np.array([1.0, 0.0])
MIDPOINT = 0.5
CYCLE_SPEED = math.pi / 5
SCURVE_NOISE = 0.05
SCURVE_SCALE = 1.5


def _embed_arch(u: np.ndarray, radius: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    theta = math.pi * (1.0 - u)
    points = ARCH_CENTER + radius[:, None] * np.column_stack([np.cos(theta), np.sin(theta)])
    velocities = np.column_stack([np.sin(theta), -np.cos(theta)])
    return points, velocities


def _arch_parts(n: int, rng: np.random.Generator):
    if n < 1:
        raise ValueError(f"n must be at least 1, got {n}")
    u0 = np.abs(rng.normal(0.0, HALF_GAUSSIAN_STD, n))
    u1 = 1.0 - np.abs(rng.normal(0.0, HALF_GAUSSIAN_STD, n))
    order0, order1 = np.argsort(u0, kind="stable"), np.argsort(u1, kind="stable")
    ids0 = np.empty(n, dtype=np.int64)
    ids1 = np.empty(n, dtype=np.int64)
    ids0[order0] = np.arange(n)
    ids1[order1] = np.arange(n)
    u_mid = 0.5 * (u0[order0] + u1[order1])
    ids_mid = np.arange(n)
    radii = [1.0 + rng.normal(0.0, RADIUS_NOISE, n) for _ in range(3)]
    parts = []
    for u, radius, ids in ((u0, radii[0], ids0), (u_mid, radii[1], ids_mid), (u1, radii[2], ids1)):
        points, velocities = _embed_arch(u, radius)
        parts.append((points, velocities, ids))
    return parts


def gen_arch(n: int, seed: int) -> TimeSeriesDataset:
    """
    Arch dataset: ``n`` points at labels 0, 0.5 (ground-truth midpoint) and 1.

    :param n: points per timepoint.
    :type n: int
    :param seed: generator seed.
    :type seed: int
    :rtype: TimeSeriesDataset
    """
    parts = _arch_parts(n, np.random.default_rng(seed))
    return TimeSeriesDataset(
        (0.0, MIDPOINT, 1.0),
        tuple(p for p, _, _ in parts),
        tuple(v for _, v, _ in parts),
        tuple(ids for _, _, ids in parts),
        name="arch",
    )


def gen_tree(n: int, seed: int) -> TimeSeriesDataset:
    """Arch with half of the trajectories on the right side mirrored over y = 1."""
    rng = np.random.default_rng(seed)
    parts = _arch_parts(n, rng)
    coins = rng.random(n) < 0.5
    flipped = []
    for points, velocities, ids in parts:
        points, velocities = points.copy(), velocities.copy()
        mask = (points[:, 0] > 1.0) & coins[ids]
        points[mask, 1] = 2.0 - points[mask, 1]
        velocities[mask, 1] = -velocities[mask, 1]
        flipped.append((points, velocities, ids))
    return TimeSeriesDataset(
        (0.0, MIDPOINT, 1.0),
        tuple(p for p, _, _ in flipped),
        tuple(v for _, v, _ in flipped),
        tuple(ids for _, _, ids in flipped),
        name="tree",
    )


def _circle(angles: np.ndarray, radius: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    points = radius[:, None] * np.column_stack([np.cos(angles), np.sin(angles)])
    velocities = CYCLE_SPEED * np.column_stack([-np.sin(angles), np.cos(angles)])
    return points, velocities


def gen_cycle(n: int, seed: int) -> TimeSeriesDataset:
    """
    Cycle dataset: the same ring law at labels 0 and 1, ground-truth motion a rotation by pi / 5.
    """
    if n < 1:
        raise ValueError(f"n must be at least 1, got {n}")
    rng = np.random.default_rng(seed)
    angles = rng.uniform(0.0, 2.0 * math.pi, n)
    ids = np.arange(n)
    points, velocities = [], []
    for fraction in (0.0, MIDPOINT, 1.0):
        radius = 1.0 + rng.normal(0.0, RADIUS_NOISE, n)
        p, v = _circle(angles + fraction * CYCLE_SPEED, radius)
        points.append(p)
        velocities.append(v)
    return TimeSeriesDataset((0.0, MIDPOINT, 1.0), tuple(points), tuple(velocities), (ids, ids, ids), name="cycle")


def rotation_field(speed: float = CYCLE_SPEED) -> DynamicsNet:
    """Single affine layer ``f(x) = speed * (-x1, x0)``: the true cycle dynamics."""
    weights = np.array([[0.0, speed], [-speed, 0.0], [0.0, 0.0]])
    return DynamicsNet((weights,), (np.zeros(2),))


def gen_scurve(n: int, seed: int) -> TimeSeriesDataset:
    """Standard normal source at label 0, scaled 2-D s-curve target at label 1."""
    if n < 1:
        raise ValueError(f"n must be at least 1, got {n}")
    rng = np.random.default_rng(seed)
    source = rng.standard_normal((n, 2))
    curve, _ = make_s_curve(n, noise=SCURVE_NOISE, random_state=seed)
    target = SCURVE_SCALE * curve[:, [0, 2]]
    return TimeSeriesDataset((0.0, 1.0), (source, target), name="scurve")


def gen_gaussian_shift(n: int, seed: int, shift: tuple[float, ...] = (2.0, 0.0)) -> TimeSeriesDataset:
    """One timepoint drawn from N(shift, I); the base Gaussian provides the source."""
    if n < 1:
        raise ValueError(f"n must be at least 1, got {n}")
    shift = np.asarray(shift, dtype=np.float64)
    rng = np.random.default_rng(seed)
    return TimeSeriesDataset((1.0,), (rng.standard_normal((n, shift.size)) + shift,), name="shift")


def gen_two_moons(n: int, seed: int) -> TimeSeriesDataset:
    """Single-timepoint two moons, centered."""
    if n < 1:
        raise ValueError(f"n must be at least 1, got {n}")
    points, _ = make_moons(n, noise=0.05, random_state=seed)
    return TimeSeriesDataset((1.0,), (points - points.mean(axis=0),), name="moons")


DATASETS = {
    "arch": gen_arch,
    "tree": gen_tree,
    "cycle": gen_cycle,
    "scurve": gen_scurve,
    "shift": gen_gaussian_shift,
    "moons": gen_two_moons,
}


def generate(name: str, n: int, seed: int) -> TimeSeriesDataset:
    try:
        generator = DATASETS[name]
    except KeyError:
        raise ValueError(f"unknown dataset '{name}', choose from {sorted(DATASETS)}") from None
    return generator(n, seed)
