import math

import numpy as np
import pytest

from services.datagen import (
    ARCH_CENTER,
    CYCLE_SPEED,
    SCURVE_NOISE,
    SCURVE_SCALE,
    gen_arch,
    gen_cycle,
    gen_tree,
    generate,
    rotation_field,
)
from services.evaluation import noise_floor
from services.transport import emd


def test_arch_layout(arch):
    assert arch.labels == (0.0, 0.5, 1.0)
    assert arch.sizes == (300, 300, 300)
    assert arch.has_velocities and arch.has_pairing


def test_arch_points_lie_on_noisy_unit_circle():
    for points in gen_arch(5000, seed=0).points:
        radius = np.linalg.norm(points - ARCH_CENTER, axis=1)
        assert 0.99 <= radius.mean() <= 1.01


def test_arch_velocities_are_unit_tangents(arch):
    for points, velocities in zip(arch.points, arch.velocities):
        radial = points - ARCH_CENTER
        radial /= np.linalg.norm(radial, axis=1, keepdims=True)
        assert np.max(np.abs(np.sum(radial * velocities, axis=1))) < 1e-9
        np.testing.assert_allclose(np.linalg.norm(velocities, axis=1), 1.0)


def test_arch_moves_left_to_right(arch):
    assert arch.points_at(0.0)[:, 0].mean() < 0.5
    assert arch.points_at(1.0)[:, 0].mean() > 1.5
    assert np.mean(arch.velocities_at(0.0)[:, 0] > 0) > 0.95


def test_generators_are_deterministic():
    for name in ("arch", "tree", "cycle", "scurve", "shift", "moons"):
        first, second = generate(name, 50, seed=4), generate(name, 50, seed=4)
        for a, b in zip(first.points, second.points):
            np.testing.assert_array_equal(a, b)
        other = generate(name, 50, seed=5)
        assert not np.array_equal(first.points[-1], other.points[-1])


def test_tree_is_arch_with_mirrored_branch():
    arch, tree = gen_arch(2000, seed=3), gen_tree(2000, seed=3)
    fractions = []
    for label in arch.labels:
        a, t = arch.points_at(label), tree.points_at(label)
        np.testing.assert_array_equal(a[:, 0], t[:, 0])
        mirrored = ~np.isclose(a[:, 1], t[:, 1])
        np.testing.assert_allclose(t[mirrored, 1], 2.0 - a[mirrored, 1])
        assert np.all(a[mirrored, 0] > 1.0)
        fractions.append(mirrored[a[:, 0] > 1.0].mean())
    assert 0.45 <= fractions[-1] <= 0.55


def test_tree_mirroring_follows_trajectories():
    arch, tree = gen_arch(300, seed=6), gen_tree(300, seed=6)
    status = {}
    for label in arch.labels:
        ids = tree.pair_ids[tree.index_of(label)]
        a, t = arch.points_at(label), tree.points_at(label)
        right = a[:, 0] > 1.0
        mirrored = ~np.isclose(a[:, 1], t[:, 1])
        for pid, is_right, flipped in zip(ids, right, mirrored):
            if not is_right:
                continue
            assert status.setdefault(int(pid), bool(flipped)) == bool(flipped)


def test_cycle_velocities_and_midpoint(cycle):
    for velocities in cycle.velocities:
        np.testing.assert_allclose(np.linalg.norm(velocities, axis=1), CYCLE_SPEED)
    start, middle = cycle.paired(0.0, 0.5)
    turn = np.angle(middle[:, 0] + 1j * middle[:, 1]) - np.angle(start[:, 0] + 1j * start[:, 1])
    turn = np.mod(turn + math.pi, 2 * math.pi) - math.pi
    np.testing.assert_allclose(turn, CYCLE_SPEED / 2, atol=1e-12)


def test_cycle_endpoints_share_one_law():
    data = gen_cycle(2000, seed=2)
    floor = noise_floor(data, 0.0, 1000, seed=0, repeats=3)
    rng = np.random.default_rng(0)
    distance = emd(data.sample(0.0, 1000, rng), data.sample(1.0, 1000, rng))
    assert distance < 1.5 * floor.mean


def test_rotation_field_matches_cycle_velocities(cycle):
    points = cycle.points_at(0.0)
    np.testing.assert_allclose(
        rotation_field().forward(points, 0.0) / np.linalg.norm(points, axis=1, keepdims=True),
        cycle.velocities_at(0.0),
        atol=1e-12,
    )


def test_scurve_bounds():
    data = generate("scurve", 2000, seed=1)
    assert data.labels == (0.0, 1.0)
    target = data.points_at(1.0)
    slack = 1.0 + 5.0 * SCURVE_NOISE
    assert np.all(np.abs(target[:, 0]) <= SCURVE_SCALE * slack)
    assert np.all(np.abs(target[:, 1]) <= SCURVE_SCALE * (2.0 + 5.0 * SCURVE_NOISE))


def test_unknown_dataset_and_empty_request():
    with pytest.raises(ValueError):
        generate("spiral", 10, seed=0)
    for name in ("arch", "tree", "cycle", "scurve", "shift", "moons"):
        with pytest.raises(ValueError):
            generate(name, 0, seed=0)
