from __future__ import annotations

import math

import numpy as np
import pytest

from conftest import observation_round_trip, random_scene, world_from_masks
from valuenav.errors import InputError
from valuenav.grid import GridSpec
from valuenav.worldmodel import (
    Observation,
    Pose,
    WorldConfig,
    WorldState,
    detect_frontiers,
    extract_navigable,
    integrate_observation,
    match_labels,
    query_landmark_cells,
)


def test_inflation_counts_on_5x5():
    ground = np.ones((5, 5), bool)
    obstacles = np.zeros((5, 5), bool)
    obstacles[2, 2] = True
    world = world_from_masks(ground, obstacles)
    assert extract_navigable(world, 0).sum() == 24
    assert extract_navigable(world, 1).sum() == 16
    assert extract_navigable(world, 2).sum() == 0


def test_navigable_excludes_unexplored():
    ground = np.zeros((4, 4), bool)
    ground[:2] = True
    world = world_from_masks(ground, np.zeros((4, 4), bool))
    assert np.array_equal(extract_navigable(world), ground)


def test_frontiers_ignore_grid_edge():
    ground = np.ones((3, 3), bool)
    world = world_from_masks(ground, np.zeros((3, 3), bool))
    assert not detect_frontiers(world).any()
    world.ground[2, 2] = False
    assert detect_frontiers(world).sum() == 2  # (1, 2) and (2, 1)


def _single_ray(depth, label, pose, hfov=0.1):
    return Observation(np.array([[depth]]), np.array([[label]]), pose, hfov)


def test_single_ray_marks_hit_and_carves_floor():
    world = WorldState(GridSpec((10, 3)), {1: "sofa"})
    pose = Pose(0.125, 0.375, 0.88, 0.0)
    # the return lands on the near face of cell 5
    integrate_observation(world, _single_ray(1.125, 1, pose))
    assert world.obstacles[5, 1] and world.obstacles.sum() == 1
    assert world.ground[:5, 1].all() and not world.ground[5:, 1].any()
    assert query_landmark_cells(world, "Sofas")[5, 1]
    assert world.traj == [pose]
    assert world.observed_labels() == ["sofa"]


def test_low_return_is_ground():
    world = WorldState(GridSpec((10, 3)))
    integrate_observation(world, _single_ray(1.125, 0, Pose(0.125, 0.375, 0.1, 0.0)))
    assert world.ground[5, 1] and not world.obstacles.any()


def test_high_return_is_ignored():
    world = WorldState(GridSpec((10, 3)))
    integrate_observation(world, _single_ray(1.125, 0, Pose(0.125, 0.375, 2.0, 0.0)))
    assert not world.obstacles.any() and world.ground[:5, 1].all() and not world.ground[5, 1]


def test_max_range_is_no_return():
    world = WorldState(GridSpec((60, 3)), config=WorldConfig(max_range=10.0))
    integrate_observation(world, _single_ray(10.0, 0, Pose(0.125, 0.375, 0.88, 0.0)))
    assert not world.obstacles.any()
    assert world.ground[:40, 1].all() and not world.ground[41:, 1].any()


def test_zero_depth_pixels_are_skipped():
    world = WorldState(GridSpec((5, 5)))
    integrate_observation(world, _single_ray(0.0, 0, Pose(0.6, 0.6, 0.88, 0.0)))
    assert not world.explored_cells.any() and len(world.traj) == 1


def test_bad_observation_rejected():
    world = WorldState(GridSpec((5, 5)))
    with pytest.raises(InputError):
        integrate_observation(world, Observation(np.array([[1.0, 2.0]]), np.array([[0]]), Pose(0.1, 0.1), 1.0))
    with pytest.raises(InputError):
        integrate_observation(world, _single_ray(-1.0, 0, Pose(0.1, 0.1)))


def test_label_matching():
    table = {1: "potted plant", 2: "sofa", 3: "plant stand"}
    assert match_labels(table, "Sofas") == [2]
    assert match_labels(table, "potted  plants") == [1]
    assert match_labels(table, "plant") == [1, 3]
    assert match_labels(table, "fridge") == []
    with pytest.raises(InputError):
        match_labels(table, "  ")


def test_pose_validation():
    assert Pose(0, 0, 0, -math.pi / 2).heading == pytest.approx(1.5 * math.pi)
    with pytest.raises(InputError):
        Pose(float("nan"), 0)


def test_snapshot_is_independent():
    world = WorldState(GridSpec((4, 4)))
    snap = world.snapshot()
    world.ground[0, 0] = True
    assert not snap.ground.any()


def test_observation_round_trip_random_scenes(rng):
    for _ in range(8):
        scene, floor = random_scene(rng, 30)
        if not len(floor):
            continue
        poses = []
        for k in rng.choice(len(floor), size=min(3, len(floor)), replace=False):
            i, j = floor[k]
            x, y = scene.grid.center(int(i), int(j))
            poses.append(Pose(x, y, 0.88, float(rng.integers(0, 12)) * math.pi / 6))
        world, truth_floor, hit_cells, observed = observation_round_trip(scene, poses)
        assert np.all(truth_floor[world.ground])
        assert not np.any(truth_floor[world.obstacles])
        assert observed == hit_cells
        for (i, j) in observed:
            lid = int(scene.labels[i, j])
            if lid:
                assert world.label_cells[lid][i, j]
