from __future__ import annotations

import math

import numpy as np
import pytest

from oracles import first_hit_by_sampling

from valuenav.grid import GridSpec
from valuenav.simulator import load_scene, observe
from valuenav.worldmodel import WorldState, integrate_observation


def scene_doc(rows, legend=None, spawns=None, goals=None, resolution=0.25, name="test"):
    base = {"#": {"kind": "wall"}, ".": {"kind": "floor"}}
    base.update(legend or {})
    return {
        "format": "scene",
        "version": 1,
        "name": name,
        "resolution": resolution,
        "legend": base,
        "grid": list(rows),
        "spawns": spawns or {},
        "goals": goals or {},
    }


def random_scene(rng: np.random.Generator, max_side: int = 40, density: float = 0.15):
    """Walled box with random wall/object blobs; returns (scene, floor cells)."""
    w, h = (int(v) for v in rng.integers(6, max_side + 1, size=2))
    rows = []
    for j in range(h):
        row = []
        for i in range(w):
            if i in (0, w - 1) or j in (0, h - 1):
                row.append("#")
            else:
                r = rng.random()
                row.append("#" if r < density / 2 else "o" if r < density else ".")
        rows.append("".join(row))
    scene = load_scene(scene_doc(rows, {"o": {"kind": "object", "label": "box"}}))
    floor = np.argwhere(scene.kind == 0)
    return scene, floor


def world_from_masks(ground: np.ndarray, obstacles: np.ndarray, res: float = 0.25) -> WorldState:
    world = WorldState(GridSpec(ground.shape, res))
    world.ground[:] = ground
    world.obstacles[:] = obstacles
    return world


def observation_round_trip(scene, poses, ray_count=48):
    """Integrate observations; compare with cells found by independent ray sampling."""
    world = WorldState(scene.grid, dict(scene.label_table))
    hit_cells = set()
    for pose in poses:
        obs = observe(scene, pose, ray_count=ray_count)
        integrate_observation(world, obs)
        focal = (ray_count / 2) / math.tan(obs.hfov / 2)
        for u in range(ray_count):
            angle = pose.heading + math.atan((u + 0.5 - ray_count / 2) / focal)
            c = first_hit_by_sampling(scene.kind, scene.resolution, pose.x, pose.y, angle, 10.0)
            if c is not None:
                hit_cells.add(c)
    truth_floor = scene.kind == 0
    observed_hits = set(zip(*map(lambda a: a.tolist(), np.nonzero(world.obstacles))))
    return world, truth_floor, hit_cells, observed_hits


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# --- acceptance reporting: one pass/fail line per criterion -----------------

_criteria: dict[int, tuple[str, bool]] = {}


def pytest_runtest_makereport(item, call):
    mark = item.get_closest_marker("criterion")
    if mark is None or call.when != "call":
        return
    n, text = mark.args
    ok = call.excinfo is None
    prev = _criteria.get(n, (text, True))
    _criteria[n] = (text, prev[1] and ok)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_criteria):
        text, ok = _criteria[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {text}")
