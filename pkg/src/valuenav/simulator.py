"""Deterministic raycasting grid world used to run episodes end to end.

Scenes are planar: every observation is a single-row depth/label image
produced by casting one ray per pixel column through a pinhole camera.
"""
from __future__ import annotations

import enum
import heapq
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np
from scipy import ndimage

from .errors import InputError, SchemaError
from .grid import GridSpec, traverse, unit_vector
from .worldmodel import Observation, Pose

FLOOR, WALL, OBJECT = 0, 1, 2
TURN_STEPS = 12  # headings are multiples of 30 degrees
STEP_ANGLE = 2 * math.pi / TURN_STEPS
SCENE_FORMAT = "scene"
SCENE_VERSION = 1


@dataclass(frozen=True)
class SimConfig:
    forward_step: float = 0.25
    camera_height: float = 0.88
    hfov: float = math.pi / 2
    ray_count: int = 64
    max_range: float = 10.0


class LowLevelAction(enum.Enum):
    FORWARD = "F"
    ROT_LEFT = "L"
    ROT_RIGHT = "R"


@dataclass(frozen=True)
class GoalSpec:
    kind: str  # "object" | "point" | "region"
    label: str | None = None
    point: tuple[float, float] | None = None
    cells: tuple[tuple[int, int], ...] = ()
    success_radius: float = 1.0

    def __post_init__(self):
        if self.success_radius <= 0:
            raise InputError("success_radius must be positive")
        if self.kind not in ("object", "point", "region"):
            raise InputError(f"unknown goal kind {self.kind!r}")

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "GoalSpec":
        kind = data.get("kind")
        radius = float(data.get("success_radius", 1.0))
        if kind == "object":
            return cls("object", label=str(data["label"]), success_radius=radius)
        if kind == "point":
            x, y = data["point"]
            return cls("point", point=(float(x), float(y)), success_radius=radius)
        if kind == "region":
            return cls(
                "region",
                label=data.get("label"),
                cells=tuple((int(i), int(j)) for i, j in data.get("cells", ())),
                success_radius=radius,
            )
        raise InputError(f"unknown goal kind {kind!r}")

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"kind": self.kind, "success_radius": self.success_radius}
        if self.label is not None:
            out["label"] = self.label
        if self.point is not None:
            out["point"] = list(self.point)
        if self.cells:
            out["cells"] = [list(c) for c in self.cells]
        return out


@dataclass(frozen=True)
class Spawn:
    cell: tuple[int, int]
    heading_steps: int = 0


@dataclass
class Scene:
    name: str
    resolution: float
    kind: np.ndarray  # (width, height) of FLOOR/WALL/OBJECT
    labels: np.ndarray  # (width, height) label IDs, 0 = unlabeled
    label_table: dict[int, str]
    spawns: dict[str, Spawn] = field(default_factory=dict)
    goals: dict[str, GoalSpec] = field(default_factory=dict)

    @property
    def width(self) -> int:
        return self.kind.shape[0]

    @property
    def height(self) -> int:
        return self.kind.shape[1]

    @property
    def grid(self) -> GridSpec:
        return GridSpec((self.width, self.height), self.resolution)

    def label_id(self, name: str) -> int:
        for lid, lname in self.label_table.items():
            if lname == name:
                return lid
        raise InputError(f"label {name!r} is not in scene {self.name!r}")

    def is_floor(self, i: int, j: int) -> bool:
        return 0 <= i < self.width and 0 <= j < self.height and self.kind[i, j] == FLOOR

    def object_instances(self, label: str) -> int:
        """Number of 4-connected components of cells carrying ``label``."""
        _, count = ndimage.label(self.labels == self.label_id(label))
        return int(count)


@dataclass(frozen=True)
class AgentState:
    """Agent pose with the heading kept as an integer count of 30 degree steps."""

    x: float
    y: float
    heading_steps: int = 0
    collided: bool = False
    z: float = SimConfig.camera_height

    @property
    def heading(self) -> float:
        return (self.heading_steps % TURN_STEPS) * STEP_ANGLE

    @property
    def pose(self) -> Pose:
        return Pose(self.x, self.y, self.z, self.heading)

    def turned(self, steps: int) -> "AgentState":
        return AgentState(self.x, self.y, (self.heading_steps + steps) % TURN_STEPS, False, self.z)


# --- loading ----------------------------------------------------------------


def load_scene(document: Mapping[str, Any] | str | Path) -> Scene:
    """Validate a scene document (dict or JSON path) and build a :class:`Scene`.

    Raises :class:`SchemaError` listing every violation found.
    """
    if isinstance(document, (str, Path)):
        path = Path(document)
        doc = json.loads(path.read_text(encoding="utf-8"))
        doc.setdefault("name", path.name.split(".")[0])
    else:
        doc = dict(document)
    errors: list[str] = []

    if doc.get("format", SCENE_FORMAT) != SCENE_FORMAT:
        errors.append(f"format must be {SCENE_FORMAT!r}")
    if doc.get("version", SCENE_VERSION) != SCENE_VERSION:
        errors.append(f"unsupported version {doc.get('version')!r}")
    resolution = doc.get("resolution")
    if not isinstance(resolution, (int, float)) or resolution <= 0:
        errors.append("resolution must be a positive number")
    legend = doc.get("legend")
    if not isinstance(legend, dict) or not legend:
        errors.append("legend must be a non-empty mapping")
        legend = {}
    rows = doc.get("grid")
    if not isinstance(rows, list) or not rows or not all(isinstance(r, str) for r in rows):
        errors.append("grid must be a non-empty list of strings")
        raise SchemaError(errors)

    codes: dict[str, tuple[int, str | None]] = {}
    for ch, entry in legend.items():
        if len(ch) != 1:
            errors.append(f"legend key {ch!r} must be a single character")
            continue
        kind = entry.get("kind") if isinstance(entry, dict) else None
        label = entry.get("label") if isinstance(entry, dict) else None
        if kind == "wall":
            codes[ch] = (WALL, None)
        elif kind == "floor":
            codes[ch] = (FLOOR, label)
        elif kind == "object":
            if not label:
                errors.append(f"object legend entry {ch!r} needs a label")
            codes[ch] = (OBJECT, label)
        else:
            errors.append(f"legend entry {ch!r} has unknown kind {kind!r}")

    width = len(rows[0])
    if any(len(r) != width for r in rows):
        errors.append("grid rows must all have the same length")
    height = len(rows)
    kind_arr = np.full((width, height), WALL, dtype=np.int8)
    names: dict[tuple[int, int], str] = {}
    for j, row in enumerate(rows):
        for i, ch in enumerate(row[:width]):
            if ch not in codes:
                if ch not in legend:
                    errors.append(f"cell ({i}, {j}) uses undefined code {ch!r}")
                continue
            kind_arr[i, j], label = codes[ch]
            if label:
                names[(i, j)] = label
    border = np.ones_like(kind_arr, dtype=bool)
    border[1:-1, 1:-1] = False
    if np.any(kind_arr[border] != WALL):
        bad = sorted((int(i), int(j)) for i, j in zip(*np.nonzero(border & (kind_arr != WALL))))
        errors.append(f"border cells must be walls; offending cells {bad[:8]}")

    label_table = {k + 1: name for k, name in enumerate(sorted(set(names.values())))}
    ids = {name: lid for lid, name in label_table.items()}
    labels = np.zeros((width, height), dtype=np.int32)
    for (i, j), name in names.items():
        labels[i, j] = ids[name]

    spawns: dict[str, Spawn] = {}
    for name, sp in (doc.get("spawns") or {}).items():
        try:
            i, j = (int(v) for v in sp["cell"])
            heading_deg = float(sp.get("heading_deg", 0))
        except (KeyError, TypeError, ValueError):
            errors.append(f"spawn {name!r} needs cell [i, j] and numeric heading_deg")
            continue
        if heading_deg % 30 != 0:
            errors.append(f"spawn {name!r} heading must be a multiple of 30 degrees")
        if not (0 <= i < width and 0 <= j < height) or kind_arr[i, j] != FLOOR:
            errors.append(f"spawn {name!r} is not on a floor cell")
        spawns[name] = Spawn((i, j), int(heading_deg // 30) % TURN_STEPS)

    goals: dict[str, GoalSpec] = {}
    for name, g in (doc.get("goals") or {}).items():
        try:
            goal = GoalSpec.from_dict(g)
        except (KeyError, TypeError, ValueError) as exc:
            errors.append(f"goal {name!r} is malformed: {exc}")
            continue
        if goal.label and goal.kind == "object" and goal.label not in ids:
            errors.append(f"goal {name!r} references unknown label {goal.label!r}")
        goals[name] = goal

    if errors:
        raise SchemaError(errors)
    return Scene(str(doc.get("name", "scene")), float(resolution), kind_arr, labels, label_table, spawns, goals)


def spawn_state(scene: Scene, spawn: Spawn | str, config: SimConfig = SimConfig()) -> AgentState:
    if isinstance(spawn, str):
        spawn = scene.spawns[spawn]
    x, y = scene.grid.center(*spawn.cell)
    return AgentState(x, y, spawn.heading_steps, False, config.camera_height)


# --- sensing ----------------------------------------------------------------


def observe(
    scene: Scene,
    pose: Pose,
    hfov: float = SimConfig.hfov,
    ray_count: int = SimConfig.ray_count,
    max_range: float = SimConfig.max_range,
) -> Observation:
    """Render a 1 x ``ray_count`` depth/label image from ``pose``.

    Pixel ``u`` looks along ``heading + atan((u + 0.5 - W/2) / f)`` with
    ``f = (W/2) / tan(hfov/2)``, so pixel columns follow the same pinhole
    model the world model back-projects with.  Depth is planar (range times
    the cosine of the pixel's angular offset); rays that hit nothing within
    ``max_range`` report the clamped range and label 0.
    """
    grid = scene.grid
    ci, cj = grid.cell_of(pose.x, pose.y)
    if not scene.is_floor(ci, cj):
        raise InputError(f"pose ({pose.x}, {pose.y}) is not on a floor cell")
    focal = (ray_count / 2.0) / math.tan(hfov / 2.0)
    depth = np.zeros((1, ray_count))
    semantic = np.zeros((1, ray_count), dtype=np.int32)
    kind, labels = scene.kind, scene.labels
    width, height = scene.width, scene.height
    for u in range(ray_count):
        offset = math.atan((u + 0.5 - ray_count / 2.0) / focal)
        dx, dy = unit_vector(pose.heading + offset)
        rng, label = max_range, 0
        for i, j, t in traverse(grid, pose.x, pose.y, dx, dy, max_range):
            if not (0 <= i < width and 0 <= j < height):
                rng = t
                break
            if kind[i, j] != FLOOR:
                rng, label = t, int(labels[i, j])
                break
        depth[0, u] = rng * math.cos(offset)
        semantic[0, u] = label
    return Observation(depth, semantic, pose, hfov)


# --- dynamics ---------------------------------------------------------------


def step(scene: Scene, state: AgentState, action: LowLevelAction, config: SimConfig = SimConfig()) -> AgentState:
    if action is LowLevelAction.ROT_LEFT:
        return state.turned(-1)
    if action is LowLevelAction.ROT_RIGHT:
        return state.turned(1)
    dx, dy = unit_vector(state.heading)
    nx, ny = state.x + config.forward_step * dx, state.y + config.forward_step * dy
    if not scene.is_floor(*scene.grid.cell_of(nx, ny)):
        return AgentState(state.x, state.y, state.heading_steps, True, state.z)
    return AgentState(nx, ny, state.heading_steps, False, state.z)


# --- goals ------------------------------------------------------------------


def goal_points(scene: Scene, goal: GoalSpec) -> np.ndarray:
    """World xy of every point that counts as the goal, shape (n, 2)."""
    grid = scene.grid
    if goal.kind == "point":
        return np.array([goal.point], dtype=float)
    if goal.kind == "object":
        cells = zip(*np.nonzero(scene.labels == scene.label_id(goal.label)))
    elif goal.cells:
        cells = goal.cells
    else:
        cells = zip(*np.nonzero(scene.labels == scene.label_id(goal.label)))
    pts = np.array([grid.center(int(i), int(j)) for i, j in cells], dtype=float)
    if pts.size == 0:
        raise InputError("goal resolves to no cells")
    return pts


def check_goal(scene: Scene, goal: GoalSpec, traj: Sequence[Pose]) -> tuple[bool, bool, float]:
    """Return ``(success, oracle_success, nav_error)`` for a trajectory."""
    if not traj:
        raise InputError("trajectory must be non-empty")
    pts = goal_points(scene, goal)

    def dist(p: Pose) -> float:
        return float(np.min(np.hypot(pts[:, 0] - p.x, pts[:, 1] - p.y)))

    nav_error = dist(traj[-1])
    oracle = any(dist(p) <= goal.success_radius for p in traj)
    return nav_error <= goal.success_radius, oracle, nav_error


_NEIGHBOURS = [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)]


def shortest_path_length(scene: Scene, start: tuple[float, float], goal: GoalSpec) -> float | None:
    """Geodesic distance (m) from ``start`` to the goal's success region.

    8-connected Dijkstra over ground-truth floor cells; diagonal moves need
    both side cells free.  The success region is every floor cell whose
    center lies within ``success_radius`` of a goal point.  Returns None
    when the region is empty or unreachable.
    """
    grid = scene.grid
    pts = goal_points(scene, goal)
    cx, cy = grid.centers()
    near = np.zeros(grid.shape, dtype=bool)
    for px, py in pts:
        near |= np.hypot(cx - px, cy - py) <= goal.success_radius
    target = near & (scene.kind == FLOOR)
    src = grid.cell_of(*start)
    if not scene.is_floor(*src) or not target.any():
        return None
    dist = {src: 0.0}
    heap = [(0.0, src)]
    while heap:
        d, (i, j) = heapq.heappop(heap)
        if d > dist[(i, j)]:
            continue
        if target[i, j]:
            return d * grid.resolution
        for di, dj in _NEIGHBOURS:
            ni, nj = i + di, j + dj
            if not scene.is_floor(ni, nj):
                continue
            if di and dj and not (scene.is_floor(i + di, j) and scene.is_floor(i, j + dj)):
                continue
            nd = d + (math.sqrt(2.0) if di and dj else 1.0)
            if nd < dist.get((ni, nj), math.inf):
                dist[(ni, nj)] = nd
                heapq.heappush(heap, (nd, (ni, nj)))
    return None
