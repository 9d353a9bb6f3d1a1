"""Incremental geometric + semantic world model built from depth/label frames.

Cell sets are boolean masks over the world grid (see :mod:`valuenav.grid`).
"""
from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .errors import InputError
from .grid import GridSpec, traverse, unit_vector, wrap_angle

# Returns are binned this far beyond the measured surface so a hit on a
# cell boundary lands in the cell that produced it.
SURFACE_NUDGE = 1e-6
# Free-space carving stops this short of a return.
CARVE_MARGIN = 1e-6


@dataclass(frozen=True)
class Pose:
    x: float
    y: float
    z: float = 0.0
    heading: float = 0.0

    def __post_init__(self):
        for name in ("x", "y", "z", "heading"):
            if not math.isfinite(getattr(self, name)):
                raise InputError(f"pose.{name} must be finite")
        object.__setattr__(self, "heading", wrap_angle(self.heading))

    @property
    def xy(self) -> tuple[float, float]:
        return (self.x, self.y)


@dataclass
class Observation:
    """One egocentric frame: depth in meters (0 = invalid) and label IDs."""

    depth: np.ndarray
    semantic: np.ndarray
    pose: Pose
    hfov: float

    def validate(self) -> None:
        depth = np.asarray(self.depth)
        semantic = np.asarray(self.semantic)
        if depth.ndim != 2 or depth.shape != semantic.shape:
            raise InputError(
                f"depth {depth.shape} and semantic {semantic.shape} must be equal 2-D shapes"
            )
        if not np.all(np.isfinite(depth)) or np.any(depth < 0):
            raise InputError("depth values must be finite and >= 0")
        if not 0.0 < self.hfov <= math.pi:
            raise InputError("hfov must lie in (0, pi]")


@dataclass(frozen=True)
class LabeledPoint:
    x: float
    y: float
    z: float
    label: int


@dataclass(frozen=True)
class WorldConfig:
    nav_height_max: float = 0.2
    obstacle_height_max: float = 1.5
    inflate_radius: int = 1
    max_range: float = 10.0


@dataclass
class WorldState:
    grid: GridSpec
    label_table: dict[int, str] = field(default_factory=dict)
    config: WorldConfig = field(default_factory=WorldConfig)
    points: set[LabeledPoint] = field(default_factory=set)
    traj: list[Pose] = field(default_factory=list)

    def __post_init__(self):
        self.ground = self.grid.empty_mask()
        self.obstacles = self.grid.empty_mask()
        self.label_cells: dict[int, np.ndarray] = {}

    @property
    def resolution(self) -> float:
        return self.grid.resolution

    @property
    def nav_cells(self) -> np.ndarray:
        return self.ground & ~self.obstacles

    @property
    def obstacle_cells(self) -> np.ndarray:
        return self.obstacles.copy()

    @property
    def explored_cells(self) -> np.ndarray:
        return self.ground | self.obstacles

    def snapshot(self) -> "WorldState":
        """Deep copy safe to hand to another thread or process."""
        return copy.deepcopy(self)

    def observed_labels(self) -> list[str]:
        names = {
            self.label_table.get(label, str(label))
            for label, mask in self.label_cells.items()
            if label != 0 and mask.any()
        }
        return sorted(names)


def integrate_observation(world: WorldState, obs: Observation) -> WorldState:
    """Lift a frame into the world and update the cell grids in place.

    Every valid pixel is back-projected with a square-pixel pinhole model.
    Returns at ground height mark ground, returns inside the obstacle band
    mark obstacles, and the floor under each ray between the camera and its
    return is carved as observed ground.  Rays at ``max_range`` are treated
    as no-return: they carve free space but add no point.
    """
    obs.validate()
    depth = np.asarray(obs.depth, dtype=float)
    semantic = np.asarray(obs.semantic)
    pose = obs.pose
    cfg = world.config
    grid = world.grid
    h, w = depth.shape
    focal = (w / 2.0) / math.tan(obs.hfov / 2.0)
    fx, fy = unit_vector(pose.heading)
    rx, ry = -fy, fx  # right-hand side of the heading

    for v in range(h):
        yn = (v + 0.5 - h / 2.0) / focal
        for u in range(w):
            d = float(depth[v, u])
            if d <= 0.0:
                continue
            xn = (u + 0.5 - w / 2.0) / focal
            px = pose.x + d * fx + d * xn * rx
            py = pose.y + d * fy + d * xn * ry
            pz = pose.z - d * yn
            horiz = math.hypot(px - pose.x, py - pose.y)
            if horiz > 0:
                ux, uy = (px - pose.x) / horiz, (py - pose.y) / horiz
            else:
                ux, uy = fx, fy
            no_return = d * math.sqrt(1.0 + xn * xn + yn * yn) >= cfg.max_range - 1e-9
            _carve(world, pose.x, pose.y, ux, uy, horiz if no_return else horiz - CARVE_MARGIN)
            if no_return or pz > cfg.obstacle_height_max:
                continue
            label = int(semantic[v, u])
            world.points.add(LabeledPoint(px, py, pz, label))
            ci, cj = grid.cell_of(px + SURFACE_NUDGE * ux, py + SURFACE_NUDGE * uy)
            if not grid.contains(ci, cj):
                continue
            if pz <= cfg.nav_height_max:
                world.ground[ci, cj] = True
            else:
                world.obstacles[ci, cj] = True
            if label not in world.label_cells:
                world.label_cells[label] = grid.empty_mask()
            world.label_cells[label][ci, cj] = True

    world.traj.append(pose)
    return world


def _carve(world: WorldState, x0: float, y0: float, ux: float, uy: float, length: float) -> None:
    if length < 0:
        return
    grid = world.grid
    for i, j, t in traverse(grid, x0, y0, ux, uy, length):
        if not grid.contains(i, j):
            break
        world.ground[i, j] = True


def extract_navigable(world: WorldState, inflate_radius: int | None = None) -> np.ndarray:
    """Ground cells free of obstacles and outside the inflated obstacle margin."""
    r = world.config.inflate_radius if inflate_radius is None else inflate_radius
    nav = world.ground & ~world.obstacles
    if r > 0 and world.obstacles.any():
        inflated = ndimage.binary_dilation(world.obstacles, structure=np.ones((2 * r + 1, 2 * r + 1), bool))
        nav &= ~inflated
    return nav


def detect_frontiers(world: WorldState, nav: np.ndarray | None = None) -> np.ndarray:
    """Navigable cells with at least one unexplored 4-neighbour inside the grid."""
    if nav is None:
        nav = extract_navigable(world)
    unexplored = ~world.explored_cells
    touches = np.zeros_like(nav)
    touches[1:, :] |= unexplored[:-1, :]
    touches[:-1, :] |= unexplored[1:, :]
    touches[:, 1:] |= unexplored[:, :-1]
    touches[:, :-1] |= unexplored[:, 1:]
    return nav & touches


def normalize_label(text: str) -> str:
    name = " ".join(text.lower().split())
    if len(name) > 1 and name.endswith("s"):
        name = name[:-1]
    return name


def match_labels(label_table: dict[int, str], landmark: str) -> list[int]:
    """Label IDs matching ``landmark``: exact normalized match wins, else substring."""
    if not landmark or not landmark.strip():
        raise InputError("landmark must be non-empty")
    key = normalize_label(landmark)
    names = {lid: normalize_label(name) for lid, name in label_table.items() if lid != 0}
    exact = [lid for lid, name in names.items() if name == key]
    if exact:
        return sorted(exact)
    return sorted(lid for lid, name in names.items() if name and (key in name or name in key))


def query_landmark_cells(world: WorldState, landmark: str) -> np.ndarray:
    mask = world.grid.empty_mask()
    for lid in match_labels(world.label_table, landmark):
        if lid in world.label_cells:
            mask |= world.label_cells[lid]
    return mask
