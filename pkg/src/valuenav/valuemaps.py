"""The four per-source value maps, their fusion, and waypoint selection."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

from .dcon import NavAction
from .errors import ContractViolation, EmptyProjection, InputError, NoNavigableArea
from .grid import GridSpec, unit_vector
from .worldmodel import Pose, WorldState, detect_frontiers, extract_navigable

SOURCES = ("semantic", "action", "trajectory", "intuition", "fused")
QUARTER = math.pi / 4  # half-width of a 90 degree sector
DIRECTION_STEP = math.pi / 6
N_DIRECTIONS = 12


@dataclass
class ValueMap:
    values: np.ndarray
    source: str
    spec: GridSpec

    def __post_init__(self):
        if self.source not in SOURCES:
            raise InputError(f"unknown value-map source {self.source!r}")
        if self.values.shape != self.spec.shape:
            raise InputError(f"map shape {self.values.shape} != grid {self.spec.shape}")

    @classmethod
    def zeros(cls, spec: GridSpec, source: str) -> "ValueMap":
        return cls(np.zeros(spec.shape), source, spec)

    def scaled(self, factor: float, offset: float = 0.0) -> "ValueMap":
        return ValueMap(self.values * factor + offset, self.source, self.spec)


@dataclass(frozen=True)
class Waypoint:
    cell: tuple[int, int]
    world_xy: tuple[float, float]
    value: float


def _minmax(d: np.ndarray) -> tuple[np.ndarray, bool]:
    lo, hi = d.min(), d.max()
    if hi == lo:
        return np.zeros_like(d), True
    return (d - lo) / (hi - lo), False


def semantic_value_map(nav: np.ndarray, landmark_cells: np.ndarray, spec: GridSpec) -> ValueMap:
    """Closeness to the nearest landmark cell, min-max normalised over ``nav``.

    1 at the navigable cell(s) nearest a landmark, 0 at the farthest.  If
    every navigable cell is equally close, all of them get 1.
    """
    out = ValueMap.zeros(spec, "semantic")
    if not landmark_cells.any() or not nav.any():
        return out
    dist = ndimage.distance_transform_edt(~landmark_cells, sampling=spec.resolution)
    norm, flat = _minmax(dist[nav])
    out.values[nav] = 1.0 if flat else 1.0 - norm
    return out


def trajectory_value_map(nav: np.ndarray, traj: Sequence[Pose], spec: GridSpec) -> ValueMap:
    """Distance from the visited positions, min-max normalised (far = 1)."""
    out = ValueMap.zeros(spec, "trajectory")
    if not traj or not nav.any():
        return out
    cx, cy = spec.centers()
    pts = np.column_stack([cx[nav], cy[nav]])
    visited = np.unique(np.array([p.xy for p in traj], dtype=float), axis=0)
    dist, _ = cKDTree(visited).query(pts, k=1)
    norm, flat = _minmax(np.asarray(dist, dtype=float))
    if not flat:
        out.values[nav] = norm
    return out


def sector_mask(
    spec: GridSpec,
    pose: Pose,
    center: float,
    half_width: float = QUARTER,
    max_range: float | None = None,
) -> np.ndarray:
    """Cells whose bearing from ``pose`` lies in ``(center - hw, center + hw]``.

    The pose's own cell has no bearing and is never included.
    """
    cx, cy = spec.centers()
    dx, dy = cx - pose.x, cy - pose.y
    cu, su = unit_vector(center)
    along = dx * cu + dy * su
    across = -dx * su + dy * cu
    if abs(half_width - QUARTER) < 1e-15:
        inside = (along > 0) & (across > -along) & (across <= along)
    else:
        rel = np.arctan2(across, along)
        inside = (np.hypot(dx, dy) > 0) & (rel > -half_width) & (rel <= half_width)
    if max_range is not None:
        inside &= dx * dx + dy * dy <= max_range * max_range
    return inside


_SECTOR_OFFSET = {
    NavAction.MOVE_FORWARD: 0.0,
    NavAction.TURN_AROUND: math.pi,
    NavAction.TURN_RIGHT: math.pi / 2,
    NavAction.TURN_LEFT: -math.pi / 2,
}


def action_value_map(
    action: NavAction, pose: Pose, world: WorldState, nav: np.ndarray | None = None
) -> ValueMap:
    spec = world.grid
    out = ValueMap.zeros(spec, "action")
    if action in (NavAction.ENTER, NavAction.EXIT):
        raise ContractViolation(f"{action.value} must be rewritten to Approach before mapping")
    if nav is None:
        nav = extract_navigable(world)
    if action in _SECTOR_OFFSET:
        out.values[nav & sector_mask(spec, pose, pose.heading + _SECTOR_OFFSET[action])] = 1.0
    elif action is NavAction.EXPLORE:
        out.values[detect_frontiers(world, nav)] = 1.0
    # Approach leaves the map at zero; the semantic map carries it.
    return out


def direction_bearing(pose: Pose, direction_id: int) -> float:
    return pose.heading + (direction_id - 1) * DIRECTION_STEP


def intuition_value_map(
    direction_id: int,
    pose: Pose,
    nav: np.ndarray,
    spec: GridSpec,
    intuition_range: float = 5.0,
    half_width: float = QUARTER,
) -> ValueMap:
    """Project a judged direction's field of view onto the navigable cells.

    Raises :class:`EmptyProjection` when the sector holds no navigable cell.
    """
    if not 1 <= direction_id <= N_DIRECTIONS:
        raise InputError(f"direction id {direction_id} outside 1..{N_DIRECTIONS}")
    sector = nav & sector_mask(spec, pose, direction_bearing(pose, direction_id), half_width, intuition_range)
    if not sector.any():
        raise EmptyProjection(direction_id)
    out = ValueMap.zeros(spec, "intuition")
    out.values[sector] = 1.0
    return out


def fuse(
    m_i: ValueMap, m_a: ValueMap, m_t: ValueMap, m_s: ValueMap, obstacles: np.ndarray
) -> ValueMap:
    shape = m_i.values.shape
    for m in (m_a, m_t, m_s):
        if m.values.shape != shape:
            raise InputError(f"value-map shapes differ: {m.values.shape} vs {shape}")
    if obstacles.shape != shape:
        raise InputError("obstacle mask shape differs from the value maps")
    total = m_i.values + m_a.values + m_t.values + m_s.values
    total[obstacles] = 0.0
    return ValueMap(total, "fused", m_i.spec)


def select_waypoint(m: ValueMap, nav: np.ndarray, pose: Pose) -> Waypoint:
    """Highest-valued navigable cell; ties go to the nearest, then smallest (i, j)."""
    ii, jj = np.nonzero(nav)
    if ii.size == 0:
        raise NoNavigableArea("no navigable cell to select a waypoint from")
    vals = m.values[ii, jj]
    best = vals == vals.max()
    ii, jj = ii[best], jj[best]
    cx, cy = m.spec.centers()
    dist = np.hypot(cx[ii, jj] - pose.x, cy[ii, jj] - pose.y)
    k = np.lexsort((jj, ii, dist))[0]
    cell = (int(ii[k]), int(jj[k]))
    return Waypoint(cell, m.spec.center(*cell), float(m.values[cell]))
