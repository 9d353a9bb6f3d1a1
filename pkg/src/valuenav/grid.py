"""Grid geometry shared by the world model, value maps and simulator.

Conventions used everywhere in the package:

* cell ``(i, j)``: ``i`` indexes x, ``j`` indexes y; arrays are indexed ``a[i, j]``.
* cell ``(i, j)`` covers ``[ox + i*res, ox + (i+1)*res) x [oy + j*res, oy + (j+1)*res)``.
* headings are radians in ``[0, 2*pi)``; 0 points along +x and the heading
  vector is ``(cos h, sin h)``.  With the map drawn rows-down (+y toward the
  bottom, as scene files are written) increasing heading turns clockwise, so
  "right" of a heading ``h`` is ``h + pi/2``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Iterator

import numpy as np

TWO_PI = 2.0 * math.pi


def snap_unit(v: float) -> float:
    """Round cos/sin values that are within float noise of 0 or +-1."""
    if abs(v) < 1e-12:
        return 0.0
    if abs(v - 1.0) < 1e-12:
        return 1.0
    if abs(v + 1.0) < 1e-12:
        return -1.0
    return v


def unit_vector(angle: float) -> tuple[float, float]:
    return snap_unit(math.cos(angle)), snap_unit(math.sin(angle))


def wrap_angle(a: float) -> float:
    """Map an angle to ``[0, 2*pi)``."""
    a = math.fmod(a, TWO_PI)
    if a < 0:
        a += TWO_PI
    if a >= TWO_PI:  # fmod of values just under a multiple can round up
        a = 0.0
    return a


@dataclass(frozen=True)
class GridSpec:
    shape: tuple[int, int]
    resolution: float = 0.25
    origin: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if self.resolution <= 0:
            raise ValueError("resolution must be positive")
        if len(self.shape) != 2 or min(self.shape) <= 0:
            raise ValueError(f"bad grid shape {self.shape}")
        object.__setattr__(self, "shape", (int(self.shape[0]), int(self.shape[1])))

    def cell_of(self, x: float, y: float) -> tuple[int, int]:
        return (
            math.floor((x - self.origin[0]) / self.resolution),
            math.floor((y - self.origin[1]) / self.resolution),
        )

    def center(self, i: int, j: int) -> tuple[float, float]:
        return (
            self.origin[0] + (i + 0.5) * self.resolution,
            self.origin[1] + (j + 0.5) * self.resolution,
        )

    def contains(self, i: int, j: int) -> bool:
        return 0 <= i < self.shape[0] and 0 <= j < self.shape[1]

    def centers(self) -> tuple[np.ndarray, np.ndarray]:
        """World x and y of every cell center, each of grid shape."""
        ii, jj = np.indices(self.shape, dtype=float)
        return (
            self.origin[0] + (ii + 0.5) * self.resolution,
            self.origin[1] + (jj + 0.5) * self.resolution,
        )

    def empty_mask(self) -> np.ndarray:
        return np.zeros(self.shape, dtype=bool)


def cells_to_mask(cells: Iterable[tuple[int, int]], shape: tuple[int, int]) -> np.ndarray:
    mask = np.zeros(shape, dtype=bool)
    for i, j in cells:
        mask[i, j] = True
    return mask


def mask_to_cells(mask: np.ndarray) -> set[tuple[int, int]]:
    return {(int(i), int(j)) for i, j in zip(*np.nonzero(mask))}


def traverse(
    grid: GridSpec, x0: float, y0: float, dx: float, dy: float, t_max: float
) -> Iterator[tuple[int, int, float]]:
    """Walk the cells pierced by a ray (Amanatides-Woo DDA).

    Yields ``(i, j, t_enter)`` where ``t_enter`` is the distance along the
    ray (meters) at which it enters the cell; the starting cell has
    ``t_enter == 0``.  ``(dx, dy)`` must be a unit vector.  Boundary
    crossings are computed from the boundary index each time rather than
    accumulated, so long rays do not drift.
    """
    res = grid.resolution
    gx = (x0 - grid.origin[0]) / res
    gy = (y0 - grid.origin[1]) / res
    i, j = math.floor(gx), math.floor(gy)
    step_i = 1 if dx > 0 else (-1 if dx < 0 else 0)
    step_j = 1 if dy > 0 else (-1 if dy < 0 else 0)

    def next_x(i: int) -> float:
        if step_i == 0:
            return math.inf
        boundary = i + 1 if step_i > 0 else i
        return (boundary - gx) * res / dx

    def next_y(j: int) -> float:
        if step_j == 0:
            return math.inf
        boundary = j + 1 if step_j > 0 else j
        return (boundary - gy) * res / dy

    tx, ty = next_x(i), next_y(j)
    yield i, j, 0.0
    while True:
        if tx < ty:
            t = tx
            i += step_i
            tx = next_x(i)
        else:
            t = ty
            j += step_j
            ty = next_y(j)
        if t > t_max:
            return
        yield i, j, t
