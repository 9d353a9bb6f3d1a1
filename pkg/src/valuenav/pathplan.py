"""A* over the fused value map, rotate-then-forward tracking, and stopping."""
from __future__ import annotations

import enum
import heapq
import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dcon import DconChain, NavAction
from .errors import InputError, Unreachable
from .intuition import DirectionJudgment
from .simulator import TURN_STEPS, AgentState, LowLevelAction
from .valuemaps import ValueMap

BETA = 2.0
SQRT2 = math.sqrt(2.0)
_MOVES = [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)]


@dataclass(frozen=True)
class Path:
    cells: tuple[tuple[int, int], ...]
    cost: float


def normalized_values(m: ValueMap, nav: np.ndarray) -> np.ndarray:
    """Min-max normalise ``m`` over navigable cells; a flat map becomes all ones."""
    out = np.ones(m.values.shape)
    vals = m.values[nav]
    if vals.size:
        lo, hi = vals.min(), vals.max()
        if hi > lo:
            out[nav] = (vals - lo) / (hi - lo)
    return out


def neighbours(nav: np.ndarray, cell: tuple[int, int]):
    """8-connected navigable neighbours; diagonals need at least one open side cell."""
    w, h = nav.shape
    i, j = cell
    for di, dj in _MOVES:
        ni, nj = i + di, j + dj
        if not (0 <= ni < w and 0 <= nj < h) or not nav[ni, nj]:
            continue
        if di and dj and not (nav[i + di, j] or nav[i, j + dj]):
            continue
        yield (ni, nj), (SQRT2 if di and dj else 1.0)


def reachable_from(nav: np.ndarray, start: tuple[int, int]) -> np.ndarray:
    """Cells the A* move set can reach from ``start`` (``start`` included)."""
    seen = np.zeros(nav.shape, dtype=bool)
    seen[start] = True
    stack = [start]
    while stack:
        cell = stack.pop()
        for nxt, _ in neighbours(nav, cell):
            if not seen[nxt]:
                seen[nxt] = True
                stack.append(nxt)
    return seen


def edge_cost(step_len: float, normalized: float, beta: float) -> float:
    return step_len * (1.0 + beta * (1.0 - normalized))


def astar(
    m: ValueMap, nav: np.ndarray, start: tuple[int, int], goal: tuple[int, int], beta: float = BETA
) -> Path:
    """Cheapest 8-connected path where high-value cells are cheap to enter.

    Entering cell ``c`` costs ``step_len * (1 + beta * (1 - mhat[c]))`` (cell
    units).  Every edge costs at least its length, so the straight-line
    heuristic is admissible and consistent.
    """
    for name, c in (("start", start), ("goal", goal)):
        if not (0 <= c[0] < nav.shape[0] and 0 <= c[1] < nav.shape[1]) or not nav[c]:
            raise InputError(f"{name} cell {c} is not navigable")
    mhat = normalized_values(m, nav)
    gi, gj = goal
    g = {start: 0.0}
    parent: dict[tuple[int, int], tuple[int, int]] = {}
    tie = itertools.count()
    heap = [(math.hypot(start[0] - gi, start[1] - gj), next(tie), start)]
    closed = set()
    while heap:
        _, _, cell = heapq.heappop(heap)
        if cell in closed:
            continue
        if cell == goal:
            cells = [cell]
            while cells[-1] != start:
                cells.append(parent[cells[-1]])
            return Path(tuple(reversed(cells)), g[goal])
        closed.add(cell)
        for nxt, step_len in neighbours(nav, cell):
            if nxt in closed:
                continue
            cand = g[cell] + edge_cost(step_len, mhat[nxt], beta)
            if cand < g.get(nxt, math.inf):
                g[nxt] = cand
                parent[nxt] = cell
                heapq.heappush(heap, (cand + math.hypot(nxt[0] - gi, nxt[1] - gj), next(tie), nxt))
    raise Unreachable(f"no path from {start} to {goal}")


def path_cost(cells: Sequence[tuple[int, int]], m: ValueMap, nav: np.ndarray, beta: float = BETA) -> float:
    mhat = normalized_values(m, nav)
    total = 0.0
    for a, b in zip(cells, cells[1:]):
        step_len = SQRT2 if a[0] != b[0] and a[1] != b[1] else 1.0
        total += edge_cost(step_len, mhat[b], beta)
    return total


def heading_index(di: int, dj: int) -> int:
    """Nearest multiple of 30 degrees to the bearing of ``(di, dj)``, as a step count."""
    return round(math.atan2(dj, di) / (2 * math.pi / TURN_STEPS)) % TURN_STEPS


def _rotations(current: int, target: int) -> list[LowLevelAction]:
    diff = (target - current) % TURN_STEPS
    if diff <= TURN_STEPS // 2:
        return [LowLevelAction.ROT_RIGHT] * diff
    return [LowLevelAction.ROT_LEFT] * (TURN_STEPS - diff)


def track_path(path: Path, state: AgentState, nav: np.ndarray) -> list[LowLevelAction]:
    """Rotate-then-forward actions that walk ``path`` one axis move at a time.

    Diagonal edges are split into two axis moves through whichever side cell
    is navigable (fewest rotations first, then x before y).  If neither side
    cell is navigable the plan is cut at that edge.
    """
    actions: list[LowLevelAction] = []
    heading = state.heading_steps % TURN_STEPS
    cells = path.cells
    for cur, nxt in zip(cells, cells[1:]):
        di, dj = nxt[0] - cur[0], nxt[1] - cur[1]
        if di and dj:
            options = [(cur[0] + di, cur[1]), (cur[0], cur[1] + dj)]
            open_options = [c for c in options if nav[c]]
            if not open_options:
                break
            open_options.sort(key=lambda c: len(_rotations(heading, heading_index(c[0] - cur[0], c[1] - cur[1]))))
            legs = [open_options[0], nxt]
        else:
            legs = [nxt]
        here = cur
        for leg in legs:
            target = heading_index(leg[0] - here[0], leg[1] - here[1])
            actions.extend(_rotations(heading, target))
            actions.append(LowLevelAction.FORWARD)
            heading = target
            here = leg
    return actions


class StopReason(enum.Enum):
    DCON_FLAG = "DconFlag"
    JUDGE_STOP = "JudgeStop"
    BUDGET = "Budget"
    PLANNER_ERROR = "PlannerError"


@dataclass(frozen=True)
class StopDecision:
    stop: bool
    reason: StopReason | None = None
    force_replan: bool = False


CONTINUE = StopDecision(False)


def should_stop(
    chain: DconChain,
    judgment: DirectionJudgment | None,
    steps_taken: int,
    max_steps: int,
    landmark_cells: np.ndarray | None = None,
    waypoint_reached: bool = True,
) -> StopDecision:
    """Decide whether the episode ends now.

    A planner flag stops the episode once its step has been carried out
    (``waypoint_reached``).  For Approach steps the landmark must also have
    been observed; a flag without it is ignored and a re-plan is requested.
    """
    current = chain.current
    if current is not None and current.flag:
        observed = landmark_cells is not None and bool(np.any(landmark_cells))
        if current.action is NavAction.APPROACH and not observed:
            return StopDecision(False, None, force_replan=True)
        if waypoint_reached:
            return StopDecision(True, StopReason.DCON_FLAG)
    if judgment is not None and judgment.is_stop:
        return StopDecision(True, StopReason.JUDGE_STOP)
    if steps_taken >= max_steps:
        return StopDecision(True, StopReason.BUDGET)
    return CONTINUE
