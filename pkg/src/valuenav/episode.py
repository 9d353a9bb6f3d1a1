"""One navigation episode: plan, build value maps, pick a waypoint, move, repeat."""
from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Any, Callable, Mapping, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .dcon import DconChain, DconStep, NavAction, PlannerBackend, TaskKind, plan_next_step
from .errors import CallBudgetExceeded, PlannerFailure, PlannerUnavailable, ProtocolError, Unreachable
from .intuition import JudgeBackend, assemble_panorama, judge_with_feedback
from .llmclient import CallBudget
from .pathplan import BETA, Path, StopReason, astar, reachable_from, should_stop, track_path
from .simulator import (
    TURN_STEPS,
    AgentState,
    GoalSpec,
    Scene,
    SimConfig,
    Spawn,
    check_goal,
    observe,
    shortest_path_length,
    spawn_state,
    step,
)
from .valuemaps import (
    ValueMap,
    Waypoint,
    action_value_map,
    fuse,
    select_waypoint,
    semantic_value_map,
    trajectory_value_map,
)
from .worldmodel import Pose, WorldConfig, WorldState, extract_navigable, integrate_observation, query_landmark_cells

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class EpisodeConfig:
    n_directions: int = 6
    max_steps: int = 500
    max_decisions: int = 50
    max_lowlevel_steps: int = 10
    max_waypoint_masks: int = 5
    max_calls: int = 50
    beta: float = BETA
    intuition_range: float = 5.0
    world: WorldConfig = field(default_factory=WorldConfig)
    sim: SimConfig = field(default_factory=SimConfig)


@dataclass(frozen=True)
class EpisodeSpec:
    episode_id: str
    scene: Scene
    instruction: str
    task_kind: TaskKind
    goal: GoalSpec
    spawn: Spawn
    planner_script: tuple[DconStep, ...] = ()
    judge_script: tuple[str, ...] = ()  # empty: heuristic judge
    seed: int = 0


@dataclass
class Backends:
    planner: PlannerBackend
    judge: JudgeBackend


@dataclass
class EpisodeResult:
    episode_id: str
    success: bool
    oracle_success: bool
    nav_error: float
    traj_length: float
    shortest_path: float | None
    step_count: int
    decision_steps: int
    stop_reason: str
    trajectory: list[list[float]]
    seed: int = 0
    transcript: str | None = None

    def to_dict(self) -> dict[str, Any]:
        return {"v": 1, **asdict(self)}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "EpisodeResult":
        return cls(**{k: v for k, v in data.items() if k != "v"})


@dataclass
class DecisionRecord:
    """What a decision step produced; handed to map sinks."""

    episode_id: str
    index: int
    maps: dict[str, ValueMap]
    trajectory: list[tuple[float, float]]
    waypoint: Waypoint | None
    path: Path | None


MapSink = Callable[[DecisionRecord], None]


def _look_around(scene: Scene, world: WorldState, state: AgentState, sim: SimConfig) -> list:
    views = []
    for k in range(TURN_STEPS):
        obs = observe(scene, state.turned(k).pose, sim.hfov, sim.ray_count, sim.max_range)
        integrate_observation(world, obs)
        views.append(obs)
    return views


def _landmark_cells(world: WorldState, landmarks: Sequence[str]) -> np.ndarray:
    mask = world.grid.empty_mask()
    for name in landmarks:
        if name.strip():
            mask |= query_landmark_cells(world, name)
    return mask


def run_episode(
    episode: EpisodeSpec,
    backends: Backends,
    config: EpisodeConfig = EpisodeConfig(),
    map_sink: MapSink | None = None,
) -> EpisodeResult:
    scene = episode.scene
    sim = config.sim
    grid = scene.grid
    world = WorldState(grid, dict(scene.label_table), config.world)
    state = spawn_state(scene, episode.spawn, sim)
    poses: list[Pose] = [state.pose]
    planner = CallBudget(config.max_calls).planner(backends.planner)
    judge = CallBudget(config.max_calls).judge(backends.judge)
    chain = DconChain(episode.instruction)
    steps = 0
    decisions = 0
    reason: StopReason | None = None

    while reason is None:
        if decisions >= config.max_decisions:
            reason = StopReason.BUDGET
            break
        decisions += 1
        views = _look_around(scene, world, state, sim)
        pose = state.pose
        try:
            chain = plan_next_step(chain, world.observed_labels(), episode.task_kind, planner)
        except CallBudgetExceeded:
            reason = StopReason.BUDGET
            break
        except (PlannerFailure, PlannerUnavailable, ProtocolError) as exc:
            log.warning("episode %s: planner failed: %s", episode.episode_id, exc)
            reason = StopReason.PLANNER_ERROR
            break
        current = chain.current

        here = grid.cell_of(state.x, state.y)
        nav = extract_navigable(world)
        if not world.obstacles[here]:
            nav[here] = True
        landmark_cells = _landmark_cells(world, current.landmarks)
        panorama = assemble_panorama(views, config.n_directions, scene.label_table)
        try:
            intuition = judge_with_feedback(
                panorama, episode.instruction, current.action, current.landmarks, judge,
                nav, pose, grid, intuition_range=config.intuition_range,
            )
        except CallBudgetExceeded:
            reason = StopReason.BUDGET
            break
        except (PlannerUnavailable, ProtocolError) as exc:
            log.warning("episode %s: judge failed: %s", episode.episode_id, exc)
            reason = StopReason.PLANNER_ERROR
            break

        decision = should_stop(chain, intuition.judgment, steps, config.max_steps, landmark_cells, waypoint_reached=False)
        if decision.stop:
            reason = decision.reason
            break

        maps = {
            "semantic": semantic_value_map(nav, landmark_cells, grid),
            "action": action_value_map(current.action, pose, world, nav),
            "trajectory": trajectory_value_map(nav, world.traj, grid),
            "intuition": intuition.value_map,
        }
        maps["fused"] = fuse(maps["intuition"], maps["action"], maps["trajectory"], maps["semantic"], world.obstacles)
        waypoint, path = _choose_target(maps["fused"], nav, pose, here, current.flag, config)
        if map_sink is not None:
            map_sink(DecisionRecord(episode.episode_id, decisions - 1, maps, [p.xy for p in poses], waypoint, path))
        if path is None:
            continue

        actions = track_path(path, state, nav)[: min(config.max_lowlevel_steps, config.max_steps - steps)]
        for action in actions:
            state = step(scene, state, action, sim)
            steps += 1
            if state.collided:
                break
            poses.append(state.pose)
            integrate_observation(world, observe(scene, state.pose, sim.hfov, sim.ray_count, sim.max_range))
        reached = _arrived(grid.cell_of(state.x, state.y), waypoint.cell, current, landmark_cells, nav)
        decision = should_stop(chain, None, steps, config.max_steps, landmark_cells, waypoint_reached=reached)
        if decision.stop:
            reason = decision.reason

    success, oracle, nav_error = check_goal(scene, episode.goal, poses)
    spawn_xy = poses[0].xy
    return EpisodeResult(
        episode_id=episode.episode_id,
        success=success,
        oracle_success=oracle,
        nav_error=nav_error,
        traj_length=sum(math.hypot(b.x - a.x, b.y - a.y) for a, b in zip(poses, poses[1:])),
        shortest_path=shortest_path_length(scene, spawn_xy, episode.goal),
        step_count=steps,
        decision_steps=decisions,
        stop_reason=reason.value,
        trajectory=[[p.x, p.y, round(math.degrees(p.heading), 6)] for p in poses],
        seed=episode.seed,
    )


APPROACH_SLACK = 1.5  # cells


def _arrived(
    here: tuple[int, int], target: tuple[int, int], current: DconStep, landmark_cells: np.ndarray, nav: np.ndarray
) -> bool:
    """Whether the current step is done.

    Reaching the waypoint always counts.  An Approach step also counts once
    the robot is within ``APPROACH_SLACK`` cells of the closest navigable
    approach to the landmark, wherever the waypoint happened to land.
    """
    if here == target:
        return True
    if current.action is not NavAction.APPROACH or not landmark_cells.any():
        return False
    lm = np.argwhere(landmark_cells)
    free = np.argwhere(nav)
    best = cKDTree(lm).query(free)[0].min()
    gap = float(np.min(np.hypot(lm[:, 0] - here[0], lm[:, 1] - here[1])))
    return gap <= best + APPROACH_SLACK


def _choose_target(
    fused: ValueMap,
    nav: np.ndarray,
    pose: Pose,
    here: tuple[int, int],
    flagged: bool,
    config: EpisodeConfig,
) -> tuple[Waypoint | None, Path | None]:
    """Best reachable waypoint, masking unreachable picks up to the configured limit.

    The robot's own cell only counts as a target when the step is flagged
    (arriving there completes it); otherwise it is skipped without using up
    a mask.  An unreachable pick masks its whole pocket at once, so a map
    with many walled-off cells still costs only one mask per pocket.
    """
    reachable: np.ndarray | None = None
    candidates = nav.copy()
    masks = 0
    while candidates.any() and masks <= config.max_waypoint_masks:
        waypoint = select_waypoint(fused, candidates, pose)
        if waypoint.cell == here:
            if flagged:
                return waypoint, Path((here,), 0.0)
            candidates[here] = False
            continue
        try:
            return waypoint, astar(fused, nav, here, waypoint.cell, config.beta)
        except Unreachable:
            if reachable is None:
                reachable = reachable_from(nav, here)
            candidates[waypoint.cell] = False
            candidates &= reachable
            masks += 1
    return None, None
