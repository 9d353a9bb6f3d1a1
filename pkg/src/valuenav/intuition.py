"""Direction judging over a direction-labelled panorama, with re-prediction.

A judge backend sees ``N`` tiles taken at equal angular intervals around
the robot and answers with one direction ID (or Stop).  The chosen
direction's field of view becomes the intuition value map; when it covers
no navigable cell the judge is asked again with feedback.
"""
from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from typing import NamedTuple, Protocol, Sequence

import numpy as np

from .dcon import NavAction, load_template
from .errors import EmptyProjection, InputError, ParseError, PlannerFailure
from .grid import GridSpec
from .valuemaps import N_DIRECTIONS, ValueMap, intuition_value_map
from .worldmodel import Observation, Pose, normalize_label

log = logging.getLogger(__name__)

MAX_JUDGE_RETRIES = 3
SUPPORTED_N = (4, 6, 12)


@dataclass(frozen=True)
class Tile:
    direction_id: int
    summary: str
    labels: tuple[tuple[str, float], ...] = ()  # (name, nearest distance m)
    free_space: tuple[float, float, float] = (0.0, 0.0, 0.0)  # left, center, right
    image: bytes | None = None


@dataclass(frozen=True)
class Panorama:
    tiles: tuple[Tile, ...]

    @property
    def n(self) -> int:
        return len(self.tiles)

    @property
    def direction_ids(self) -> tuple[int, ...]:
        return tuple(t.direction_id for t in self.tiles)


@dataclass(frozen=True)
class DirectionJudgment:
    cot: str
    direction: int | None  # None means Stop

    @property
    def is_stop(self) -> bool:
        return self.direction is None


class JudgeBackend(Protocol):
    def judge(
        self,
        panorama: Panorama,
        instruction: str,
        action: NavAction,
        landmarks: Sequence[str],
        feedback: str | None = None,
    ) -> str: ...


def direction_ids_for(n: int) -> tuple[int, ...]:
    if n not in SUPPORTED_N:
        raise InputError(f"panorama size must be one of {SUPPORTED_N}, got {n}")
    stride = N_DIRECTIONS // n
    return tuple(1 + k * stride for k in range(n))


def summarize_view(direction_id: int, obs: Observation, label_table: dict[int, str]) -> Tile:
    """Text stand-in for an RGB tile: visible labels and median free depth per third."""
    depth = np.asarray(obs.depth, dtype=float)[0]
    semantic = np.asarray(obs.semantic)[0]
    nearest: dict[str, float] = {}
    for d, lid in zip(depth, semantic):
        if lid == 0 or d <= 0:
            continue
        name = label_table.get(int(lid), str(lid))
        nearest[name] = min(nearest.get(name, np.inf), float(d))
    labels = tuple(sorted(nearest.items(), key=lambda kv: (kv[1], kv[0])))
    thirds = np.array_split(depth, 3)
    free = tuple(round(float(np.median(part)), 2) if part.size else 0.0 for part in thirds)
    seen = ", ".join(f"{name} at {dist:.1f} m" for name, dist in labels) or "nothing labelled"
    summary = (
        f"Direction {direction_id}: sees {seen}; "
        f"free space left {free[0]:.1f} m, center {free[1]:.1f} m, right {free[2]:.1f} m"
    )
    return Tile(direction_id, summary, labels, free)


def assemble_panorama(
    views: Sequence[Observation | Tile], n: int, label_table: dict[int, str] | None = None
) -> Panorama:
    """Pick ``n`` of the 12 directional views (direction 1 first, clockwise)."""
    ids = direction_ids_for(n)
    if len(views) != N_DIRECTIONS:
        raise InputError(f"need {N_DIRECTIONS} directional views, got {len(views)}")
    tiles = []
    for did in ids:
        view = views[did - 1]
        if isinstance(view, Tile):
            tiles.append(view)
        else:
            tiles.append(summarize_view(did, view, label_table or {}))
    return Panorama(tuple(tiles))


def build_judge_prompt(
    pan: Panorama,
    instruction: str,
    action: NavAction,
    landmarks: Sequence[str],
    feedback: str | None = None,
) -> str:
    text = load_template("judge_task.txt").format(
        instruction=instruction,
        action=action.value,
        landmarks=", ".join(landmarks) if landmarks else "(none)",
        tiles="\n".join(t.summary for t in pan.tiles),
    )
    if feedback:
        text += "\n\n" + feedback
    return text + "\n"


def feedback_message(direction_id: int) -> str:
    return load_template("judge_feedback.txt").format(direction_id=direction_id)


PARSE_FEEDBACK = 'Feedback: your reply did not end with "Answer: Direction <ID>" or "Answer: Stop".'

_ANSWER = re.compile(r"answer\s*[:=]\s*(?:direction\s*(?:id\s*)?#?\s*(\d+)|(stop))", re.I)
_LOOSE = re.compile(r"\bdirection\s*(?:id\s*)?#?\s*(\d+)|\b(stop)\b", re.I)


def parse_judgment(text: str, pan: Panorama) -> DirectionJudgment:
    matches = list(_ANSWER.finditer(text)) or list(_LOOSE.finditer(text))
    if not matches:
        raise ParseError("no direction or Stop in judge reply", raw=text)
    last = matches[-1]
    cot = text[: last.start()].strip()
    if last.group(2):
        return DirectionJudgment(cot, None)
    did = int(last.group(1))
    if did not in pan.direction_ids:
        raise ParseError(f"direction {did} is not in the panorama {pan.direction_ids}", raw=text)
    return DirectionJudgment(cot, did)


def judge_direction(
    pan: Panorama,
    instruction: str,
    action: NavAction,
    landmarks: Sequence[str],
    backend: JudgeBackend,
    max_retries: int = MAX_JUDGE_RETRIES,
) -> DirectionJudgment:
    feedback = None
    for _ in range(max_retries + 1):
        reply = backend.judge(pan, instruction, action, landmarks, feedback)
        try:
            return parse_judgment(reply, pan)
        except ParseError:
            feedback = PARSE_FEEDBACK
    raise PlannerFailure(f"judge reply unparseable after {max_retries} retries")


class IntuitionOutcome(NamedTuple):
    value_map: ValueMap
    judgment: DirectionJudgment | None
    calls: int
    exhausted: bool


def judge_with_feedback(
    pan: Panorama,
    instruction: str,
    action: NavAction,
    landmarks: Sequence[str],
    backend: JudgeBackend,
    nav: np.ndarray,
    pose: Pose,
    spec: GridSpec,
    max_judge_retries: int = MAX_JUDGE_RETRIES,
    intuition_range: float = 5.0,
) -> IntuitionOutcome:
    """Judge a direction and project it, re-asking when the projection is empty.

    At most ``1 + max_judge_retries`` backend calls are made.  Running out
    of attempts is not fatal: the intuition map is all zero and a warning is
    logged.
    """
    notes: list[str] = []
    judgment = None
    calls = 0
    for _ in range(max_judge_retries + 1):
        reply = backend.judge(pan, instruction, action, landmarks, "\n".join(notes) or None)
        calls += 1
        try:
            judgment = parse_judgment(reply, pan)
        except ParseError:
            notes.append(PARSE_FEEDBACK)
            continue
        if judgment.is_stop:
            return IntuitionOutcome(ValueMap.zeros(spec, "intuition"), judgment, calls, False)
        try:
            value_map = intuition_value_map(judgment.direction, pose, nav, spec, intuition_range)
        except EmptyProjection as exc:
            notes.append(feedback_message(exc.direction_id))
            continue
        return IntuitionOutcome(value_map, judgment, calls, False)
    log.warning("intuition judge gave no usable direction after %d calls; using a zero map", calls)
    return IntuitionOutcome(ValueMap.zeros(spec, "intuition"), judgment, calls, True)


class ScriptedJudge:
    """Returns canned replies in order, repeating the last one."""

    def __init__(self, replies: Sequence[str]):
        if not replies:
            raise InputError("scripted judge needs at least one reply")
        self.replies = list(replies)
        self.calls = 0
        self.feedback_log: list[str | None] = []

    def judge(self, panorama, instruction, action, landmarks, feedback=None) -> str:
        self.feedback_log.append(feedback)
        reply = self.replies[min(self.calls, len(self.replies) - 1)]
        self.calls += 1
        return reply


class HeuristicJudge:
    """Deterministic stand-in for a multimodal judge that reads tile summaries.

    Prefers the direction where a landmark is seen closest; otherwise the
    most open direction.  Directions named in
    feedback are skipped.  Never answers Stop.  Any direction with at least
    ``open_enough`` metres of clear floor ahead counts as fully open, and among
    those the one closest to straight ahead wins, which keeps exploration from
    flip-flopping between decision steps.
    """

    def __init__(self, open_enough: float = 3.0):
        self.open_enough = open_enough

    def judge(self, panorama, instruction, action, landmarks, feedback=None) -> str:
        rejected = {int(d) for d in re.findall(r"Direction (\d+) has no navigable", feedback or "")}
        tiles = [t for t in panorama.tiles if t.direction_id not in rejected] or list(panorama.tiles)
        wanted = {normalize_label(l) for l in landmarks if l.strip()}

        def landmark_distance(tile: Tile) -> float:
            hits = [
                d
                for name, d in tile.labels
                if any(w == normalize_label(name) or w in normalize_label(name) or normalize_label(name) in w for w in wanted)
            ]
            return min(hits) if hits else float("inf")

        seen = [(landmark_distance(t), t.direction_id) for t in tiles]
        best_seen = min(seen)
        if best_seen[0] < float("inf"):
            did = best_seen[1]
            why = f"a landmark is visible {best_seen[0]:.1f} m away in direction {did}"
        else:
            def openness(t: Tile) -> tuple[float, int, int]:
                turn = min(t.direction_id - 1, N_DIRECTIONS + 1 - t.direction_id)
                return (min(t.free_space[1], self.open_enough), -turn, -t.direction_id)

            did = max(tiles, key=openness).direction_id
            why = f"no landmark is visible, direction {did} is open and needs the least turning"
        return f"Reasoning: {why}.\nAnswer: Direction {did}"
