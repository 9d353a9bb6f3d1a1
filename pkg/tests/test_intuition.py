from __future__ import annotations

import logging
from pathlib import Path

import numpy as np
import pytest

from valuenav.dcon import NavAction
from valuenav.errors import InputError, ParseError, PlannerFailure
from valuenav.grid import GridSpec
from valuenav.intuition import (
    HeuristicJudge,
    Panorama,
    ScriptedJudge,
    Tile,
    assemble_panorama,
    build_judge_prompt,
    direction_ids_for,
    feedback_message,
    judge_direction,
    judge_with_feedback,
    parse_judgment,
    summarize_view,
)
from valuenav.worldmodel import Observation, Pose

GOLDEN = Path(__file__).parent / "golden"


def _tile(did, labels=(), free=(1.0, 2.0, 1.0)):
    seen = ", ".join(f"{n} at {d:.1f} m" for n, d in labels) or "nothing labelled"
    summary = (
        f"Direction {did}: sees {seen}; "
        f"free space left {free[0]:.1f} m, center {free[1]:.1f} m, right {free[2]:.1f} m"
    )
    return Tile(did, summary, tuple(labels), free)


def _views():
    return [_tile(k) for k in range(1, 13)]


@pytest.mark.parametrize(
    "n,ids",
    [(4, (1, 4, 7, 10)), (6, (1, 3, 5, 7, 9, 11)), (12, tuple(range(1, 13)))],
)
def test_panorama_ids(n, ids):
    assert direction_ids_for(n) == ids
    assert assemble_panorama(_views(), n).direction_ids == ids


@pytest.mark.parametrize("n", [0, 1, 5, 8, 13])
def test_unsupported_panorama_size(n):
    with pytest.raises(InputError):
        direction_ids_for(n)


def test_assemble_needs_twelve_views():
    with pytest.raises(InputError):
        assemble_panorama(_views()[:6], 6)


def test_summarize_view_reports_labels_and_median_depth():
    depth = np.array([[1.0, 2.0, 3.0, 4.0, 4.0, 4.0, 0.5, 0.5, 9.0]])
    semantic = np.array([[0, 2, 2, 0, 0, 0, 1, 0, 0]])
    tile = summarize_view(3, Observation(depth, semantic, Pose(0, 0), 1.0), {1: "sofa", 2: "tv"})
    assert tile.labels == (("sofa", 0.5), ("tv", 2.0))
    assert tile.free_space == (2.0, 4.0, 0.5)
    assert tile.summary.startswith("Direction 3: sees sofa at 0.5 m, tv at 2.0 m;")


PAN4 = Panorama(tuple(_tile(d) for d in (1, 4, 7, 10)))


@pytest.mark.parametrize(
    "reply,expected",
    [
        ("Answer: Direction 4", 4),
        ("answer: direction 10", 10),
        ("Direction 1 looks empty. Direction 7 shows a door.\nAnswer: Direction 7", 7),
        ("Answer: Direction 1\nOn reflection...\nAnswer: Direction 10", 10),
        ("I pick direction 4.", 4),
        ("Answer: Stop", None),
        ("Answer = Direction #7", 7),
    ],
)
def test_parse_judgment(reply, expected):
    assert parse_judgment(reply, PAN4).direction == expected


def test_parse_judgment_keeps_reasoning():
    j = parse_judgment("The sofa is ahead.\nAnswer: Direction 1", PAN4)
    assert j.cot == "The sofa is ahead." and not j.is_stop


@pytest.mark.parametrize("reply", ["", "go left", "Answer: Direction 5", "Answer: Direction 13"])
def test_parse_judgment_rejects(reply):
    with pytest.raises(ParseError):
        parse_judgment(reply, PAN4)


def test_golden_judge_prompt():
    prompt = build_judge_prompt(PAN4, "Find the sofa.", NavAction.APPROACH, ["sofa"], feedback_message(4))
    assert prompt == (GOLDEN / "judge_n4_feedback.txt").read_text(encoding="utf-8")


def test_judge_direction_retries_on_garbage():
    judge = ScriptedJudge(["hmm", "Answer: Direction 7"])
    assert judge_direction(PAN4, "x", NavAction.EXPLORE, [], judge).direction == 7
    assert judge.calls == 2 and judge.feedback_log[1] is not None


def test_judge_direction_gives_up():
    with pytest.raises(PlannerFailure):
        judge_direction(PAN4, "x", NavAction.EXPLORE, [], ScriptedJudge(["hmm"]))


SPEC = GridSpec((20, 20))
POSE = Pose(*SPEC.center(10, 10), 0.88, 0.0)


def _nav_only_behind():
    # navigable floor only towards -x, so directions 1, 4 and 10 project onto nothing
    nav = np.zeros((20, 20), bool)
    nav[2:9, 10] = True
    return nav


def test_feedback_trace_until_usable_direction():
    judge = ScriptedJudge(["Answer: Direction 1", "Answer: Direction 4", "Answer: Direction 7"])
    out = judge_with_feedback(PAN4, "x", NavAction.EXPLORE, [], judge, _nav_only_behind(), POSE, SPEC)
    assert out.calls == 3 and not out.exhausted
    assert out.judgment.direction == 7 and out.value_map.values.sum() > 0
    assert judge.feedback_log[0] is None
    assert "Direction 1 has no navigable" in judge.feedback_log[1]
    assert "Direction 4 has no navigable" in judge.feedback_log[2]


def test_four_empty_projections_degrade_to_zero_map(caplog):
    judge = ScriptedJudge(["Answer: Direction 1", "Answer: Direction 4", "Answer: Direction 10", "Answer: Direction 1"])
    nav = np.zeros((20, 20), bool)
    with caplog.at_level(logging.WARNING):
        out = judge_with_feedback(PAN4, "x", NavAction.EXPLORE, [], judge, nav, POSE, SPEC)
    assert out.calls == 4 and judge.calls == 4 and out.exhausted
    assert not out.value_map.values.any()
    assert "zero map" in caplog.text
    assert "Direction 10 has no navigable" in judge.feedback_log[3]


def test_stop_judgment_gives_zero_map():
    out = judge_with_feedback(PAN4, "x", NavAction.EXPLORE, [], ScriptedJudge(["Answer: Stop"]), _nav_only_behind(), POSE, SPEC)
    assert out.judgment.is_stop and out.calls == 1 and not out.value_map.values.any()


def test_heuristic_prefers_nearest_landmark():
    pan = Panorama((_tile(1), _tile(4, [("sofa", 3.0)]), _tile(7, [("sofas", 1.5)]), _tile(10)))
    reply = HeuristicJudge().judge(pan, "x", NavAction.APPROACH, ["sofa"])
    assert parse_judgment(reply, pan).direction == 7


def test_heuristic_prefers_open_then_least_turn():
    pan = Panorama((_tile(1, free=(1, 1.0, 1)), _tile(4, free=(1, 5.0, 1)), _tile(7, free=(1, 9.0, 1)), _tile(10, free=(1, 4.0, 1))))
    # 4, 7 and 10 are all open enough; 4 and 10 turn equally, so the lower id wins
    assert parse_judgment(HeuristicJudge().judge(pan, "x", NavAction.EXPLORE, []), pan).direction == 4


def test_heuristic_skips_rejected_directions():
    pan = Panorama((_tile(1, free=(1, 5.0, 1)), _tile(4), _tile(7), _tile(10)))
    reply = HeuristicJudge().judge(pan, "x", NavAction.EXPLORE, [], feedback_message(1))
    assert parse_judgment(reply, pan).direction != 1


def test_scripted_judge_needs_replies():
    with pytest.raises(InputError):
        ScriptedJudge([])
