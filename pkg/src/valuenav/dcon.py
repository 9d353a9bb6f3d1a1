"""Chain-of-navigation planning: prompt assembly, reply parsing and chain updates."""
from __future__ import annotations

import ast
import enum
import json
import re
from dataclasses import dataclass, field, replace
from functools import lru_cache
from importlib import resources
from typing import Any, Iterable, Iterator, Mapping, Protocol, Sequence

from .errors import InputError, ParseError, PlannerFailure

MAX_PARSE_RETRIES = 3
DOORWAY = "Doorway"

SECTION_HEADERS = ("Robot Definition", "Navigation Strategy", "Prediction Format", "Episode Information")


class NavAction(enum.Enum):
    EXPLORE = "Explore"
    APPROACH = "Approach"
    MOVE_FORWARD = "Move Forward"
    TURN_LEFT = "Turn Left"
    TURN_RIGHT = "Turn Right"
    TURN_AROUND = "Turn Around"
    ENTER = "Enter"
    EXIT = "Exit"

    @classmethod
    def parse(cls, text: Any) -> "NavAction":
        key = re.sub(r"[^a-z]", "", str(text).lower())
        for action in cls:
            if action.value.replace(" ", "").lower() == key:
                return action
        raise ParseError(f"unknown action {text!r}", raw=str(text))


class TaskKind(enum.Enum):
    OBJECT_NAV = "ObjectNav"
    VLN = "VLN"
    DEMAND_NAV = "DemandNav"


@dataclass(frozen=True)
class DconStep:
    reason: str
    action: NavAction
    landmarks: tuple[str, ...] = ()
    flag: bool = False

    def __post_init__(self):
        object.__setattr__(self, "landmarks", tuple(self.landmarks))


@dataclass(frozen=True)
class DconChain:
    instruction: str
    history: tuple[DconStep, ...] = ()
    current: DconStep | None = None


class PlannerBackend(Protocol):
    def plan_step(self, prompt: str) -> str: ...


# --- rendering / parsing ----------------------------------------------------


def render_step(step: DconStep) -> str:
    """Canonical reply text for ``step``; :func:`parse_dcon_response` inverts it."""
    return json.dumps(
        {
            "Reason": step.reason,
            "Action": step.action.value,
            "Landmark": list(step.landmarks),
            "Flag": step.flag,
        },
        ensure_ascii=False,
    )


def _iter_objects(text: str) -> Iterator[str]:
    """Yield balanced ``{...}`` spans, outermost first, honouring quotes."""
    start = text.find("{")
    while start != -1:
        depth = 0
        quote = None
        escaped = False
        end = None
        for k in range(start, len(text)):
            ch = text[k]
            if quote:
                if escaped:
                    escaped = False
                elif ch == "\\":
                    escaped = True
                elif ch == quote:
                    quote = None
            elif ch in "'\"":
                quote = ch
            elif ch == "{":
                depth += 1
            elif ch == "}":
                depth -= 1
                if depth == 0:
                    end = k
                    break
        if end is not None:
            yield text[start : end + 1]
        start = text.find("{", start + 1)


_JSON_WORDS = {"true": "True", "false": "False", "null": "None"}


def _pythonize(span: str) -> str:
    """Swap bare JSON literals for Python ones outside of quoted strings."""
    out, buf = [], []
    quote = None
    escaped = False

    def flush():
        out.append(re.sub(r"\b(true|false|null)\b", lambda m: _JSON_WORDS[m.group(1)], "".join(buf)))
        buf.clear()

    for ch in span:
        if quote:
            out.append(ch)
            if escaped:
                escaped = False
            elif ch == "\\":
                escaped = True
            elif ch == quote:
                quote = None
        elif ch in "'\"":
            flush()
            quote = ch
            out.append(ch)
        else:
            buf.append(ch)
    flush()
    return "".join(out)


def _load_object(span: str, strict: bool) -> Any:
    try:
        return json.loads(span)
    except ValueError:
        if strict:
            return None
    for candidate in (span, _pythonize(span)):
        try:
            return ast.literal_eval(candidate)
        except (ValueError, SyntaxError, TypeError, MemoryError, RecursionError):
            continue
    return None


def _parse_flag(value: Any) -> bool:
    if value is None:
        return False
    if isinstance(value, bool):
        return value
    if isinstance(value, (int, float)) and value in (0, 1):
        return bool(value)
    if isinstance(value, str):
        key = value.strip().lower()
        if key in ("true", "yes", "1"):
            return True
        if key in ("false", "no", "0", ""):
            return False
    raise ParseError(f"unrecognised Flag value {value!r}", raw=str(value))


def _parse_landmarks(value: Any) -> tuple[str, ...]:
    if value is None:
        return ()
    if isinstance(value, (list, tuple)):
        return tuple(str(v) for v in value)
    text = str(value).strip()
    if not text or text.lower() in ("none", "null", "n/a"):
        return ()
    return (text,)


def step_from_mapping(data: Mapping[str, Any]) -> DconStep:
    """Build a step from a mapping with case-insensitive Reason/Action/Landmark/Flag keys."""
    keys = {str(k).strip().lower(): v for k, v in data.items()}
    if "action" not in keys:
        raise ParseError("object has no Action key", raw=repr(data))
    return DconStep(
        reason=str(keys.get("reason", "")),
        action=NavAction.parse(keys["action"]),
        landmarks=_parse_landmarks(keys.get("landmark", keys.get("landmarks"))),
        flag=_parse_flag(keys.get("flag", False)),
    )


def parse_dcon_response(text: str, strict: bool = False) -> DconStep:
    """Extract the first object carrying an Action key from a model reply.

    Tolerates surrounding prose, single quotes, trailing commas and Python
    or JSON boolean spellings unless ``strict`` (JSON only).
    """
    for span in _iter_objects(text):
        data = _load_object(span, strict)
        if not isinstance(data, dict):
            continue
        if not any(str(k).strip().lower() == "action" for k in data):
            continue
        try:
            return step_from_mapping(data)
        except ParseError as exc:
            raise ParseError(str(exc), raw=text) from exc
    raise ParseError("no navigation object found in reply", raw=text)


def rewrite_enter_exit(step: DconStep) -> DconStep:
    if step.action not in (NavAction.ENTER, NavAction.EXIT):
        return step
    landmarks = step.landmarks
    if not any(l.strip().lower() == DOORWAY.lower() for l in landmarks):
        landmarks = (DOORWAY,) + landmarks
    return replace(step, action=NavAction.APPROACH, landmarks=landmarks)


# --- prompt -----------------------------------------------------------------


@lru_cache(maxsize=None)
def load_template(name: str) -> str:
    return resources.files("valuenav").joinpath("templates", name).read_text(encoding="utf-8").rstrip("\n")


_STRATEGY_FILES = {
    TaskKind.OBJECT_NAV: "dcon_strategy_objectnav.txt",
    TaskKind.VLN: "dcon_strategy_vln.txt",
    TaskKind.DEMAND_NAV: "dcon_strategy_demand.txt",
}


def _describe(step: DconStep) -> str:
    landmarks = ", ".join(step.landmarks) if step.landmarks else "(none)"
    return f"{step.action.value} - {landmarks}"


def build_dcon_prompt(chain: DconChain, observed_labels: Iterable[str], task_kind: TaskKind) -> str:
    labels = sorted(set(observed_labels))
    executed = list(chain.history) + ([chain.current] if chain.current else [])
    history = "\n".join(f"{n}. {_describe(s)}" for n, s in enumerate(executed, 1)) or "(none yet)"
    parts = [
        f"### {SECTION_HEADERS[0]}",
        load_template("dcon_robot.txt"),
        "",
        f"### {SECTION_HEADERS[1]}",
        load_template("dcon_actions.txt"),
        "",
        load_template(_STRATEGY_FILES[task_kind]),
        "",
        load_template("dcon_landmarks.txt"),
        "",
        f"### {SECTION_HEADERS[2]}",
        load_template("dcon_format.txt"),
        "",
        f"### {SECTION_HEADERS[3]}",
        f"Task type: {task_kind.value}",
        f"Instruction: {chain.instruction}",
        f"Observed objects: {', '.join(labels) if labels else '(none yet)'}",
        "Executed steps:",
        history,
    ]
    return "\n".join(parts) + "\n"


RETRY_NOTE = "\n\nYour previous reply could not be parsed. Answer with the object only."


def plan_next_step(
    chain: DconChain,
    observed_labels: Iterable[str],
    task_kind: TaskKind,
    backend: PlannerBackend,
    max_parse_retries: int = MAX_PARSE_RETRIES,
    strict: bool = False,
) -> DconChain:
    """Ask the backend for the next step and advance the chain.

    The step being executed moves into the history; the parsed and
    Enter/Exit-rewritten reply becomes the new current step.
    """
    prompt = build_dcon_prompt(chain, observed_labels, task_kind)
    last_error: ParseError | None = None
    for attempt in range(max_parse_retries + 1):
        reply = backend.plan_step(prompt if attempt == 0 else prompt + RETRY_NOTE)
        try:
            step = rewrite_enter_exit(parse_dcon_response(reply, strict=strict))
            break
        except ParseError as exc:
            last_error = exc
    else:
        raise PlannerFailure(f"planner reply unparseable after {max_parse_retries} retries: {last_error}")
    history = chain.history + ((chain.current,) if chain.current else ())
    return DconChain(chain.instruction, history, step)


class ScriptedBackend:
    """Plays a fixed list of steps, repeating the last one once exhausted.

    Steps are rendered to reply text so callers exercise the full parse path.
    """

    def __init__(self, script: Sequence[DconStep]):
        if not script:
            raise InputError("scripted backend needs at least one step")
        self.script = list(script)
        self.calls = 0

    def plan_step(self, prompt: str) -> str:
        step = self.script[min(self.calls, len(self.script) - 1)]
        self.calls += 1
        return render_step(step)


def scripted_backend(script: Sequence[DconStep | Mapping[str, Any]]) -> ScriptedBackend:
    steps = [s if isinstance(s, DconStep) else step_from_mapping(s) for s in script]
    return ScriptedBackend(steps)
