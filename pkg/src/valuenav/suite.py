"""Scenario suites: loading, backend wiring, running and result files."""
from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

from .dcon import TaskKind, scripted_backend, step_from_mapping
from .episode import Backends, DecisionRecord, EpisodeConfig, EpisodeResult, EpisodeSpec, run_episode
from .errors import InputError, SchemaError
from .intuition import HeuristicJudge, ScriptedJudge
from .llmclient import (
    EndpointConfig,
    RecordingJudge,
    RecordingPlanner,
    RemoteJudge,
    RemotePlanner,
    Transcript,
    replay_backend,
)
from .mapio import dump_maps
from .simulator import GoalSpec, Scene, Spawn, load_scene

SUITE_FORMAT = "suite"
SUITE_VERSION = 1
BACKEND_MODES = ("scripted", "replay", "remote")


def fixture_path(name: str) -> Path:
    """Path of a bundled fixture file (scene or suite)."""
    return Path(str(resources.files("valuenav").joinpath("fixtures", name)))


@dataclass(frozen=True)
class ScenarioSuite:
    name: str
    episodes: tuple[EpisodeSpec, ...]
    source: Path | None = None


def _spawn(scene: Scene, value: Any) -> Spawn:
    if isinstance(value, str):
        if value not in scene.spawns:
            raise InputError(f"scene {scene.name!r} has no spawn {value!r}")
        return scene.spawns[value]
    heading = float(value.get("heading_deg", 0))
    return Spawn(tuple(int(v) for v in value["cell"]), int(heading // 30) % 12)


def _goal(scene: Scene, value: Any) -> GoalSpec:
    if isinstance(value, str):
        if value not in scene.goals:
            raise InputError(f"scene {scene.name!r} has no goal {value!r}")
        return scene.goals[value]
    return GoalSpec.from_dict(value)


def load_suite(path: str | Path) -> ScenarioSuite:
    path = Path(path)
    doc = json.loads(path.read_text(encoding="utf-8"))
    errors = []
    if doc.get("format") != SUITE_FORMAT or doc.get("version") != SUITE_VERSION:
        errors.append(f"expected format {SUITE_FORMAT!r} version {SUITE_VERSION}")
    if not doc.get("episodes"):
        errors.append("suite has no episodes")
    if errors:
        raise SchemaError(errors)
    scenes: dict[str, Scene] = {}
    episodes = []
    seen_ids = set()
    for n, ep in enumerate(doc["episodes"]):
        ref = ep.get("scene", doc.get("scene"))
        if not ref:
            errors.append(f"episode {n} names no scene")
            continue
        if ref not in scenes:
            scenes[ref] = load_scene(path.parent / ref)
        scene = scenes[ref]
        try:
            episode_id = str(ep.get("id", f"{path.stem}-{n:03d}"))
            if episode_id in seen_ids:
                raise InputError(f"duplicate episode id {episode_id!r}")
            seen_ids.add(episode_id)
            judge = ep.get("judge", "heuristic")
            episodes.append(
                EpisodeSpec(
                    episode_id=episode_id,
                    scene=scene,
                    instruction=str(ep["instruction"]),
                    task_kind=TaskKind(ep.get("task_kind", "ObjectNav")),
                    goal=_goal(scene, ep["goal"]),
                    spawn=_spawn(scene, ep["spawn"]),
                    planner_script=tuple(step_from_mapping(s) for s in ep.get("planner", ())),
                    judge_script=() if judge == "heuristic" else tuple(str(r) for r in judge),
                    seed=int(ep.get("seed", doc.get("seed", 0))),
                )
            )
        except (KeyError, ValueError, TypeError) as exc:
            errors.append(f"episode {n}: {exc}")
    if errors:
        raise SchemaError(errors)
    return ScenarioSuite(str(doc.get("name", path.stem)), tuple(episodes), path)


def transcript_file(directory: str | Path, episode_id: str) -> Path:
    return Path(directory) / f"{episode_id}.transcript.jsonl"


def build_backends(
    episode: EpisodeSpec,
    mode: str,
    transcript_dir: str | Path | None = None,
    record: Transcript | None = None,
) -> Backends:
    """Backends for one episode; ``record`` wraps them so every exchange is logged."""
    if mode == "scripted":
        if not episode.planner_script:
            raise InputError(f"episode {episode.episode_id} has no planner script")
        planner = scripted_backend(episode.planner_script)
        judge = ScriptedJudge(episode.judge_script) if episode.judge_script else HeuristicJudge()
        if record is not None:
            return Backends(RecordingPlanner(planner, record), RecordingJudge(judge, record))
        return Backends(planner, judge)
    if mode == "replay":
        if transcript_dir is None:
            raise InputError("replay needs a transcript directory")
        backend = replay_backend(Transcript.load(transcript_file(transcript_dir, episode.episode_id)))
        return Backends(backend, backend)
    if mode == "remote":
        transcript = record if record is not None else Transcript()
        return Backends(
            RemotePlanner(EndpointConfig.from_env("VALUENAV_PLANNER"), transcript),
            RemoteJudge(EndpointConfig.from_env("VALUENAV_JUDGE"), transcript),
        )
    raise InputError(f"unknown backend mode {mode!r}")


def run_suite(
    suite: ScenarioSuite,
    mode: str = "scripted",
    config: EpisodeConfig = EpisodeConfig(),
    parallel: int = 1,
    dump_dir: str | Path | None = None,
    transcript_dir: str | Path | None = None,
    record: bool = False,
) -> list[EpisodeResult]:
    """Run every episode; results come back in suite order whatever ``parallel`` is.

    With ``record`` each episode's exchanges are saved under
    ``transcript_dir`` so the run can be replayed later.  Remote runs always
    keep a transcript when ``transcript_dir`` is given.
    """
    if record and transcript_dir is None:
        raise InputError("recording needs a transcript directory")

    def one(episode: EpisodeSpec) -> EpisodeResult:
        keep = record or (mode == "remote" and transcript_dir is not None)
        transcript = Transcript() if keep else None
        backends = build_backends(episode, mode, transcript_dir, transcript)
        sink = None
        if dump_dir is not None:
            def sink(rec: DecisionRecord) -> None:
                dump_maps(rec.maps, rec.trajectory, rec.waypoint, rec.path, dump_dir, rec.episode_id, rec.index)
        result = run_episode(episode, backends, config, sink)
        if transcript is not None:
            target = transcript_file(transcript_dir, episode.episode_id)
            target.parent.mkdir(parents=True, exist_ok=True)
            transcript.save(target)
            result = replace(result, transcript=target.name)
        elif mode == "replay":
            result = replace(result, transcript=transcript_file(transcript_dir, episode.episode_id).name)
        return result

    if parallel <= 1:
        return [one(ep) for ep in suite.episodes]
    with ThreadPoolExecutor(max_workers=parallel) as pool:
        return list(pool.map(one, suite.episodes))


def dumps_results(results: Iterable[EpisodeResult]) -> str:
    return "".join(json.dumps(r.to_dict(), sort_keys=True) + "\n" for r in results)


def write_results(path: str | Path, results: Sequence[EpisodeResult]) -> None:
    Path(path).write_text(dumps_results(results), encoding="utf-8")


def read_results(path: str | Path) -> list[EpisodeResult]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    return [EpisodeResult.from_dict(json.loads(l)) for l in lines if l.strip()]
