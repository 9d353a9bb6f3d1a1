"""Value-map snapshots on disk: grayscale PGM images plus a JSON sidecar."""
from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from .pathplan import Path as CellPath
from .valuemaps import SOURCES, ValueMap, Waypoint

# Fixed full-scale value per source, so images from different steps compare.
FULL_SCALE = {"semantic": 1.0, "action": 1.0, "trajectory": 1.0, "intuition": 1.0, "fused": 4.0}
SIDECAR_VERSION = 1


def to_gray(m: ValueMap) -> np.ndarray:
    """8-bit image with rows along y and columns along x (scene-file layout)."""
    scaled = np.clip(m.values / FULL_SCALE[m.source], 0.0, 1.0) * 255.0
    return np.rint(scaled).astype(np.uint8).T


def write_pgm(path: str | Path, image: np.ndarray) -> None:
    image = np.ascontiguousarray(image, dtype=np.uint8)
    h, w = image.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(image.tobytes())


def read_pgm(path: str | Path) -> np.ndarray:
    data = Path(path).read_bytes()
    parts = data.split(maxsplit=4)
    if parts[0] != b"P5":
        raise ValueError(f"{path} is not a binary PGM")
    w, h, maxval = int(parts[1]), int(parts[2]), int(parts[3])
    if maxval != 255:
        raise ValueError("only 8-bit PGM is supported")
    return np.frombuffer(parts[4][: w * h], dtype=np.uint8).reshape(h, w)


def dump_maps(
    maps: Mapping[str, ValueMap],
    trajectory: Sequence[tuple[float, float]],
    waypoint: Waypoint | None,
    path: CellPath | None,
    out_dir: str | Path,
    episode_id: str,
    step_index: int,
) -> list[Path]:
    """Write one PGM per map and a sidecar with the raw values. Returns the files."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = f"{episode_id}_step{step_index:03d}"
    written = []
    for source in SOURCES:
        target = out / f"{stem}_{source}.pgm"
        write_pgm(target, to_gray(maps[source]))
        written.append(target)
    spec = maps["fused"].spec
    sidecar = {
        "version": SIDECAR_VERSION,
        "episode_id": episode_id,
        "decision_step": step_index,
        "grid": {"shape": list(spec.shape), "resolution": spec.resolution, "origin": list(spec.origin)},
        "maps": {s: maps[s].values.tolist() for s in SOURCES},
        "trajectory": [list(p) for p in trajectory],
        "waypoint": None
        if waypoint is None
        else {"cell": list(waypoint.cell), "world_xy": list(waypoint.world_xy), "value": waypoint.value},
        "path": None if path is None else {"cells": [list(c) for c in path.cells], "cost": path.cost},
    }
    target = out / f"{stem}_sidecar.json"
    target.write_text(json.dumps(sidecar), encoding="utf-8")
    written.append(target)
    return written


def load_sidecar(path: str | Path) -> dict[str, Any]:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    data["maps"] = {k: np.array(v, dtype=float) for k, v in data["maps"].items()}
    return data
