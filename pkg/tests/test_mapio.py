from __future__ import annotations

import numpy as np

from valuenav.grid import GridSpec
from valuenav.mapio import dump_maps, load_sidecar, read_pgm, to_gray, write_pgm
from valuenav.pathplan import Path
from valuenav.valuemaps import SOURCES, ValueMap, Waypoint, select_waypoint
from valuenav.worldmodel import Pose

SPEC = GridSpec((7, 5))


def _maps(rng):
    maps = {s: ValueMap(rng.random((7, 5)), s, SPEC) for s in SOURCES if s != "fused"}
    total = sum(m.values for m in maps.values())
    maps["fused"] = ValueMap(total, "fused", SPEC)
    return maps


def test_all_zero_map_is_black(tmp_path):
    write_pgm(tmp_path / "z.pgm", to_gray(ValueMap.zeros(SPEC, "semantic")))
    img = read_pgm(tmp_path / "z.pgm")
    assert img.shape == (5, 7) and not img.any()


def test_full_scale_is_white():
    m = ValueMap(np.full((7, 5), 4.0), "fused", SPEC)
    assert (to_gray(m) == 255).all()


def test_sidecar_round_trip_is_bit_equal(tmp_path, rng):
    maps = _maps(rng)
    wp = Waypoint((3, 2), SPEC.center(3, 2), float(maps["fused"].values[3, 2]))
    path = Path(((0, 0), (1, 1), (3, 2)), 2.5)
    files = dump_maps(maps, [(0.1, 0.2), (0.3, 0.4)], wp, path, tmp_path, "ep", 4)
    assert len(files) == len(SOURCES) + 1
    data = load_sidecar(tmp_path / "ep_step004_sidecar.json")
    for s in SOURCES:
        assert np.array_equal(data["maps"][s], maps[s].values)
    assert data["waypoint"]["cell"] == [3, 2]
    assert data["path"] == {"cells": [[0, 0], [1, 1], [3, 2]], "cost": 2.5}
    assert data["trajectory"] == [[0.1, 0.2], [0.3, 0.4]]


def test_fused_image_peaks_at_waypoint(tmp_path, rng):
    maps = _maps(rng)
    nav = np.ones((7, 5), bool)
    wp = select_waypoint(maps["fused"], nav, Pose(0.1, 0.1))
    dump_maps(maps, [], wp, None, tmp_path, "ep", 0)
    img = read_pgm(tmp_path / "ep_step000_fused.pgm")
    # image rows are y, columns are x
    assert img[wp.cell[1], wp.cell[0]] == img.max()
