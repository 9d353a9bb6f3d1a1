"""Run one bundled episode and narrate each decision step.

    python demos/walkthrough.py [episode-id] [--maps DIR]

With ``--maps`` the five value maps of every step are written as PGM
images next to a JSON sidecar.
"""
from __future__ import annotations

import argparse

from valuenav.episode import run_episode
from valuenav.mapio import dump_maps
from valuenav.suite import build_backends, fixture_path, load_suite


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("episode", nargs="?", default="apartment-exit-bedroom")
    ap.add_argument("--maps", help="directory for value-map images")
    args = ap.parse_args()

    suite = load_suite(fixture_path("bundled.suite"))
    by_id = {e.episode_id: e for e in suite.episodes}
    if args.episode not in by_id:
        raise SystemExit(f"unknown episode; pick one of: {', '.join(by_id)}")
    ep = by_id[args.episode]
    print(f"{ep.episode_id}: {ep.instruction!r} in {ep.scene.name} ({ep.scene.width}x{ep.scene.height} cells)")

    def narrate(rec):
        wp = rec.waypoint
        x, y = rec.trajectory[-1]
        where = f"waypoint {wp.cell} value {wp.value:.2f}" if wp else "no waypoint"
        print(f"  step {rec.index:2d}: robot at ({x:.2f}, {y:.2f}), {where}")
        if args.maps:
            dump_maps(rec.maps, rec.trajectory, rec.waypoint, rec.path, args.maps, rec.episode_id, rec.index)

    r = run_episode(ep, build_backends(ep, "scripted"), map_sink=narrate)
    print(
        f"stopped by {r.stop_reason} after {r.step_count} actions: success={r.success} "
        f"NE={r.nav_error:.2f} m, path {r.traj_length:.2f} m vs shortest {r.shortest_path:.2f} m"
    )


if __name__ == "__main__":
    main()
