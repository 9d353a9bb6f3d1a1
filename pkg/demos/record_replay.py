"""Record a suite's backend exchanges, then replay them and compare results."""
from __future__ import annotations

import sys
import tempfile

from valuenav.suite import dumps_results, fixture_path, load_suite, run_suite


def main() -> int:
    name = sys.argv[1] if len(sys.argv) > 1 else "apartment.suite"
    suite = load_suite(fixture_path(name))
    with tempfile.TemporaryDirectory() as tmp:
        recorded = run_suite(suite, "scripted", transcript_dir=tmp, record=True)
        replayed = run_suite(suite, "replay", transcript_dir=tmp)
    same = dumps_results(recorded) == dumps_results(replayed)
    for r in replayed:
        print(f"{r.episode_id:12s} {r.stop_reason:10s} success={r.success!s:5s} NE={r.nav_error:.2f}")
    print("replay identical to recording" if same else "replay DIFFERS from recording")
    return 0 if same else 1


if __name__ == "__main__":
    sys.exit(main())
