"""Benchmark metrics over episode results (SR, OSR, SPL, NE, TL)."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .episode import EpisodeResult
from .errors import InputError


@dataclass(frozen=True)
class MetricsTable:
    episodes: int
    sr: float  # percent
    osr: float  # percent
    spl: float  # percent
    ne: float  # meters
    tl: float  # meters

    def as_dict(self) -> dict:
        return {"episodes": self.episodes, "SR": self.sr, "OSR": self.osr, "SPL": self.spl, "NE": self.ne, "TL": self.tl}

    def format(self) -> str:
        head = f"{'episodes':>8} {'SR':>7} {'OSR':>7} {'SPL':>7} {'NE':>7} {'TL':>7}"
        row = f"{self.episodes:>8d} {self.sr:>7.2f} {self.osr:>7.2f} {self.spl:>7.2f} {self.ne:>7.2f} {self.tl:>7.2f}"
        return head + "\n" + row


def spl_term(success: bool, shortest: float | None, taken: float) -> float:
    """``S * l / max(p, l)`` for one episode.

    A successful episode that started inside the success region (``l == 0``)
    scores 1 when it did not move and ``l / p == 0`` otherwise.
    """
    if not success:
        return 0.0
    if shortest is None or shortest < 0:
        raise InputError("a successful episode needs a shortest-path length")
    longest = max(taken, shortest)
    return 1.0 if longest == 0 else shortest / longest


def compute_metrics(results: Sequence[EpisodeResult]) -> MetricsTable:
    if not results:
        raise InputError("no episode results to aggregate")
    s = np.array([r.success for r in results], dtype=float)
    o = np.array([r.oracle_success for r in results], dtype=float)
    spl = [spl_term(r.success, r.shortest_path, r.traj_length) for r in results]
    return MetricsTable(
        episodes=len(results),
        sr=100.0 * float(s.mean()),
        osr=100.0 * float(o.mean()),
        spl=100.0 * float(np.mean(spl)),
        ne=float(np.mean([r.nav_error for r in results])),
        tl=float(np.mean([r.traj_length for r in results])),
    )
