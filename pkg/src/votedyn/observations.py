"""Observed vote series and the hourly sampling helpers."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np


@dataclass
class ObservationSeries:
    """Sparse vote counts of one story, the input to fitting."""

    story_id: str
    s_submitter: Optional[int]
    t: np.ndarray
    votes: np.ndarray
    promoted_observed: Optional[bool] = None
    promotion_hour_bucket: Optional[tuple[float, float]] = None

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.votes = np.asarray(self.votes, dtype=float)
        if self.t.size < 1 or self.t.shape != self.votes.shape:
            raise ValueError(f"story {self.story_id}: need >= 1 point with matching t and votes")
        if np.any(np.diff(self.t) <= 0):
            bad = int(np.argmax(np.diff(self.t) <= 0)) + 1
            raise ValueError(f"story {self.story_id}: times not strictly increasing at row {bad}")
        if np.any(np.diff(self.votes) < 0):
            bad = int(np.argmax(np.diff(self.votes) < 0)) + 1
            raise ValueError(f"story {self.story_id}: votes decrease at row {bad}")
        if np.any(self.votes < 1):
            raise ValueError(f"story {self.story_id}: votes must be >= 1")

    def __len__(self) -> int:
        return self.t.size

    def head(self, k: int) -> "ObservationSeries":
        return ObservationSeries(self.story_id, self.s_submitter, self.t[:k], self.votes[:k],
                                 self.promoted_observed, self.promotion_hour_bucket)


def hourly_grid(t_end: float = 2880.0, cadence: float = 60.0, start: Optional[float] = None) -> np.ndarray:
    """Observation times ``start, start + cadence, ...`` up to ``t_end``."""
    start = cadence if start is None else start
    return np.arange(start, t_end + 1e-9, cadence)


def hour_bucket(t: Optional[float], cadence: float = 60.0) -> Optional[tuple[float, float]]:
    if t is None:
        return None
    k = math.floor(t / cadence)
    return (k * cadence, (k + 1) * cadence)


