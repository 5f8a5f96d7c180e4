"""Event-driven simulation of individual visitors and fans.

General visitors reach the story as a Poisson process whose intensity
follows the story's list and page position; it is sampled by thinning
against the intensity at the current time, which dominates the future
because positions only move down the list. Each fan carries an
exponential clock started when its voter voted; when the clock fires the
fan sees the story (leaving the pool) and votes with probability ``r``.
Only voting fans need to be scheduled; the others matter for the pool
size alone.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .model import ListState, SiteParams, StoryParams, front_page, page_fraction, upcoming_page
from .observations import ObservationSeries, hour_bucket, hourly_grid
from .ode import Trajectory

__all__ = [
    "McControls",
    "McEnsemble",
    "RunRecord",
    "simulate_once",
    "simulate_run",
    "simulate_ensemble",
    "SyntheticStory",
    "generate_synthetic_dataset",
    "mean_new_fans",
]


@dataclass
class RunRecord:
    """Raw outcome of one stochastic run."""

    vote_times: np.ndarray  # times of every vote after the submitter's
    t_promoted: Optional[float]
    t_end: float
    S: int
    fan_add_times: np.ndarray  # one entry per fan, incl. the submitter's at t=0
    fan_leave_times: np.ndarray

    def votes_at(self, times) -> np.ndarray:
        return 1 + np.searchsorted(self.vote_times, np.asarray(times, dtype=float), side="right")

    def fans_at(self, times) -> np.ndarray:
        times = np.asarray(times, dtype=float)
        added = np.searchsorted(self.fan_add_times, times, side="right")
        left = np.searchsorted(self.fan_leave_times, times, side="right")
        return added - left

    @property
    def final_votes(self) -> int:
        return 1 + len(self.vote_times)


def mean_new_fans(n: int, site: SiteParams) -> float:
    """Expected fans gained by the vote taking the count from ``n`` to ``n + 1``.

    This is the fan-increment law integrated over one vote, so summed over
    votes it matches the mean-field fan gain exactly.
    """
    a, b = site.a, site.b
    if b == 1:
        return a * math.log1p(1.0 / n)
    return a * ((n + 1) ** (1 - b) - n ** (1 - b)) / (1 - b)


def simulate_run(story: StoryParams, site: SiteParams, t_end: float, rng: np.random.Generator) -> RunRecord:
    r, nu, c, omega = story.r, site.nu, site.c, site.omega
    mu, lam, h, t_up = site.mu, site.lam, site.h, site.t_upcoming_max
    k_u, k_f = site.k_u, site.k_f
    fan_clock = 1.0 / omega if omega > 0 else math.inf

    add_chunks = []
    leave_chunks = []
    heap: list[float] = []

    def add_fans(t: float, k: int):
        if k <= 0:
            return
        add_chunks.append(np.full(k, t))
        if fan_clock == math.inf:
            leave_chunks.append(np.full(k, math.inf))
            return
        leave = t + rng.exponential(fan_clock, k)
        leave_chunks.append(leave)
        for x in leave[rng.random(k) < r]:
            heapq.heappush(heap, float(x))

    add_fans(0.0, int(story.S))
    n = 1
    t = 0.0
    t_prom: Optional[float] = 0.0 if h <= 1 else None
    votes: list[float] = []
    exp = rng.exponential
    uni = rng.random

    while True:
        # dominating general-visitor vote rate from now on, in the current channel
        if t_prom is not None:
            bound = r * nu * page_fraction(k_f * (t - t_prom) + 1.0, mu, lam)
            horizon = math.inf
        elif t <= t_up:
            bound = r * c * nu * page_fraction(k_u * t + 1.0, mu, lam)
            horizon = t_up
        else:
            bound = 0.0
            horizon = math.inf
        cand = t + exp(1.0 / bound) if bound > 0 else math.inf
        if cand > horizon:
            cand = math.inf
        nxt_fan = heap[0] if heap else math.inf
        if min(cand, nxt_fan) > t_end:
            break
        if nxt_fan <= cand:
            t = heapq.heappop(heap)
        else:
            t = cand
            if t_prom is not None:
                rate = r * nu * page_fraction(k_f * (t - t_prom) + 1.0, mu, lam)
            else:
                rate = r * c * nu * page_fraction(k_u * t + 1.0, mu, lam)
            if uni() * bound > rate:
                continue
        # a vote at time t
        add_fans(t, int(rng.poisson(mean_new_fans(n, site))))
        n += 1
        votes.append(t)
        if t_prom is None and n >= h:
            t_prom = t

    if add_chunks:
        add_times = np.concatenate(add_chunks)
        leave_times = np.sort(np.concatenate(leave_chunks))
    else:
        add_times = leave_times = np.empty(0)
    return RunRecord(np.asarray(votes), t_prom, float(t_end), int(story.S), add_times, leave_times)


def _trajectory_from_run(run: RunRecord, story: StoryParams, site: SiteParams) -> Trajectory:
    t = np.concatenate([[0.0], run.vote_times])
    if run.t_end > t[-1]:
        t = np.append(t, run.t_end)
    votes = run.votes_at(t).astype(float)
    fans = run.fans_at(t).astype(float)
    lists, page = [], []
    for ti, ni in zip(t, votes):
        if run.t_promoted is not None and ti >= run.t_promoted:
            lists.append(ListState.FRONT)
            page.append(front_page(ti, run.t_promoted, site))
        elif ti <= site.t_upcoming_max:
            lists.append(ListState.UPCOMING)
            page.append(upcoming_page(ti, site))
        else:
            lists.append(ListState.REMOVED)
            page.append(0.0)
    return Trajectory(t, votes, fans, lists, np.asarray(page), run.t_promoted, story)


def simulate_once(story: StoryParams, site: SiteParams, t_end: float,
                  rng: np.random.Generator) -> Trajectory:
    """One stochastic realisation, sampled at every vote and at ``t_end``."""
    return _trajectory_from_run(simulate_run(story, site, t_end, rng), story, site)


def _streams(seed: int, n: int) -> list[np.random.Generator]:
    return [np.random.Generator(np.random.PCG64(ss)) for ss in np.random.SeedSequence(seed).spawn(n)]


@dataclass(frozen=True)
class McControls:
    seed: int = 0
    n_runs: int = 1000
    t_end: float = 2880.0
    record_grid: tuple[float, ...] = tuple(float(x) for x in range(0, 2881, 10))

    def __post_init__(self):
        if self.n_runs < 1:
            raise ValueError(f"n_runs must be >= 1, got {self.n_runs!r}")
        g = np.asarray(self.record_grid, dtype=float)
        if g.size and (np.any(np.diff(g) < 0) or g[0] < 0 or g[-1] > self.t_end):
            raise ValueError("record_grid must be sorted and within [0, t_end]")


@dataclass
class McEnsemble:
    grid: np.ndarray
    mean_votes: np.ndarray
    var_votes: np.ndarray
    promoted_by: np.ndarray  # fraction of runs promoted by each grid time
    promoted_fraction: float
    mean_promotion_time: float  # nan if no run was promoted
    per_run_finals: np.ndarray
    per_run_promotion: list[Optional[float]] = field(default_factory=list)

    @property
    def n_runs(self) -> int:
        return len(self.per_run_finals)

    @property
    def stderr_votes(self) -> np.ndarray:
        return np.sqrt(self.var_votes / self.n_runs)


def simulate_ensemble(story: StoryParams, site: SiteParams, controls: McControls = McControls()) -> McEnsemble:
    """Average of ``n_runs`` independent runs on ``controls.record_grid``.

    Run ``i`` always uses the ``i``-th child of the seed sequence, so the
    result does not depend on how runs are scheduled.
    """
    grid = np.asarray(controls.record_grid, dtype=float)
    counts = np.empty((controls.n_runs, grid.size))
    finals = np.empty(controls.n_runs, dtype=np.int64)
    proms: list[Optional[float]] = []
    for i, rng in enumerate(_streams(controls.seed, controls.n_runs)):
        run = simulate_run(story, site, controls.t_end, rng)
        counts[i] = run.votes_at(grid)
        finals[i] = run.final_votes
        proms.append(run.t_promoted)
    ddof = 1 if controls.n_runs > 1 else 0
    prom_t = np.array([p for p in proms if p is not None])
    promoted_by = np.array([sum(1 for p in proms if p is not None and p <= g) for g in grid]) / controls.n_runs
    return McEnsemble(
        grid=grid,
        mean_votes=counts.mean(axis=0),
        var_votes=counts.var(axis=0, ddof=ddof),
        promoted_by=promoted_by,
        promoted_fraction=len(prom_t) / controls.n_runs,
        mean_promotion_time=float(prom_t.mean()) if prom_t.size else math.nan,
        per_run_finals=finals,
        per_run_promotion=proms,
    )


@dataclass
class SyntheticStory:
    obs: ObservationSeries
    truth: StoryParams
    t_promoted: Optional[float]
    final_votes: int


def generate_synthetic_dataset(n_stories: int, mu_ln: float = -1.67, sigma_ln: float = 0.47,
                               s_values: Optional[Sequence[int]] = None, site: SiteParams = SiteParams(),
                               seed: int = 0, t_end: float = 2880.0, cadence: float = 60.0) -> list[SyntheticStory]:
    """Stories with lognormal ``r`` and ``S`` drawn from ``s_values``, each simulated once.

    ``sigma_ln == 0`` gives every story ``r = exp(mu_ln)``. Draws of ``r``
    above 1 are clipped to 1.
    """
    if n_stories < 1:
        raise ValueError("n_stories must be >= 1")
    if sigma_ln < 0:
        raise ValueError("sigma_ln must be >= 0")
    s_values = list(range(5, 161)) if s_values is None else list(s_values)
    root = np.random.SeedSequence(seed)
    param_ss, run_ss = root.spawn(2)
    prng = np.random.Generator(np.random.PCG64(param_ss))
    rs = np.minimum(np.exp(mu_ln + sigma_ln * prng.standard_normal(n_stories)), 1.0)
    ss = prng.choice(np.asarray(s_values), size=n_stories)
    grid = hourly_grid(t_end, cadence)
    out = []
    for i, child in enumerate(run_ss.spawn(n_stories)):
        story = StoryParams(float(rs[i]), int(ss[i]))
        run = simulate_run(story, site, t_end, np.random.Generator(np.random.PCG64(child)))
        obs = ObservationSeries(
            story_id=f"s{i:04d}",
            s_submitter=story.S,
            t=grid,
            votes=run.votes_at(grid),
            promoted_observed=run.t_promoted is not None,
            promotion_hour_bucket=hour_bucket(run.t_promoted, cadence),
        )
        out.append(SyntheticStory(obs, story, run.t_promoted, run.votes_at([t_end])[0].item()))
    return out
