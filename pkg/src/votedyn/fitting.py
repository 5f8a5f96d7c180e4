"""Per-story estimation of interestingness and the predictions built on it."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .model import SiteParams, StoryParams
from .observations import ObservationSeries
from .ode import SolveControls, promotion_time, solve_story

__all__ = [
    "R_BOUNDS",
    "FitResult",
    "rms_objective",
    "golden_section",
    "estimate_r",
    "predict_from_early",
    "baseline_extrapolate",
    "promotion_boundary",
    "classify_promotion",
    "fit_dataset",
    "promotion_time_error",
]

R_BOUNDS = (1e-4, 1.0)
GRID_POINTS = 50
_INV_PHI = (math.sqrt(5) - 1) / 2


@dataclass(frozen=True)
class FitResult:
    story_id: str
    s_submitter: int
    r_hat: float
    rms_votes: float
    rms_relative: float
    predicted_final: float
    predicted_promotion_time: Optional[float]
    n_points_used: int
    degenerate: bool = False
    multimodal: bool = False


def _controls_until(t_last: float, controls: SolveControls) -> SolveControls:
    return replace(controls, t_end=float(t_last))


def rms_objective(t: np.ndarray, votes: np.ndarray, S: int, site: SiteParams,
                  controls: SolveControls = SolveControls()) -> Callable[[float], float]:
    """RMS distance between the model curve and ``votes`` as a function of r."""
    ctl = _controls_until(t[-1], controls)
    grid = list(t)

    def f(r: float) -> float:
        model = solve_story(StoryParams(r, S), site, ctl, t_eval=grid).votes_at(t)
        return math.sqrt(float(np.mean((model - votes) ** 2)))

    return f


def golden_section(f: Callable[[float], float], lo: float, hi: float, tol: float = 1e-6):
    """Minimise a unimodal ``f`` on [lo, hi]. Returns (x, f(x)) of the best point seen."""
    x1 = hi - _INV_PHI * (hi - lo)
    x2 = lo + _INV_PHI * (hi - lo)
    f1, f2 = f(x1), f(x2)
    best = (x1, f1) if f1 <= f2 else (x2, f2)
    while hi - lo > tol:
        if f1 <= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - _INV_PHI * (hi - lo)
            f1 = f(x1)
            if f1 < best[1]:
                best = (x1, f1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + _INV_PHI * (hi - lo)
            f2 = f(x2)
            if f2 < best[1]:
                best = (x2, f2)
    return best


def _resolve_s(obs: ObservationSeries, s_default: Optional[int]) -> int:
    if obs.s_submitter is not None:
        return int(obs.s_submitter)
    if s_default is None:
        raise ValueError(f"story {obs.story_id}: no submitter fan count and no default given")
    return int(s_default)


def estimate_r(obs: ObservationSeries, site: SiteParams = SiteParams(), n_points: Optional[int] = None,
               horizon: float = 2880.0, controls: SolveControls = SolveControls(),
               s_default: Optional[int] = None, fit_horizon: Optional[float] = None) -> FitResult:
    """Least-squares estimate of r from the first ``n_points`` observations.

    The objective is scanned on a log grid over ``R_BOUNDS`` and refined by
    golden section around the best grid point. ``predicted_final`` is the
    model at ``min(horizon, last observation)``; ``fit_horizon`` optionally
    drops points observed after it.
    """
    S = _resolve_s(obs, s_default)
    t, votes = obs.t, obs.votes
    if fit_horizon is not None:
        keep = t <= fit_horizon
        t, votes = t[keep], votes[keep]
    if n_points is not None:
        if not 1 <= n_points <= len(obs):
            raise ValueError(f"n_points must be in [1, {len(obs)}], got {n_points}")
        t, votes = t[:n_points], votes[:n_points]
    if t.size == 0:
        raise ValueError(f"story {obs.story_id}: no observations left to fit")

    lo, hi = R_BOUNDS
    degenerate = bool(np.all(votes == 1))
    multimodal = False
    if degenerate:
        r_hat = lo
    else:
        f = rms_objective(t, votes, S, site, controls)
        grid = np.geomspace(lo, hi, GRID_POINTS)
        vals = np.array([f(r) for r in grid])
        i = int(np.argmin(vals))
        interior = (vals[1:-1] < vals[:-2]) & (vals[1:-1] < vals[2:])
        multimodal = int(interior.sum()) > 1
        a, b = grid[max(i - 1, 0)], grid[min(i + 1, GRID_POINTS - 1)]
        r_hat, f_hat = golden_section(f, a, b, tol=1e-6)
        if vals[i] < f_hat:
            r_hat = float(grid[i])
    return _result(obs, S, r_hat, t, votes, site, horizon, controls, degenerate, multimodal)


def _result(obs, S, r_hat, t, votes, site, horizon, controls, degenerate, multimodal) -> FitResult:
    t_final = min(horizon, float(obs.t[-1]))
    t_stop = max(t_final, float(t[-1]))
    ctl = _controls_until(t_stop, controls)
    traj = solve_story(StoryParams(r_hat, S), site, ctl, t_eval=sorted(set(t.tolist()) | {t_final}))
    model = traj.votes_at(t)
    rms = math.sqrt(float(np.mean((model - votes) ** 2)))
    rel = math.sqrt(float(np.mean(((model - votes) / votes) ** 2)))
    return FitResult(
        story_id=obs.story_id,
        s_submitter=S,
        r_hat=float(r_hat),
        rms_votes=rms,
        rms_relative=rel,
        predicted_final=float(traj.votes_at([t_final])[0]),
        predicted_promotion_time=promotion_time(StoryParams(r_hat, S), site, replace(controls, t_end=horizon)),
        n_points_used=int(t.size),
        degenerate=degenerate,
        multimodal=multimodal,
    )


def predict_from_early(obs: ObservationSeries, site: SiteParams = SiteParams(), k: int = 4,
                       horizon: float = 2880.0, controls: SolveControls = SolveControls(),
                       s_default: Optional[int] = None) -> FitResult:
    if len(obs) < k:
        raise ValueError(f"story {obs.story_id}: needs {k} observations, has {len(obs)}")
    return estimate_r(obs, site, n_points=k, horizon=horizon, controls=controls, s_default=s_default)


def baseline_extrapolate(obs: ObservationSeries, k: int = 4, horizon: Optional[float] = None) -> float:
    """Straight-line extrapolation of the first ``k`` observations to ``horizon``.

    ``horizon`` defaults to the last observation time. The prediction is
    never below the last vote count among the points used.
    """
    t, v = obs.t[:k], obs.votes[:k]
    if t.size < 2:
        raise ValueError(f"story {obs.story_id}: need at least 2 points to extrapolate")
    horizon = float(obs.t[-1]) if horizon is None else horizon
    slope, intercept = np.polyfit(t, v, 1)
    return float(max(slope * horizon + intercept, v[-1]))


def classify_promotion(story: StoryParams, site: SiteParams = SiteParams(),
                       controls: SolveControls = SolveControls()) -> bool:
    return promotion_time(story, site, controls) is not None


def promotion_boundary(site: SiteParams = SiteParams(), s_grid: Sequence[float] = (0, 5, 10, 20, 40, 80, 160, 320),
                       controls: SolveControls = SolveControls(), tol: float = 1e-4) -> list[tuple[float, Optional[float]]]:
    """Smallest r that gets a story with ``S`` fans promoted by ``t_end``, per S.

    Votes grow with r, so promotion is monotone in r and bisection applies.
    The returned r always promotes; None means even r = 1 does not.
    """
    if len(s_grid) == 0:
        raise ValueError("s_grid must not be empty")
    out = []
    lo0, hi0 = R_BOUNDS
    for S in s_grid:
        if S < 0:
            raise ValueError(f"S must be >= 0, got {S}")

        def promotes(r: float) -> bool:
            return promotion_time(StoryParams(r, S), site, controls) is not None

        if not promotes(hi0):
            out.append((S, None))
            continue
        if promotes(lo0):
            out.append((S, lo0))
            continue
        lo, hi = lo0, hi0
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            if promotes(mid):
                hi = mid
            else:
                lo = mid
        out.append((S, hi))
    return out


def fit_dataset(series: Iterable[ObservationSeries], site: SiteParams = SiteParams(), early: Optional[int] = None,
                horizon: float = 2880.0, controls: SolveControls = SolveControls()) -> list[FitResult]:
    """Fit every story. Stories without a fan count get the dataset median."""
    series = list(series)
    known = [o.s_submitter for o in series if o.s_submitter is not None]
    s_default = int(np.median(known)) if known else None
    out = []
    for obs in series:
        if early is None:
            out.append(estimate_r(obs, site, horizon=horizon, controls=controls, s_default=s_default))
        else:
            out.append(predict_from_early(obs, site, k=early, horizon=horizon, controls=controls,
                                          s_default=s_default))
    return out


def promotion_time_error(fit: FitResult, obs: ObservationSeries) -> Optional[float]:
    """Model promotion time minus the midpoint of the observed hour bucket."""
    if fit.predicted_promotion_time is None or obs.promotion_hour_bucket is None:
        return None
    lo, hi = obs.promotion_hour_bucket
    return fit.predicted_promotion_time - 0.5 * (lo + hi)
