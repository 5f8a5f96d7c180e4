"""Mean-field integration of the vote / fan-pool system.

The right-hand side has two discontinuities: the promotion crossing
``N = h`` (found as an event) and the removal from the upcoming list at
``t_upcoming_max``. The integrator restarts at both, so no step ever
straddles a jump in the rates.

The stepper is the Dormand-Prince 4(5) pair with its 4th order continuous
extension, written for the two scalar state components directly; numpy
overhead on length-2 vectors would dominate the runtime otherwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .model import (
    ListState,
    SiteParams,
    StoryParams,
    front_page,
    page_fraction,
    upcoming_page,
)

__all__ = [
    "SolveControls",
    "SolverError",
    "Trajectory",
    "solve_story",
    "promotion_time",
]


class SolverError(RuntimeError):
    def __init__(self, message: str, t: float):
        super().__init__(f"{message} at t={t:.6g} min")
        self.t = t


@dataclass(frozen=True)
class SolveControls:
    t_end: float = 2880.0
    max_step: float = 120.0
    rel_tol: float = 1e-8
    abs_tol: float = 1e-8
    event_tol: float = 1e-7

    def __post_init__(self):
        if not self.t_end >= 0:
            raise ValueError(f"t_end must be >= 0, got {self.t_end!r}")
        for name in ("max_step", "rel_tol", "abs_tol", "event_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")


@dataclass
class Trajectory:
    """Time series of one story. Arrays share one index."""

    t: np.ndarray
    votes: np.ndarray
    fans: np.ndarray
    lists: list[ListState]
    page: np.ndarray
    t_promoted: Optional[float] = None
    story: Optional[StoryParams] = None

    @property
    def final_votes(self) -> float:
        return float(self.votes[-1])

    @property
    def promoted(self) -> bool:
        return self.t_promoted is not None

    def __len__(self) -> int:
        return len(self.t)

    def rows(self):
        for i in range(len(self.t)):
            yield float(self.t[i]), float(self.votes[i]), float(self.fans[i]), self.lists[i], float(self.page[i])

    def votes_at(self, times) -> np.ndarray:
        """Votes at ``times``; exact at sample times, linear in between."""
        return np.interp(np.asarray(times, dtype=float), self.t, self.votes)


# Dormand-Prince 4(5) tableau
_C2, _C3, _C4, _C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9
_A21 = 1 / 5
_A31, _A32 = 3 / 40, 9 / 40
_A41, _A42, _A43 = 44 / 45, -56 / 15, 32 / 9
_A51, _A52, _A53, _A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
_A61, _A62, _A63, _A64, _A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
_B1, _B3, _B4, _B5, _B6 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
# 5th minus embedded 4th order weights
_E1, _E3, _E4, _E5, _E6, _E7 = 71 / 57600, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40

# continuous extension: weight of stage i at theta is sum_j P[i][j] * theta**(j+1)
_P = (
    (1.0, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432),
    (0.0, 0.0, 0.0, 0.0),
    (0.0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799),
    (0.0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072),
    (0.0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632),
    (0.0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844),
    (0.0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423),
)

Rhs = Callable[[float, float, float], tuple[float, float]]


class _Step:
    """One accepted step with its stages, for dense evaluation."""

    __slots__ = ("t0", "h", "n0", "s0", "kn", "ks")

    def __init__(self, t0, h, n0, s0, kn, ks):
        self.t0, self.h, self.n0, self.s0, self.kn, self.ks = t0, h, n0, s0, kn, ks

    def at(self, t: float) -> tuple[float, float]:
        th = (t - self.t0) / self.h
        powers = (th, th * th, th ** 3, th ** 4)
        n, s = self.n0, self.s0
        for p, kn, ks in zip(_P, self.kn, self.ks):
            w = self.h * (p[0] * powers[0] + p[1] * powers[1] + p[2] * powers[2] + p[3] * powers[3])
            n += w * kn
            s += w * ks
        return n, s


def _integrate(rhs: Rhs, t0: float, n0: float, s0: float, t1: float, ctl: SolveControls,
               threshold: Optional[float], t_eval: Sequence[float], out: list):
    """Advance from t0 to t1, appending (t, n, s) to ``out``.

    ``t_eval`` points inside (t0, t1] are included in ``out`` via dense
    output. Returns the crossing time and state if ``n`` reaches
    ``threshold`` first, else None.
    """
    rtol, atol = ctl.rel_tol, ctl.abs_tol
    t, n, s = t0, n0, s0
    fn, fs = rhs(t, n, s)
    span = t1 - t0
    if span <= 0:
        return None
    # initial step from the first derivative scale
    d0 = math.hypot(n / (atol + rtol * abs(n)), s / (atol + rtol * abs(s))) / math.sqrt(2)
    d1 = math.hypot(fn / (atol + rtol * abs(n)), fs / (atol + rtol * abs(s))) / math.sqrt(2)
    h = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h = min(h, ctl.max_step, span)
    ie = 0
    while ie < len(t_eval) and t_eval[ie] <= t0:
        ie += 1
    while t < t1:
        h = min(h, t1 - t)
        if h < 1e-12 * max(1.0, abs(t)):
            raise SolverError("step size underflow", t)
        k1n, k1s = fn, fs
        k2n, k2s = rhs(t + _C2 * h, n + h * _A21 * k1n, s + h * _A21 * k1s)
        k3n, k3s = rhs(t + _C3 * h, n + h * (_A31 * k1n + _A32 * k2n), s + h * (_A31 * k1s + _A32 * k2s))
        k4n, k4s = rhs(t + _C4 * h, n + h * (_A41 * k1n + _A42 * k2n + _A43 * k3n),
                       s + h * (_A41 * k1s + _A42 * k2s + _A43 * k3s))
        k5n, k5s = rhs(t + _C5 * h, n + h * (_A51 * k1n + _A52 * k2n + _A53 * k3n + _A54 * k4n),
                       s + h * (_A51 * k1s + _A52 * k2s + _A53 * k3s + _A54 * k4s))
        k6n, k6s = rhs(t + h, n + h * (_A61 * k1n + _A62 * k2n + _A63 * k3n + _A64 * k4n + _A65 * k5n),
                       s + h * (_A61 * k1s + _A62 * k2s + _A63 * k3s + _A64 * k4s + _A65 * k5s))
        n1 = n + h * (_B1 * k1n + _B3 * k3n + _B4 * k4n + _B5 * k5n + _B6 * k6n)
        s1 = s + h * (_B1 * k1s + _B3 * k3s + _B4 * k4s + _B5 * k5s + _B6 * k6s)
        t_new = t + h if t1 - (t + h) > 1e-12 * max(1.0, abs(t1)) else t1
        k7n, k7s = rhs(t_new, n1, s1)
        en = h * (_E1 * k1n + _E3 * k3n + _E4 * k4n + _E5 * k5n + _E6 * k6n + _E7 * k7n)
        es = h * (_E1 * k1s + _E3 * k3s + _E4 * k4s + _E5 * k5s + _E6 * k6s + _E7 * k7s)
        sc_n = atol + rtol * max(abs(n), abs(n1))
        sc_s = atol + rtol * max(abs(s), abs(s1))
        err = math.sqrt(0.5 * ((en / sc_n) ** 2 + (es / sc_s) ** 2))
        if not (math.isfinite(n1) and math.isfinite(s1)):
            h *= 0.2
            continue
        if err > 1.0:
            h *= max(0.2, 0.9 * err ** -0.2)
            continue

        step = _Step(t, t_new - t, n, s,
                     (k1n, k2n, k3n, k4n, k5n, k6n, k7n), (k1s, k2s, k3s, k4s, k5s, k6s, k7s))
        if threshold is not None and n < threshold <= n1:
            te, ne, se = _bisect(step, threshold, ctl.event_tol)
            while ie < len(t_eval) and t_eval[ie] < te:
                out.append((t_eval[ie], *step.at(t_eval[ie])))
                ie += 1
            out.append((te, ne, se))
            return te, ne, se
        while ie < len(t_eval) and t_eval[ie] < t_new:
            out.append((t_eval[ie], *step.at(t_eval[ie])))
            ie += 1
        if s1 < 0:
            if s1 < -atol:
                raise SolverError(f"fan pool went negative ({s1:.3g})", t_new)
            s1 = 0.0
            k7n, k7s = rhs(t_new, n1, s1)
        t, n, s, fn, fs = t_new, n1, s1, k7n, k7s
        out.append((t, n, s))
        fac = 5.0 if err == 0 else min(5.0, 0.9 * err ** -0.2)
        h = min(h * fac, ctl.max_step)
    return None


def _bisect(step: _Step, threshold: float, tol: float):
    lo, hi = step.t0, step.t0 + step.h
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if step.at(mid)[0] < threshold:
            lo = mid
        else:
            hi = mid
    n, s = step.at(hi)
    if n < threshold:
        # the interpolant is within tolerance of the crossing here
        n = threshold
    return hi, n, s


def _rhs_for(mode: ListState, story: StoryParams, site: SiteParams, t_prom: Optional[float]) -> Rhs:
    r, nu, omega, a, b = story.r, site.nu, site.omega, site.a, site.b
    mu, lam = site.mu, site.lam
    if mode is ListState.UPCOMING:
        cnu, k_u = site.c * nu, site.k_u

        def rhs(t, n, s):
            dn = r * (cnu * page_fraction(k_u * t + 1.0, mu, lam) + omega * s)
            return dn, -omega * s + a * n ** -b * dn
    elif mode is ListState.FRONT:
        k_f = site.k_f

        def rhs(t, n, s):
            # clamp guards the dense-output probe landing a hair before t_prom
            dn = r * (nu * page_fraction(k_f * max(t - t_prom, 0.0) + 1.0, mu, lam) + omega * s)
            return dn, -omega * s + a * n ** -b * dn
    else:
        def rhs(t, n, s):
            dn = r * omega * s
            return dn, -omega * s + a * n ** -b * dn
    return rhs


def _page(mode: ListState, t: float, t_prom: Optional[float], site: SiteParams) -> float:
    if mode is ListState.UPCOMING:
        return upcoming_page(t, site)
    if mode is ListState.FRONT:
        return front_page(t, t_prom, site)
    return 0.0


def solve_story(story: StoryParams, site: SiteParams, controls: SolveControls = SolveControls(),
                t_eval: Optional[Sequence[float]] = None, stop_at_promotion: bool = False) -> Trajectory:
    """Integrate one story from submission (one vote, ``S`` fans) to ``t_end``.

    Samples are every accepted step plus any requested ``t_eval`` times,
    which are evaluated from the dense output rather than interpolated.
    """
    t_end = controls.t_end
    grid = sorted(float(x) for x in t_eval) if t_eval is not None else []
    if grid and (grid[0] < 0 or grid[-1] > t_end):
        raise ValueError("t_eval must lie within [0, t_end]")

    t_up = site.t_upcoming_max
    t_prom: Optional[float] = 0.0 if site.h <= 1 else None
    # (t, n, s, mode) rows
    records: list[tuple[float, float, float, ListState]] = []

    def run(mode, t0, n0, s0, t1, detect):
        buf: list = []
        hit = _integrate(_rhs_for(mode, story, site, t_prom), t0, n0, s0, t1, controls,
                         float(site.h) if detect else None, grid, buf)
        for i, (t, n, s) in enumerate(buf):
            state = mode
            if hit is not None and i == len(buf) - 1:
                state = ListState.FRONT
            records.append((t, n, s, state))
        return hit

    first = ListState.FRONT if t_prom is not None else ListState.UPCOMING
    records.append((0.0, 1.0, float(story.S), first))
    t, n, s = 0.0, 1.0, float(story.S)
    if t_prom is None and t_end > 0:
        hit = run(ListState.UPCOMING, t, n, s, min(t_up, t_end), True)
        if hit is None and t_end > t_up:
            t, n, s = records[-1][:3]
            hit = run(ListState.REMOVED, t, n, s, t_end, True)
        if hit is not None:
            t, n, s = hit
            t_prom = t
    if t_prom is not None and not stop_at_promotion and t < t_end:
        run(ListState.FRONT, t, n, s, t_end, False)

    # dedupe coincident rows (segment joins, t_eval hitting a step point)
    rows: list[tuple[float, float, float, ListState]] = []
    for rec in records:
        if rows and rec[0] <= rows[-1][0]:
            if rec[3] is ListState.FRONT:
                rows[-1] = rec
            continue
        rows.append(rec)

    ts = np.array([r[0] for r in rows])
    votes = np.array([r[1] for r in rows])
    # enforce monotonicity against round-off in the dense interpolant
    votes = np.maximum.accumulate(votes)
    fans = np.array([r[2] for r in rows])
    lists = [r[3] for r in rows]
    page = np.array([_page(m, t, t_prom, site) for t, _, _, m in rows])
    return Trajectory(ts, votes, fans, lists, page, t_prom, story)


def promotion_time(story: StoryParams, site: SiteParams,
                   controls: SolveControls = SolveControls()) -> Optional[float]:
    """First time the mean-field vote count reaches ``h``, or None within ``t_end``."""
    return solve_story(story, site, controls, stop_at_promotion=True).t_promoted
