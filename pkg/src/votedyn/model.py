"""Closed-form pieces of the vote-accumulation model.

Everything here is a pure function of its arguments. Times are in minutes,
list positions in (fractional) pages.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from typing import Optional


class ListState(enum.Enum):
    UPCOMING = "upcoming"
    FRONT = "front"
    REMOVED = "removed"


@dataclass(frozen=True)
class SiteParams:
    """Site-wide constants shared by every story."""

    nu: float = 10.0  # general visitors per minute
    c: float = 0.3  # fraction of visitors browsing the upcoming list
    omega: float = 0.002  # per-minute visit rate of a voter's fans
    mu: float = 0.6  # page-view distribution mean
    lam: float = 0.6  # page-view distribution shape
    a: float = 51.0
    b: float = 0.62
    h: int = 40  # promotion threshold in votes
    k_u: float = 0.06  # upcoming list, pages per minute
    k_f: float = 0.003  # front page list, pages per minute
    t_upcoming_max: float = 1440.0

    def __post_init__(self):
        for name in ("nu", "mu", "lam", "a"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0, got {getattr(self, name)!r}")
        # zero fan visits or a zero slope switch a mechanism off
        for name in ("omega", "k_u", "k_f"):
            if not getattr(self, name) >= 0:
                raise ValueError(f"{name} must be >= 0, got {getattr(self, name)!r}")
        if not 0 < self.c <= 1:
            raise ValueError(f"c must be in (0, 1], got {self.c!r}")
        if not self.b >= 0:
            raise ValueError(f"b must be >= 0, got {self.b!r}")
        if int(self.h) != self.h or self.h < 1:
            raise ValueError(f"h must be an integer >= 1, got {self.h!r}")
        if not self.t_upcoming_max > 0:
            raise ValueError(f"t_upcoming_max must be > 0, got {self.t_upcoming_max!r}")

    def with_(self, **changes) -> "SiteParams":
        return replace(self, **changes)


@dataclass(frozen=True)
class StoryParams:
    r: float  # probability a viewer votes
    S: int  # submitter's fan count

    def __post_init__(self):
        # r = 0 is allowed as the "nobody votes" limit
        if not 0 <= self.r <= 1:
            raise ValueError(f"r must be in [0, 1], got {self.r!r}")
        if self.S < 0:
            raise ValueError(f"S must be >= 0, got {self.S!r}")


@dataclass(frozen=True)
class StoryState:
    t: float
    n_vote: float
    s: float
    list: ListState = ListState.UPCOMING
    t_promoted: Optional[float] = None

    def __post_init__(self):
        if self.n_vote < 1:
            raise ValueError(f"n_vote must be >= 1, got {self.n_vote!r}")
        if self.s < 0:
            raise ValueError(f"s must be >= 0, got {self.s!r}")
        if self.list is ListState.FRONT:
            if self.t_promoted is None or self.t < self.t_promoted:
                raise ValueError("a front-page state needs t_promoted <= t")


def page_fraction(m: float, mu: float, lam: float) -> float:
    """Fraction of visitors who browse at least ``m`` pages of a list.

    Upper tail of the inverse Gaussian law of pages viewed. Defined
    piecewise: exactly 1 at ``m == 1``, the erfc expression for ``m > 1``.
    """
    if mu <= 0 or lam <= 0:
        raise ValueError(f"mu and lam must be > 0, got mu={mu!r}, lam={lam!r}")
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m!r}")
    if m == 1:
        return 1.0
    alpha = math.sqrt(lam / (2.0 * (m - 1.0)))
    lo = math.erfc(alpha * (m - 1.0 - mu) / mu)
    hi = math.erfc(alpha * (m - 1.0 + mu) / mu)
    val = 0.5 * (lo - math.exp(2.0 * lam / mu) * hi)
    return min(max(val, 0.0), 1.0)


def upcoming_page(t: float, params: SiteParams) -> float:
    return params.k_u * t + 1.0


def front_page(t: float, t_promoted: Optional[float], params: SiteParams) -> float:
    """Front-page position; 0 before promotion (or if never promoted)."""
    if t_promoted is None or t < t_promoted:
        return 0.0
    return params.k_f * (t - t_promoted) + 1.0


def fan_increment(n_vote: float, params: SiteParams) -> float:
    """Mean number of new fans gained from the vote arriving at ``n_vote`` votes."""
    if n_vote < 1:
        raise ValueError(f"n_vote must be >= 1, got {n_vote!r}")
    return params.a * n_vote ** (-params.b)


def visibility_rates(state: StoryState, params: SiteParams) -> tuple[float, float, float]:
    """Rates (front, upcoming, friends) at which users come across the story.

    The threshold tie ``n_vote == h`` counts as promoted.
    """
    promoted = state.n_vote >= params.h or state.t_promoted is not None
    k_front = k_new = 0.0
    if promoted:
        t_prom = state.t_promoted if state.t_promoted is not None else state.t
        k_front = params.nu * page_fraction(front_page(state.t, t_prom, params), params.mu, params.lam)
    elif state.t <= params.t_upcoming_max:
        k_new = params.c * params.nu * page_fraction(upcoming_page(state.t, params), params.mu, params.lam)
    k_friends = params.omega * state.s
    return k_front, k_new, k_friends


def ode_rhs(state: StoryState, story: StoryParams, params: SiteParams) -> tuple[float, float]:
    """Time derivatives (dN/dt, ds/dt) of the mean-field vote and fan-pool equations."""
    k_front, k_new, k_friends = visibility_rates(state, params)
    dn = story.r * (k_front + k_new + k_friends)
    ds = -params.omega * state.s + fan_increment(state.n_vote, params) * dn
    return dn, ds
