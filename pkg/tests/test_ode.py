import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from conftest import REFERENCE_STORIES
from votedyn.model import ListState, SiteParams, StoryParams, StoryState, ode_rhs, page_fraction
from votedyn.ode import _P, SolveControls, promotion_time, solve_story


def scipy_solution(story, site, t_end=2880.0):
    """Reference solve with scipy's LSODA and its own event handling."""
    def rhs(t, y, t_prom):
        state = StoryState(t, max(y[0], 1.0), max(y[1], 0.0),
                           ListState.FRONT if t_prom is not None else ListState.UPCOMING, t_prom)
        return ode_rhs(state, story, site)

    def hit(t, y, t_prom):
        return y[0] - site.h
    hit.terminal, hit.direction = True, 1
    kw = dict(method="LSODA", rtol=1e-10, atol=1e-10)
    y0, t0 = [1.0, float(story.S)], 0.0
    for t1 in (min(site.t_upcoming_max, t_end), t_end):
        if t1 <= t0:
            break
        sol = integrate.solve_ivp(rhs, (t0, t1), y0, args=(None,), events=hit, **kw)
        y0, t0 = sol.y[:, -1], sol.t[-1]
        if sol.status == 1:
            t_prom = t0
            sol = integrate.solve_ivp(rhs, (t0, t_end), y0, args=(t_prom,), **kw)
            return t_prom, sol.y[0, -1]
    return None, y0[0]


def test_dense_output_weights_reproduce_step():
    b5 = [35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0]
    assert [sum(row) for row in _P] == pytest.approx(b5, abs=1e-13)


def test_nobody_votes(site):
    traj = solve_story(StoryParams(0.0, 100), site)
    assert np.all(traj.votes == 1)
    assert traj.t_promoted is None
    # the pool just drains
    assert traj.fans[-1] == pytest.approx(100 * math.exp(-0.002 * 2880), rel=1e-6)


@pytest.mark.parametrize("S,r,final", REFERENCE_STORIES)
def test_reference_stories_finals(site, S, r, final):
    traj = solve_story(StoryParams(r, S), site)
    assert traj.final_votes == pytest.approx(final, rel=0.2)
    assert traj.t_promoted is not None and traj.t_promoted < 1440


@pytest.mark.parametrize("S,r", [(5, 0.51), (160, 0.19), (100, 0.13), (0, 0.05), (300, 0.02)])
def test_agrees_with_scipy(site, S, r):
    ours = solve_story(StoryParams(r, S), site)
    t_prom, final = scipy_solution(StoryParams(r, S), site)
    assert ours.final_votes == pytest.approx(final, rel=1e-6)
    if t_prom is None:
        assert ours.t_promoted is None
    else:
        assert ours.t_promoted == pytest.approx(t_prom, abs=1e-4)


def test_more_interesting_promoted_sooner(site):
    fast = promotion_time(StoryParams(0.51, 5), site)
    slow = promotion_time(StoryParams(0.13, 100), site)
    assert 0 < fast < slow


def test_promotion_crossing(site):
    traj = solve_story(StoryParams(0.51, 5), site)
    i = int(np.searchsorted(traj.t, traj.t_promoted))
    assert traj.t[i] == traj.t_promoted
    assert traj.votes[i] >= site.h
    assert traj.votes[i] == pytest.approx(site.h, abs=1e-5)
    assert all(lst is ListState.FRONT for lst in traj.lists[i:])
    assert all(lst is ListState.UPCOMING for lst in traj.lists[:i])


def test_removed_after_a_day_without_promotion(site):
    site = site.with_(a=1e-12)  # no fan pool at all
    traj = solve_story(StoryParams(0.01, 0), site)
    assert traj.t_promoted is None
    assert 1440.0 in traj.t
    after = traj.t > 1440
    assert all(lst is ListState.REMOVED for lst, a in zip(traj.lists, after) if a)
    # no fans and off the list: nothing more happens
    assert np.ptp(traj.votes[after]) < 1e-6


def test_zero_horizon(site):
    traj = solve_story(StoryParams(0.5, 50), site, SolveControls(t_end=0))
    assert len(traj) == 1
    assert traj.votes[0] == 1 and traj.fans[0] == 50


def test_t_eval_points_present(site):
    grid = [60.0 * k for k in range(1, 49)]
    traj = solve_story(StoryParams(0.3, 40), site, t_eval=grid)
    assert set(grid) <= set(traj.t.tolist())
    dense = solve_story(StoryParams(0.3, 40), site, SolveControls(max_step=1.0), t_eval=grid)
    assert traj.votes_at(grid) == pytest.approx(dense.votes_at(grid), rel=1e-7)


def test_tolerance_halving_converges(site):
    for S, r, _ in REFERENCE_STORIES:
        a = solve_story(StoryParams(r, S), site, SolveControls(rel_tol=1e-6, abs_tol=1e-6)).final_votes
        b = solve_story(StoryParams(r, S), site, SolveControls(rel_tol=5e-7, abs_tol=5e-7)).final_votes
        assert abs(a - b) / b < 1e-3


@settings(max_examples=40, deadline=None)
@given(st.floats(0, 1), st.integers(0, 400))
def test_trajectory_invariants(r, S):
    site = SiteParams()
    traj = solve_story(StoryParams(r, S), site)
    assert traj.t[0] == 0 and traj.votes[0] == 1 and traj.fans[0] == S
    assert np.all(np.diff(traj.t) > 0)
    assert np.all(np.diff(traj.votes) >= 0)
    assert np.all(traj.fans >= 0)
    if traj.t_promoted is not None:
        assert traj.votes[traj.t >= traj.t_promoted].min() >= site.h - 1e-9


def test_upper_bound_without_friends():
    site = SiteParams(omega=0.0)
    r = 0.02
    traj = solve_story(StoryParams(r, 0), site)
    assert traj.t_promoted is None
    integral, _ = integrate.quad(lambda t: page_fraction(0.06 * t + 1, 0.6, 0.6), 0, 1440, limit=200)
    bound = 1 + r * 0.3 * 10 * integral
    assert traj.final_votes <= bound * (1 + 1e-7)
    assert traj.final_votes == pytest.approx(bound, rel=1e-4)


def test_trapezoid_reproduces_increments(site):
    story = StoryParams(0.28, 40)
    traj = solve_story(story, site, SolveControls(max_step=0.5))
    rates = []
    for t, n, s, lst, _ in traj.rows():
        rates.append(ode_rhs(StoryState(t, n, s, lst, traj.t_promoted if lst is ListState.FRONT else None),
                             story, site)[0])
    rates = np.array(rates)
    # the rate jumps at promotion and removal, so integrate each smooth piece
    segs = np.split(np.arange(len(traj)), [int(np.searchsorted(traj.t, traj.t_promoted)) + 1])
    total = 0.0
    for idx in segs:
        idx = np.concatenate([[idx[0] - 1], idx]) if idx[0] > 0 else idx
        if len(idx) > 1:
            total += integrate.trapezoid(rates[idx], traj.t[idx])
    assert 1 + total == pytest.approx(traj.final_votes, rel=2e-3)


def test_controls_validation():
    with pytest.raises(ValueError):
        SolveControls(t_end=-1)
    with pytest.raises(ValueError):
        SolveControls(rel_tol=0)
