import math

import numpy as np
import pytest

from conftest import REFERENCE_STORIES
from votedyn.fitting import (
    GRID_POINTS,
    R_BOUNDS,
    baseline_extrapolate,
    classify_promotion,
    estimate_r,
    fit_dataset,
    golden_section,
    predict_from_early,
    promotion_boundary,
    promotion_time_error,
    rms_objective,
)
from votedyn.model import SiteParams, StoryParams
from votedyn.montecarlo import McControls, generate_synthetic_dataset, simulate_ensemble
from votedyn.observations import ObservationSeries, hourly_grid
from votedyn.ode import SolveControls, promotion_time, solve_story

HOURS = hourly_grid()


def noiseless(r, S, site, grid=HOURS, sid="x"):
    votes = solve_story(StoryParams(r, S), site, t_eval=grid).votes_at(grid)
    return ObservationSeries(sid, S, grid, votes)


def test_golden_section_parabola():
    x, fx = golden_section(lambda x: (x - 0.37) ** 2 + 1, 0, 1, tol=1e-9)
    assert x == pytest.approx(0.37, abs=1e-8)
    assert fx == pytest.approx(1.0)


def test_round_trip_self_consistency(site):
    fit = estimate_r(noiseless(0.3, 40, site), site)
    assert fit.r_hat == pytest.approx(0.3, abs=1e-3)
    assert fit.rms_votes < 1e-3
    assert fit.n_points_used == 48


@pytest.mark.parametrize("r", [0.05, 0.1, 0.2, 0.4, 0.8])
@pytest.mark.parametrize("S", [0, 5, 40, 160])
def test_round_trip_grid(site, r, S):
    assert estimate_r(noiseless(r, S, site), site).r_hat == pytest.approx(r, abs=1e-3)


@pytest.mark.parametrize("S,r,_", REFERENCE_STORIES)
def test_round_trip_reference_stories(site, S, r, _):
    fit = estimate_r(noiseless(r, S, site), site)
    assert fit.r_hat == pytest.approx(r, abs=1e-3)
    assert fit.predicted_promotion_time == pytest.approx(promotion_time(StoryParams(r, S), site), rel=1e-3)


def test_refined_optimum_beats_grid(site):
    rng = np.random.default_rng(0)
    obs = noiseless(0.22, 60, site)
    obs = ObservationSeries("n", 60, obs.t, np.maximum.accumulate(obs.votes * rng.normal(1, 0.05, obs.t.size)))
    fit = estimate_r(obs, site)
    f = rms_objective(obs.t, obs.votes, 60, site)
    grid_vals = [f(r) for r in np.geomspace(*R_BOUNDS, GRID_POINTS)]
    assert fit.rms_votes <= min(grid_vals) + 1e-9
    assert not fit.multimodal


def test_degenerate_series(site):
    fit = estimate_r(ObservationSeries("d", 3, [60, 120, 180], [1, 1, 1]), site)
    assert fit.degenerate
    assert fit.r_hat == R_BOUNDS[0]


def test_predicted_final_monotone_in_r(site):
    preds = [solve_story(StoryParams(r, 20), site).final_votes for r in np.geomspace(1e-3, 1, 25)]
    assert np.all(np.diff(preds) >= 0)


def test_early_with_all_points_equals_full_fit(site):
    obs = noiseless(0.3, 40, site, grid=hourly_grid(600.0))
    a = predict_from_early(obs, site, k=len(obs))
    b = estimate_r(obs, site)
    assert a == b


def test_early_prediction_noiseless(site):
    obs = noiseless(0.28, 40, site)
    fit = predict_from_early(obs, site, k=4)
    assert fit.n_points_used == 4
    assert fit.predicted_final == pytest.approx(solve_story(StoryParams(0.28, 40), site).final_votes, rel=1e-4)


def test_early_needs_k_points(site):
    with pytest.raises(ValueError):
        predict_from_early(ObservationSeries("s", 5, [60, 120], [2, 3]), site, k=4)


def test_missing_fan_count_uses_dataset_median(site):
    series = [noiseless(0.3, 10, site, sid="a"), noiseless(0.3, 30, site, sid="b"),
              noiseless(0.3, 50, site, sid="c")]
    series.append(ObservationSeries("d", None, series[1].t, series[1].votes))
    fits = fit_dataset(series, site, early=4)
    assert fits[3].s_submitter == 30
    assert fits[3].r_hat == pytest.approx(0.3, abs=1e-3)
    with pytest.raises(ValueError):
        estimate_r(series[3], site)


def test_fit_horizon_drops_late_points(site):
    obs = noiseless(0.3, 40, site)
    assert estimate_r(obs, site, fit_horizon=600.0).n_points_used == 10


def test_baseline_exact_line():
    assert baseline_extrapolate(ObservationSeries("b", 0, [0, 60], [1, 61]), k=4, horizon=120) == pytest.approx(121)


def test_baseline_constant():
    obs = ObservationSeries("b", 0, [60, 120, 180, 240, 300], [7, 7, 7, 7, 7])
    assert baseline_extrapolate(obs, k=4, horizon=2880) == pytest.approx(7)


def test_baseline_floor_and_errors():
    obs = ObservationSeries("b", 0, [60, 120, 180, 240], [10, 40, 41, 41])
    # line through these would fall below 41 near t=0
    assert baseline_extrapolate(obs, k=4, horizon=0.0) == 41
    with pytest.raises(ValueError):
        baseline_extrapolate(ObservationSeries("b", 0, [60], [3]), k=4, horizon=100)


def test_model_beats_baseline_rms(synthetic_200):
    site = SiteParams()
    data = synthetic_200[:60]
    model_err, base_err = [], []
    for d in data:
        horizon = min(2880.0, d.obs.t[-1])
        model_err.append(predict_from_early(d.obs, site).predicted_final - d.obs.votes[-1])
        base_err.append(baseline_extrapolate(d.obs, 4, horizon) - d.obs.votes[-1])
    assert np.sqrt(np.mean(np.square(base_err))) > np.sqrt(np.mean(np.square(model_err)))


@pytest.fixture(scope="module")
def boundary():
    return dict(promotion_boundary(SiteParams(), [0, 5, 10, 20, 40, 80, 160, 320]))


def test_boundary_monotone(boundary):
    r = [boundary[s] for s in sorted(boundary)]
    assert all(x is not None for x in r)
    assert all(a >= b for a, b in zip(r, r[1:]))
    assert boundary[160] <= boundary[5]


def test_reference_stories_above_boundary(site):
    rows = dict(promotion_boundary(site, sorted({S for S, _, _ in REFERENCE_STORIES})))
    for S, r, _ in REFERENCE_STORIES:
        assert r > rows[S]
        assert classify_promotion(StoryParams(r, S), site)


def test_boundary_consistency(site, boundary):
    for S, r_star in boundary.items():
        assert promotion_time(StoryParams(min(1.0, 1.05 * r_star), S), site) is not None
        assert promotion_time(StoryParams(0.95 * r_star, S), site) is None


def test_more_traffic_lowers_boundary(site, boundary):
    busy = dict(promotion_boundary(site.with_(nu=100.0), list(boundary)))
    for S in boundary:
        assert busy[S] < boundary[S]


def test_boundary_unreachable():
    # a threshold nobody can reach in two days
    rows = promotion_boundary(SiteParams(h=100000), [0])
    assert rows == [(0, None)]
    with pytest.raises(ValueError):
        promotion_boundary(SiteParams(), [])


def test_classify_examples(site):
    assert classify_promotion(StoryParams(0.51, 5), site)
    assert not classify_promotion(StoryParams(1e-6, 0), site)


@pytest.mark.slow
def test_classification_agrees_with_monte_carlo(site, boundary):
    rng = np.random.default_rng(21)
    grid = sorted(boundary)
    agree = total = 0
    while total < 40:
        S = int(rng.integers(0, 321))
        r = float(np.exp(rng.uniform(np.log(0.01), np.log(1.0))))
        r_star = np.interp(S, grid, [boundary[s] for s in grid])
        if abs(r - r_star) <= 0.05 * r_star:
            continue
        ens = simulate_ensemble(StoryParams(r, S), site, McControls(seed=total, n_runs=60, record_grid=(2880.0,)))
        agree += classify_promotion(StoryParams(r, S), site) == (ens.promoted_fraction > 0.5)
        total += 1
    assert agree / total >= 0.9


def test_promotion_time_error(site):
    obs = noiseless(0.3, 40, site)
    obs.promotion_hour_bucket = (120.0, 180.0)
    fit = estimate_r(obs, site)
    assert promotion_time_error(fit, obs) == pytest.approx(fit.predicted_promotion_time - 150.0)
    obs.promotion_hour_bucket = None
    assert promotion_time_error(fit, obs) is None


@pytest.mark.slow
def test_recovery_from_monte_carlo(site):
    data = generate_synthetic_dataset(50, seed=11)
    errs = [abs(estimate_r(d.obs, site).r_hat - d.truth.r) / d.truth.r for d in data]
    assert np.median(errs) <= 0.10
