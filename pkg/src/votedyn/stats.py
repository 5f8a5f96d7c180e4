"""Distribution fits and randomization tests for fitted story parameters."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np
from scipy import special, stats as sps

__all__ = [
    "LognormalFit",
    "lognormal_mle",
    "ks_statistic",
    "ks_randomization_test",
    "pearson",
    "correlation_permutation_test",
    "paired_correlation_test",
    "ErrorMetrics",
    "error_metrics",
    "least_squares_slope",
]


def _rng(seed) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))


@dataclass(frozen=True)
class LognormalFit:
    mu_ln: float
    sigma_ln: float
    ci95_mu: tuple[float, float]
    ci95_sigma: tuple[float, float]
    n: int
    ks_stat: Optional[float] = None
    p_value: Optional[float] = None


def _logs(values) -> np.ndarray:
    v = np.asarray(values, dtype=float)
    if v.ndim != 1 or v.size < 2:
        raise ValueError("need at least 2 values")
    if np.any(~(v > 0)):
        raise ValueError("lognormal fit needs strictly positive values")
    return np.log(v)


def lognormal_mle(values: Sequence[float]) -> LognormalFit:
    """Maximum likelihood lognormal fit with normal-theory 95% intervals.

    ``sigma_ln`` uses divisor n. The interval for the mean of logs is
    z-based; the one for sigma comes from the chi-square law of n*sigma^2.
    """
    x = _logs(values)
    n = x.size
    mu = float(x.mean())
    sigma = float(np.sqrt(np.mean((x - mu) ** 2)))
    if sigma <= 1e-12 * max(1.0, abs(mu)):
        raise ValueError("log-values have zero spread; sigma must be > 0")
    z = sps.norm.ppf(0.975)
    half = z * sigma / math.sqrt(n)
    ss = n * sigma ** 2
    sig_lo = math.sqrt(ss / sps.chi2.ppf(0.975, n - 1))
    sig_hi = math.sqrt(ss / sps.chi2.ppf(0.025, n - 1))
    return LognormalFit(mu, sigma, (mu - half, mu + half), (sig_lo, sig_hi), n)


def _ks_rows(z_sorted: np.ndarray) -> np.ndarray:
    """One-sample KS distance of each sorted row of standardized values to N(0, 1)."""
    n = z_sorted.shape[-1]
    cdf = special.ndtr(z_sorted)
    i = np.arange(1, n + 1)
    d_plus = np.max(i / n - cdf, axis=-1)
    d_minus = np.max(cdf - (i - 1) / n, axis=-1)
    return np.maximum(d_plus, d_minus)


def ks_statistic(values: Sequence[float], mu_ln: float, sigma_ln: float) -> float:
    x = np.sort(_logs(values))
    return float(_ks_rows((x - mu_ln) / sigma_ln))


def ks_randomization_test(values: Sequence[float], n_synthetic: int = 1000, seed: int = 0,
                          chunk: int = 250) -> tuple[float, float]:
    """KS goodness of fit to a lognormal whose parameters come from the same data.

    Each synthetic sample is drawn from the fitted law and refitted before
    its KS distance is taken, so the null distribution accounts for the
    estimation. Returns (observed KS distance, fraction of synthetic
    distances exceeding it).
    """
    x = _logs(values)
    if x.size < 8:
        raise ValueError("need at least 8 values")
    if n_synthetic < 1:
        raise ValueError("n_synthetic must be >= 1")
    fit = lognormal_mle(values)
    d_obs = ks_statistic(values, fit.mu_ln, fit.sigma_ln)
    rng = _rng(seed)
    exceed = 0
    done = 0
    while done < n_synthetic:
        m = min(chunk, n_synthetic - done)
        # shape-only: the standardized KS distance does not depend on (mu, sigma)
        sim = rng.standard_normal((m, x.size)) * fit.sigma_ln + fit.mu_ln
        mu = sim.mean(axis=1, keepdims=True)
        sd = sim.std(axis=1, keepdims=True)
        d = _ks_rows(np.sort((sim - mu) / sd, axis=1))
        exceed += int(np.sum(d > d_obs))
        done += m
    return d_obs, exceed / n_synthetic


def pearson(x: Sequence[float], y: Sequence[float]) -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.size < 2:
        raise ValueError("x and y need equal length >= 2")
    dx, dy = x - x.mean(), y - y.mean()
    sx, sy = math.sqrt(float(dx @ dx)), math.sqrt(float(dy @ dy))
    if sx == 0 or sy == 0:
        raise ValueError("correlation undefined: zero variance")
    return float(np.clip((dx @ dy) / (sx * sy), -1.0, 1.0))


def _standardize(v: np.ndarray) -> np.ndarray:
    d = v - v.mean()
    return d / math.sqrt(float(d @ d))


def correlation_permutation_test(x: Sequence[float], y: Sequence[float], n_perm: int = 10000,
                                 seed: int = 0, chunk: int = 1000) -> tuple[float, float]:
    """Pearson correlation with a two-sided permutation p-value.

    p = (1 + #{|r_perm| >= |r_obs|}) / (n_perm + 1).
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.size < 3:
        raise ValueError("x and y need equal length >= 3")
    r_obs = pearson(x, y)
    zx, zy = _standardize(x), _standardize(y)
    rng = _rng(seed)
    hits = 0
    done = 0
    thresh = abs(r_obs) * (1 - 1e-12)
    while done < n_perm:
        m = min(chunk, n_perm - done)
        perm = rng.permuted(np.broadcast_to(zy, (m, zy.size)), axis=1)
        hits += int(np.sum(np.abs(perm @ zx) >= thresh))
        done += m
    return r_obs, (1 + hits) / (n_perm + 1)


def paired_correlation_test(pred_a: Sequence[float], pred_b: Sequence[float], truth: Sequence[float],
                            n_perm: int = 10000, seed: int = 0) -> tuple[float, float, float]:
    """One-sided randomization test that predictor ``a`` correlates better with ``truth`` than ``b``.

    Both predictors are standardized first (correlation does not see
    location or scale), after which the two predictions of each item are
    exchangeable under the null; each replicate swaps them item-wise at
    random. Returns (r_a, r_b, p).
    """
    a = np.asarray(pred_a, dtype=float)
    b = np.asarray(pred_b, dtype=float)
    t = np.asarray(truth, dtype=float)
    if not (a.shape == b.shape == t.shape) or a.size < 3:
        raise ValueError("inputs need equal length >= 3")
    r_a, r_b = pearson(a, t), pearson(b, t)
    a, b = _standardize(a), _standardize(b)
    observed = r_a - r_b
    zt = _standardize(t)
    rng = _rng(seed)
    hits = 0
    done = 0
    while done < n_perm:
        m = min(1000, n_perm - done)
        swap = rng.random((m, a.size)) < 0.5
        pa = np.where(swap, b, a)
        pb = np.where(swap, a, b)
        pa = pa - pa.mean(axis=1, keepdims=True)
        pb = pb - pb.mean(axis=1, keepdims=True)
        ra = (pa @ zt) / np.sqrt(np.sum(pa * pa, axis=1))
        rb = (pb @ zt) / np.sqrt(np.sum(pb * pb, axis=1))
        hits += int(np.sum(ra - rb >= observed))
        done += m
    return r_a, r_b, (1 + hits) / (n_perm + 1)


@dataclass(frozen=True)
class ErrorMetrics:
    rms_abs: float
    rms_rel: float
    pearson_r: float  # nan when undefined (constant input or a single pair)
    definitions: tuple[tuple[str, str], ...] = (
        ("rms_abs", "sqrt(mean((predicted - observed)^2))"),
        ("rms_rel", "sqrt(mean(((predicted - observed) / observed)^2))"),
        ("pearson_r", "Pearson correlation of predicted with observed"),
    )


def error_metrics(predicted: Sequence[float], observed: Sequence[float], relative: bool = True) -> ErrorMetrics:
    p = np.asarray(predicted, dtype=float)
    o = np.asarray(observed, dtype=float)
    if p.shape != o.shape or p.size < 1:
        raise ValueError("predicted and observed need equal length >= 1")
    rms_abs = float(np.sqrt(np.mean((p - o) ** 2)))
    if relative:
        if np.any(o == 0):
            raise ValueError("relative error undefined for observed == 0")
        rms_rel = float(np.sqrt(np.mean(((p - o) / o) ** 2)))
    else:
        rms_rel = math.nan
    try:
        r = pearson(p, o)
    except ValueError:
        r = math.nan
    return ErrorMetrics(rms_abs, rms_rel, r)


def least_squares_slope(x: Sequence[float], y: Sequence[float]) -> float:
    """Slope of the least-squares line of ``y`` on ``x``."""
    slope, _ = np.polyfit(np.asarray(x, dtype=float), np.asarray(y, dtype=float), 1)
    return float(slope)
