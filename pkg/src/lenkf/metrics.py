"""Run summaries: dimension-normalized RMSE, credible-interval
coverage, posterior means, mixture inclusion probabilities and
importance-weight effective sample size."""

from __future__ import annotations

import numpy as np

from .errors import BurnInTooLarge, DimensionMismatch, EmptyInput, TooFewSamples
from .models import MixtureGaussianPrior
from .numkit import log_sum_exp

__all__ = [
    "rmse_t",
    "coverage_probability",
    "inclusion_probability",
    "posterior_mean_estimate",
    "ess",
    "stage_window_mean",
]


def rmse_t(estimate: np.ndarray, truth: np.ndarray) -> float:
    """||estimate - truth||_2 / sqrt(p): per-component root mean squared
    error of one stage estimate."""
    estimate = np.asarray(estimate, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if estimate.shape != truth.shape:
        raise DimensionMismatch(f"shapes differ: {estimate.shape} vs {truth.shape}")
    if estimate.size == 0:
        raise EmptyInput("empty state in rmse_t")
    return float(np.linalg.norm(estimate - truth) / np.sqrt(estimate.size))


def coverage_probability(
    samples: np.ndarray,
    truth: np.ndarray,
    level: float = 0.95,
    mode: str = "percentile",
) -> float:
    """Fraction of components whose credible interval contains the
    truth.  ``samples`` has one row per draw; intervals are equal-tail
    empirical percentiles, or mean +- z sd in gaussian mode.  Bounds are
    inclusive."""
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    truth = np.asarray(truth, dtype=float)
    if samples.shape[1] != truth.size:
        raise DimensionMismatch(f"{samples.shape[1]} columns vs {truth.size} components")
    if samples.shape[0] < 2:
        raise TooFewSamples("need at least 2 samples for an interval")
    if not 0.0 < level < 1.0:
        raise ValueError("level must lie in (0, 1)")
    tail = 100.0 * (1.0 - level) / 2.0
    if mode == "percentile":
        lo = np.percentile(samples, tail, axis=0)
        hi = np.percentile(samples, 100.0 - tail, axis=0)
    elif mode == "gaussian":
        from scipy.stats import norm

        z = norm.ppf(1.0 - (1.0 - level) / 2.0)
        mean = samples.mean(axis=0)
        sd = samples.std(axis=0, ddof=1)
        lo, hi = mean - z * sd, mean + z * sd
    else:
        raise ValueError(f"unknown interval mode {mode!r}")
    return float(np.mean((lo <= truth) & (truth <= hi)))


def inclusion_probability(beta, prior: MixtureGaussianPrior):
    """Posterior probability that a coordinate came from the slab
    component given its value: the slab responsibility

        a / (a + b),  a = (p_slab / tau2) exp(-beta^2 / (2 tau2^2)),
                      b = ((1 - p_slab) / tau1) exp(-beta^2 / (2 tau1^2)),

    evaluated in log space so spike/slab ratios of hundreds of log
    units stay exact.  Vectorized over any shape."""
    beta = np.asarray(beta, dtype=float)
    w1, w2 = prior._log_weights(beta)
    return np.exp(w2 - np.logaddexp(w1, w2))


def posterior_mean_estimate(stage_samples, burn_in: int) -> np.ndarray:
    """Ensemble-time average: mean over all chains of all stages after
    the burn-in.  ``stage_samples`` is a sequence of (chains, p) arrays
    indexed by stage starting at 1."""
    n_stages = len(stage_samples)
    if burn_in < 0 or burn_in >= n_stages:
        raise BurnInTooLarge(f"burn-in {burn_in} leaves no samples of {n_stages} stages")
    kept = np.concatenate([np.atleast_2d(s) for s in stage_samples[burn_in:]], axis=0)
    return kept.mean(axis=0)


def ess(log_weights: np.ndarray) -> float:
    """Effective sample size (sum w)^2 / sum w^2 of unnormalized log
    weights; 0.0 when every weight is zero."""
    log_weights = np.asarray(log_weights, dtype=float)
    if log_weights.size == 0:
        raise EmptyInput("empty weight vector")
    top = np.max(log_weights)
    if not np.isfinite(top):
        return 0.0
    shifted = log_weights - top
    return float(np.exp(2.0 * log_sum_exp(shifted) - log_sum_exp(2.0 * shifted)))


def stage_window_mean(values: np.ndarray, first: int, last: int) -> float:
    """Mean of a per-stage series over stages first..last inclusive,
    stages numbered from 1."""
    values = np.asarray(values, dtype=float)
    if not 1 <= first <= last <= values.shape[0]:
        raise DimensionMismatch(
            f"window [{first}, {last}] outside 1..{values.shape[0]}"
        )
    return float(values[first - 1 : last].mean())
