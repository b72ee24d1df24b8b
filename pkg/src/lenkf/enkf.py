"""Ensemble Kalman filter with the gain estimated from the forecast
ensemble.

This is the classical forecast/analysis recursion: propagate every
member through the state equation with process noise, estimate the
state covariance from the forecast sample, then nudge each member
toward its perturbed observation with the estimated gain.  It is both a
filter in its own right and the comparison baseline for the Langevin
variants, which replace the ensemble covariance with a constructed one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, EnsembleTooSmall
from .models import StateSpaceModel
from .numkit import CovSpec, RngStream, solve_spd

__all__ = ["Ensemble", "ensemble_gain", "enkf_analysis", "enkf_step"]


@dataclass
class Ensemble:
    """A bag of equally weighted states, members stacked as rows."""

    members: np.ndarray          # (m, p)
    stage: int = 0

    def __post_init__(self):
        self.members = np.atleast_2d(np.asarray(self.members, dtype=float))

    @property
    def size(self) -> int:
        return self.members.shape[0]

    @property
    def dim(self) -> int:
        return self.members.shape[1]

    def mean(self) -> np.ndarray:
        return self.members.mean(axis=0)

    def covariance(self) -> np.ndarray:
        """Unbiased (1/(m-1)) sample covariance."""
        if self.size < 2:
            raise EnsembleTooSmall("need at least 2 members for a sample covariance")
        centered = self.members - self.members.mean(axis=0)
        return centered.T @ centered / (self.size - 1)


def ensemble_gain(members: np.ndarray, h: np.ndarray, obs_cov: CovSpec) -> np.ndarray:
    """Kalman gain C H^T (H C H^T + Gamma)^{-1} with C the unbiased
    ensemble covariance.  Only the (n, n) innovation matrix is
    factorized; C itself is applied through the centered members, so no
    (p, p) matrix is formed."""
    m = members.shape[0]
    if m < 2:
        raise EnsembleTooSmall("need at least 2 members to estimate a gain")
    centered = members - members.mean(axis=0)
    projected = centered @ h.T                       # (m, n)
    cht = centered.T @ projected / (m - 1)           # (p, n)
    innov = obs_cov.add_to(projected.T @ projected / (m - 1))
    return solve_spd(innov, cht.T).T


def enkf_analysis(
    members: np.ndarray,
    y: np.ndarray,
    h: np.ndarray,
    obs_cov: CovSpec,
    rng: RngStream | None,
) -> np.ndarray:
    """Analysis update for every member with per-member perturbed
    observations; rng None suppresses the measurement noise."""
    y = np.asarray(y, dtype=float)
    if h.shape[0] != y.shape[0]:
        raise DimensionMismatch(f"{h.shape[0]} measurement rows vs {y.shape[0]} values")
    gain = ensemble_gain(members, h, obs_cov)
    m = members.shape[0]
    if rng is None:
        noise = np.zeros((m, y.size))
    else:
        noise = np.stack(
            [
                obs_cov.sample(np.zeros(y.size), rng.at(chain=i, purpose="measure").generator())
                for i in range(m)
            ]
        )
    resid = y[None, :] - members @ h.T - noise
    return members + resid @ gain.T


def enkf_step(
    ens: Ensemble,
    model: StateSpaceModel,
    y: np.ndarray,
    h: np.ndarray,
    rng: RngStream,
) -> Ensemble:
    """One forecast/analysis cycle.

    Forecast: x_i <- g(x_i) + u_i with u_i ~ N(0, U).  Analysis: gain
    from the forecast ensemble, each member corrected toward its own
    noise-perturbed copy of the observation.
    """
    if ens.size < 2:
        raise EnsembleTooSmall("EnKF needs at least 2 members")
    if model.process_cov is None:
        raise DimensionMismatch("enkf_step needs a model with process_cov set")
    stage_rng = rng.at(stage=ens.stage + 1)
    forecast = model.propagate(ens.members)
    forecast = np.stack(
        [
            model.process_cov.sample(
                forecast[i], stage_rng.at(chain=i, purpose="process").generator()
            )
            for i in range(ens.size)
        ]
    )
    analyzed = enkf_analysis(forecast, y, h, model.obs_block_cov, stage_rng)
    return Ensemble(analyzed, stage=ens.stage + 1)
