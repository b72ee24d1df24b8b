"""Langevin ensemble Kalman sampling for dynamic data assimilation.

Each stage t of the state-space model gets a within-stage Langevin loop
of n_inner forecast/analysis iterations.  The filtering prior at stage
t is represented by the pool of samples collected at stage t-1; every
iteration each chain resamples an ancestor from that pool with weights
proportional to the transition density evaluated at the chain's current
state (no observation data enters the weights), and the forecast drift
pulls the chain toward the propagated ancestor through U^{-1}.  The
analysis step is the same constructed-gain update as in the static
case, with Q = eps I and R = 2 V.  Samples from iterations past the
collection threshold form the stage estimate, its credible intervals,
and the next stage's pool.

`run_enkf_comparison` runs the classical ensemble-gain filter through
the same per-stage iteration budget and the same estimator, so the two
methods differ only in how the analysis update is built.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .enkf import ensemble_gain
from .errors import (
    ConfigInvalid,
    DimensionMismatch,
    EmptyPool,
    EnsembleTooSmall,
)
from .inverse import kalman_gain
from .models import StateSpaceModel
from .numkit import (
    CovSpec,
    Diagonal,
    PhiloxCursor,
    RngStream,
    ScaledIdentity,
    log_sum_exp,
    solve_spd,
)
from .records import RecordSpec, RunRecord
from .schedule import LearningRateSchedule

__all__ = [
    "AssimConfig",
    "StagePool",
    "ResampleDraw",
    "importance_resample",
    "assim_forecast",
    "stage_handoff",
    "AssimResult",
    "run_assimilation",
    "run_enkf_comparison",
    "MeasurementAugmentation",
    "augment_nonlinear_measurement",
]


@dataclass(frozen=True)
class AssimConfig:
    """Knobs of the within-stage loop.

    collect_after is the iteration count k0 after which analysis
    ensembles are pooled; the per-stage estimate averages the
    n_chains * (n_inner - collect_after) collected samples.  subsample
    draws that many observation rows per iteration (None uses the whole
    stage block).  interval selects percentile or Gaussian credible
    intervals at the given level.
    """

    n_chains: int
    n_inner: int
    collect_after: int
    schedule: LearningRateSchedule
    subsample: int | None = None
    interval: str = "percentile"
    level: float = 0.95
    record_ess: bool = True

    def __post_init__(self):
        if self.n_chains < 1:
            raise ConfigInvalid("need at least one chain")
        if self.n_inner < 1:
            raise ConfigInvalid("need at least one inner iteration")
        if not 0 <= self.collect_after < self.n_inner:
            raise ConfigInvalid(
                f"collect_after must lie in [0, n_inner), got {self.collect_after}"
            )
        if self.interval not in ("percentile", "gaussian"):
            raise ConfigInvalid(f"unknown interval mode {self.interval!r}")
        if not 0.0 < self.level < 1.0:
            raise ConfigInvalid("level must lie in (0, 1)")


@dataclass
class StagePool:
    """Samples representing the filtering distribution of one stage."""

    stage: int
    samples: np.ndarray                    # (pool_size, p)

    @property
    def size(self) -> int:
        return self.samples.shape[0]


@dataclass
class ResampleDraw:
    index: int
    sample: np.ndarray
    degenerate: bool = False


def _pairwise_logpdf(x: np.ndarray, means: np.ndarray, cov: CovSpec) -> np.ndarray:
    """log N(x_i; mean_j, cov) for all pairs, shape (len(x), len(means)).

    Both sets are whitened once, so the pair matrix costs one matmul.
    A zero covariance degenerates to 0 / -inf indicators.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    means = np.atleast_2d(np.asarray(means, dtype=float))
    p = x.shape[1]
    log2pi = np.log(2.0 * np.pi)
    if isinstance(cov, ScaledIdentity):
        if cov.scale == 0.0:
            eq = (x[:, None, :] == means[None, :, :]).all(axis=2)
            return np.where(eq, 0.0, -np.inf)
        xw = x / np.sqrt(cov.scale)
        mw = means / np.sqrt(cov.scale)
        logdet = p * np.log(cov.scale)
    elif isinstance(cov, Diagonal):
        if np.any(cov.diag == 0):
            raise ConfigInvalid("pairwise density needs a nonsingular covariance")
        root = np.sqrt(cov.diag)
        xw = x / root
        mw = means / root
        logdet = float(np.sum(np.log(cov.diag)))
    else:
        chol = cov.cholesky_lower()
        xw = scipy.linalg.solve_triangular(chol, x.T, lower=True).T
        mw = scipy.linalg.solve_triangular(chol, means.T, lower=True).T
        logdet = 2.0 * float(np.sum(np.log(np.diag(chol))))
    d2 = (
        np.sum(xw**2, axis=1)[:, None]
        + np.sum(mw**2, axis=1)[None, :]
        - 2.0 * xw @ mw.T
    )
    return -0.5 * (np.maximum(d2, 0.0) + p * log2pi + logdet)


def importance_resample(
    pool: np.ndarray,
    x_current: np.ndarray,
    propagate,
    process_cov: CovSpec,
    rng,
    propagated: np.ndarray | None = None,
) -> ResampleDraw:
    """Draw one ancestor from the previous stage's pool.

    Weights are transition densities N(x_current; g(pool_j), U); the
    observation never enters.  If every weight underflows to zero the
    draw falls back to uniform and is flagged degenerate.  ``propagated``
    lets callers reuse a cached g(pool).
    """
    pool = np.atleast_2d(np.asarray(pool, dtype=float))
    if pool.shape[0] == 0:
        raise EmptyPool("cannot resample from an empty pool")
    if propagated is None:
        propagated = np.atleast_2d(propagate(pool))
    logw = _pairwise_logpdf(x_current[None, :], propagated, process_cov)[0]
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    idx, degenerate = _select_from_logweights(logw, gen)
    return ResampleDraw(index=idx, sample=pool[idx].copy(), degenerate=degenerate)


def _select_from_logweights(logw: np.ndarray, gen) -> tuple[int, bool]:
    top = np.max(logw)
    if not np.isfinite(top):
        return int(gen.integers(logw.size)), True
    w = np.exp(logw - top)
    c = np.cumsum(w)
    u = gen.random() * c[-1]
    return int(np.searchsorted(c, u, side="right")), False


def assim_forecast(
    x: np.ndarray,
    propagated_ancestor: np.ndarray,
    eps: float,
    frac: float,
    process_cov: CovSpec,
    rng=None,
    noise: np.ndarray | None = None,
) -> np.ndarray:
    """Forecast move for stages with dynamics:

        x - (eps frac / 2) U^{-1} (x - g(ancestor)) + w,  w ~ N(0, frac eps I).

    The drift is the score of the transition density at x, so together
    with the analysis this is the same preconditioned Langevin move as
    the static case with the propagated ancestor as the prior mean.
    """
    x = np.asarray(x, dtype=float)
    diff = x - np.asarray(propagated_ancestor, dtype=float)
    pulled = process_cov.solve(diff.T).T if diff.ndim == 2 else process_cov.solve(diff)
    out = x - (0.5 * eps * frac) * pulled
    if noise is not None:
        return out + noise
    if rng is not None:
        gen = rng.generator() if isinstance(rng, RngStream) else rng
        return out + np.sqrt(frac * eps) * gen.standard_normal(x.shape)
    return out


def stage_handoff(
    members: np.ndarray,
    model: StateSpaceModel,
    stage: int,
    cursor: PhiloxCursor,
) -> np.ndarray:
    """Map last stage's analysis members to this stage's starting
    points: x <- g(x) + u, u ~ N(0, U), one stream per chain."""
    propagated = np.atleast_2d(model.propagate(members))
    out = np.empty_like(propagated)
    for i in range(propagated.shape[0]):
        gen = cursor.seek(stage, 0, i, "handoff")
        out[i] = model.process_cov.sample(propagated[i], gen)
    return out


@dataclass
class AssimResult:
    record: RunRecord
    estimates: np.ndarray                  # (n_stages, p)
    ci_lower: np.ndarray                   # (n_stages, p)
    ci_upper: np.ndarray                   # (n_stages, p)
    pool_sizes: np.ndarray                 # (n_stages,)
    ess: np.ndarray | None = None          # (n_stages, n_inner) mean over chains
    final_pool: StagePool | None = None
    final_members: np.ndarray | None = None


def _interval(collected: np.ndarray, cfg: AssimConfig) -> tuple[np.ndarray, np.ndarray]:
    tail = 100.0 * (1.0 - cfg.level) / 2.0
    if cfg.interval == "percentile":
        lo = np.percentile(collected, tail, axis=0)
        hi = np.percentile(collected, 100.0 - tail, axis=0)
    else:
        from scipy.stats import norm

        z = norm.ppf(1.0 - (1.0 - cfg.level) / 2.0)
        mean = collected.mean(axis=0)
        sd = collected.std(axis=0, ddof=1)
        lo, hi = mean - z * sd, mean + z * sd
    return lo, hi


def _obs_cov_sized(cov: CovSpec, size: int) -> CovSpec:
    if cov.dim == size:
        return cov
    if isinstance(cov, ScaledIdentity):
        return ScaledIdentity(cov.scale, size)
    raise DimensionMismatch(
        f"observation covariance dim {cov.dim} does not match block size {size}"
    )


def run_assimilation(
    model: StateSpaceModel | "MeasurementAugmentation",
    observations,
    cfg: AssimConfig,
    seed: int,
    init: np.ndarray,
    record: RecordSpec | None = None,
    hooks=(),
) -> AssimResult:
    """Sequential posterior sampling over the stages of a state-space
    model.

    ``observations`` is a sequence of (y_t, H_t) pairs for a linear
    measurement model, or of plain y_t vectors when ``model`` is a
    `MeasurementAugmentation`.  ``init`` is the (n_chains, p) stage-one
    starting ensemble, normally prior draws.  Per-iteration mean
    effective sample size of the resampling weights is written to the
    metric rows; degenerate weight vectors fall back to uniform and are
    flagged in the event rows.  Hooks run once per stage: hook(t,
    members) on the plain path, hook(t, z, gamma) on the augmented one.
    """
    if isinstance(model, MeasurementAugmentation):
        return _run_assimilation_augmented(model, observations, cfg, seed, init, record, hooks)
    if model.log_prior_grad is None:
        raise ConfigInvalid("model must provide log_prior_grad for the first stage")
    if model.process_cov is None:
        raise ConfigInvalid("model must provide process_cov")
    m = cfg.n_chains
    p = model.dim_state
    members = np.array(init, dtype=float, copy=True)
    if members.shape != (m, p):
        raise DimensionMismatch(f"init shape {members.shape} != ({m}, {p})")
    if record is None:
        record = RecordSpec()
    comp_ids = record.component_ids(p)
    n_stages = len(observations)
    cursor = PhiloxCursor(seed)
    rec = RunRecord()
    estimates = np.empty((n_stages, p))
    ci_lo = np.empty((n_stages, p))
    ci_hi = np.empty((n_stages, p))
    pool_sizes = np.empty(n_stages, dtype=int)
    ess_out = np.full((n_stages, cfg.n_inner), np.nan)
    pool: StagePool | None = None
    for t in range(1, n_stages + 1):
        y_t, h_t = observations[t - 1]
        y_t = np.asarray(y_t, dtype=float)
        h_t = np.atleast_2d(np.asarray(h_t, dtype=float))
        n_full = y_t.shape[0]
        n_sub = cfg.subsample or n_full
        if n_sub > n_full:
            raise ConfigInvalid(f"subsample {n_sub} exceeds stage block size {n_full}")
        frac = n_sub / n_full
        r_spec = _obs_cov_sized(model.obs_block_cov, n_sub).scaled(2.0)
        r_frac = r_spec.scaled(frac)
        zero_obs = np.zeros(n_sub)
        if t > 1:
            members = stage_handoff(members, model, t, cursor)
            pool_prop = np.atleast_2d(model.propagate(pool.samples))
        collected = []
        for k in range(1, cfg.n_inner + 1):
            eps = cfg.schedule.rate(t, k)
            if n_sub < n_full:
                rows = np.sort(
                    cursor.seek(t, k, 0, "batch").choice(n_full, size=n_sub, replace=False)
                )
                y_k, h_k = y_t[rows], h_t[rows]
            else:
                y_k, h_k = y_t, h_t
            gain = kalman_gain(ScaledIdentity(eps, p), h_k, r_spec)
            if t > 1:
                logw = _pairwise_logpdf(members, pool_prop, model.process_cov)
                ancestors = np.empty((m, p))
                ess_sum = 0.0
                for i in range(m):
                    gen = cursor.seek(t, k, i, "resample")
                    idx, degenerate = _select_from_logweights(logw[i], gen)
                    ancestors[i] = pool_prop[idx]
                    if degenerate:
                        rec.add_event(t, k, i, "degenerate_weights")
                        ess_sum += 1.0
                    else:
                        ess_sum += _ess_from_logw(logw[i])
                ess_out[t - 1, k - 1] = ess_sum / m
                w = np.sqrt(frac * eps) * np.stack(
                    [cursor.seek(t, k, i, "process").standard_normal(p) for i in range(m)]
                )
                forecast = assim_forecast(
                    members, ancestors, eps, frac, model.process_cov, noise=w
                )
            else:
                grad = model.log_prior_grad(members)
                w = np.sqrt(frac * eps) * np.stack(
                    [cursor.seek(t, k, i, "process").standard_normal(p) for i in range(m)]
                )
                forecast = members + (0.5 * eps * frac) * grad + w
            v = np.stack(
                [r_frac.sample(zero_obs, cursor.seek(t, k, i, "measure")) for i in range(m)]
            )
            resid = y_k[None, :] - forecast @ h_k.T - v
            members = forecast + resid @ gain.T
            if k > cfg.collect_after:
                collected.append(members.copy())
            if record.wants_stage(t) and (not record.last_iteration_only or k == cfg.n_inner):
                rec.add_samples(t, k, members, component_ids=comp_ids)
        stacked = np.concatenate(collected, axis=0)
        estimates[t - 1] = stacked.mean(axis=0)
        ci_lo[t - 1], ci_hi[t - 1] = _interval(stacked, cfg)
        pool = StagePool(t, stacked)
        pool_sizes[t - 1] = pool.size
        if cfg.record_ess and t > 1:
            for k in range(1, cfg.n_inner + 1):
                rec.add_metric(t, "ess", str(k), ess_out[t - 1, k - 1])
        for hook in hooks:
            hook(t, members)
    return AssimResult(
        record=rec,
        estimates=estimates,
        ci_lower=ci_lo,
        ci_upper=ci_hi,
        pool_sizes=pool_sizes,
        ess=ess_out,
        final_pool=pool,
        final_members=members,
    )


def _ess_from_logw(logw: np.ndarray) -> float:
    shifted = logw - np.max(logw)
    lse1 = log_sum_exp(shifted)
    lse2 = log_sum_exp(2.0 * shifted)
    return float(np.exp(2.0 * lse1 - lse2))


def run_enkf_comparison(
    model: StateSpaceModel,
    observations,
    cfg: AssimConfig,
    seed: int,
    init: np.ndarray,
    record: RecordSpec | None = None,
) -> AssimResult:
    """Classical EnKF driven through the same stage/iteration budget as
    the Langevin runner, differing from it in exactly three places: the
    gain comes from the ensemble covariance instead of the constructed
    (Q, H, R) form, no resampling is performed (each member drifts
    toward its own stage-start point), and the per-member measurement
    noise is drawn from V rather than the inflated 2V.

    Per stage the ensemble is mapped through the dynamics once
    (x <- g(x) + u) and that point is kept as the member's anchor; each
    of the cfg.n_inner iterations then runs a Langevin forecast toward
    the anchor followed by an ensemble-gain analysis.  Samples past
    collect_after feed the same estimator and intervals as the Langevin
    runner so stage summaries are comparable.
    """
    if cfg.n_chains < 2:
        raise EnsembleTooSmall("EnKF comparison needs at least 2 members")
    if model.process_cov is None:
        raise ConfigInvalid("model must provide process_cov")
    m = cfg.n_chains
    p = model.dim_state
    members = np.array(init, dtype=float, copy=True)
    if members.shape != (m, p):
        raise DimensionMismatch(f"init shape {members.shape} != ({m}, {p})")
    if record is None:
        record = RecordSpec()
    comp_ids = record.component_ids(p)
    n_stages = len(observations)
    cursor = PhiloxCursor(seed)
    rec = RunRecord()
    estimates = np.empty((n_stages, p))
    ci_lo = np.empty((n_stages, p))
    ci_hi = np.empty((n_stages, p))
    pool_sizes = np.empty(n_stages, dtype=int)
    for t in range(1, n_stages + 1):
        y_t, h_t = observations[t - 1]
        y_t = np.asarray(y_t, dtype=float)
        h_t = np.atleast_2d(np.asarray(h_t, dtype=float))
        obs_cov = _obs_cov_sized(model.obs_block_cov, y_t.shape[0])
        zero_obs = np.zeros(y_t.shape[0])
        members = stage_handoff(members, model, t, cursor)
        anchors = members.copy()
        collected = []
        for k in range(1, cfg.n_inner + 1):
            eps = cfg.schedule.rate(t, k)
            w = np.sqrt(eps) * np.stack(
                [cursor.seek(t, k, i, "process").standard_normal(p) for i in range(m)]
            )
            forecast = assim_forecast(members, anchors, eps, 1.0, model.process_cov, noise=w)
            gain = ensemble_gain(forecast, h_t, obs_cov)
            eta = np.stack(
                [obs_cov.sample(zero_obs, cursor.seek(t, k, i, "measure")) for i in range(m)]
            )
            resid = y_t[None, :] - forecast @ h_t.T - eta
            members = forecast + resid @ gain.T
            if k > cfg.collect_after:
                collected.append(members.copy())
            if record.wants_stage(t) and (not record.last_iteration_only or k == cfg.n_inner):
                rec.add_samples(t, k, members, component_ids=comp_ids)
        stacked = np.concatenate(collected, axis=0)
        estimates[t - 1] = stacked.mean(axis=0)
        ci_lo[t - 1], ci_hi[t - 1] = _interval(stacked, cfg)
        pool_sizes[t - 1] = stacked.shape[0]
    return AssimResult(
        record=rec,
        estimates=estimates,
        ci_lower=ci_lo,
        ci_upper=ci_hi,
        pool_sizes=pool_sizes,
        final_members=members,
    )


# ---------------------------------------------------------------------------
# Nonlinear measurement via state augmentation


@dataclass
class MeasurementAugmentation:
    """State-space model with nonlinear measurement y = h(z) + noise,
    handled by augmenting the state with a synthetic observation gamma
    of h(z).

    gamma carries alpha of the measurement variance as transition noise
    and leaves (1 - alpha) as measurement noise; the augmented
    measurement is linear (it reads gamma off the state), so the
    constructed-gain analysis applies unchanged.  response and
    jacobian_transpose act on chain-stacked z arrays; obs_cov is the
    full measurement covariance Gamma of one stage.
    """

    state_model: StateSpaceModel
    response: callable
    jacobian_transpose: callable
    alpha: float
    obs_cov: CovSpec

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ConfigInvalid(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.state_model.process_cov is None:
            raise ConfigInvalid("state model must provide process_cov")
        if self.state_model.log_prior_grad is None:
            raise ConfigInvalid("state model must provide log_prior_grad")

    @property
    def n_obs(self) -> int:
        return self.obs_cov.dim


def augment_nonlinear_measurement(
    model: StateSpaceModel,
    response,
    jacobian_transpose,
    alpha: float,
    obs_cov: CovSpec,
) -> MeasurementAugmentation:
    """Wrap a state model whose measurement y = h(z) + N(0, Gamma) is
    nonlinear in z.  The result plugs into `run_assimilation` with
    per-stage observations given as plain vectors."""
    return MeasurementAugmentation(
        state_model=model,
        response=response,
        jacobian_transpose=jacobian_transpose,
        alpha=alpha,
        obs_cov=obs_cov,
    )


def _run_assimilation_augmented(
    aug: MeasurementAugmentation,
    observations,
    cfg: AssimConfig,
    seed: int,
    init: np.ndarray,
    record: RecordSpec | None,
    hooks,
) -> AssimResult:
    """Algorithm body for augmented models.  Full-data scenario: the
    whole stage observation is used every iteration (frac = 1), gamma
    restarts at y_t on each stage hand-off, and only the z block is
    pooled, resampled and reported."""
    base = aug.state_model
    m = cfg.n_chains
    pz = base.dim_state
    n = aug.n_obs
    if cfg.subsample is not None:
        raise ConfigInvalid("augmented assimilation runs on full stage data")
    z = np.array(init, dtype=float, copy=True)
    if z.shape != (m, pz):
        raise DimensionMismatch(f"init shape {z.shape} != ({m}, {pz})")
    if record is None:
        record = RecordSpec()
    comp_ids = record.component_ids(pz)
    n_stages = len(observations)
    cursor = PhiloxCursor(seed)
    rec = RunRecord()
    estimates = np.empty((n_stages, pz))
    ci_lo = np.empty((n_stages, pz))
    ci_hi = np.empty((n_stages, pz))
    pool_sizes = np.empty(n_stages, dtype=int)
    ess_out = np.full((n_stages, cfg.n_inner), np.nan)
    r_spec = aug.obs_cov.scaled(2.0 * (1.0 - aug.alpha))
    zero_obs = np.zeros(n)
    pool: StagePool | None = None
    gamma = np.zeros((m, n))
    for t in range(1, n_stages + 1):
        y_t = np.asarray(observations[t - 1], dtype=float)
        if y_t.shape != (n,):
            raise DimensionMismatch(
                f"stage {t} observation has shape {y_t.shape}, expected ({n},)"
            )
        if t > 1:
            z = stage_handoff(z, base, t, cursor)
            pool_prop = np.atleast_2d(base.propagate(pool.samples))
        gamma[:] = y_t[None, :]
        collected = []
        for k in range(1, cfg.n_inner + 1):
            eps = cfg.schedule.rate(t, k)
            resid_g = gamma - aug.response(z)
            vinv = aug.obs_cov.solve(resid_g.T).T
            if t > 1:
                logw = _pairwise_logpdf(z, pool_prop, base.process_cov)
                ancestors = np.empty((m, pz))
                ess_sum = 0.0
                for i in range(m):
                    gen = cursor.seek(t, k, i, "resample")
                    idx, degenerate = _select_from_logweights(logw[i], gen)
                    ancestors[i] = pool_prop[idx]
                    if degenerate:
                        rec.add_event(t, k, i, "degenerate_weights")
                        ess_sum += 1.0
                    else:
                        ess_sum += _ess_from_logw(logw[i])
                ess_out[t - 1, k - 1] = ess_sum / m
                diff = z - ancestors
                z_core = -(base.process_cov.solve(diff.T).T)
            else:
                z_core = base.log_prior_grad(z)
            top = z_core + aug.jacobian_transpose(z, vinv) / aug.alpha
            bottom = -vinv / aug.alpha
            wz = np.empty((m, pz))
            wg = np.empty((m, n))
            for i in range(m):
                draw = cursor.seek(t, k, i, "process").standard_normal(pz + n)
                wz[i] = draw[:pz]
                wg[i] = draw[pz:]
            root_eps = np.sqrt(eps)
            zf = z + 0.5 * eps * top + root_eps * wz
            gf = gamma + 0.5 * eps * bottom + root_eps * wg
            v = np.stack(
                [r_spec.sample(zero_obs, cursor.seek(t, k, i, "measure")) for i in range(m)]
            )
            resid = y_t[None, :] - gf - v
            inner = r_spec.add_to(eps * np.eye(n))
            z = zf
            gamma = gf + eps * solve_spd(inner, resid.T).T
            if k > cfg.collect_after:
                collected.append(z.copy())
            if record.wants_stage(t) and (not record.last_iteration_only or k == cfg.n_inner):
                rec.add_samples(t, k, z, component_ids=comp_ids)
        stacked = np.concatenate(collected, axis=0)
        estimates[t - 1] = stacked.mean(axis=0)
        ci_lo[t - 1], ci_hi[t - 1] = _interval(stacked, cfg)
        pool = StagePool(t, stacked)
        pool_sizes[t - 1] = pool.size
        if cfg.record_ess and t > 1:
            for k in range(1, cfg.n_inner + 1):
                rec.add_metric(t, "ess", str(k), ess_out[t - 1, k - 1])
        for hook in hooks:
            hook(t, z, gamma)
    return AssimResult(
        record=rec,
        estimates=estimates,
        ci_lower=ci_lo,
        ci_upper=ci_hi,
        pool_sizes=pool_sizes,
        ess=ess_out,
        final_pool=pool,
        final_members=z,
    )
