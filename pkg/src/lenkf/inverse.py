"""Langevin ensemble Kalman sampling for static inverse problems.

The linear runner targets a Bayesian regression posterior by treating
the parameter as a state with identity dynamics.  Each stage draws one
observation block, builds the constructed covariance pair
Q_t = eps_t I (random-walk part) and R_t = 2 V (inflated measurement
part), and moves every chain through a forecast that adds the scaled
prior score plus N(0, (n/N) Q_t) noise, followed by a Kalman analysis
against the block with N(0, (n/N) R_t) perturbed observations.  The
composite move is a preconditioned stochastic-gradient Langevin step
whose invariant law is the posterior; chains are ensemble members of
that sampler, not of a filter, which is why the gain uses Q_t rather
than an ensemble covariance.

The nonlinear runner handles a nonlinear forward map by augmenting the
parameter z with a synthetic linear observation gamma of the response,
splitting the measurement variance V into a part alpha V carried by
gamma's prior and a part (1 - alpha) V left as measurement noise.  The
augmented system is linear in gamma, so the same forecast/analysis
machinery applies, with the drift assembled blockwise from the exact
augmented score.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, EnsembleTooSmall
from .models import RegressionDataset, StateSpaceModel
from .numkit import CovSpec, PhiloxCursor, ScaledIdentity, sample_gaussian, solve_spd
from .records import RecordSpec, RunRecord
from .schedule import LearningRateSchedule

__all__ = [
    "kalman_gain",
    "lenkf_forecast",
    "lenkf_analysis",
    "sgrld_drift",
    "InverseResult",
    "run_linear_inverse",
    "augmented_grad",
    "run_nonlinear_inverse",
]


def kalman_gain(q: CovSpec, h: np.ndarray, r: CovSpec) -> np.ndarray:
    """K = Q H^T (H Q H^T + R)^{-1}, shape (p, n).

    Only the (n, n) innovation matrix is factorized; Q enters through
    matrix-vector products, so scaled-identity and diagonal Q never
    materialize a (p, p) array.
    """
    h = np.atleast_2d(np.asarray(h, dtype=float))
    if h.shape[1] != q.dim:
        raise DimensionMismatch(f"H has {h.shape[1]} columns, Q dim {q.dim}")
    if h.shape[0] != r.dim:
        raise DimensionMismatch(f"H has {h.shape[0]} rows, R dim {r.dim}")
    qht = q.matmul(h.T)                  # (p, n)
    innov = r.add_to(h @ qht)            # (n, n)
    return solve_spd(innov, qht.T).T


def lenkf_forecast(
    x: np.ndarray,
    grad: np.ndarray,
    eps: float,
    frac: float,
    q: CovSpec | None = None,
    rng=None,
    noise: np.ndarray | None = None,
) -> np.ndarray:
    """Forecast move x + (eps frac / 2) grad + w, w ~ N(0, frac Q).

    ``noise`` supplies a precomputed w (the batch runners draw their own
    per-chain streams); otherwise w is drawn from ``rng``; with neither,
    the noise is suppressed, which is the deterministic-drift test hook.
    """
    x = np.asarray(x, dtype=float)
    out = x + (0.5 * eps * frac) * np.asarray(grad, dtype=float)
    if noise is not None:
        return out + noise
    if rng is not None:
        if q is None:
            q = ScaledIdentity(eps, x.shape[-1])
        w = sample_gaussian(np.zeros(x.shape[-1]), q.scaled(frac), rng)
        return out + w
    return out


def lenkf_analysis(
    x_f: np.ndarray,
    gain: np.ndarray,
    y: np.ndarray,
    h: np.ndarray,
    r: CovSpec | None = None,
    frac: float = 1.0,
    rng=None,
    noise: np.ndarray | None = None,
) -> np.ndarray:
    """Analysis move x_f + K (y - H x_f - v), v ~ N(0, frac R).

    Noise handling mirrors `lenkf_forecast`: explicit array, else drawn
    from ``rng`` (requires ``r``), else suppressed.
    """
    x_f = np.asarray(x_f, dtype=float)
    y = np.asarray(y, dtype=float)
    if noise is None:
        if rng is not None:
            if r is None:
                raise DimensionMismatch("drawing measurement noise requires r")
            noise = sample_gaussian(np.zeros(y.shape[-1]), r.scaled(frac), rng)
        else:
            noise = 0.0
    resid = y - x_f @ h.T - noise
    return x_f + resid @ gain.T


def sgrld_drift(
    x: np.ndarray,
    grad_prior: np.ndarray,
    y: np.ndarray,
    h: np.ndarray,
    v: CovSpec,
    gain: np.ndarray,
    eps: float,
    frac: float,
) -> np.ndarray:
    """The equivalent preconditioned Langevin drift of one composite
    forecast/analysis move with the noise suppressed:

        x + (eps/2) Sigma [ (1/frac) H^T V^{-1} (y - H x) + grad_prior ]

    with Sigma = frac (I - K H).  Algebraically identical to composing
    the two moves; kept as an independent formula for verification.
    """
    x = np.asarray(x, dtype=float)
    resid = y - x @ h.T
    data_term = v.solve(resid.T).T @ h / frac
    raw = data_term + grad_prior
    sigma_raw = frac * (raw - (raw @ h.T) @ gain.T)
    return x + 0.5 * eps * sigma_raw


@dataclass
class InverseResult:
    record: RunRecord
    final_members: np.ndarray


def _draw_block(cursor: PhiloxCursor, t: int, n_blocks: int, epoch_cycling: bool, state: dict) -> int:
    if not epoch_cycling:
        return int(cursor.seek(t, 0, 0, "batch").integers(n_blocks))
    pos = (t - 1) % n_blocks
    if pos == 0:
        epoch = (t - 1) // n_blocks
        state["order"] = cursor.seek(epoch, 0, 1, "batch").permutation(n_blocks)
    return int(state["order"][pos])


def run_linear_inverse(
    model: StateSpaceModel,
    data: RegressionDataset,
    n_chains: int,
    schedule: LearningRateSchedule,
    n_stages: int,
    seed: int,
    init: np.ndarray | None = None,
    record: RecordSpec | None = None,
    hooks=(),
    epoch_cycling: bool = False,
) -> InverseResult:
    """Posterior sampling for the linear inverse problem.

    One observation block per stage is shared by every chain.  Each
    stage costs a single (n, n) factorization; all chain updates are
    dense matrix arithmetic.  ``hooks`` are called as hook(t, members)
    after each stage, for streaming summaries that should not be stored.
    """
    if n_chains < 1:
        raise EnsembleTooSmall("need at least one chain")
    if not model.propagate_is_identity:
        raise DimensionMismatch("linear inverse runner expects identity dynamics")
    if model.log_prior_grad is None:
        raise DimensionMismatch("model must provide log_prior_grad")
    p = model.dim_state
    m = n_chains
    frac = data.block_size / data.n_obs
    if record is None:
        record = RecordSpec()
    comp_ids = record.component_ids(p)
    members = np.zeros((m, p)) if init is None else np.array(init, dtype=float, copy=True)
    if members.shape != (m, p):
        raise DimensionMismatch(f"init shape {members.shape} != ({m}, {p})")
    r_spec = model.obs_block_cov.scaled(2.0)
    r_frac = r_spec.scaled(frac)
    cursor = PhiloxCursor(seed)
    rec = RunRecord()
    zero_obs = np.zeros(data.block_size)
    batch_state: dict = {}
    for t in range(1, n_stages + 1):
        eps = schedule.rate(t, 1)
        b = _draw_block(cursor, t, data.n_blocks, epoch_cycling, batch_state)
        y_b, h_b = data.block(b)
        gain = kalman_gain(ScaledIdentity(eps, p), h_b, r_spec)
        grad = model.log_prior_grad(members)
        w = np.sqrt(frac * eps) * np.stack(
            [cursor.seek(t, 0, i, "process").standard_normal(p) for i in range(m)]
        )
        forecast = lenkf_forecast(members, grad, eps, frac, noise=w)
        v = np.stack(
            [r_frac.sample(zero_obs, cursor.seek(t, 0, i, "measure")) for i in range(m)]
        )
        members = lenkf_analysis(forecast, gain, y_b, h_b, noise=v)
        if record.wants_stage(t):
            rec.add_samples(t, 1, members, component_ids=comp_ids)
        for hook in hooks:
            hook(t, members)
    return InverseResult(rec, members)


# ---------------------------------------------------------------------------
# Nonlinear forward maps via measurement augmentation


def augmented_grad(
    z: np.ndarray,
    gamma: np.ndarray,
    forward,
    rows: np.ndarray,
    prior_grad,
    v: CovSpec,
    alpha: float,
    n_total: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Blockwise score of the augmented target at (z, gamma).

    z block:     prior score + (1/alpha) (N/n) J^T V^{-1} (gamma - G(z))
    gamma block: -(1/alpha) V^{-1} (gamma - G(z))

    where G is the forward response on the mini-batch rows and J its
    Jacobian.  Vectorized over leading chain axes.
    """
    z = np.asarray(z, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    resid = gamma - forward.response(z, rows)
    vinv_resid = v.solve(resid.T).T if resid.ndim == 2 else v.solve(resid)
    scale = (n_total / rows.size) / alpha
    top = prior_grad(z) + scale * forward.jacobian_transpose(z, rows, vinv_resid)
    bottom = -vinv_resid / alpha
    return top, bottom


def run_nonlinear_inverse(
    response_values: np.ndarray,
    forward,
    blocks: np.ndarray,
    prior_grad,
    obs_block_cov: CovSpec,
    alpha: float,
    n_chains: int,
    n_inner: int,
    schedule: LearningRateSchedule,
    n_stages: int,
    seed: int,
    init: np.ndarray,
    record: RecordSpec | None = None,
    hooks=(),
) -> InverseResult:
    """Posterior sampling with a nonlinear forward map.

    State per chain is (z, gamma) with gamma an artificial observation
    of the mini-batch response.  At each stage a fresh block is drawn
    and gamma restarts at the block's observed values; n_inner
    forecast/analysis iterations then run with the within-stage
    schedule.  Only the z block is recorded.  Requires 0 < alpha < 1.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    if n_chains < 1:
        raise EnsembleTooSmall("need at least one chain")
    m = n_chains
    init = np.atleast_2d(np.asarray(init, dtype=float))
    if init.shape[0] != m:
        raise DimensionMismatch(f"init has {init.shape[0]} rows for {m} chains")
    pz = init.shape[1]
    n = blocks.shape[1]
    n_total = int(response_values.shape[0])
    frac = n / n_total
    if record is None:
        record = RecordSpec()
    comp_ids = record.component_ids(pz)
    r_spec = obs_block_cov.scaled(2.0 * (1.0 - alpha))
    r_frac = r_spec.scaled(frac)
    cursor = PhiloxCursor(seed)
    rec = RunRecord()
    z = init.copy()
    gamma = np.zeros((m, n))
    zero_obs = np.zeros(n)
    for t in range(1, n_stages + 1):
        b = int(cursor.seek(t, 0, 0, "batch").integers(blocks.shape[0]))
        rows = blocks[b]
        y_b = response_values[rows]
        gamma[:] = y_b[None, :]
        for k in range(1, n_inner + 1):
            eps = schedule.rate(t, k)
            top, bottom = augmented_grad(
                z, gamma, forward, rows, prior_grad, obs_block_cov, alpha, n_total
            )
            wz = np.empty((m, pz))
            wg = np.empty((m, n))
            for i in range(m):
                draw = cursor.seek(t, k, i, "process").standard_normal(pz + n)
                wz[i] = draw[:pz]
                wg[i] = draw[pz:]
            scale_w = np.sqrt(frac * eps)
            zf = lenkf_forecast(z, top, eps, frac, noise=scale_w * wz)
            gf = lenkf_forecast(gamma, bottom, eps, frac, noise=scale_w * wg)
            v = np.stack(
                [r_frac.sample(zero_obs, cursor.seek(t, k, i, "measure")) for i in range(m)]
            )
            # Gain for H = (0, I): the z block is untouched, the gamma
            # block shrinks the residual through (eps I + R)^{-1}.
            resid = y_b[None, :] - gf - v
            inner = r_spec.add_to(eps * np.eye(n))
            z = zf
            gamma = gf + eps * solve_spd(inner, resid.T).T
            if record.wants_stage(t) and (not record.last_iteration_only or k == n_inner):
                rec.add_samples(t, k, z, component_ids=comp_ids)
            for hook in hooks:
                hook(t, k, z, gamma)
    return InverseResult(rec, z)
