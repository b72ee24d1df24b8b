"""Stochastic-gradient MCMC baselines: SGLD, preconditioned SGLD, and
the stochastic-gradient Nose-Hoover thermostat.

All three consume the same stochastic gradient as the Langevin ensemble
samplers: the mini-batch data term scaled up by N/n plus the prior
score.  Step functions are pure (state in, state out) so they can be
unit-tested against hand values; `run_baseline` drives an ensemble of
independent chains over a regression dataset with one shared block per
iteration, mirroring the batch schedule of the ensemble samplers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigInvalid, DimensionMismatch
from .models import RegressionDataset
from .numkit import PhiloxCursor
from .records import RecordSpec, RunRecord
from .schedule import LearningRateSchedule

__all__ = [
    "sgld_step",
    "psgld_step",
    "sgnht_step",
    "BaselineConfig",
    "BaselineResult",
    "run_baseline",
    "stochastic_gradient",
]


def sgld_step(x: np.ndarray, grad: np.ndarray, eps: float, rng=None, noise=None) -> np.ndarray:
    """x + (eps/2) grad + N(0, eps I)."""
    x = np.asarray(x, dtype=float)
    if noise is None:
        noise = 0.0 if rng is None else np.sqrt(eps) * rng.standard_normal(x.shape)
    return x + 0.5 * eps * np.asarray(grad, dtype=float) + noise


def psgld_step(
    x: np.ndarray,
    grad: np.ndarray,
    eps: float,
    sq_avg: np.ndarray,
    decay: float = 0.99,
    damping: float = 1e-5,
    rng=None,
    noise=None,
) -> tuple[np.ndarray, np.ndarray]:
    """RMSprop-preconditioned SGLD.

    sq_avg' = decay sq_avg + (1-decay) grad^2,
    G = 1 / (damping + sqrt(sq_avg')),
    x' = x + (eps/2) G grad + N(0, eps G)    (elementwise G).

    The curvature-correction term of the full preconditioned dynamics is
    dropped, as is standard for this sampler.  Returns (x', sq_avg').
    """
    x = np.asarray(x, dtype=float)
    grad = np.asarray(grad, dtype=float)
    sq_avg = decay * np.asarray(sq_avg, dtype=float) + (1.0 - decay) * grad**2
    precond = 1.0 / (damping + np.sqrt(sq_avg))
    if noise is None:
        noise = (
            0.0
            if rng is None
            else np.sqrt(eps * precond) * rng.standard_normal(x.shape)
        )
    return x + 0.5 * eps * precond * grad + noise, sq_avg


def sgnht_step(
    x: np.ndarray,
    momentum: np.ndarray,
    thermostat: float,
    grad: np.ndarray,
    eps: float,
    diffusion: float,
    rng=None,
    noise=None,
) -> tuple[np.ndarray, np.ndarray, float]:
    """One thermostat update:

    u' = u + eps grad - thermostat eps u + sqrt(2 diffusion eps) N(0, I)
    x' = x + eps u'
    thermostat' = thermostat + eps (u'.u'/p - 1)

    Returns (x', u', thermostat').
    """
    x = np.asarray(x, dtype=float)
    momentum = np.asarray(momentum, dtype=float)
    grad = np.asarray(grad, dtype=float)
    if noise is None:
        noise = (
            0.0
            if rng is None
            else np.sqrt(2.0 * diffusion * eps) * rng.standard_normal(x.shape)
        )
    momentum = momentum + eps * grad - thermostat * eps * momentum + noise
    x = x + eps * momentum
    dim = x.shape[-1] if x.ndim else x.size
    thermostat = thermostat + eps * (float(np.sum(momentum**2, axis=-1)) / dim - 1.0)
    return x, momentum, thermostat


def stochastic_gradient(
    members: np.ndarray,
    y_block: np.ndarray,
    h_block: np.ndarray,
    scale: float,
    prior_grad,
) -> np.ndarray:
    """(N/n) H^T (y - H x) + prior score, for unit observation noise,
    vectorized over chains."""
    resid = y_block[None, :] - members @ h_block.T
    return scale * (resid @ h_block) + prior_grad(members)


@dataclass(frozen=True)
class BaselineConfig:
    algorithm: str
    n_chains: int
    n_iters: int
    schedule: LearningRateSchedule
    psgld_decay: float = 0.99
    psgld_damping: float = 1e-5
    sgnht_diffusion: float = 10.0

    def __post_init__(self):
        if self.algorithm not in ("sgld", "psgld", "sgnht"):
            raise ConfigInvalid(f"unknown baseline {self.algorithm!r}")
        if self.n_chains < 1 or self.n_iters < 1:
            raise ConfigInvalid("chains and iterations must be positive")


@dataclass
class BaselineResult:
    record: RunRecord
    final_members: np.ndarray


def run_baseline(
    cfg: BaselineConfig,
    data: RegressionDataset,
    prior_grad,
    seed: int,
    init: np.ndarray | None = None,
    record: RecordSpec | None = None,
    hooks=(),
) -> BaselineResult:
    """Run independent chains of the chosen baseline on the regression
    posterior.  One observation block per iteration is shared across
    chains; noise comes from per-chain addressed streams, so runs are
    reproducible chain-for-chain."""
    m, p = cfg.n_chains, data.dim
    members = np.zeros((m, p)) if init is None else np.array(init, dtype=float, copy=True)
    if members.shape != (m, p):
        raise DimensionMismatch(f"init shape {members.shape} != ({m}, {p})")
    if record is None:
        record = RecordSpec()
    comp_ids = record.component_ids(p)
    scale = data.n_obs / data.block_size
    cursor = PhiloxCursor(seed)
    rec = RunRecord()
    sq_avg = np.zeros((m, p))
    momentum = np.zeros((m, p))
    thermostat = np.full(m, cfg.sgnht_diffusion)
    for t in range(1, cfg.n_iters + 1):
        eps = cfg.schedule.rate(t, 1)
        b = int(cursor.seek(t, 0, 0, "batch").integers(data.n_blocks))
        y_b, h_b = data.block(b)
        grad = stochastic_gradient(members, y_b, h_b, scale, prior_grad)
        noise = np.stack(
            [cursor.seek(t, 0, i, "noise").standard_normal(p) for i in range(m)]
        )
        if cfg.algorithm == "sgld":
            members = sgld_step(members, grad, eps, noise=np.sqrt(eps) * noise)
        elif cfg.algorithm == "psgld":
            sq_avg = cfg.psgld_decay * sq_avg + (1.0 - cfg.psgld_decay) * grad**2
            precond = 1.0 / (cfg.psgld_damping + np.sqrt(sq_avg))
            members = members + 0.5 * eps * precond * grad + np.sqrt(eps * precond) * noise
        else:
            momentum = (
                momentum
                + eps * grad
                - thermostat[:, None] * eps * momentum
                + np.sqrt(2.0 * cfg.sgnht_diffusion * eps) * noise
            )
            members = members + eps * momentum
            thermostat = thermostat + eps * (np.sum(momentum**2, axis=1) / p - 1.0)
        if record.wants_stage(t):
            rec.add_samples(t, 1, members, component_ids=comp_ids)
        for hook in hooks:
            hook(t, members)
    return BaselineResult(rec, members)
