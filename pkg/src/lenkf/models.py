"""State-space models, priors and synthetic data generators.

Two experiment families are covered: high-dimensional sparse linear
regression with an equicorrelated Gaussian design, and the cyclic
Lorenz-96 system observed partially through noise.  Generators draw
every random number from addressed streams, so a dataset is a pure
function of its config and seed; the JSON sidecar written next to each
CSV is enough to regenerate the data bitwise.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import DimensionMismatch, DimensionTooSmall, IndivisibleBatch
from .numkit import CovSpec, RngStream

__all__ = [
    "MixtureGaussianPrior",
    "mixture_log_prior_grad",
    "GaussianPrior",
    "StateSpaceModel",
    "lorenz96_rhs",
    "rk4_step",
    "Lorenz96Config",
    "Lorenz96Data",
    "generate_lorenz96",
    "RegressionDataset",
    "generate_regression",
    "regression_model",
    "LinearForward",
    "OneNeuronForward",
    "OneNeuronDataset",
    "generate_one_neuron",
    "selection_matrix",
    "save_regression",
    "save_lorenz96",
    "load_dataset",
]


# ---------------------------------------------------------------------------
# Priors


@dataclass(frozen=True)
class MixtureGaussianPrior:
    """Independent two-component Gaussian mixture on each coordinate:
    beta_j ~ (1 - p_slab) N(0, tau1_sq) + p_slab N(0, tau2_sq).

    The first component is the spike (small variance), the second the
    slab.  All densities are evaluated in log space; the responsibilities
    below stay finite even when one component is hundreds of log-units
    below the other.
    """

    p_slab: float
    tau1_sq: float
    tau2_sq: float

    def __post_init__(self):
        if not 0.0 < self.p_slab < 1.0:
            raise ValueError(f"slab probability must lie in (0, 1), got {self.p_slab}")
        if self.tau1_sq <= 0 or self.tau2_sq <= 0:
            raise ValueError("mixture variances must be positive")
        if not self.tau1_sq < self.tau2_sq:
            raise ValueError("spike variance tau1_sq must be below slab variance tau2_sq")

    def _log_weights(self, beta: np.ndarray):
        # log of (component weight x component density), constants kept
        # so log_density is a true log-pdf.
        log_norm = 0.5 * np.log(2.0 * np.pi)
        w1 = (
            np.log1p(-self.p_slab)
            - 0.5 * np.log(self.tau1_sq)
            - log_norm
            - beta**2 / (2.0 * self.tau1_sq)
        )
        w2 = (
            np.log(self.p_slab)
            - 0.5 * np.log(self.tau2_sq)
            - log_norm
            - beta**2 / (2.0 * self.tau2_sq)
        )
        return w1, w2

    def log_density(self, beta) -> float:
        beta = np.asarray(beta, dtype=float)
        w1, w2 = self._log_weights(beta)
        return float(np.sum(np.logaddexp(w1, w2)))

    def grad_log_density(self, beta) -> np.ndarray:
        beta = np.asarray(beta, dtype=float)
        w1, w2 = self._log_weights(beta)
        denom = np.logaddexp(w1, w2)
        r1 = np.exp(w1 - denom)
        r2 = np.exp(w2 - denom)
        return -beta * (r1 / self.tau1_sq + r2 / self.tau2_sq)


def mixture_log_prior_grad(beta, prior: MixtureGaussianPrior) -> np.ndarray:
    """Gradient of the mixture log prior, vectorized over any shape."""
    return prior.grad_log_density(beta)


@dataclass(frozen=True)
class GaussianPrior:
    """N(mean, cov) prior with the two things samplers need: draws and
    the score."""

    mean: np.ndarray
    cov: CovSpec

    def sample(self, gen, size=None) -> np.ndarray:
        return self.cov.sample(np.asarray(self.mean, dtype=float), gen, size=size)

    def grad_log_density(self, x) -> np.ndarray:
        diff = np.asarray(x, dtype=float) - np.asarray(self.mean, dtype=float)
        return -(self.cov.solve(diff.T).T if diff.ndim == 2 else self.cov.solve(diff))


# ---------------------------------------------------------------------------
# State-space model container


@dataclass
class StateSpaceModel:
    """What the filters need to know about a system.

    propagate maps states forward one stage and must accept either a
    single state (p,) or a stack (k, p).  process_cov is the transition
    noise covariance, obs_block_cov the measurement-noise covariance of
    one observation block.  measurement_rows maps a row-index array to
    the corresponding measurement matrix; static inverse problems use it
    to slice the design matrix.
    """

    dim_state: int
    propagate: Callable[[np.ndarray], np.ndarray]
    obs_block_cov: CovSpec
    process_cov: CovSpec | None = None
    propagate_is_identity: bool = False
    log_prior_grad: Callable[[np.ndarray], np.ndarray] | None = None
    measurement_rows: Callable[[np.ndarray], np.ndarray] | None = None


# ---------------------------------------------------------------------------
# Lorenz-96


def lorenz96_rhs(x: np.ndarray, forcing: float = 8.0) -> np.ndarray:
    """Cyclic Lorenz-96 drift: dx_i = (x_{i+1} - x_{i-2}) x_{i-1} - x_i + F.

    Vectorized over a leading batch axis; the cyclic index runs over the
    last axis, which must have length >= 4 for the neighbour pattern to
    be well defined.
    """
    x = np.asarray(x, dtype=float)
    if x.shape[-1] < 4:
        raise DimensionTooSmall(f"Lorenz-96 needs dimension >= 4, got {x.shape[-1]}")
    xp1 = np.roll(x, -1, axis=-1)
    xm2 = np.roll(x, 2, axis=-1)
    xm1 = np.roll(x, 1, axis=-1)
    return (xp1 - xm2) * xm1 - x + forcing


def rk4_step(f: Callable[[np.ndarray], np.ndarray], x: np.ndarray, dt: float) -> np.ndarray:
    """One classical Runge-Kutta step of size dt for dx/dt = f(x)."""
    k1 = f(x)
    k2 = f(x + 0.5 * dt * k1)
    k3 = f(x + 0.5 * dt * k2)
    k4 = f(x + dt * k3)
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


@dataclass(frozen=True)
class Lorenz96Config:
    dim: int = 40
    forcing: float = 8.0
    dt: float = 0.01
    n_stages: int = 100
    obs_fraction: float = 0.5
    process_noise_sd: float = 1.0
    obs_noise_sd: float = 1.0
    init_value: float = 20.0
    perturb_value: float = 0.1
    perturb_index: int = 19
    seed: int = 0

    def __post_init__(self):
        if self.dim < 4:
            raise DimensionTooSmall(f"Lorenz-96 needs dim >= 4, got {self.dim}")
        if not 0.0 < self.obs_fraction <= 1.0:
            raise ValueError("obs_fraction must lie in (0, 1]")
        if not 0 <= self.perturb_index < self.dim:
            raise ValueError("perturb_index out of range")

    @property
    def n_observed(self) -> int:
        return int(self.dim * self.obs_fraction)

    def initial_state(self) -> np.ndarray:
        x0 = np.full(self.dim, self.init_value)
        x0[self.perturb_index] += self.perturb_value
        return x0

    def step(self, x: np.ndarray) -> np.ndarray:
        return rk4_step(lambda s: lorenz96_rhs(s, self.forcing), x, self.dt)


@dataclass
class Lorenz96Data:
    """Truth trajectory plus partial noisy observations, one block per
    stage.  truth[t-1] is the state at stage t (the initial state is
    stored separately)."""

    config: Lorenz96Config
    x0: np.ndarray
    truth: np.ndarray                       # (n_stages, dim)
    obs_indices: list[np.ndarray] = field(default_factory=list)
    obs_values: list[np.ndarray] = field(default_factory=list)

    @property
    def n_stages(self) -> int:
        return self.truth.shape[0]

    def measurement_matrix(self, t: int) -> np.ndarray:
        return selection_matrix(self.obs_indices[t - 1], self.config.dim)


def generate_lorenz96(config: Lorenz96Config) -> Lorenz96Data:
    """Integrate the truth with per-stage transition noise, then observe
    a fresh random subset of coordinates through additive noise.  The
    noise enters the state before the observation is taken, so the
    measured values include that stage's transition shock."""
    cfg = config
    root = RngStream(cfg.seed)
    x = cfg.initial_state()
    truth = np.empty((cfg.n_stages, cfg.dim))
    obs_indices, obs_values = [], []
    for t in range(1, cfg.n_stages + 1):
        x = cfg.step(x)
        shock = root.at(stage=t, purpose="data_state").generator().standard_normal(cfg.dim)
        x = x + cfg.process_noise_sd * shock
        truth[t - 1] = x
        idx = root.at(stage=t, purpose="data_mask").generator().choice(
            cfg.dim, size=cfg.n_observed, replace=False
        )
        idx = np.sort(idx)
        noise = root.at(stage=t, purpose="data_obs").generator().standard_normal(idx.size)
        obs_indices.append(idx)
        obs_values.append(x[idx] + cfg.obs_noise_sd * noise)
    return Lorenz96Data(cfg, cfg.initial_state(), truth, obs_indices, obs_values)


def selection_matrix(indices: np.ndarray, dim: int) -> np.ndarray:
    """0/1 matrix picking the given coordinates (one row per index)."""
    indices = np.asarray(indices, dtype=int)
    if indices.size and (indices.min() < 0 or indices.max() >= dim):
        raise DimensionMismatch("selection index out of range")
    h = np.zeros((indices.size, dim))
    h[np.arange(indices.size), indices] = 1.0
    return h


# ---------------------------------------------------------------------------
# Sparse linear regression


@dataclass
class RegressionDataset:
    """Linear regression data y = Z beta + e with unit noise, split into
    equally sized observation blocks after a seeded row shuffle."""

    design: np.ndarray          # (n_obs, dim)
    response: np.ndarray        # (n_obs,)
    true_beta: np.ndarray       # (dim,)
    correlation: float
    block_size: int
    blocks: np.ndarray          # (n_blocks, block_size) row indices
    seed: int

    @property
    def n_obs(self) -> int:
        return self.design.shape[0]

    @property
    def dim(self) -> int:
        return self.design.shape[1]

    @property
    def n_blocks(self) -> int:
        return self.blocks.shape[0]

    def block(self, b: int) -> tuple[np.ndarray, np.ndarray]:
        idx = self.blocks[b]
        return self.response[idx], self.design[idx]


def regression_model(data: RegressionDataset, prior) -> StateSpaceModel:
    """Static inverse-problem view of a regression dataset: identity
    dynamics on the coefficient vector, unit observation noise per row,
    measurement rows sliced from the design matrix."""
    return StateSpaceModel(
        dim_state=data.dim,
        propagate=lambda x: x,
        obs_block_cov=CovSpec.scaled_identity(1.0, data.block_size),
        propagate_is_identity=True,
        log_prior_grad=prior.grad_log_density,
        measurement_rows=lambda idx: data.design[np.asarray(idx, dtype=int)],
    )


# ---------------------------------------------------------------------------
# Nonlinear forward maps


class LinearForward:
    """Linear response z -> H z, the degenerate case used to check the
    nonlinear machinery against conjugate results."""

    def __init__(self, design: np.ndarray):
        self.design = np.asarray(design, dtype=float)

    def response(self, z: np.ndarray, rows: np.ndarray) -> np.ndarray:
        return np.asarray(z, dtype=float) @ self.design[rows].T

    def jacobian_transpose(self, z: np.ndarray, rows: np.ndarray, resid: np.ndarray) -> np.ndarray:
        return np.asarray(resid, dtype=float) @ self.design[rows]


class OneNeuronForward:
    """Scalar-input one-neuron regression f(w; z) = z0 tanh(z1 w + z2).

    Three parameters, honest nonlinearity, closed-form Jacobian; the
    standard toy for exercising the augmented sampler.
    """

    n_params = 3

    def __init__(self, inputs: np.ndarray):
        self.inputs = np.asarray(inputs, dtype=float)

    def response(self, z: np.ndarray, rows: np.ndarray) -> np.ndarray:
        z2d = np.atleast_2d(np.asarray(z, dtype=float))
        w = self.inputs[rows]
        u = z2d[:, 1:2] * w[None, :] + z2d[:, 2:3]
        out = z2d[:, 0:1] * np.tanh(u)
        return out if np.asarray(z).ndim == 2 else out[0]

    def jacobian_transpose(self, z: np.ndarray, rows: np.ndarray, resid: np.ndarray) -> np.ndarray:
        z2d = np.atleast_2d(np.asarray(z, dtype=float))
        r2d = np.atleast_2d(np.asarray(resid, dtype=float))
        w = self.inputs[rows]
        u = z2d[:, 1:2] * w[None, :] + z2d[:, 2:3]
        th = np.tanh(u)
        sech2 = 1.0 - th**2
        g0 = np.sum(th * r2d, axis=1)
        g1 = np.sum(z2d[:, 0:1] * w[None, :] * sech2 * r2d, axis=1)
        g2 = np.sum(z2d[:, 0:1] * sech2 * r2d, axis=1)
        out = np.stack([g0, g1, g2], axis=1)
        return out if np.asarray(z).ndim == 2 else out[0]


@dataclass
class OneNeuronDataset:
    """Synthetic data for the one-neuron regression toy."""

    inputs: np.ndarray
    response: np.ndarray
    true_params: np.ndarray
    noise_sd: float
    block_size: int
    blocks: np.ndarray
    seed: int

    @property
    def n_obs(self) -> int:
        return self.inputs.shape[0]

    def forward(self) -> OneNeuronForward:
        return OneNeuronForward(self.inputs)


def generate_one_neuron(
    n_obs: int,
    true_params,
    input_sd: float,
    noise_sd: float,
    block_size: int,
    seed: int,
) -> OneNeuronDataset:
    true_params = np.asarray(true_params, dtype=float)
    if true_params.shape != (3,):
        raise DimensionMismatch("one-neuron model has exactly 3 parameters")
    if n_obs % block_size != 0:
        raise IndivisibleBatch(f"block size {block_size} does not divide n_obs {n_obs}")
    root = RngStream(seed)
    inputs = input_sd * root.at(purpose="data_design").generator().standard_normal(n_obs)
    clean = OneNeuronForward(inputs).response(true_params[None, :], np.arange(n_obs))[0]
    noise = root.at(purpose="data_noise").generator().standard_normal(n_obs)
    response = clean + noise_sd * noise
    perm = root.at(purpose="data_shuffle").generator().permutation(n_obs)
    blocks = perm.reshape(n_obs // block_size, block_size)
    return OneNeuronDataset(
        inputs=inputs,
        response=response,
        true_params=true_params,
        noise_sd=noise_sd,
        block_size=block_size,
        blocks=blocks,
        seed=seed,
    )


def generate_regression(
    n_obs: int,
    dim: int,
    true_beta: np.ndarray,
    correlation: float,
    block_size: int,
    seed: int,
) -> RegressionDataset:
    """Equicorrelated Gaussian design via a shared row factor:
    z_ij = sqrt(rho) w_i + sqrt(1-rho) e_ij gives unit marginal variance
    and pairwise column correlation rho.  Responses add N(0,1) noise.
    """
    true_beta = np.asarray(true_beta, dtype=float)
    if true_beta.shape != (dim,):
        raise DimensionMismatch(f"true_beta shape {true_beta.shape} != ({dim},)")
    if not 0.0 <= correlation < 1.0:
        raise ValueError(f"correlation must lie in [0, 1), got {correlation}")
    if n_obs % block_size != 0:
        raise IndivisibleBatch(f"block size {block_size} does not divide n_obs {n_obs}")
    root = RngStream(seed)
    w = root.at(purpose="data_common").generator().standard_normal(n_obs)
    design = root.at(purpose="data_design").generator().standard_normal((n_obs, dim))
    # in place: the (n_obs, dim) buffer is the dominant allocation
    design *= np.sqrt(1.0 - correlation)
    design += np.sqrt(correlation) * w[:, None]
    noise = root.at(purpose="data_noise").generator().standard_normal(n_obs)
    response = design @ true_beta + noise
    perm = root.at(purpose="data_shuffle").generator().permutation(n_obs)
    blocks = perm.reshape(n_obs // block_size, block_size)
    return RegressionDataset(
        design=design,
        response=response,
        true_beta=true_beta,
        correlation=correlation,
        block_size=block_size,
        blocks=blocks,
        seed=seed,
    )


# ---------------------------------------------------------------------------
# Serialization: CSV for the record, JSON sidecar for regeneration


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def save_regression(ds: RegressionDataset, prefix: str | Path) -> Path:
    """Write <prefix>.csv with one row per observation and a JSON
    sidecar with everything needed to regenerate the dataset."""
    prefix = Path(prefix)
    header = ["index", "response"] + [f"z{j}" for j in range(ds.dim)]
    rows = (
        [i, f"{ds.response[i]:.17g}"] + [f"{v:.17g}" for v in ds.design[i]]
        for i in range(ds.n_obs)
    )
    _write_csv(prefix.with_suffix(".csv"), header, rows)
    sidecar = {
        "kind": "regression",
        "n_obs": ds.n_obs,
        "dim": ds.dim,
        "true_beta": [float(v) for v in ds.true_beta],
        "correlation": ds.correlation,
        "block_size": ds.block_size,
        "seed": ds.seed,
    }
    out = prefix.with_suffix(".json")
    out.write_text(json.dumps(sidecar, indent=2) + "\n")
    return out


def save_lorenz96(data: Lorenz96Data, prefix: str | Path) -> Path:
    """Write <prefix>.obs.csv (one row per scalar observation) plus the
    regenerating sidecar."""
    prefix = Path(prefix)
    rows = []
    for t in range(1, data.n_stages + 1):
        idx = data.obs_indices[t - 1]
        val = data.obs_values[t - 1]
        rows.extend([t, int(i), f"{v:.17g}"] for i, v in zip(idx, val))
    _write_csv(Path(f"{prefix}.obs.csv"), ["stage", "coordinate", "value"], rows)
    cfg = data.config
    sidecar = {
        "kind": "lorenz96",
        "dim": cfg.dim,
        "forcing": cfg.forcing,
        "dt": cfg.dt,
        "n_stages": cfg.n_stages,
        "obs_fraction": cfg.obs_fraction,
        "process_noise_sd": cfg.process_noise_sd,
        "obs_noise_sd": cfg.obs_noise_sd,
        "init_value": cfg.init_value,
        "perturb_value": cfg.perturb_value,
        "perturb_index": cfg.perturb_index,
        "seed": cfg.seed,
    }
    out = Path(f"{prefix}.json")
    out.write_text(json.dumps(sidecar, indent=2) + "\n")
    return out


def load_dataset(sidecar_path: str | Path):
    """Regenerate a dataset from its JSON sidecar.  Generation is a pure
    function of the sidecar contents, so the result is bitwise identical
    to the originally saved data."""
    cfg = json.loads(Path(sidecar_path).read_text())
    kind = cfg.pop("kind", None)
    if kind == "regression":
        return generate_regression(
            n_obs=cfg["n_obs"],
            dim=cfg["dim"],
            true_beta=np.asarray(cfg["true_beta"], dtype=float),
            correlation=cfg["correlation"],
            block_size=cfg["block_size"],
            seed=cfg["seed"],
        )
    if kind == "lorenz96":
        return generate_lorenz96(Lorenz96Config(**cfg))
    raise ValueError(f"unknown dataset kind {kind!r} in sidecar {sidecar_path}")
