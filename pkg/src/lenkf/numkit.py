"""Numerical kernels: splittable random streams, structured covariances,
SPD solves, and a few distributional diagnostics.

Random streams
--------------
Every random draw in the package is addressed by a path
``(root_seed, stage, iteration, chain, purpose)``.  The path is packed
into a Philox key, so streams are counter-based: constructing the same
path twice yields bitwise-identical draws, and distinct paths give
statistically independent streams without any shared mutable state.
That makes ensembles reproducible row-for-row no matter how the chain
loop is ordered or parallelised.

Covariances
-----------
`CovSpec` hides the difference between scaled-identity, diagonal and
dense SPD covariance matrices.  The structured variants never build a
matrix or a factorization; the dense variant factorizes once and caches
the Cholesky factor.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg
import scipy.special

from .errors import (
    DimensionMismatch,
    EmptyInput,
    LengthMismatch,
    NotSPD,
    StreamExhausted,
)

__all__ = [
    "PURPOSES",
    "RngStream",
    "PhiloxCursor",
    "CovSpec",
    "ScaledIdentity",
    "Diagonal",
    "DenseSPD",
    "solve_spd",
    "sample_gaussian",
    "log_sum_exp",
    "wasserstein2_1d",
    "gaussian_w2",
]

# Named purposes keep stream paths readable at call sites while the key
# packing stays numeric.  Adding a name is fine; renumbering is not,
# because the number feeds the Philox key and changes every draw.
PURPOSES = {
    "init": 0,
    "batch": 1,
    "process": 2,
    "measure": 3,
    "handoff": 4,
    "resample": 5,
    "prior": 6,
    "noise": 7,
    "momentum": 8,
    "data_common": 9,
    "data_design": 10,
    "data_noise": 11,
    "data_shuffle": 12,
    "data_state": 13,
    "data_obs": 14,
    "data_mask": 15,
    "misc": 16,
}

# Field widths for packing (stage, iteration, chain, purpose) into the
# second 64-bit word of the Philox key.
_STAGE_BITS, _ITER_BITS, _CHAIN_BITS, _PURPOSE_BITS = 24, 12, 20, 8
_MAX_STAGE = 1 << _STAGE_BITS
_MAX_ITER = 1 << _ITER_BITS
_MAX_CHAIN = 1 << _CHAIN_BITS


def _purpose_id(purpose) -> int:
    if isinstance(purpose, str):
        try:
            return PURPOSES[purpose]
        except KeyError:
            raise KeyError(f"unknown stream purpose {purpose!r}") from None
    return int(purpose)


def _pack_path(stage: int, iteration: int, chain: int, purpose_id: int) -> int:
    if not 0 <= stage < _MAX_STAGE:
        raise StreamExhausted(f"stage {stage} outside [0, {_MAX_STAGE})")
    if not 0 <= iteration < _MAX_ITER:
        raise StreamExhausted(f"iteration {iteration} outside [0, {_MAX_ITER})")
    if not 0 <= chain < _MAX_CHAIN:
        raise StreamExhausted(f"chain {chain} outside [0, {_MAX_CHAIN})")
    if not 0 <= purpose_id < (1 << _PURPOSE_BITS):
        raise StreamExhausted(f"purpose id {purpose_id} outside [0, 256)")
    return (
        (stage << (_ITER_BITS + _CHAIN_BITS + _PURPOSE_BITS))
        | (iteration << (_CHAIN_BITS + _PURPOSE_BITS))
        | (chain << _PURPOSE_BITS)
        | purpose_id
    )


@dataclass(frozen=True)
class RngStream:
    """Address of one random stream.

    ``generator()`` returns a fresh `numpy.random.Generator` positioned
    at the start of the stream, so calling it twice replays the same
    draws.  Use `at` to derive related paths.
    """

    root_seed: int
    stage: int = 0
    iteration: int = 0
    chain: int = 0
    purpose: str = "misc"

    def at(self, **fields) -> "RngStream":
        return replace(self, **fields)

    def key(self) -> np.ndarray:
        packed = _pack_path(
            self.stage, self.iteration, self.chain, _purpose_id(self.purpose)
        )
        return np.array([self.root_seed % (1 << 64), packed], dtype=np.uint64)

    def generator(self) -> np.random.Generator:
        return np.random.Generator(np.random.Philox(key=self.key()))


class PhiloxCursor:
    """Reusable generator for hot loops.

    Re-keying a single Philox bit generator in place costs about a third
    of constructing a fresh one and produces bitwise-identical draws (the
    counter and buffer are reset alongside the key).  Runners that touch
    hundreds of thousands of streams use this; everything else can stick
    with ``RngStream.generator()``.
    """

    def __init__(self, root_seed: int):
        self._seed = root_seed % (1 << 64)
        self._bg = np.random.Philox(key=0)
        self.generator = np.random.Generator(self._bg)

    def seek(self, stage=0, iteration=0, chain=0, purpose="misc") -> np.random.Generator:
        packed = _pack_path(stage, iteration, chain, _purpose_id(purpose))
        state = self._bg.state
        state["state"]["key"][:] = (self._seed, packed)
        state["state"]["counter"][:] = 0
        state["buffer_pos"] = 4
        self._bg.state = state
        return self.generator


# ---------------------------------------------------------------------------
# Covariance representations


class CovSpec:
    """Structured covariance matrix.

    Subclasses implement a common interface; algorithms only ever call
    these methods, so swapping a diagonal for a dense covariance is a
    construction-site change.
    """

    dim: int

    def matrix(self) -> np.ndarray:
        raise NotImplementedError

    def scaled(self, c: float) -> "CovSpec":
        raise NotImplementedError

    def matmul(self, other: np.ndarray) -> np.ndarray:
        """cov @ other."""
        raise NotImplementedError

    def add_to(self, dense: np.ndarray) -> np.ndarray:
        """dense + cov, returned as a new array."""
        raise NotImplementedError

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        """cov^{-1} @ rhs."""
        raise NotImplementedError

    def sample(self, mean: np.ndarray, gen: np.random.Generator, size=None) -> np.ndarray:
        """Draw N(mean, cov); ``size`` draws stacked on the first axis."""
        raise NotImplementedError

    def logpdf(self, x: np.ndarray, means: np.ndarray) -> np.ndarray:
        """Gaussian log-density of ``x`` under each row of ``means``."""
        raise NotImplementedError

    @staticmethod
    def scaled_identity(scale: float, dim: int) -> "ScaledIdentity":
        return ScaledIdentity(scale, dim)

    @staticmethod
    def diagonal(diag) -> "Diagonal":
        return Diagonal(np.asarray(diag, dtype=float))

    @staticmethod
    def dense(mat) -> "DenseSPD":
        return DenseSPD(np.asarray(mat, dtype=float))


def _std_normal(gen: np.random.Generator, dim: int, size) -> np.ndarray:
    if size is None:
        return gen.standard_normal(dim)
    return gen.standard_normal((size, dim))


_LOG_2PI = float(np.log(2.0 * np.pi))


class ScaledIdentity(CovSpec):
    """scale * I_dim with scale >= 0.  scale == 0 is the degenerate
    point mass used by test modes; its log-density is 0 at the mean and
    -inf elsewhere, and it cannot be solved against."""

    def __init__(self, scale: float, dim: int):
        if scale < 0:
            raise NotSPD(f"negative scale {scale}")
        if dim < 1:
            raise DimensionMismatch(f"dim must be positive, got {dim}")
        self.scale = float(scale)
        self.dim = int(dim)

    def matrix(self) -> np.ndarray:
        return self.scale * np.eye(self.dim)

    def scaled(self, c: float) -> "ScaledIdentity":
        return ScaledIdentity(self.scale * c, self.dim)

    def matmul(self, other: np.ndarray) -> np.ndarray:
        return self.scale * np.asarray(other, dtype=float)

    def add_to(self, dense: np.ndarray) -> np.ndarray:
        out = np.array(dense, dtype=float, copy=True)
        idx = np.arange(self.dim)
        out[idx, idx] += self.scale
        return out

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        if self.scale == 0.0:
            raise NotSPD("cannot solve against a zero covariance")
        return np.asarray(rhs, dtype=float) / self.scale

    def sample(self, mean, gen, size=None):
        mean = np.asarray(mean, dtype=float)
        if self.scale == 0.0:
            return np.broadcast_to(mean, (size, self.dim)).copy() if size else mean.copy()
        return mean + np.sqrt(self.scale) * _std_normal(gen, self.dim, size)

    def logpdf(self, x, means):
        x = np.asarray(x, dtype=float)
        means = np.asarray(means, dtype=float)
        d2 = np.sum((x - means) ** 2, axis=-1)
        if self.scale == 0.0:
            return np.where(d2 == 0.0, 0.0, -np.inf)
        return -0.5 * (d2 / self.scale + self.dim * (_LOG_2PI + np.log(self.scale)))


class Diagonal(CovSpec):
    def __init__(self, diag: np.ndarray):
        diag = np.asarray(diag, dtype=float)
        if diag.ndim != 1 or diag.size == 0:
            raise DimensionMismatch("diagonal must be a nonempty 1-D array")
        if np.any(diag < 0):
            raise NotSPD("negative diagonal entry")
        self.diag = diag
        self.dim = diag.size

    def matrix(self) -> np.ndarray:
        return np.diag(self.diag)

    def scaled(self, c: float) -> "Diagonal":
        return Diagonal(self.diag * c)

    def matmul(self, other: np.ndarray) -> np.ndarray:
        other = np.asarray(other, dtype=float)
        return self.diag[:, None] * other if other.ndim == 2 else self.diag * other

    def add_to(self, dense: np.ndarray) -> np.ndarray:
        out = np.array(dense, dtype=float, copy=True)
        idx = np.arange(self.dim)
        out[idx, idx] += self.diag
        return out

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        if np.any(self.diag == 0):
            raise NotSPD("cannot solve against a singular diagonal covariance")
        rhs = np.asarray(rhs, dtype=float)
        return rhs / self.diag[:, None] if rhs.ndim == 2 else rhs / self.diag

    def sample(self, mean, gen, size=None):
        mean = np.asarray(mean, dtype=float)
        return mean + np.sqrt(self.diag) * _std_normal(gen, self.dim, size)

    def logpdf(self, x, means):
        x = np.asarray(x, dtype=float)
        means = np.asarray(means, dtype=float)
        diff = x - means
        if np.any(self.diag == 0):
            zero = self.diag == 0
            exact = np.all(diff[..., zero] == 0.0, axis=-1)
            live = ~zero
            if not np.any(live):
                return np.where(exact, 0.0, -np.inf)
            q = np.sum(diff[..., live] ** 2 / self.diag[live], axis=-1)
            body = -0.5 * (q + live.sum() * _LOG_2PI + np.sum(np.log(self.diag[live])))
            return np.where(exact, body, -np.inf)
        q = np.sum(diff**2 / self.diag, axis=-1)
        return -0.5 * (q + self.dim * _LOG_2PI + np.sum(np.log(self.diag)))


class DenseSPD(CovSpec):
    """Dense SPD covariance; Cholesky factor computed once at
    construction and reused for solves, sampling and densities."""

    def __init__(self, mat: np.ndarray):
        mat = np.asarray(mat, dtype=float)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise DimensionMismatch(f"covariance must be square, got {mat.shape}")
        if not np.allclose(mat, mat.T, rtol=1e-10, atol=1e-12):
            raise NotSPD("covariance is not symmetric")
        try:
            self._chol = np.linalg.cholesky(mat)
        except np.linalg.LinAlgError:
            raise NotSPD("covariance is not positive definite") from None
        self.mat = mat
        self.dim = mat.shape[0]
        self._logdet = 2.0 * float(np.sum(np.log(np.diag(self._chol))))

    def matrix(self) -> np.ndarray:
        return self.mat.copy()

    def cholesky_lower(self) -> np.ndarray:
        return self._chol

    def scaled(self, c: float) -> "CovSpec":
        if c == 0.0:
            return ScaledIdentity(0.0, self.dim)
        return DenseSPD(self.mat * c)

    def matmul(self, other: np.ndarray) -> np.ndarray:
        return self.mat @ np.asarray(other, dtype=float)

    def add_to(self, dense: np.ndarray) -> np.ndarray:
        return np.asarray(dense, dtype=float) + self.mat

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        return scipy.linalg.cho_solve((self._chol, True), np.asarray(rhs, dtype=float))

    def sample(self, mean, gen, size=None):
        mean = np.asarray(mean, dtype=float)
        z = _std_normal(gen, self.dim, size)
        return mean + z @ self._chol.T

    def logpdf(self, x, means):
        x = np.asarray(x, dtype=float)
        means = np.asarray(means, dtype=float)
        diff = np.atleast_2d(x - means)
        half = scipy.linalg.solve_triangular(self._chol, diff.T, lower=True)
        q = np.sum(half**2, axis=0)
        out = -0.5 * (q + self.dim * _LOG_2PI + self._logdet)
        return out if (x - means).ndim == 2 else float(out[0])


# ---------------------------------------------------------------------------
# Kernels


def solve_spd(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve a @ x = b for symmetric positive definite ``a`` via Cholesky.

    Raises NotSPD when ``a`` is asymmetric or the factorization fails,
    DimensionMismatch when shapes are incompatible.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got {a.shape}")
    if b.shape[0] != a.shape[0]:
        raise DimensionMismatch(f"rhs leading dim {b.shape[0]} != {a.shape[0]}")
    if not np.allclose(a, a.T, rtol=1e-10, atol=1e-12):
        raise NotSPD("matrix is not symmetric")
    try:
        factor = scipy.linalg.cho_factor(a, lower=True, check_finite=False)
    except scipy.linalg.LinAlgError:
        raise NotSPD("Cholesky factorization failed; matrix is not SPD") from None
    return scipy.linalg.cho_solve(factor, b, check_finite=False)


def sample_gaussian(mean: np.ndarray, cov: CovSpec, rng, size=None) -> np.ndarray:
    """Draw from N(mean, cov).  ``rng`` is an RngStream or a Generator."""
    mean = np.asarray(mean, dtype=float)
    if mean.shape[-1] != cov.dim:
        raise DimensionMismatch(f"mean dim {mean.shape[-1]} != cov dim {cov.dim}")
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    return cov.sample(mean, gen, size=size)


def log_sum_exp(values: np.ndarray, axis=None) -> np.ndarray:
    """log(sum(exp(values))) computed without overflow."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise EmptyInput("log_sum_exp of an empty array")
    return scipy.special.logsumexp(values, axis=axis)


def wasserstein2_1d(a: np.ndarray, b: np.ndarray) -> float:
    """W2 distance between two equal-size empirical distributions on R.

    For equal sample counts the optimal coupling pairs order statistics,
    so this is the root mean squared difference of the sorted samples.
    Callers comparing unequal runs truncate to the common length first.
    """
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.size == 0 or b.size == 0:
        raise EmptyInput("empty sample in wasserstein2_1d")
    if a.size != b.size:
        raise LengthMismatch(f"sample sizes differ: {a.size} vs {b.size}")
    return float(np.sqrt(np.mean((np.sort(a) - np.sort(b)) ** 2)))


def _psd_sqrt(mat: np.ndarray) -> np.ndarray:
    """Symmetric PSD square root via eigendecomposition, eigenvalues
    clamped at zero to absorb roundoff."""
    w, v = np.linalg.eigh(mat)
    w = np.clip(w, 0.0, None)
    return (v * np.sqrt(w)) @ v.T


def gaussian_w2(mean_a, cov_a, mean_b, cov_b) -> float:
    """W2 distance between two Gaussians (Bures metric on covariances).

    W2^2 = |mu_a - mu_b|^2 + tr(Ca + Cb - 2 (Cb^{1/2} Ca Cb^{1/2})^{1/2})
    """
    mean_a = np.atleast_1d(np.asarray(mean_a, dtype=float))
    mean_b = np.atleast_1d(np.asarray(mean_b, dtype=float))
    cov_a = np.atleast_2d(np.asarray(cov_a, dtype=float))
    cov_b = np.atleast_2d(np.asarray(cov_b, dtype=float))
    if mean_a.shape != mean_b.shape:
        raise DimensionMismatch("mean shapes differ")
    if cov_a.shape != cov_b.shape or cov_a.shape[0] != mean_a.shape[0]:
        raise DimensionMismatch("covariance shapes incompatible with means")
    root_b = _psd_sqrt(cov_b)
    cross = _psd_sqrt(root_b @ cov_a @ root_b)
    w2sq = float(np.sum((mean_a - mean_b) ** 2))
    w2sq += float(np.trace(cov_a) + np.trace(cov_b) - 2.0 * np.trace(cross))
    # The eigendecompositions leave residuals of order eps * scale in
    # w2sq even for identical inputs; values below that noise floor are
    # indistinguishable from zero and the sqrt would inflate them.
    scale = float(np.trace(cov_a) + np.trace(cov_b) + np.sum(mean_a**2 + mean_b**2))
    if w2sq <= 1e-12 * scale:
        return 0.0
    return float(np.sqrt(w2sq))
