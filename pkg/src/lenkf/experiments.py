"""Config-driven experiments.

A run is described by one JSON document; `validate_config` type-checks
it against a strict schema (unknown keys are errors, every message
names the offending dotted key) and fills defaults, `execute_experiment`
builds the dataset, drives the samplers and writes the four output
files.  The resolved config is embedded in manifest.json, and rerunning
a manifest's config reproduces every CSV byte for byte.

Experiments:

    linear_inverse       ensemble Langevin sampling of a sparse
                         regression posterior
    nonlinear_inverse    the augmented sampler on a one-neuron
                         regression toy
    lorenz96_assim       sequential assimilation of partially observed
                         Lorenz-96, optionally with the classical EnKF
                         run side by side on the same data
    baseline_comparison  SGLD / pSGLD / SGNHT / ensemble sampler on one
                         shared regression dataset
"""

from __future__ import annotations

import importlib.resources
import json
from pathlib import Path

import numpy as np

from .assim import AssimConfig, run_assimilation, run_enkf_comparison
from .baselines import BaselineConfig, run_baseline
from .errors import ConfigInvalid
from .inverse import run_linear_inverse, run_nonlinear_inverse
from .metrics import inclusion_probability, rmse_t, stage_window_mean
from .models import (
    GaussianPrior,
    MixtureGaussianPrior,
    Lorenz96Config,
    StateSpaceModel,
    generate_lorenz96,
    generate_one_neuron,
    generate_regression,
    regression_model,
)
from .numkit import RngStream, ScaledIdentity
from .records import RecordSpec, RunRecord, default_versions
from .schedule import LearningRateSchedule

__all__ = [
    "validate_config",
    "execute_experiment",
    "preset_names",
    "load_preset",
    "preset_path",
]

_REQUIRED = object()


def _check_leaf(value, kind: str, path: str):
    if kind == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigInvalid(f"'{path}' must be an integer")
        return value
    if kind == "float":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigInvalid(f"'{path}' must be a number")
        return float(value)
    if kind == "bool":
        if not isinstance(value, bool):
            raise ConfigInvalid(f"'{path}' must be a boolean")
        return value
    if kind == "str":
        if not isinstance(value, str):
            raise ConfigInvalid(f"'{path}' must be a string")
        return value
    if kind == "list_float":
        if not isinstance(value, list) or not all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in value
        ):
            raise ConfigInvalid(f"'{path}' must be a list of numbers")
        return [float(v) for v in value]
    if kind == "list_str":
        if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
            raise ConfigInvalid(f"'{path}' must be a list of strings")
        return list(value)
    if kind == "schedule":
        if not isinstance(value, dict):
            raise ConfigInvalid(f"'{path}' must be a schedule object")
        try:
            LearningRateSchedule.from_config(value)
        except (ConfigInvalid, KeyError) as exc:
            raise ConfigInvalid(f"'{path}' is not a valid schedule: {exc}") from None
        allowed = {"constant": {"type", "value"}, "poly": {"type", "c", "t0", "power", "index"}}
        extra = sorted(set(value) - allowed[value["type"]])
        if extra:
            raise ConfigInvalid(f"unknown key '{path}.{extra[0]}'")
        return dict(value)
    raise AssertionError(f"unknown schema kind {kind}")


def _validate_node(cfg: dict, schema: dict, path: str) -> dict:
    if not isinstance(cfg, dict):
        raise ConfigInvalid(f"'{path or 'config'}' must be an object")
    unknown = sorted(set(cfg) - set(schema))
    if unknown:
        where = f"{path}.{unknown[0]}" if path else unknown[0]
        raise ConfigInvalid(f"unknown key '{where}'")
    out = {}
    for key, spec in schema.items():
        here = f"{path}.{key}" if path else key
        if isinstance(spec, dict):
            out[key] = _validate_node(cfg.get(key, {}), spec, here)
            continue
        kind, default, check = spec
        if key not in cfg:
            if default is _REQUIRED:
                raise ConfigInvalid(f"missing required key '{here}'")
            out[key] = default
            continue
        value = _check_leaf(cfg[key], kind, here)
        if check is not None:
            err = check(value)
            if err:
                raise ConfigInvalid(f"'{here}' {err}")
        out[key] = value
    return out


def _positive(v):
    return None if v > 0 else "must be positive"


def _nonneg(v):
    return None if v >= 0 else "must be nonnegative"


def _in_unit(v):
    return None if 0.0 < v < 1.0 else "must lie in (0, 1)"


_PRIOR_SCHEMA = {
    "p_slab": ("float", 0.0005, _in_unit),
    "tau1_sq": ("float", 0.01, _positive),
    "tau2_sq": ("float", 1.0, _positive),
}

_REGRESSION_DATASET_SCHEMA = {
    "n_obs": ("int", _REQUIRED, _positive),
    "dim": ("int", _REQUIRED, _positive),
    "signal": ("list_float", _REQUIRED, None),
    "correlation": ("float", 0.5, lambda v: None if 0.0 <= v < 1.0 else "must lie in [0, 1)"),
    "block_size": ("int", _REQUIRED, _positive),
    "prior": _PRIOR_SCHEMA,
}

_SNAPSHOT_SCHEMA = {
    "stage_stride": ("int", 1, _nonneg),
    "n_components": ("int", 10, _positive),
    "burn_in": ("int", _REQUIRED, _nonneg),
}

_SCHEMAS = {
    "linear_inverse": {
        "experiment": ("str", _REQUIRED, None),
        "seed": ("int", _REQUIRED, _nonneg),
        "output_dir": ("str", "runs/linear_inverse", None),
        "dataset": _REGRESSION_DATASET_SCHEMA,
        "sampler": {
            "n_chains": ("int", _REQUIRED, _positive),
            "n_stages": ("int", _REQUIRED, _positive),
            "schedule": ("schedule", _REQUIRED, None),
            "epoch_cycling": ("bool", False, None),
        },
        "snapshot": _SNAPSHOT_SCHEMA,
    },
    "nonlinear_inverse": {
        "experiment": ("str", _REQUIRED, None),
        "seed": ("int", _REQUIRED, _nonneg),
        "output_dir": ("str", "runs/nonlinear_inverse", None),
        "dataset": {
            "n_obs": ("int", _REQUIRED, _positive),
            "true_params": ("list_float", _REQUIRED, None),
            "input_sd": ("float", 1.0, _positive),
            "noise_sd": ("float", 0.5, _positive),
            "block_size": ("int", _REQUIRED, _positive),
        },
        "sampler": {
            "n_chains": ("int", _REQUIRED, _positive),
            "n_stages": ("int", _REQUIRED, _positive),
            "n_inner": ("int", 5, _positive),
            "alpha": ("float", 0.9, _in_unit),
            "schedule": ("schedule", _REQUIRED, None),
            "prior_sd": ("float", 2.0, _positive),
        },
        "snapshot": _SNAPSHOT_SCHEMA,
    },
    "lorenz96_assim": {
        "experiment": ("str", _REQUIRED, None),
        "seed": ("int", _REQUIRED, _nonneg),
        "output_dir": ("str", "runs/lorenz96_assim", None),
        "dataset": {
            "dim": ("int", 40, lambda v: None if v >= 4 else "must be at least 4"),
            "forcing": ("float", 8.0, None),
            "dt": ("float", 0.01, _positive),
            "n_stages": ("int", 100, _positive),
            "obs_fraction": ("float", 0.5, lambda v: None if 0 < v <= 1 else "must lie in (0, 1]"),
            "process_noise_sd": ("float", 1.0, _positive),
            "obs_noise_sd": ("float", 1.0, _positive),
            "init_value": ("float", 20.0, None),
            "perturb_value": ("float", 0.1, None),
            "perturb_index": ("int", 19, _nonneg),
        },
        "sampler": {
            "n_chains": ("int", _REQUIRED, _positive),
            "n_inner": ("int", _REQUIRED, _positive),
            "collect_after": ("int", _REQUIRED, _nonneg),
            "schedule": ("schedule", _REQUIRED, None),
            "interval": ("str", "percentile", lambda v: None if v in ("percentile", "gaussian") else "must be 'percentile' or 'gaussian'"),
            "prior_scale": ("float", 1.0, _positive),
            "run_enkf": ("bool", True, None),
            "enkf_iterations": ("int", 0, _nonneg),
        },
        "metrics": {
            "window_first": ("int", 21, _positive),
            "window_last": ("int", 100, _positive),
        },
        "snapshot": _SNAPSHOT_SCHEMA,
    },
    "baseline_comparison": {
        "experiment": ("str", _REQUIRED, None),
        "seed": ("int", _REQUIRED, _nonneg),
        "output_dir": ("str", "runs/baseline_comparison", None),
        "dataset": _REGRESSION_DATASET_SCHEMA,
        "sampler": {
            "algorithms": ("list_str", _REQUIRED, None),
            "n_chains": ("int", _REQUIRED, _positive),
            "n_iters": ("int", _REQUIRED, _positive),
            "schedules": {
                "sgld": ("schedule", None, None),
                "psgld": ("schedule", None, None),
                "sgnht": ("schedule", None, None),
                "lenkf": ("schedule", None, None),
            },
            "sgnht_diffusion": ("float", 10.0, _positive),
            "psgld_decay": ("float", 0.99, _in_unit),
            "psgld_damping": ("float", 1e-5, _positive),
        },
        "snapshot": _SNAPSHOT_SCHEMA,
    },
}

_KNOWN_ALGOS = ("sgld", "psgld", "sgnht", "lenkf")


def validate_config(cfg: dict) -> dict:
    """Validate a raw config dict and return it with defaults filled.
    Raises ConfigInvalid naming the offending key."""
    if not isinstance(cfg, dict):
        raise ConfigInvalid("config must be a JSON object")
    experiment = cfg.get("experiment")
    if experiment is None:
        raise ConfigInvalid("missing required key 'experiment'")
    if experiment not in _SCHEMAS:
        known = ", ".join(sorted(_SCHEMAS))
        raise ConfigInvalid(f"'experiment' must be one of: {known}; got {experiment!r}")
    out = _validate_node(cfg, _SCHEMAS[experiment], "")
    _cross_checks(out)
    return out


def _cross_checks(cfg: dict) -> None:
    exp = cfg["experiment"]
    if exp in ("linear_inverse", "baseline_comparison"):
        ds = cfg["dataset"]
        if len(ds["signal"]) > ds["dim"]:
            raise ConfigInvalid("'dataset.signal' is longer than 'dataset.dim'")
        if ds["n_obs"] % ds["block_size"] != 0:
            raise ConfigInvalid("'dataset.block_size' must divide 'dataset.n_obs'")
    if exp == "linear_inverse":
        if cfg["snapshot"]["burn_in"] >= cfg["sampler"]["n_stages"]:
            raise ConfigInvalid("'snapshot.burn_in' must be below 'sampler.n_stages'")
    if exp == "nonlinear_inverse":
        ds = cfg["dataset"]
        if len(ds["true_params"]) != 3:
            raise ConfigInvalid("'dataset.true_params' must have exactly 3 entries")
        if ds["n_obs"] % ds["block_size"] != 0:
            raise ConfigInvalid("'dataset.block_size' must divide 'dataset.n_obs'")
        if cfg["snapshot"]["burn_in"] >= cfg["sampler"]["n_stages"]:
            raise ConfigInvalid("'snapshot.burn_in' must be below 'sampler.n_stages'")
    if exp == "lorenz96_assim":
        s = cfg["sampler"]
        if s["collect_after"] >= s["n_inner"]:
            raise ConfigInvalid("'sampler.collect_after' must be below 'sampler.n_inner'")
        m = cfg["metrics"]
        if not m["window_first"] <= m["window_last"] <= cfg["dataset"]["n_stages"]:
            raise ConfigInvalid(
                "'metrics.window_first'..'metrics.window_last' must fit in 'dataset.n_stages'"
            )
        if cfg["dataset"]["perturb_index"] >= cfg["dataset"]["dim"]:
            raise ConfigInvalid("'dataset.perturb_index' must be below 'dataset.dim'")
    if exp == "baseline_comparison":
        s = cfg["sampler"]
        if not s["algorithms"]:
            raise ConfigInvalid("'sampler.algorithms' must not be empty")
        for algo in s["algorithms"]:
            if algo not in _KNOWN_ALGOS:
                raise ConfigInvalid(
                    f"'sampler.algorithms' contains unknown algorithm {algo!r}"
                )
            if s["schedules"].get(algo) is None:
                raise ConfigInvalid(f"missing required key 'sampler.schedules.{algo}'")
        if cfg["snapshot"]["burn_in"] >= s["n_iters"]:
            raise ConfigInvalid("'snapshot.burn_in' must be below 'sampler.n_iters'")


# ---------------------------------------------------------------------------
# Experiment bodies


def _signal_beta(ds_cfg: dict) -> np.ndarray:
    beta = np.zeros(ds_cfg["dim"])
    sig = np.asarray(ds_cfg["signal"], dtype=float)
    beta[: sig.size] = sig
    return beta


def _record_spec(cfg: dict, dim: int) -> RecordSpec:
    snap = cfg["snapshot"]
    return RecordSpec(
        stage_stride=snap["stage_stride"],
        last_iteration_only=True,
        components=tuple(range(min(snap["n_components"], dim))),
    )


def _run_linear(cfg: dict) -> RunRecord:
    ds_cfg, s_cfg, snap = cfg["dataset"], cfg["sampler"], cfg["snapshot"]
    seed = cfg["seed"]
    beta = _signal_beta(ds_cfg)
    data = generate_regression(
        n_obs=ds_cfg["n_obs"],
        dim=ds_cfg["dim"],
        true_beta=beta,
        correlation=ds_cfg["correlation"],
        block_size=ds_cfg["block_size"],
        seed=seed,
    )
    prior = MixtureGaussianPrior(
        ds_cfg["prior"]["p_slab"], ds_cfg["prior"]["tau1_sq"], ds_cfg["prior"]["tau2_sq"]
    )
    model = regression_model(data, prior)
    schedule = LearningRateSchedule.from_config(s_cfg["schedule"])
    p, m = data.dim, s_cfg["n_chains"]
    burn, stride = snap["burn_in"], snap["stage_stride"]
    incl_sum = np.zeros(p)
    beta_sum = np.zeros(p)
    acc = {"count": 0}

    def accumulate(t, members):
        if t > burn and stride > 0 and t % stride == 0:
            incl_sum[:] += inclusion_probability(members, prior).sum(axis=0)
            beta_sum[:] += members.sum(axis=0)
            acc["count"] += members.shape[0]

    result = run_linear_inverse(
        model,
        data,
        n_chains=m,
        schedule=schedule,
        n_stages=s_cfg["n_stages"],
        seed=seed,
        record=_record_spec(cfg, p),
        hooks=[accumulate],
        epoch_cycling=s_cfg["epoch_cycling"],
    )
    rec = result.record
    if acc["count"] == 0:
        raise ConfigInvalid("snapshot cadence retained no post-burn-in samples")
    for j in range(p):
        rec.add_metric(0, "inclusion", j, incl_sum[j] / acc["count"])
    for j in range(p):
        rec.add_metric(0, "posterior_mean", j, beta_sum[j] / acc["count"])
    return rec


def _run_nonlinear(cfg: dict) -> RunRecord:
    ds_cfg, s_cfg, snap = cfg["dataset"], cfg["sampler"], cfg["snapshot"]
    seed = cfg["seed"]
    data = generate_one_neuron(
        n_obs=ds_cfg["n_obs"],
        true_params=np.asarray(ds_cfg["true_params"], dtype=float),
        input_sd=ds_cfg["input_sd"],
        noise_sd=ds_cfg["noise_sd"],
        block_size=ds_cfg["block_size"],
        seed=seed,
    )
    m = s_cfg["n_chains"]
    prior_sd = s_cfg["prior_sd"]
    prior = GaussianPrior(np.zeros(3), ScaledIdentity(prior_sd**2, 3))
    root = RngStream(seed)
    init = np.stack(
        [prior.sample(root.at(chain=i, purpose="init").generator()) for i in range(m)]
    )
    burn, stride = snap["burn_in"], snap["stage_stride"]
    z_sum = np.zeros(3)
    acc = {"count": 0}

    def accumulate(t, k, z, gamma):
        if k == s_cfg["n_inner"] and t > burn and stride > 0 and t % stride == 0:
            z_sum[:] += z.sum(axis=0)
            acc["count"] += z.shape[0]

    result = run_nonlinear_inverse(
        response_values=data.response,
        forward=data.forward(),
        blocks=data.blocks,
        prior_grad=prior.grad_log_density,
        obs_block_cov=ScaledIdentity(ds_cfg["noise_sd"] ** 2, ds_cfg["block_size"]),
        alpha=s_cfg["alpha"],
        n_chains=m,
        n_inner=s_cfg["n_inner"],
        schedule=LearningRateSchedule.from_config(s_cfg["schedule"]),
        n_stages=s_cfg["n_stages"],
        seed=seed,
        init=init,
        record=_record_spec(cfg, 3),
        hooks=[accumulate],
    )
    rec = result.record
    for j in range(3):
        rec.add_metric(0, "posterior_mean", j, z_sum[j] / acc["count"])
    return rec


def _lorenz_model(cfg16: Lorenz96Config) -> StateSpaceModel:
    return StateSpaceModel(
        dim_state=cfg16.dim,
        propagate=cfg16.step,
        obs_block_cov=ScaledIdentity(cfg16.obs_noise_sd**2, cfg16.n_observed),
        process_cov=ScaledIdentity(cfg16.process_noise_sd**2, cfg16.dim),
    )


def _run_lorenz(cfg: dict) -> RunRecord:
    ds_cfg, s_cfg, snap = cfg["dataset"], cfg["sampler"], cfg["snapshot"]
    seed = cfg["seed"]
    l96 = Lorenz96Config(seed=seed, **{k: ds_cfg[k] for k in ds_cfg})
    data = generate_lorenz96(l96)
    model = _lorenz_model(l96)
    prior = GaussianPrior(
        l96.step(data.x0),
        model.process_cov.scaled(s_cfg["prior_scale"]),
    )
    model.log_prior_grad = prior.grad_log_density
    m = s_cfg["n_chains"]
    root = RngStream(seed)
    init = np.stack(
        [prior.sample(root.at(chain=i, purpose="init").generator()) for i in range(m)]
    )
    observations = [
        (data.obs_values[t - 1], data.measurement_matrix(t))
        for t in range(1, data.n_stages + 1)
    ]
    assim_cfg = AssimConfig(
        n_chains=m,
        n_inner=s_cfg["n_inner"],
        collect_after=s_cfg["collect_after"],
        schedule=LearningRateSchedule.from_config(s_cfg["schedule"]),
        interval=s_cfg["interval"],
    )
    result = run_assimilation(
        model, observations, assim_cfg, seed, init, record=_record_spec(cfg, l96.dim)
    )
    rec = result.record
    first, last = cfg["metrics"]["window_first"], cfg["metrics"]["window_last"]
    _add_stage_metrics(rec, "lenkf", result, data.truth, first, last)
    if s_cfg["run_enkf"]:
        enkf_iters = s_cfg["enkf_iterations"] or s_cfg["n_inner"]
        enkf_cfg = AssimConfig(
            n_chains=m,
            n_inner=enkf_iters,
            collect_after=min(assim_cfg.collect_after, enkf_iters - 1),
            schedule=assim_cfg.schedule,
            interval=s_cfg["interval"],
        )
        enkf_res = run_enkf_comparison(
            model, observations, enkf_cfg, seed, init, record=RecordSpec(stage_stride=0)
        )
        _add_stage_metrics(rec, "enkf", enkf_res, data.truth, first, last)
    return rec


def _add_stage_metrics(rec: RunRecord, algo: str, result, truth: np.ndarray, first: int, last: int):
    n_stages = truth.shape[0]
    rmse = np.empty(n_stages)
    cp = np.empty(n_stages)
    for t in range(1, n_stages + 1):
        rmse[t - 1] = rmse_t(result.estimates[t - 1], truth[t - 1])
        inside = (result.ci_lower[t - 1] <= truth[t - 1]) & (
            truth[t - 1] <= result.ci_upper[t - 1]
        )
        cp[t - 1] = float(np.mean(inside))
        rec.add_metric(t, "RMSE", algo, rmse[t - 1])
        rec.add_metric(t, "CP", algo, cp[t - 1])
    rec.add_metric(0, "MeanRMSE", algo, stage_window_mean(rmse, first, last))
    rec.add_metric(0, "MeanCP", algo, stage_window_mean(cp, first, last))


def _run_baselines(cfg: dict) -> RunRecord:
    ds_cfg, s_cfg, snap = cfg["dataset"], cfg["sampler"], cfg["snapshot"]
    seed = cfg["seed"]
    beta = _signal_beta(ds_cfg)
    data = generate_regression(
        n_obs=ds_cfg["n_obs"],
        dim=ds_cfg["dim"],
        true_beta=beta,
        correlation=ds_cfg["correlation"],
        block_size=ds_cfg["block_size"],
        seed=seed,
    )
    prior = MixtureGaussianPrior(
        ds_cfg["prior"]["p_slab"], ds_cfg["prior"]["tau1_sq"], ds_cfg["prior"]["tau2_sq"]
    )
    rec = RunRecord()
    n_traj = min(snap["n_components"], data.dim)
    burn = snap["burn_in"]
    for algo in s_cfg["algorithms"]:
        schedule = LearningRateSchedule.from_config(s_cfg["schedules"][algo])
        traj_sum = np.zeros(data.dim)
        acc = {"count": 0}
        rows = []

        def track(t, members, algo=algo, rows=rows):
            mean = members.mean(axis=0)
            if t % max(snap["stage_stride"], 1) == 0:
                for j in range(n_traj):
                    rows.append((t, f"coef_mean_{algo}", j, mean[j]))
            if t > burn:
                traj_sum[:] += members.sum(axis=0)
                acc["count"] += members.shape[0]

        if algo == "lenkf":
            model = regression_model(data, prior)
            run_linear_inverse(
                model,
                data,
                n_chains=s_cfg["n_chains"],
                schedule=schedule,
                n_stages=s_cfg["n_iters"],
                seed=seed,
                record=RecordSpec(stage_stride=0),
                hooks=[track],
            )
        else:
            bl_cfg = BaselineConfig(
                algorithm=algo,
                n_chains=s_cfg["n_chains"],
                n_iters=s_cfg["n_iters"],
                schedule=schedule,
                psgld_decay=s_cfg["psgld_decay"],
                psgld_damping=s_cfg["psgld_damping"],
                sgnht_diffusion=s_cfg["sgnht_diffusion"],
            )
            run_baseline(
                bl_cfg,
                data,
                prior.grad_log_density,
                seed=seed,
                record=RecordSpec(stage_stride=0),
                hooks=[track],
            )
        for t, name, j, v in rows:
            rec.add_metric(t, name, j, v)
        for j in range(n_traj):
            rec.add_metric(0, f"posterior_mean_{algo}", j, traj_sum[j] / acc["count"])
    return rec


_RUNNERS = {
    "linear_inverse": _run_linear,
    "nonlinear_inverse": _run_nonlinear,
    "lorenz96_assim": _run_lorenz,
    "baseline_comparison": _run_baselines,
}


def execute_experiment(
    cfg: dict,
    output_dir: str | Path | None = None,
    seed_override: int | None = None,
) -> tuple[Path, RunRecord]:
    """Validate, run, write.  Returns (output directory, run record)."""
    resolved = validate_config(cfg)
    if seed_override is not None:
        resolved["seed"] = int(seed_override)
    out = Path(output_dir) if output_dir is not None else Path(resolved["output_dir"])
    rec = _RUNNERS[resolved["experiment"]](resolved)
    rec.manifest = {
        "config": resolved,
        "seed": resolved["seed"],
        "versions": default_versions(),
    }
    rec.write(out)
    return out, rec


# ---------------------------------------------------------------------------
# Presets


def _preset_dir():
    return importlib.resources.files("lenkf") / "presets"


def preset_names() -> list[str]:
    return sorted(p.name[: -len(".json")] for p in _preset_dir().iterdir() if p.name.endswith(".json"))


def preset_path(name: str) -> Path:
    path = _preset_dir() / f"{name}.json"
    if not path.is_file():
        known = ", ".join(preset_names())
        raise ConfigInvalid(f"unknown preset {name!r}; known presets: {known}")
    return Path(str(path))


def load_preset(name: str) -> dict:
    return json.loads(preset_path(name).read_text())
