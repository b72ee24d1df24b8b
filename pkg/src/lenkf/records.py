"""Run records: everything a sampler run leaves behind.

A RunRecord collects sample snapshots, metric rows and event rows in
memory and writes them to a fixed on-disk layout:

    samples.csv   header ``t,k,chain,component,value``
    metrics.csv   header ``t,metric,aux,value``
    events.csv    header ``t,k,chain,event``
    manifest.json resolved config + seed + versions

Floats are written with 17 significant digits so a file round-trips to
the exact binary value, rows are LF-terminated, and row order is fully
determined by insertion order; two runs of the same config produce
byte-identical files.
"""

from __future__ import annotations

import csv
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "MetricRow",
    "EventRow",
    "SampleBlock",
    "RecordSpec",
    "RunRecord",
    "format_float",
    "read_csv_rows",
]


def format_float(v: float) -> str:
    return f"{float(v):.17g}"


@dataclass(frozen=True)
class MetricRow:
    t: int
    metric: str
    aux: str
    value: float


@dataclass(frozen=True)
class EventRow:
    t: int
    iteration: int
    chain: int
    event: str


@dataclass
class SampleBlock:
    """A rectangle of recorded values: all listed chains by all listed
    components at one (stage, iteration)."""

    stage: int
    iteration: int
    chain_ids: np.ndarray
    component_ids: np.ndarray
    values: np.ndarray          # (len(chain_ids), len(component_ids))


@dataclass(frozen=True)
class RecordSpec:
    """Snapshot cadence: record every ``stage_stride``-th stage, the last
    within-stage iteration only (or all), and the listed components
    (None records everything)."""

    stage_stride: int = 1
    last_iteration_only: bool = True
    components: tuple | None = None
    max_components: int | None = None

    def wants_stage(self, t: int) -> bool:
        # stride 0 disables sample recording entirely
        return self.stage_stride > 0 and t % self.stage_stride == 0

    def component_ids(self, dim: int) -> np.ndarray:
        if self.components is not None:
            return np.asarray(self.components, dtype=int)
        if self.max_components is not None:
            return np.arange(min(self.max_components, dim))
        return np.arange(dim)


@dataclass
class RunRecord:
    manifest: dict = field(default_factory=dict)
    samples: list[SampleBlock] = field(default_factory=list)
    metrics: list[MetricRow] = field(default_factory=list)
    events: list[EventRow] = field(default_factory=list)
    _metric_keys: set = field(default_factory=set, repr=False)

    def add_samples(self, stage, iteration, members, component_ids=None, chain_ids=None):
        members = np.atleast_2d(np.asarray(members, dtype=float))
        if chain_ids is None:
            chain_ids = np.arange(members.shape[0])
        if component_ids is None:
            component_ids = np.arange(members.shape[1])
        component_ids = np.asarray(component_ids, dtype=int)
        self.samples.append(
            SampleBlock(
                stage=stage,
                iteration=iteration,
                chain_ids=np.asarray(chain_ids, dtype=int),
                component_ids=component_ids,
                values=members[:, component_ids].copy(),
            )
        )

    def add_metric(self, t: int, metric: str, aux, value: float):
        key = (t, metric, str(aux))
        if key in self._metric_keys:
            raise ValueError(f"duplicate metric row {key}")
        self._metric_keys.add(key)
        self.metrics.append(MetricRow(t, metric, str(aux), float(value)))

    def add_event(self, t: int, iteration: int, chain: int, event: str):
        self.events.append(EventRow(t, iteration, chain, event))

    def sample_rows(self):
        for block in self.samples:
            for ci, chain in enumerate(block.chain_ids):
                for pj, comp in enumerate(block.component_ids):
                    yield block.stage, block.iteration, int(chain), int(comp), block.values[ci, pj]

    def merge(self, other: "RunRecord"):
        """Append another record's rows (manifest left untouched)."""
        self.samples.extend(other.samples)
        for row in other.metrics:
            self.add_metric(row.t, row.metric, row.aux, row.value)
        self.events.extend(other.events)

    def write(self, outdir: str | Path) -> Path:
        outdir = Path(outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        with open(outdir / "samples.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "k", "chain", "component", "value"])
            for t, k, chain, comp, value in self.sample_rows():
                w.writerow([t, k, chain, comp, format_float(value)])
        with open(outdir / "metrics.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "metric", "aux", "value"])
            for row in self.metrics:
                w.writerow([row.t, row.metric, row.aux, format_float(row.value)])
        with open(outdir / "events.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "k", "chain", "event"])
            for row in self.events:
                w.writerow([row.t, row.iteration, row.chain, row.event])
        manifest = dict(self.manifest)
        manifest.setdefault("versions", default_versions())
        with open(outdir / "manifest.json", "w", newline="") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")
        return outdir


def default_versions() -> dict:
    from . import __version__

    return {
        "lenkf": __version__,
        "numpy": np.__version__,
        "python": ".".join(str(v) for v in sys.version_info[:3]),
    }


def read_csv_rows(path: str | Path) -> list[dict]:
    """Small helper for tests and post-processing: list of row dicts with
    numeric fields parsed."""
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            parsed = {}
            for key, raw in row.items():
                if key in ("t", "k", "chain", "component"):
                    parsed[key] = int(raw)
                elif key == "value":
                    parsed[key] = float(raw)
                else:
                    parsed[key] = raw
            out.append(parsed)
    return out
