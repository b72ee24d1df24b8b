"""Learning-rate schedules for the Langevin-type samplers.

Two families cover every experiment in the package: a constant rate and
the polynomial decay c / max(t0, idx)^power, which holds the rate flat
for the first t0 steps and then decays.  The decay index can be the
stage counter or the within-stage iteration counter; data-assimilation
runs usually restart the decay inside each stage, static inverse
problems decay over stages.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ConfigInvalid

__all__ = ["LearningRateSchedule", "PolyDecay", "Constant"]


class LearningRateSchedule:
    def rate(self, stage: int, iteration: int = 1) -> float:
        raise NotImplementedError

    def to_config(self) -> dict:
        raise NotImplementedError

    @staticmethod
    def from_config(cfg: dict) -> "LearningRateSchedule":
        kind = cfg.get("type")
        if kind == "constant":
            return Constant(cfg["value"])
        if kind == "poly":
            return PolyDecay(
                c=cfg["c"],
                t0=cfg.get("t0", 1),
                power=cfg["power"],
                index=cfg.get("index", "stage"),
            )
        raise ConfigInvalid(f"unknown schedule type {kind!r}")


@dataclass(frozen=True)
class Constant(LearningRateSchedule):
    value: float

    def __post_init__(self):
        if not self.value > 0:
            raise ConfigInvalid(f"constant rate must be positive, got {self.value}")

    def rate(self, stage: int, iteration: int = 1) -> float:
        return self.value

    def to_config(self) -> dict:
        return {"type": "constant", "value": self.value}


@dataclass(frozen=True)
class PolyDecay(LearningRateSchedule):
    """rate = c / max(t0, idx)^power, idx being the stage or iteration."""

    c: float
    t0: int = 1
    power: float = 0.6
    index: str = "stage"

    def __post_init__(self):
        if not self.c > 0:
            raise ConfigInvalid(f"decay numerator must be positive, got {self.c}")
        if self.t0 < 1:
            raise ConfigInvalid(f"decay knee t0 must be >= 1, got {self.t0}")
        if not 0.0 < self.power < 1.0:
            raise ConfigInvalid(f"decay power must lie in (0, 1), got {self.power}")
        if self.index not in ("stage", "iteration"):
            raise ConfigInvalid(f"decay index must be 'stage' or 'iteration', got {self.index!r}")

    def rate(self, stage: int, iteration: int = 1) -> float:
        idx = stage if self.index == "stage" else iteration
        return self.c / max(self.t0, idx) ** self.power

    def to_config(self) -> dict:
        return {"type": "poly", "c": self.c, "t0": self.t0, "power": self.power, "index": self.index}
