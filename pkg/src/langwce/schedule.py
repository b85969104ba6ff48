"""Weight schedulers for the low-resource language.

Three strategies produce the step weight w_t applied to low-resource
sentences in the weighted batch loss:

* constant: w_t = w for every step (w = 1 recovers unweighted training);
* linear progressive: w_t = 1 before ``t_min``, then a linear ramp from
  ``alpha_ini`` at ``t_min`` to ``alpha_fin`` at ``t_total``;
* dynamic loss-ratio: w_t follows the ratio r of the low-resource average
  batch loss to the high-resource average, thresholded at 1 when r * alpha < 1
  and floored at alpha otherwise, with a configurable safety cap.

Schedules are immutable values and weight computation is pure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

# Below this the high-resource average loss is treated as vanished and the
# ratio is meaningless; the scheduler falls back to weight 1.
DEGENERATE_HIGH_LOSS = 1e-9


class Branch(Enum):
    BEFORE_T_MIN = "before_t_min"
    PROGRESSING = "progressing"
    BELOW_THRESHOLD = "below_threshold"
    RATIO_DOMINATES = "ratio_dominates"
    ALPHA_FLOOR = "alpha_floor"
    CAPPED = "capped"
    CONSTANT = "constant"
    DEGENERATE = "degenerate"


@dataclass(frozen=True)
class WeightDecision:
    """A computed step weight plus which rule produced it."""

    value: float
    branch: Branch


@dataclass(frozen=True)
class LinearSchedule:
    alpha_ini: float
    alpha_fin: float
    t_min: int
    t_total: int

    def __post_init__(self):
        if self.alpha_ini < 1:
            raise ValueError(f"alpha_ini must be >= 1, got {self.alpha_ini}")
        if self.alpha_fin < self.alpha_ini:
            raise ValueError(f"alpha_fin must be >= alpha_ini, got {self.alpha_fin} < {self.alpha_ini}")
        if self.t_min < 0 or self.t_total <= self.t_min:
            raise ValueError(f"need 0 <= t_min < t_total, got t_min={self.t_min}, t_total={self.t_total}")


@dataclass(frozen=True)
class DynamicSchedule:
    alpha: float
    weight_cap: float = 10.0

    def __post_init__(self):
        if self.alpha < 1:
            raise ValueError(f"alpha must be >= 1, got {self.alpha}")
        if self.weight_cap <= self.alpha:
            raise ValueError(f"weight_cap must exceed alpha, got cap={self.weight_cap}, alpha={self.alpha}")


def linear_weight(s: LinearSchedule, t: int) -> WeightDecision:
    """Linear progressive weight at training step t.

    Discontinuous at t_min by design: 1 jumps to alpha_ini.
    """
    if t < 0:
        raise ValueError(f"step must be non-negative, got {t}")
    if t > s.t_total:
        raise ValueError(f"step {t} exceeds t_total={s.t_total}; this schedule does not extend past it")
    if t < s.t_min:
        return WeightDecision(1.0, Branch.BEFORE_T_MIN)
    value = s.alpha_ini + (s.alpha_fin - s.alpha_ini) * (t - s.t_min) / (s.t_total - s.t_min)
    return WeightDecision(value, Branch.PROGRESSING)


def dynamic_weight(s: DynamicSchedule, avg_low: float, avg_high: float) -> WeightDecision:
    """Loss-ratio weight from the current batch's unweighted language averages."""
    if avg_low < 0 or avg_high < 0:
        raise ValueError(f"average losses must be non-negative, got low={avg_low}, high={avg_high}")
    if not (math.isfinite(avg_low) and math.isfinite(avg_high)):
        raise ValueError("average losses must be finite")
    if avg_high < DEGENERATE_HIGH_LOSS:
        return WeightDecision(1.0, Branch.DEGENERATE)
    ratio = avg_low / avg_high
    if ratio * s.alpha < 1:
        return WeightDecision(1.0, Branch.BELOW_THRESHOLD)
    if ratio >= s.weight_cap:
        return WeightDecision(s.weight_cap, Branch.CAPPED)
    if ratio >= s.alpha:
        return WeightDecision(ratio, Branch.RATIO_DOMINATES)
    return WeightDecision(s.alpha, Branch.ALPHA_FLOOR)


def constant_weight(w: float) -> WeightDecision:
    """Fixed weight, the baseline scheduler; w = 1 means unweighted training."""
    if not (math.isfinite(w) and w >= 1):
        raise ValueError(f"constant weight must be >= 1, got {w}")
    return WeightDecision(float(w), Branch.CONSTANT)


class WeightMode(Enum):
    NONE = "none"
    CONSTANT = "constant"
    LINEAR = "linear"
    DYNAMIC = "dynamic"


@dataclass(frozen=True)
class Weighting:
    """Weighting strategy for a training run; bundles the mode with its parameters."""

    mode: WeightMode = WeightMode.NONE
    constant: float = 1.0
    linear: LinearSchedule | None = None
    dynamic: DynamicSchedule | None = None

    def __post_init__(self):
        if self.mode is WeightMode.LINEAR and self.linear is None:
            raise ValueError("LINEAR weighting requires a LinearSchedule")
        if self.mode is WeightMode.DYNAMIC and self.dynamic is None:
            raise ValueError("DYNAMIC weighting requires a DynamicSchedule")

    def decide(self, t: int, avg_low: float | None = None, avg_high: float | None = None) -> WeightDecision:
        """Weight for step t. DYNAMIC requires the current batch's language averages."""
        if self.mode is WeightMode.NONE:
            return WeightDecision(1.0, Branch.CONSTANT)
        if self.mode is WeightMode.CONSTANT:
            return constant_weight(self.constant)
        if self.mode is WeightMode.LINEAR:
            return linear_weight(self.linear, t)
        if avg_low is None or avg_high is None:
            raise ValueError("DYNAMIC weighting needs avg_low and avg_high for the batch")
        return dynamic_weight(self.dynamic, avg_low, avg_high)

    def to_dict(self) -> dict:
        out: dict = {"mode": self.mode.value}
        if self.mode is WeightMode.CONSTANT:
            out["constant"] = self.constant
        elif self.mode is WeightMode.LINEAR:
            s = self.linear
            out.update(alpha_ini=s.alpha_ini, alpha_fin=s.alpha_fin, t_min=s.t_min, t_total=s.t_total)
        elif self.mode is WeightMode.DYNAMIC:
            out.update(alpha=self.dynamic.alpha, weight_cap=self.dynamic.weight_cap)
        return out

    @staticmethod
    def from_dict(d: dict) -> "Weighting":
        mode = WeightMode(d["mode"])
        if mode is WeightMode.CONSTANT:
            return Weighting(mode, constant=float(d.get("constant", 1.0)))
        if mode is WeightMode.LINEAR:
            return Weighting(
                mode,
                linear=LinearSchedule(
                    alpha_ini=float(d["alpha_ini"]),
                    alpha_fin=float(d["alpha_fin"]),
                    t_min=int(d["t_min"]),
                    t_total=int(d["t_total"]),
                ),
            )
        if mode is WeightMode.DYNAMIC:
            return Weighting(
                mode,
                dynamic=DynamicSchedule(alpha=float(d["alpha"]), weight_cap=float(d.get("weight_cap", 10.0))),
            )
        return Weighting(mode)
