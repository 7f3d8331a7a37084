"""Absolute-error metrics, accuracy buckets, and per-sequence aggregation."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .fusion import Category, FrameObservation, FusionOutput
from .geometry import relative_rotation_deg, relative_translation

# accuracy levels: (max translation m, max rotation deg); nested, inclusive
HIGH_ACCURACY = (0.25, 2.0)
MEDIUM_ACCURACY = (0.5, 5.0)
LOW_ACCURACY = (5.0, 10.0)

# partition key for reliable + optimized frames combined
RELIABLE_PLUS_OPTIMIZED = "reliable_plus_optimized"

_CATEGORY_KEYS = {
    Category.RELIABLE_DIRECT: "reliable",
    Category.OPTIMIZED_FROM_VIO: "optimized",
    Category.ALIGNMENT_BRIDGE: "bridge",
    Category.ALIGNMENT_PENDING: "pending",
}


class Bucket(enum.Enum):
    HIGH = "high"
    MEDIUM = "medium"
    LOW = "low"
    NONE = "none"


@dataclass(frozen=True)
class FrameError:
    """Absolute pose error of one frame against ground truth."""

    frame_id: int
    ape: float
    aoe: float
    category: Category

    def __post_init__(self):
        if not (math.isfinite(self.ape) and self.ape >= 0.0):
            raise ValueError(f"ape must be finite and >= 0, got {self.ape}")
        if not (math.isfinite(self.aoe) and 0.0 <= self.aoe <= 180.0):
            raise ValueError(f"aoe must lie in [0, 180] degrees, got {self.aoe}")


def bucket(err: FrameError) -> Bucket:
    """Tightest accuracy level an error satisfies; bounds are inclusive."""
    if err.ape <= HIGH_ACCURACY[0] and err.aoe <= HIGH_ACCURACY[1]:
        return Bucket.HIGH
    if err.ape <= MEDIUM_ACCURACY[0] and err.aoe <= MEDIUM_ACCURACY[1]:
        return Bucket.MEDIUM
    if err.ape <= LOW_ACCURACY[0] and err.aoe <= LOW_ACCURACY[1]:
        return Bucket.LOW
    return Bucket.NONE


def frame_errors(
    outputs: Sequence[FusionOutput], observations: Sequence[FrameObservation]
) -> list[FrameError]:
    """Per-frame APE/AOE of the fused estimates against ground truth.

    Pending frames carry no estimate and are excluded. Every observation must
    hold ground truth and ids must align pairwise with the outputs.
    """
    if len(outputs) != len(observations):
        raise ValueError(f"{len(outputs)} outputs vs {len(observations)} observations")
    errors = []
    for out, obs in zip(outputs, observations):
        if out.frame_id != obs.frame_id:
            raise ValueError(f"frame_id mismatch: output {out.frame_id} vs observation {obs.frame_id}")
        if obs.gt is None:
            raise ValueError(f"frame {obs.frame_id} has no ground truth")
        if out.category is Category.ALIGNMENT_PENDING:
            continue
        errors.append(
            FrameError(
                out.frame_id,
                relative_translation(out.pose, obs.gt),
                relative_rotation_deg(out.pose, obs.gt),
                out.category,
            )
        )
    return errors


def apr_frame_errors(
    outputs: Sequence[FusionOutput], observations: Sequence[FrameObservation]
) -> list[FrameError]:
    """Per-frame APE/AOE of the raw APR predictions, tagged with the fusion
    category of each frame so raw and fused statistics partition identically.
    Pending frames are included: the raw prediction exists everywhere."""
    if len(outputs) != len(observations):
        raise ValueError(f"{len(outputs)} outputs vs {len(observations)} observations")
    errors = []
    for out, obs in zip(outputs, observations):
        if out.frame_id != obs.frame_id:
            raise ValueError(f"frame_id mismatch: output {out.frame_id} vs observation {obs.frame_id}")
        if obs.gt is None:
            raise ValueError(f"frame {obs.frame_id} has no ground truth")
        errors.append(
            FrameError(
                out.frame_id,
                relative_translation(obs.apr, obs.gt),
                relative_rotation_deg(obs.apr, obs.gt),
                out.category,
            )
        )
    return errors


@dataclass(frozen=True)
class ErrorStats:
    """Summary statistics of one frame-error partition."""

    count: int
    mean_ape: float
    median_ape: float
    mean_aoe: float
    median_aoe: float
    pct_high: float
    pct_medium: float
    pct_low: float

    def to_dict(self) -> dict:
        return {
            "count": self.count,
            "mean_ape": self.mean_ape,
            "median_ape": self.median_ape,
            "mean_aoe": self.mean_aoe,
            "median_aoe": self.median_aoe,
            "pct_high": self.pct_high,
            "pct_medium": self.pct_medium,
            "pct_low": self.pct_low,
        }

    @staticmethod
    def from_dict(d: dict) -> "ErrorStats":
        return ErrorStats(
            count=int(d["count"]),
            mean_ape=float(d["mean_ape"]),
            median_ape=float(d["median_ape"]),
            mean_aoe=float(d["mean_aoe"]),
            median_aoe=float(d["median_aoe"]),
            pct_high=float(d["pct_high"]),
            pct_medium=float(d["pct_medium"]),
            pct_low=float(d["pct_low"]),
        )


def _median(values: list[float]) -> float:
    # lower-middle for even counts: reproducible across languages
    ordered = sorted(values)
    return ordered[(len(ordered) - 1) // 2]


def _stats(errors: Sequence[FrameError]) -> ErrorStats:
    n = len(errors)
    # summing in sorted order makes the mean exactly permutation-invariant
    apes = sorted(e.ape for e in errors)
    aoes = sorted(e.aoe for e in errors)
    n_high = sum(1 for e in errors if e.ape <= HIGH_ACCURACY[0] and e.aoe <= HIGH_ACCURACY[1])
    n_medium = sum(1 for e in errors if e.ape <= MEDIUM_ACCURACY[0] and e.aoe <= MEDIUM_ACCURACY[1])
    n_low = sum(1 for e in errors if e.ape <= LOW_ACCURACY[0] and e.aoe <= LOW_ACCURACY[1])
    return ErrorStats(
        count=n,
        mean_ape=sum(apes) / n,
        median_ape=apes[(n - 1) // 2],
        mean_aoe=sum(aoes) / n,
        median_aoe=aoes[(n - 1) // 2],
        pct_high=100.0 * n_high / n,
        pct_medium=100.0 * n_medium / n,
        pct_low=100.0 * n_low / n,
    )


@dataclass(frozen=True)
class EvaluationReport:
    """Per-sequence aggregation of frame errors.

    ``partitions`` always holds "all" plus one entry per category present and,
    when both exist, the combined reliable+optimized partition that mirrors
    the usual results-table split. ``category_ratios`` are percentages over
    all frames of the sequence (estimated or pending) and sum to 100.
    """

    total_frames: int
    evaluated_frames: int
    category_counts: dict = field(default_factory=dict)
    category_ratios: dict = field(default_factory=dict)
    partitions: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "total_frames": self.total_frames,
            "evaluated_frames": self.evaluated_frames,
            "category_counts": dict(self.category_counts),
            "category_ratios": dict(self.category_ratios),
            "partitions": {k: s.to_dict() for k, s in self.partitions.items()},
        }

    @staticmethod
    def from_dict(d: dict) -> "EvaluationReport":
        return EvaluationReport(
            total_frames=int(d["total_frames"]),
            evaluated_frames=int(d["evaluated_frames"]),
            category_counts={k: int(v) for k, v in d["category_counts"].items()},
            category_ratios={k: float(v) for k, v in d["category_ratios"].items()},
            partitions={k: ErrorStats.from_dict(v) for k, v in d["partitions"].items()},
        )


def aggregate(errors: Sequence[FrameError], pending_frames: int = 0) -> EvaluationReport:
    """Summarize frame errors into an EvaluationReport.

    pending_frames counts observations that produced no estimate (and hence no
    FrameError); they enter the category ratios but no error partition.
    """
    if not errors:
        raise ValueError("cannot aggregate an empty error list")
    if pending_frames < 0:
        raise ValueError(f"pending_frames must be >= 0, got {pending_frames}")

    total = len(errors) + pending_frames
    counts = {key: 0 for key in _CATEGORY_KEYS.values()}
    counts["pending"] += pending_frames
    by_key: dict[str, list[FrameError]] = {}
    for e in errors:
        key = _CATEGORY_KEYS[e.category]
        counts[key] += 1
        by_key.setdefault(key, []).append(e)

    partitions = {"all": _stats(errors)}
    for key, subset in by_key.items():
        partitions[key] = _stats(subset)
    combined = by_key.get("reliable", []) + by_key.get("optimized", [])
    if combined:
        partitions[RELIABLE_PLUS_OPTIMIZED] = _stats(combined)

    ratios = {key: 100.0 * c / total for key, c in counts.items()}
    return EvaluationReport(
        total_frames=total,
        evaluated_frames=len(errors),
        category_counts=counts,
        category_ratios=ratios,
        partitions=partitions,
    )
