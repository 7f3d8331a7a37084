"""Streaming two-stage fusion of absolute (APR) and relative (VIO) pose sources.

The engine alternates between two stages:

* **Alignment** - wait for ``n_pairs`` consecutive frame pairs whose APR
  odometry agrees with the VIO odometry within ``(d_th, o_th)``. The agreeing
  ``n_pairs + 1`` frames anchor a reference pose for each source (geometric
  median translation, chordal-mean rotation), which define the VIO-to-world
  rigid transform. A failing pair discards the whole candidate run. While
  aligning, output bridges on the last known transform (or is pending if no
  transform has ever existed).
* **Pose optimization** - each frame whose odometry pair passes is a reliable
  prediction and its APR pose is output directly; a failing frame is replaced
  by its VIO pose carried into world coordinates through the transform. Every
  reliable prediction is also scored against its transformed VIO twin; a run
  of ``drift_streak`` consecutive scores at or below ``gamma`` flags VIO drift
  and sends the engine back to alignment.

Engines are sequential state machines: step() must not be called concurrently,
but independent engines over different streams parallelize freely.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Optional

from .geometry import (
    NORM_EPS,
    Pose,
    RigidTransform,
    apply_transform,
    average_pose,
    compute_rigid_transform,
    odometry_between,
    roe,
    rpe,
    similarity,
)


class Stage(enum.Enum):
    ALIGNMENT = "alignment"
    POSE_OPTIMIZATION = "pose_optimization"


class Category(enum.Enum):
    RELIABLE_DIRECT = "reliable_direct"
    OPTIMIZED_FROM_VIO = "optimized_from_vio"
    ALIGNMENT_BRIDGE = "alignment_bridge"
    ALIGNMENT_PENDING = "alignment_pending"


@dataclass(frozen=True)
class FusionConfig:
    """Thresholds and window sizes of the fusion state machine.

    Defaults are the published operating point: d_th = 0.4 m, o_th = 4 deg,
    n_pairs = 2, gamma = 0.99. drift_streak falls back to n_pairs when unset.
    """

    d_th: float = 0.4
    o_th: float = 4.0
    n_pairs: int = 2
    gamma: float = 0.99
    drift_streak: Optional[int] = None

    def __post_init__(self):
        if not (math.isfinite(self.d_th) and self.d_th > 0.0):
            raise ValueError(f"d_th must be positive, got {self.d_th}")
        if not (math.isfinite(self.o_th) and self.o_th > 0.0):
            raise ValueError(f"o_th must be positive, got {self.o_th}")
        if not (isinstance(self.n_pairs, int) and self.n_pairs >= 1):
            raise ValueError(f"n_pairs must be an integer >= 1, got {self.n_pairs}")
        if not (math.isfinite(self.gamma) and -0.5 <= self.gamma <= 1.0):
            raise ValueError(f"gamma must lie in [-0.5, 1], got {self.gamma}")
        if self.drift_streak is None:
            object.__setattr__(self, "drift_streak", self.n_pairs)
        elif not (isinstance(self.drift_streak, int) and self.drift_streak >= 1):
            raise ValueError(f"drift_streak must be an integer >= 1, got {self.drift_streak}")


@dataclass(frozen=True)
class FrameObservation:
    """One frame's sensor snapshot: APR prediction, VIO pose, optional ground truth."""

    frame_id: int
    timestamp: float
    apr: Pose
    vio: Pose
    gt: Optional[Pose] = None

    def __post_init__(self):
        if not math.isfinite(self.timestamp):
            raise ValueError(f"timestamp must be finite, got {self.timestamp}")


@dataclass(frozen=True)
class FusionOutput:
    """The engine's verdict for one frame.

    ``pose`` is None only for ALIGNMENT_PENDING (no transform has ever
    existed). ``similarity`` is present exactly on reliable predictions made
    during the optimization stage. ``stage`` is the stage that processed the
    frame; the frame that completes an alignment is therefore reported with
    stage ALIGNMENT and category RELIABLE_DIRECT.
    """

    frame_id: int
    category: Category
    stage: Stage
    pose: Optional[Pose]
    similarity: Optional[float] = None


# hook signature: (frame_id, transform, ref_apr, ref_vio)
AlignHook = Callable[[int, RigidTransform, Pose, Pose], None]


class FusionEngine:
    """Sequential state machine implementing the two-stage fusion loop."""

    def __init__(self, config: FusionConfig, align_hook: Optional[AlignHook] = None):
        self.config = config
        self.align_hook = align_hook
        self.stage = Stage.ALIGNMENT
        self.transform: Optional[RigidTransform] = None
        self.ref_apr: Optional[Pose] = None
        self.ref_vio: Optional[Pose] = None
        self.alignment_count = 0
        # frames where the zero-translation guard fired inside similarity()
        self.zero_norm_frames: list[int] = []
        self._candidates: list[FrameObservation] = []
        self._streak = 0
        self._prev: Optional[FrameObservation] = None
        self._last_frame_id: Optional[int] = None

    # ------------------------------------------------------------------

    def _pair_passes(self, prev: FrameObservation, cur: FrameObservation) -> bool:
        u_apr = odometry_between(prev.apr, cur.apr)
        u_vio = odometry_between(prev.vio, cur.vio)
        return rpe(u_apr, u_vio) <= self.config.d_th and roe(u_apr, u_vio) <= self.config.o_th

    def _score_similarity(self, obs: FrameObservation, v2w: Pose) -> float:
        if (
            math.sqrt(float(obs.apr.x @ obs.apr.x)) < NORM_EPS
            or math.sqrt(float(v2w.x @ v2w.x)) < NORM_EPS
        ):
            self.zero_norm_frames.append(obs.frame_id)
        return similarity(obs.apr, v2w)

    def _alignment_step(self, obs: FrameObservation) -> FusionOutput:
        if self._candidates and self._pair_passes(self._candidates[-1], obs):
            self._candidates.append(obs)
        else:
            # failing pair (or empty buffer): the run restarts at this frame
            self._candidates = [obs]

        if len(self._candidates) == self.config.n_pairs + 1:
            self.ref_apr = average_pose([c.apr for c in self._candidates])
            self.ref_vio = average_pose([c.vio for c in self._candidates])
            self.transform = compute_rigid_transform(self.ref_apr, self.ref_vio)
            self.alignment_count += 1
            if self.align_hook is not None:
                self.align_hook(obs.frame_id, self.transform, self.ref_apr, self.ref_vio)
            self._candidates = []
            self._streak = 0
            self.stage = Stage.POSE_OPTIMIZATION
            return FusionOutput(obs.frame_id, Category.RELIABLE_DIRECT, Stage.ALIGNMENT, obs.apr)

        if self.transform is not None:
            bridged = apply_transform(self.transform, obs.vio)
            return FusionOutput(obs.frame_id, Category.ALIGNMENT_BRIDGE, Stage.ALIGNMENT, bridged)
        return FusionOutput(obs.frame_id, Category.ALIGNMENT_PENDING, Stage.ALIGNMENT, None)

    def _optimization_step(self, obs: FrameObservation) -> FusionOutput:
        assert self.transform is not None and self._prev is not None
        if self._pair_passes(self._prev, obs):
            v2w = apply_transform(self.transform, obs.vio)
            score = self._score_similarity(obs, v2w)
            if score <= self.config.gamma:
                self._streak += 1
            else:
                self._streak = 0
            out = FusionOutput(
                obs.frame_id, Category.RELIABLE_DIRECT, Stage.POSE_OPTIMIZATION, obs.apr, score
            )
            if self._streak >= self.config.drift_streak:
                # VIO drift detected: loop back to alignment; the stale
                # transform keeps bridging until new reference poses exist
                self.stage = Stage.ALIGNMENT
                self._candidates = []
                self._streak = 0
            return out
        optimized = apply_transform(self.transform, obs.vio)
        return FusionOutput(
            obs.frame_id, Category.OPTIMIZED_FROM_VIO, Stage.POSE_OPTIMIZATION, optimized
        )

    # ------------------------------------------------------------------

    def step(self, obs: FrameObservation) -> FusionOutput:
        """Consume one observation and emit exactly one output."""
        if self._last_frame_id is not None and obs.frame_id <= self._last_frame_id:
            raise ValueError(
                f"frame_id must increase monotonically: got {obs.frame_id} "
                f"after {self._last_frame_id}"
            )
        self._last_frame_id = obs.frame_id
        if self.stage is Stage.ALIGNMENT:
            out = self._alignment_step(obs)
        else:
            out = self._optimization_step(obs)
        self._prev = obs
        return out

    def run(self, stream: Iterable[FrameObservation]) -> list[FusionOutput]:
        """Fold step() over an ordered stream; one output per observation."""
        outputs = []
        for obs in stream:
            try:
                outputs.append(self.step(obs))
            except ValueError as err:
                raise ValueError(f"frame {obs.frame_id}: {err}") from err
        return outputs


def run_fusion(
    config: FusionConfig,
    stream: Iterable[FrameObservation],
    align_hook: Optional[AlignHook] = None,
) -> list[FusionOutput]:
    """Run a fresh engine over a stream."""
    return FusionEngine(config, align_hook=align_hook).run(stream)
