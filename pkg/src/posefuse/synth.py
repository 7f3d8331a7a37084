"""Synthetic ground-truth trajectories and sensor-corruption models.

The absolute source is simulated as locally noisy but drift-free: every frame
is perturbed independently, occasionally by a large outlier. The relative
source is locally smooth but drifts: ground-truth inter-frame increments are
recomposed with small increment noise plus a random-walk bias, inside an
arbitrarily offset coordinate frame.

All randomness flows through numpy's default_rng (the PCG64 generator), so a
(spec, model, seed) triple reproduces streams bit-exactly on any platform.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.interpolate import CubicSpline

from .fusion import FrameObservation
from .geometry import (
    Pose,
    RigidTransform,
    apply_transform,
    quat_conjugate,
    quat_from_axis_angle,
    quat_from_rotvec_deg,
    quat_multiply,
)

TRAJECTORY_KINDS = ("waypoints", "arc", "line")


@dataclass(frozen=True)
class AprNoiseModel:
    """Per-frame absolute-pose corruption: isotropic Gaussian noise with a
    heavy outlier mixture, no temporal correlation.

    Defaults put the raw mean translation error near 1.56 m (0.8 * 0.2 m
    Gaussian noise norm + 0.2 * 6.5 m outliers), the scale of published
    outdoor APR results, while keeping inter-frame increments of good frames
    inside the 0.4 m / 4 deg reliability window."""

    trans_sigma: float = 0.2
    rot_sigma: float = 1.5
    outlier_prob: float = 0.22
    outlier_trans_range: tuple = (3.0, 10.0)
    outlier_rot_range: tuple = (10.0, 40.0)

    def __post_init__(self):
        if self.trans_sigma < 0 or self.rot_sigma < 0:
            raise ValueError("noise sigmas must be >= 0")
        if not 0.0 <= self.outlier_prob <= 1.0:
            raise ValueError(f"outlier_prob must lie in [0, 1], got {self.outlier_prob}")
        for name, rng_ in (("outlier_trans_range", self.outlier_trans_range),
                           ("outlier_rot_range", self.outlier_rot_range)):
            if len(rng_) != 2 or rng_[0] > rng_[1] or rng_[0] < 0:
                raise ValueError(f"{name} must be an ordered nonnegative pair, got {rng_}")


@dataclass(frozen=True)
class VioDriftModel:
    """Relative-pose corruption: per-increment white noise plus a random-walk
    bias, expressed in a coordinate frame offset by initial_offset.

    The bias walk integrates twice into the absolute offset, so the default
    0.001 m / 0.002 deg steps drift past 1 m within a few hundred frames while
    per-frame odometry error stays far below the reliability thresholds."""

    trans_noise_sigma: float = 0.005
    rot_noise_sigma: float = 0.02
    trans_bias_walk_sigma: float = 0.001
    rot_bias_walk_sigma: float = 0.002
    initial_offset: RigidTransform = field(default_factory=RigidTransform.identity)

    def __post_init__(self):
        for name in ("trans_noise_sigma", "rot_noise_sigma",
                     "trans_bias_walk_sigma", "rot_bias_walk_sigma"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")


@dataclass(frozen=True)
class TrajectorySpec:
    """Ground-truth path recipe. extent sets the spatial scale in meters: the
    waypoint box half-width, the arc diameter, and the line speed (extent/10
    per frame). Per-frame motion never exceeds extent/10."""

    kind: str = "waypoints"
    n_frames: int = 300
    interval: float = 1.0
    extent: float = 50.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in TRAJECTORY_KINDS:
            raise ValueError(f"kind must be one of {TRAJECTORY_KINDS}, got {self.kind!r}")
        if self.n_frames < 1:
            raise ValueError(f"n_frames must be >= 1, got {self.n_frames}")
        if self.extent <= 0:
            raise ValueError(f"extent must be positive, got {self.extent}")
        if self.interval <= 0:
            raise ValueError(f"interval must be positive, got {self.interval}")


DEFAULT_APR_NOISE = AprNoiseModel()
DEFAULT_VIO_DRIFT = VioDriftModel()


def _unit_vector(rng: np.random.Generator) -> np.ndarray:
    while True:
        v = rng.normal(0.0, 1.0, 3)
        n = math.sqrt(float(v @ v))
        if n > 1e-12:
            return v / n


def _heading_quat(velocity: np.ndarray, fallback: np.ndarray) -> np.ndarray:
    speed = math.sqrt(float(velocity @ velocity))
    if speed < 1e-12:
        return fallback
    yaw = math.degrees(math.atan2(velocity[1], velocity[0]))
    pitch = -math.degrees(math.asin(max(-1.0, min(1.0, velocity[2] / speed))))
    return quat_multiply(
        quat_from_axis_angle((0.0, 0.0, 1.0), yaw),
        quat_from_axis_angle((0.0, 1.0, 0.0), pitch),
    )


def generate_gt(spec: TrajectorySpec) -> list[Pose]:
    """Deterministic ground-truth poses: smooth positions with heading-aligned
    orientations (camera +x pointing along travel)."""
    n = spec.n_frames
    if spec.kind == "line":
        step = spec.extent / 10.0
        return [
            Pose(np.array([i * step, 0.0, 0.0]), np.array([1.0, 0.0, 0.0, 0.0]))
            for i in range(n)
        ]

    if spec.kind == "arc":
        radius = spec.extent / 2.0
        # chord per frame equals extent/10 exactly
        theta = 2.0 * math.asin(0.1)
        poses = []
        for i in range(n):
            a = i * theta
            x = np.array([radius * math.cos(a), radius * math.sin(a), 0.0])
            q = quat_from_axis_angle((0.0, 0.0, 1.0), math.degrees(a + 0.5 * math.pi))
            poses.append(Pose(x, q))
        return poses

    # waypoints: natural cubic spline through random box points
    rng = np.random.default_rng(spec.seed)
    n_way = max(4, n // 15)
    times = np.linspace(0.0, float(max(n - 1, 1)), n_way)
    half = spec.extent / 2.0
    waypoints = np.column_stack(
        [
            rng.uniform(-half, half, n_way),
            rng.uniform(-half, half, n_way),
            rng.uniform(0.0, spec.extent / 20.0, n_way),
        ]
    )
    splines = [CubicSpline(times, waypoints[:, ax], bc_type="natural") for ax in range(3)]
    t_eval = np.arange(n, dtype=float)
    pos = np.column_stack([s(t_eval) for s in splines])
    vel = np.column_stack([s(t_eval, 1) for s in splines])
    if n > 1:
        steps = np.linalg.norm(np.diff(pos, axis=0), axis=1)
        cap = spec.extent / 10.0
        max_step = float(steps.max())
        if max_step > cap:
            # uniform shrink about the path mean keeps smoothness and headings
            center = pos.mean(axis=0)
            pos = center + (pos - center) * (0.98 * cap / max_step)

    poses = []
    last_q = np.array([1.0, 0.0, 0.0, 0.0])
    for i in range(n):
        q = _heading_quat(vel[i], last_q)
        last_q = q
        poses.append(Pose(pos[i], q))
    return poses


def corrupt_apr(gt: Sequence[Pose], model: AprNoiseModel, seed: int) -> list[Pose]:
    """Independently perturb every frame; outliers replace the perturbation
    with a draw from the outlier ranges."""
    rng = np.random.default_rng(seed)
    out = []
    for p in gt:
        if rng.random() < model.outlier_prob:
            dx = rng.uniform(*model.outlier_trans_range) * _unit_vector(rng)
            angle = rng.uniform(*model.outlier_rot_range)
        else:
            dx = rng.normal(0.0, model.trans_sigma, 3) if model.trans_sigma > 0 else np.zeros(3)
            angle = rng.normal(0.0, model.rot_sigma) if model.rot_sigma > 0 else 0.0
        q_noise = quat_from_axis_angle(_unit_vector(rng), angle)
        out.append(Pose(p.x + dx, quat_multiply(q_noise, p.q)))
    return out


def corrupt_vio(gt: Sequence[Pose], model: VioDriftModel, seed: int) -> list[Pose]:
    """Recompose ground-truth increments with white noise plus a random-walk
    bias; relative odometry stays near truth while absolute error accumulates."""
    rng = np.random.default_rng(seed)
    ideal = [apply_transform(model.initial_offset, p) for p in gt]
    if not ideal:
        return []
    out = [ideal[0]]
    cur_x = ideal[0].x
    cur_q = ideal[0].q
    bias_t = np.zeros(3)
    bias_r = np.zeros(3)
    for i in range(1, len(ideal)):
        bias_t = bias_t + rng.normal(0.0, model.trans_bias_walk_sigma, 3)
        bias_r = bias_r + rng.normal(0.0, model.rot_bias_walk_sigma, 3)
        noise_t = rng.normal(0.0, model.trans_noise_sigma, 3)
        noise_r = rng.normal(0.0, model.rot_noise_sigma, 3)
        dx_ideal = ideal[i].x - ideal[i - 1].x
        r_ideal = quat_multiply(quat_conjugate(ideal[i - 1].q), ideal[i].q)
        cur_x = cur_x + dx_ideal + noise_t + bias_t
        cur_q = quat_multiply(cur_q, quat_multiply(r_ideal, quat_from_rotvec_deg(noise_r + bias_r)))
        p = Pose(cur_x, cur_q)
        out.append(p)
        cur_x = p.x
        cur_q = p.q
    return out


def make_stream(
    gt: Sequence[Pose],
    apr: Sequence[Pose],
    vio: Sequence[Pose],
    interval: float = 1.0,
) -> list[FrameObservation]:
    """Zip the three pose tracks into an observation stream."""
    if not (len(gt) == len(apr) == len(vio)):
        raise ValueError(f"length mismatch: gt={len(gt)} apr={len(apr)} vio={len(vio)}")
    return [
        FrameObservation(i, i * interval, apr[i], vio[i], gt[i])
        for i in range(len(gt))
    ]


def benchmark_stream(
    seed: int,
    n_frames: int = 300,
    kind: str = "waypoints",
    extent: float = 20.0,
    interval: float = 1.0,
    apr_model: AprNoiseModel = DEFAULT_APR_NOISE,
    vio_model: VioDriftModel = DEFAULT_VIO_DRIFT,
) -> list[FrameObservation]:
    """The standard benchmark stream: one seed drives trajectory and both
    corruption passes (sub-seeds keep the three draws independent)."""
    spec = TrajectorySpec(kind=kind, n_frames=n_frames, interval=interval,
                          extent=extent, seed=seed)
    gt = generate_gt(spec)
    apr = corrupt_apr(gt, apr_model, seed=seed + 1_000_003)
    vio = corrupt_vio(gt, vio_model, seed=seed + 2_000_003)
    return make_stream(gt, apr, vio, interval=interval)
