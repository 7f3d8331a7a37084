"""Pose algebra: quaternion operations, relative-motion magnitudes, geometric
averaging, and rigid coordinate-frame transforms.

Conventions used throughout the package:

* quaternions are stored ``(w, x, y, z)`` and kept unit-norm; file formats
  that use ``(x, y, z, w)`` convert at the boundary,
* rotation angles are degrees unless a name says otherwise,
* all functions here are pure and the value types are immutable, so they are
  safe to share between threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

_DEG_PER_RAD = 180.0 / math.pi

# smallest norm we are willing to normalize; also the zero-translation guard
# used by similarity()
NORM_EPS = 1e-9


def _vec3(v, name: str) -> np.ndarray:
    a = np.asarray(v, dtype=float)
    if a.shape != (3,):
        raise ValueError(f"{name} must be a 3-vector, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} has non-finite components: {a}")
    a = a.copy()
    a.flags.writeable = False
    return a


def _unit_quat(q, name: str) -> np.ndarray:
    a = np.asarray(q, dtype=float)
    if a.shape != (4,):
        raise ValueError(f"{name} must be a (w, x, y, z) quaternion, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} has non-finite components: {a}")
    n = math.sqrt(float(a @ a))
    if n < NORM_EPS:
        raise ValueError(f"{name} norm {n:.3e} is too small to normalize")
    a = a / n
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class Pose:
    """A 6-DoF pose: translation ``x`` in meters plus unit quaternion ``q``.

    The quaternion is renormalized on construction and rejected if degenerate,
    so every held Pose satisfies ``abs(norm(q) - 1) <= 1e-9``.
    """

    x: np.ndarray
    q: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", _vec3(self.x, "translation"))
        object.__setattr__(self, "q", _unit_quat(self.q, "quaternion"))

    @staticmethod
    def identity() -> "Pose":
        return Pose(np.zeros(3), np.array([1.0, 0.0, 0.0, 0.0]))


@dataclass(frozen=True)
class Odometry:
    """Scalar inter-frame motion: translation magnitude (m), rotation angle (deg)."""

    d_trans: float
    d_rot: float

    def __post_init__(self):
        if not (math.isfinite(self.d_trans) and self.d_trans >= 0.0):
            raise ValueError(f"d_trans must be finite and >= 0, got {self.d_trans}")
        if not (math.isfinite(self.d_rot) and 0.0 <= self.d_rot <= 180.0):
            raise ValueError(f"d_rot must be within [0, 180] degrees, got {self.d_rot}")


# ---------------------------------------------------------------------------
# quaternion primitives


def quat_multiply(a, b) -> np.ndarray:
    """Hamilton product a * b for (w, x, y, z) quaternions."""
    w1, x1, y1, z1 = a
    w2, x2, y2, z2 = b
    return np.array(
        [
            w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
            w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
            w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
            w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
        ]
    )


def quat_conjugate(q) -> np.ndarray:
    """Conjugate; the inverse for unit quaternions."""
    return np.array([q[0], -q[1], -q[2], -q[3]])


def quat_to_matrix(q) -> np.ndarray:
    """3x3 rotation matrix of a unit (w, x, y, z) quaternion."""
    w, x, y, z = q
    xx, yy, zz = x * x, y * y, z * z
    wx, wy, wz = w * x, w * y, w * z
    xy, xz, yz = x * y, x * z, y * z
    return np.array(
        [
            [1.0 - 2.0 * (yy + zz), 2.0 * (xy - wz), 2.0 * (xz + wy)],
            [2.0 * (xy + wz), 1.0 - 2.0 * (xx + zz), 2.0 * (yz - wx)],
            [2.0 * (xz - wy), 2.0 * (yz + wx), 1.0 - 2.0 * (xx + yy)],
        ]
    )


def quat_from_axis_angle(axis, angle_deg: float) -> np.ndarray:
    """Unit quaternion for a rotation of angle_deg about axis."""
    ax = np.asarray(axis, dtype=float)
    n = math.sqrt(float(ax @ ax))
    if n < NORM_EPS:
        raise ValueError("rotation axis has near-zero norm")
    half = 0.5 * math.radians(angle_deg)
    s = math.sin(half) / n
    return np.array([math.cos(half), ax[0] * s, ax[1] * s, ax[2] * s])


def quat_from_rotvec_deg(v) -> np.ndarray:
    """Unit quaternion for a rotation-vector whose norm is the angle in degrees."""
    v = np.asarray(v, dtype=float)
    angle = math.sqrt(float(v @ v))
    if angle < 1e-15:
        return np.array([1.0, 0.0, 0.0, 0.0])
    return quat_from_axis_angle(v, angle)


def quat_angle_precise_deg(a, b) -> float:
    """Rotation angle between two unit quaternions, accurate near zero.

    The arccos form used by relative_rotation_deg loses ~1e-6 deg of precision
    near zero angle (arccos is ill-conditioned at 1); this chord-based form is
    exact there and is what tests use for tight round-trip tolerances.
    """
    d_minus = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
    d_plus = np.asarray(a, dtype=float) + np.asarray(b, dtype=float)
    chord = min(math.sqrt(float(d_minus @ d_minus)), math.sqrt(float(d_plus @ d_plus)))
    return 4.0 * math.asin(min(0.5 * chord, 1.0)) * _DEG_PER_RAD


# ---------------------------------------------------------------------------
# relative motion


def relative_translation(a: Pose, b: Pose) -> float:
    """Euclidean distance between the two translations, meters."""
    dx = a.x[0] - b.x[0]
    dy = a.x[1] - b.x[1]
    dz = a.x[2] - b.x[2]
    return math.sqrt(dx * dx + dy * dy + dz * dz)


def relative_rotation_deg(a: Pose, b: Pose) -> float:
    """Rotation angle between the two orientations in [0, 180] degrees.

    2*arccos(|<q_a, q_b>|); the absolute value handles the quaternion double
    cover and the argument is clamped to [0, 1] against rounding excursions.
    """
    d = abs(float(a.q @ b.q))
    return 2.0 * math.acos(min(d, 1.0)) * _DEG_PER_RAD


def odometry_between(a: Pose, b: Pose) -> Odometry:
    """Scalar odometry of the motion from pose a to pose b."""
    return Odometry(relative_translation(a, b), relative_rotation_deg(a, b))


def rpe(u1: Odometry, u2: Odometry) -> float:
    """Relative position error: |d_trans difference| of two odometries, meters."""
    return abs(u1.d_trans - u2.d_trans)


def roe(u1: Odometry, u2: Odometry) -> float:
    """Relative orientation error: |d_rot difference| of two odometries, degrees."""
    return abs(u1.d_rot - u2.d_rot)


# ---------------------------------------------------------------------------
# geometric averaging


def weiszfeld_median(points, tol: float = 1e-9, max_iter: int = 200) -> np.ndarray:
    """Geometric median of 3-D points by Weiszfeld iteration.

    Starts at the centroid and iterates the reweighted mean until the step
    shrinks below tol. An iterate landing within tol of an input point returns
    that point (the standard singularity guard: the iteration map is undefined
    at data points).
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 3 or pts.shape[0] == 0:
        raise ValueError(f"need a non-empty list of 3-vectors, got shape {pts.shape}")
    if tol <= 0.0:
        raise ValueError(f"tol must be positive, got {tol}")
    if pts.shape[0] == 1:
        return pts[0].copy()
    y = pts.mean(axis=0)
    for _ in range(max_iter):
        diff = pts - y
        dist = np.sqrt((diff * diff).sum(axis=1))
        hits = np.nonzero(dist < tol)[0]
        if hits.size:
            return pts[hits[0]].copy()
        w = 1.0 / dist
        y_new = (pts * w[:, None]).sum(axis=0) / w.sum()
        if float(np.linalg.norm(y_new - y)) < tol:
            return y_new
        y = y_new
    return y


def quaternion_mean(quats) -> np.ndarray:
    """Chordal mean of unit quaternions.

    Each quaternion is sign-aligned to the first (negated when the dot product
    is negative), the components are averaged arithmetically, and the result
    is renormalized. Adequate for mutually close rotations, which is the only
    regime the fusion state machine feeds it.
    """
    qs = [np.asarray(q, dtype=float) for q in quats]
    if not qs:
        raise ValueError("cannot average an empty set of quaternions")
    ref = qs[0]
    acc = np.zeros(4)
    for q in qs:
        acc += q if float(q @ ref) >= 0.0 else -q
    acc /= len(qs)
    n = math.sqrt(float(acc @ acc))
    if n < NORM_EPS:
        raise ValueError("quaternion mean is degenerate (antipodal inputs)")
    return acc / n


def average_pose(poses, tol: float = 1e-9, max_iter: int = 200) -> Pose:
    """Reference pose of a set: geometric-median translation, mean rotation."""
    xs = [p.x for p in poses]
    qs = [p.q for p in poses]
    return Pose(weiszfeld_median(xs, tol=tol, max_iter=max_iter), quaternion_mean(qs))


# ---------------------------------------------------------------------------
# rigid transforms


@dataclass(frozen=True, eq=False)
class RigidTransform:
    """Rigid map between coordinate frames: rotation q_rel (matrix ``r``) plus
    translation ``t`` in meters. Applied to a pose it computes
    ``x -> r @ x + t`` and ``q -> q * conj(q_rel)``.
    """

    q_rel: np.ndarray
    t: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "q_rel", _unit_quat(self.q_rel, "q_rel"))
        object.__setattr__(self, "t", _vec3(self.t, "translation"))

    @cached_property
    def r(self) -> np.ndarray:
        m = quat_to_matrix(self.q_rel)
        m.flags.writeable = False
        return m

    def inverse(self) -> "RigidTransform":
        return RigidTransform(quat_conjugate(self.q_rel), -(self.r.T @ self.t))

    @staticmethod
    def identity() -> "RigidTransform":
        return RigidTransform(np.array([1.0, 0.0, 0.0, 0.0]), np.zeros(3))


def compute_rigid_transform(ref_apr: Pose, ref_vio: Pose) -> RigidTransform:
    """Rigid transform carrying the VIO frame onto the world frame.

    Built so that apply_transform(result, ref_vio) reproduces ref_apr:
    q_rel = conj(q_apr) * q_vio and t = x_apr - R(q_rel) @ x_vio.
    """
    q_rel = quat_multiply(quat_conjugate(ref_apr.q), ref_vio.q)
    q_rel /= math.sqrt(float(q_rel @ q_rel))
    return RigidTransform(q_rel, ref_apr.x - quat_to_matrix(q_rel) @ ref_vio.x)


def apply_transform(t: RigidTransform, p: Pose) -> Pose:
    """Re-express a VIO-frame pose in world coordinates."""
    return Pose(t.r @ p.x + t.t, quat_multiply(p.q, quat_conjugate(t.q_rel)))


# ---------------------------------------------------------------------------
# similarity


def similarity(p_hat: Pose, p_v2w: Pose) -> float:
    """Directional agreement of two poses, in [-0.5, 1].

    Mean of the translation cosine similarity and the absolute quaternion
    cosine similarity. Translations below NORM_EPS are treated as directionally
    consistent (cosine 1.0); callers that care can test the norms themselves.
    """
    nh = math.sqrt(float(p_hat.x @ p_hat.x))
    nv = math.sqrt(float(p_v2w.x @ p_v2w.x))
    if nh < NORM_EPS or nv < NORM_EPS:
        cos_t = 1.0
    else:
        cos_t = max(-1.0, min(1.0, float(p_hat.x @ p_v2w.x) / (nh * nv)))
    cos_q = min(1.0, abs(float(p_hat.q @ p_v2w.q)))
    return 0.5 * (cos_t + cos_q)
