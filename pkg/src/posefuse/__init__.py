"""posefuse: absolute-pose predictions fused with visual-inertial odometry.

A library and CLI that filter unreliable absolute-pose predictions by their
consistency with VIO odometry, replace them through a rigid VIO-to-world
alignment, detect VIO drift with a pose-similarity score, and benchmark the
whole loop on synthetic streams.
"""

from .fusion import (
    Category,
    FrameObservation,
    FusionConfig,
    FusionEngine,
    FusionOutput,
    Stage,
    run_fusion,
)
from .geometry import (
    Odometry,
    Pose,
    RigidTransform,
    apply_transform,
    average_pose,
    compute_rigid_transform,
    odometry_between,
    quaternion_mean,
    relative_rotation_deg,
    relative_translation,
    roe,
    rpe,
    similarity,
    weiszfeld_median,
)
from .metrics import (
    Bucket,
    ErrorStats,
    EvaluationReport,
    FrameError,
    aggregate,
    apr_frame_errors,
    bucket,
    frame_errors,
)
from .synth import (
    DEFAULT_APR_NOISE,
    DEFAULT_VIO_DRIFT,
    AprNoiseModel,
    TrajectorySpec,
    VioDriftModel,
    benchmark_stream,
    corrupt_apr,
    corrupt_vio,
    generate_gt,
    make_stream,
)

__version__ = "0.1.0"

__all__ = [
    "AprNoiseModel",
    "Bucket",
    "Category",
    "DEFAULT_APR_NOISE",
    "DEFAULT_VIO_DRIFT",
    "ErrorStats",
    "EvaluationReport",
    "FrameError",
    "FrameObservation",
    "FusionConfig",
    "FusionEngine",
    "FusionOutput",
    "Odometry",
    "Pose",
    "RigidTransform",
    "Stage",
    "TrajectorySpec",
    "VioDriftModel",
    "aggregate",
    "apply_transform",
    "apr_frame_errors",
    "average_pose",
    "bucket",
    "benchmark_stream",
    "compute_rigid_transform",
    "corrupt_apr",
    "corrupt_vio",
    "frame_errors",
    "generate_gt",
    "make_stream",
    "odometry_between",
    "quaternion_mean",
    "relative_rotation_deg",
    "relative_translation",
    "roe",
    "rpe",
    "run_fusion",
    "similarity",
    "weiszfeld_median",
]
