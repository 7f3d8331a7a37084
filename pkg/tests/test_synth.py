import math

import numpy as np
import pytest

from posefuse.geometry import (
    Pose,
    RigidTransform,
    quat_angle_precise_deg,
    quat_from_axis_angle,
    relative_rotation_deg,
    relative_translation,
)
from posefuse.synth import (
    AprNoiseModel,
    TrajectorySpec,
    VioDriftModel,
    corrupt_apr,
    corrupt_vio,
    generate_gt,
    make_stream,
)

ZERO_APR = AprNoiseModel(trans_sigma=0.0, rot_sigma=0.0, outlier_prob=0.0)
ZERO_VIO = VioDriftModel(trans_noise_sigma=0.0, rot_noise_sigma=0.0,
                         trans_bias_walk_sigma=0.0, rot_bias_walk_sigma=0.0)


# ---------------------------------------------------------------------------
# ground-truth generation


def test_line_positions_and_headings():
    # extent 10 -> 1 m per frame along +x
    gt = generate_gt(TrajectorySpec(kind="line", n_frames=3, extent=10.0, seed=0))
    for i, pose in enumerate(gt):
        assert np.allclose(pose.x, [float(i), 0.0, 0.0])
        assert np.array_equal(pose.q, [1.0, 0.0, 0.0, 0.0])


def test_arc_radius_constant():
    spec = TrajectorySpec(kind="arc", n_frames=50, extent=14.0, seed=1)
    gt = generate_gt(spec)
    for pose in gt:
        assert abs(np.linalg.norm(pose.x) - 7.0) <= 1e-9


def test_generator_deterministic():
    spec = TrajectorySpec(kind="waypoints", n_frames=80, extent=30.0, seed=123)
    a = generate_gt(spec)
    b = generate_gt(spec)
    for pa, pb in zip(a, b):
        assert np.array_equal(pa.x, pb.x)
        assert np.array_equal(pa.q, pb.q)


def test_step_bound_for_all_kinds():
    for kind in ("waypoints", "arc", "line"):
        spec = TrajectorySpec(kind=kind, n_frames=120, extent=24.0, seed=5)
        gt = generate_gt(spec)
        steps = [relative_translation(gt[i], gt[i - 1]) for i in range(1, len(gt))]
        assert max(steps) <= spec.extent / 10.0 * (1.0 + 1e-12)


def test_waypoints_smooth_headings():
    gt = generate_gt(TrajectorySpec(kind="waypoints", n_frames=150, extent=20.0, seed=9))
    turns = [relative_rotation_deg(gt[i], gt[i - 1]) for i in range(1, len(gt))]
    assert np.median(turns) < 15.0  # heading follows a smooth path


def test_spec_validation():
    with pytest.raises(ValueError):
        TrajectorySpec(kind="zigzag")
    with pytest.raises(ValueError):
        TrajectorySpec(n_frames=0)
    with pytest.raises(ValueError):
        TrajectorySpec(extent=0.0)


# ---------------------------------------------------------------------------
# APR corruption


def test_zero_apr_model_is_identity():
    gt = generate_gt(TrajectorySpec(kind="waypoints", n_frames=40, extent=10.0, seed=2))
    apr = corrupt_apr(gt, ZERO_APR, seed=3)
    for g, a in zip(gt, apr):
        assert relative_translation(g, a) == 0.0
        assert quat_angle_precise_deg(g.q, a.q) <= 1e-12


def test_apr_gaussian_mean_error_matches_chi_distribution():
    model = AprNoiseModel(trans_sigma=0.8, rot_sigma=0.0, outlier_prob=0.0)
    gt = [Pose(np.zeros(3), [1, 0, 0, 0])] * 10_000
    apr = corrupt_apr(gt, model, seed=11)
    apes = [relative_translation(g, a) for g, a in zip(gt, apr)]
    expected = 0.8 * math.sqrt(8.0 / math.pi)  # mean norm of isotropic 3-D Gaussian
    assert 0.75 * expected <= float(np.mean(apes)) <= 1.25 * expected


def test_apr_degenerate_outlier_range():
    model = AprNoiseModel(trans_sigma=0.0, rot_sigma=0.0, outlier_prob=1.0,
                          outlier_trans_range=(5.0, 5.0), outlier_rot_range=(15.0, 15.0))
    gt = [Pose(np.zeros(3), [1, 0, 0, 0])] * 200
    apr = corrupt_apr(gt, model, seed=4)
    for g, a in zip(gt, apr):
        assert abs(relative_translation(g, a) - 5.0) <= 1e-9
        assert abs(relative_rotation_deg(g, a) - 15.0) <= 1e-6


def test_apr_outlier_fraction_within_3_se():
    model = AprNoiseModel()  # defaults: outlier_prob 0.22, ranges from 3 m
    n = 10_000
    gt = [Pose(np.zeros(3), [1, 0, 0, 0])] * n
    apr = corrupt_apr(gt, model, seed=13)
    # outlier translations start at 3 m; sigma=0.2 Gaussian essentially never reaches it
    frac = sum(1 for g, a in zip(gt, apr) if relative_translation(g, a) >= 3.0) / n
    se = math.sqrt(model.outlier_prob * (1 - model.outlier_prob) / n)
    assert abs(frac - model.outlier_prob) <= 3 * se


def test_apr_model_validation():
    with pytest.raises(ValueError):
        AprNoiseModel(outlier_prob=1.5)
    with pytest.raises(ValueError):
        AprNoiseModel(trans_sigma=-0.1)
    with pytest.raises(ValueError):
        AprNoiseModel(outlier_trans_range=(5.0, 3.0))


# ---------------------------------------------------------------------------
# VIO corruption


def test_zero_vio_model_identity_offset_reproduces_gt():
    gt = generate_gt(TrajectorySpec(kind="waypoints", n_frames=50, extent=12.0, seed=6))
    vio = corrupt_vio(gt, ZERO_VIO, seed=7)
    for g, v in zip(gt, vio):
        assert relative_translation(g, v) <= 1e-12
        assert quat_angle_precise_deg(g.q, v.q) <= 1e-10


def test_vio_initial_offset_preserves_relative_odometry():
    gt = generate_gt(TrajectorySpec(kind="waypoints", n_frames=60, extent=15.0, seed=8))
    offset = RigidTransform(quat_from_axis_angle((0.3, -0.2, 0.9), 71.0),
                            np.array([4.0, -2.0, 1.5]))
    model = VioDriftModel(trans_noise_sigma=0.0, rot_noise_sigma=0.0,
                          trans_bias_walk_sigma=0.0, rot_bias_walk_sigma=0.0,
                          initial_offset=offset)
    vio = corrupt_vio(gt, model, seed=9)
    assert relative_translation(gt[0], vio[0]) > 1.0  # absolute poses differ
    for i in range(1, len(gt)):
        dt_gt = relative_translation(gt[i], gt[i - 1])
        dt_vio = relative_translation(vio[i], vio[i - 1])
        dr_gt = relative_rotation_deg(gt[i], gt[i - 1])
        dr_vio = relative_rotation_deg(vio[i], vio[i - 1])
        assert abs(dt_gt - dt_vio) <= 1e-9
        assert abs(dr_gt - dr_vio) <= 1e-6


def test_vio_bias_walk_accumulation_matches_oracle():
    # stationary path isolates the bias: per-frame odometry error equals the
    # current bias magnitude and the absolute offset equals the accumulated bias
    n = 200
    sigma = 0.01
    gt = [Pose(np.zeros(3), [1, 0, 0, 0])] * n
    model = VioDriftModel(trans_noise_sigma=0.0, rot_noise_sigma=0.0,
                          trans_bias_walk_sigma=sigma, rot_bias_walk_sigma=0.0)
    vio = corrupt_vio(gt, model, seed=10)

    rng = np.random.default_rng(10)  # replay the same draw sequence
    bias = np.zeros(3)
    acc = np.zeros(3)
    for i in range(1, n):
        bias = bias + rng.normal(0.0, sigma, 3)
        rng.normal(0.0, sigma, 3)  # rot bias draw
        rng.normal(0.0, 0.0, 3)    # trans white noise draw
        rng.normal(0.0, 0.0, 3)    # rot white noise draw
        acc = acc + bias
        step = relative_translation(vio[i], vio[i - 1])
        assert abs(step - float(np.linalg.norm(bias))) <= 1e-9
        assert abs(relative_translation(vio[i], gt[i]) - float(np.linalg.norm(acc))) <= 1e-9


def test_vio_drift_regime_default_model():
    # locally accurate, globally drifting: the premise of the whole framework
    spec = TrajectorySpec(kind="waypoints", n_frames=300, extent=20.0, seed=1)
    gt = generate_gt(spec)
    vio = corrupt_vio(gt, VioDriftModel(), seed=2_000_004)
    rpes = []
    for i in range(1, len(gt)):
        rpes.append(abs(relative_translation(vio[i], vio[i - 1])
                        - relative_translation(gt[i], gt[i - 1])))
    assert float(np.mean(rpes)) < 0.4 / 4.0
    assert relative_translation(vio[-1], gt[-1]) > 1.0


def test_vio_model_validation():
    with pytest.raises(ValueError):
        VioDriftModel(trans_noise_sigma=-1.0)


# ---------------------------------------------------------------------------
# stream assembly


def test_make_stream_zip():
    gt = generate_gt(TrajectorySpec(kind="line", n_frames=4, extent=10.0, seed=0))
    stream = make_stream(gt, gt, gt, interval=0.5)
    assert [o.frame_id for o in stream] == [0, 1, 2, 3]
    assert [o.timestamp for o in stream] == [0.0, 0.5, 1.0, 1.5]
    assert stream[2].gt is gt[2]


def test_make_stream_empty_and_mismatch():
    assert make_stream([], [], []) == []
    p = [Pose(np.zeros(3), [1, 0, 0, 0])]
    with pytest.raises(ValueError, match="length mismatch"):
        make_stream(p, p, [])


def test_streams_bit_identical_across_runs():
    a = make_stream(
        generate_gt(TrajectorySpec(kind="waypoints", n_frames=50, extent=20.0, seed=3)),
        corrupt_apr(generate_gt(TrajectorySpec(kind="waypoints", n_frames=50, extent=20.0, seed=3)),
                    AprNoiseModel(), seed=4),
        corrupt_vio(generate_gt(TrajectorySpec(kind="waypoints", n_frames=50, extent=20.0, seed=3)),
                    VioDriftModel(), seed=5),
    )
    b = make_stream(
        generate_gt(TrajectorySpec(kind="waypoints", n_frames=50, extent=20.0, seed=3)),
        corrupt_apr(generate_gt(TrajectorySpec(kind="waypoints", n_frames=50, extent=20.0, seed=3)),
                    AprNoiseModel(), seed=4),
        corrupt_vio(generate_gt(TrajectorySpec(kind="waypoints", n_frames=50, extent=20.0, seed=3)),
                    VioDriftModel(), seed=5),
    )
    for oa, ob in zip(a, b):
        assert np.array_equal(oa.apr.x, ob.apr.x)
        assert np.array_equal(oa.apr.q, ob.apr.q)
        assert np.array_equal(oa.vio.x, ob.vio.x)
        assert np.array_equal(oa.vio.q, ob.vio.q)
