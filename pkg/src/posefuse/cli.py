"""Pipeline driver: simulate observation streams, fuse them, evaluate against
ground truth, and benchmark improvement ratios over many seeds.

Exit codes are a stable contract: 0 success, 1 usage error, 2 data error.
Every subcommand prints a ``config:`` echo line that re-creates the run.
"""

from __future__ import annotations

import argparse
import os
import shlex
import sys
from typing import Optional, Sequence

from . import __version__
from .fusion import Category, FrameObservation, FusionConfig, FusionEngine, FusionOutput
from .io import (
    FormatError,
    read_observations,
    write_observations,
    write_report,
)
from .metrics import (
    EvaluationReport,
    aggregate,
    apr_frame_errors,
    frame_errors,
)
from .synth import (
    AprNoiseModel,
    TrajectorySpec,
    VioDriftModel,
    corrupt_apr,
    corrupt_vio,
    generate_gt,
    make_stream,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2

SEED_ENV_VAR = "POSEFUSE_SEED"

# benchmark path calibration: origin-centered waypoint box keeps the absolute
# positions at a scale where the drift-similarity score stays responsive
BENCH_KIND = "waypoints"
BENCH_EXTENT = 20.0
BENCH_FRAMES = 300


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _fmt(value: float) -> str:
    return repr(float(value))


# ---------------------------------------------------------------------------
# argument wiring


def _add_fusion_args(sp):
    g = sp.add_argument_group("fusion")
    g.add_argument("--d-th", type=float, default=0.4, help="odometry distance threshold, m")
    g.add_argument("--o-th", type=float, default=4.0, help="odometry orientation threshold, deg")
    g.add_argument("--n-pairs", type=int, default=2, help="consecutive passing pairs to align")
    g.add_argument("--gamma", type=float, default=0.99, help="similarity floor for drift detection")
    g.add_argument("--drift-streak", type=int, default=None,
                   help="low-similarity RPs that trigger realignment (default: n-pairs)")


def _add_sim_args(sp, kind_default: str, extent_default: float, frames_default: int):
    g = sp.add_argument_group("simulation")
    g.add_argument("--frames", type=int, default=frames_default, help="stream length")
    g.add_argument("--seed", type=int, default=None,
                   help=f"RNG seed (default: ${SEED_ENV_VAR} or 0)")
    g.add_argument("--kind", choices=("waypoints", "arc", "line"), default=kind_default)
    g.add_argument("--extent", type=float, default=extent_default, help="spatial extent, m")
    g.add_argument("--interval", type=float, default=1.0, help="frame interval, s")
    g.add_argument("--apr-trans-sigma", type=float, default=0.2)
    g.add_argument("--apr-rot-sigma", type=float, default=1.5)
    g.add_argument("--apr-outlier-prob", type=float, default=0.22)
    g.add_argument("--apr-outlier-trans-range", type=float, nargs=2, default=(3.0, 10.0),
                   metavar=("LO", "HI"))
    g.add_argument("--apr-outlier-rot-range", type=float, nargs=2, default=(10.0, 40.0),
                   metavar=("LO", "HI"))
    g.add_argument("--vio-trans-noise", type=float, default=0.005)
    g.add_argument("--vio-rot-noise", type=float, default=0.02)
    g.add_argument("--vio-trans-bias-walk", type=float, default=0.001)
    g.add_argument("--vio-rot-bias-walk", type=float, default=0.002)


def build_parser() -> _Parser:
    parser = _Parser(prog="posefuse", description=__doc__)
    parser.add_argument("--version", action="version", version=f"posefuse {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("simulate", help="generate a synthetic observation stream")
    _add_sim_args(sp, "waypoints", 50.0, 300)
    sp.add_argument("--out", required=True, help="observation CSV to write")
    sp.set_defaults(func=_cmd_simulate)

    sp = sub.add_parser("fuse", help="run the fusion engine over an observation stream")
    sp.add_argument("--input", required=True, help="observation CSV to read")
    sp.add_argument("--out-traj", required=True, help="fused trajectory file to write")
    sp.add_argument("--out-log", required=True, help="per-frame category log CSV to write")
    sp.add_argument("--out-obs", default=None,
                    help="optional observation CSV with apr columns replaced by the fused estimate")
    _add_fusion_args(sp)
    sp.set_defaults(func=_cmd_fuse)

    sp = sub.add_parser("evaluate", help="evaluate raw and fused errors against ground truth")
    sp.add_argument("--input", required=True, help="observation CSV with ground-truth columns")
    sp.add_argument("--report", required=True, help="report JSON to write")
    sp.add_argument("--series", default=None, help="per-frame error series CSV to write")
    _add_fusion_args(sp)
    sp.set_defaults(func=_cmd_evaluate)

    sp = sub.add_parser("bench", help="simulate+fuse+evaluate over multiple seeds")
    sp.add_argument("--seeds", type=int, default=10, help="number of consecutive seeds")
    _add_sim_args(sp, BENCH_KIND, BENCH_EXTENT, BENCH_FRAMES)
    _add_fusion_args(sp)
    sp.add_argument("--report", default=None, help="bench summary JSON to write")
    sp.set_defaults(func=_cmd_bench)

    return parser


def _resolve_seed(seed: Optional[int]) -> int:
    if seed is not None:
        return seed
    env = os.environ.get(SEED_ENV_VAR)
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise _UsageError(f"{SEED_ENV_VAR}={env!r} is not an integer") from None
    return 0


def _fusion_config(args) -> FusionConfig:
    try:
        return FusionConfig(d_th=args.d_th, o_th=args.o_th, n_pairs=args.n_pairs,
                            gamma=args.gamma, drift_streak=args.drift_streak)
    except ValueError as err:
        raise _UsageError(str(err)) from None


def _apr_model(args) -> AprNoiseModel:
    try:
        return AprNoiseModel(
            trans_sigma=args.apr_trans_sigma,
            rot_sigma=args.apr_rot_sigma,
            outlier_prob=args.apr_outlier_prob,
            outlier_trans_range=tuple(args.apr_outlier_trans_range),
            outlier_rot_range=tuple(args.apr_outlier_rot_range),
        )
    except ValueError as err:
        raise _UsageError(str(err)) from None


def _vio_model(args) -> VioDriftModel:
    try:
        return VioDriftModel(
            trans_noise_sigma=args.vio_trans_noise,
            rot_noise_sigma=args.vio_rot_noise,
            trans_bias_walk_sigma=args.vio_trans_bias_walk,
            rot_bias_walk_sigma=args.vio_rot_bias_walk,
        )
    except ValueError as err:
        raise _UsageError(str(err)) from None


def _sim_echo(args, seed: int) -> list[str]:
    return [
        "--frames", str(args.frames), "--seed", str(seed), "--kind", args.kind,
        "--extent", _fmt(args.extent), "--interval", _fmt(args.interval),
        "--apr-trans-sigma", _fmt(args.apr_trans_sigma),
        "--apr-rot-sigma", _fmt(args.apr_rot_sigma),
        "--apr-outlier-prob", _fmt(args.apr_outlier_prob),
        "--apr-outlier-trans-range", _fmt(args.apr_outlier_trans_range[0]),
        _fmt(args.apr_outlier_trans_range[1]),
        "--apr-outlier-rot-range", _fmt(args.apr_outlier_rot_range[0]),
        _fmt(args.apr_outlier_rot_range[1]),
        "--vio-trans-noise", _fmt(args.vio_trans_noise),
        "--vio-rot-noise", _fmt(args.vio_rot_noise),
        "--vio-trans-bias-walk", _fmt(args.vio_trans_bias_walk),
        "--vio-rot-bias-walk", _fmt(args.vio_rot_bias_walk),
    ]


def _fusion_echo(cfg: FusionConfig) -> list[str]:
    return [
        "--d-th", _fmt(cfg.d_th), "--o-th", _fmt(cfg.o_th),
        "--n-pairs", str(cfg.n_pairs), "--gamma", _fmt(cfg.gamma),
        "--drift-streak", str(cfg.drift_streak),
    ]


def _echo(words: list[str]) -> None:
    print("config: " + shlex.join(words))


def _fusion_config_dict(cfg: FusionConfig) -> dict:
    return {"d_th": cfg.d_th, "o_th": cfg.o_th, "n_pairs": cfg.n_pairs,
            "gamma": cfg.gamma, "drift_streak": cfg.drift_streak}


# ---------------------------------------------------------------------------
# shared pipeline pieces


def _simulate_stream(args, seed: int) -> list[FrameObservation]:
    apr_model = _apr_model(args)
    vio_model = _vio_model(args)
    if args.frames == 0:
        return []
    try:
        spec = TrajectorySpec(kind=args.kind, n_frames=args.frames,
                              interval=args.interval, extent=args.extent, seed=seed)
    except ValueError as err:
        raise _UsageError(str(err)) from None
    gt = generate_gt(spec)
    apr = corrupt_apr(gt, apr_model, seed=seed + 1_000_003)
    vio = corrupt_vio(gt, vio_model, seed=seed + 2_000_003)
    return make_stream(gt, apr, vio, interval=args.interval)


def _run_engine(cfg: FusionConfig, obs: Sequence[FrameObservation]):
    engine = FusionEngine(cfg)
    outputs = engine.run(obs)
    return engine, outputs


def _evaluate(cfg: FusionConfig, obs: Sequence[FrameObservation]):
    """Fuse and compute the raw/fused report pair; raw errors share the fused
    categories so both reports partition identically."""
    engine, outputs = _run_engine(cfg, obs)
    raw = aggregate(apr_frame_errors(outputs, obs))
    fused_errs = frame_errors(outputs, obs)
    pending = sum(1 for o in outputs if o.category is Category.ALIGNMENT_PENDING)
    fused = aggregate(fused_errs, pending_frames=pending)
    return engine, outputs, raw, fused


def _low_miss(report: EvaluationReport) -> float:
    """Fraction of frames outside the (5 m, 10 deg) accuracy level."""
    return 1.0 - report.partitions["all"].pct_low / 100.0


def _series_rows(outputs: Sequence[FusionOutput], obs: Sequence[FrameObservation]) -> list[list]:
    from .geometry import relative_rotation_deg, relative_translation

    rows = []
    for out, ob in zip(outputs, obs):
        fused_ape = fused_aoe = ""
        if out.pose is not None:
            fused_ape = _fmt(relative_translation(out.pose, ob.gt))
            fused_aoe = _fmt(relative_rotation_deg(out.pose, ob.gt))
        rows.append([
            str(out.frame_id), _fmt(ob.timestamp), out.stage.value, out.category.value,
            "" if out.similarity is None else _fmt(out.similarity),
            _fmt(relative_translation(ob.apr, ob.gt)),
            _fmt(relative_rotation_deg(ob.apr, ob.gt)),
            fused_ape, fused_aoe,
        ])
    return rows


SERIES_HEADER = ["frame_id", "timestamp", "stage", "category", "similarity",
                 "apr_ape", "apr_aoe", "fused_ape", "fused_aoe"]
LOG_HEADER = ["frame_id", "timestamp", "stage", "category", "similarity"]


def _write_csv(path, header: list[str], rows: list[list]) -> None:
    import csv

    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


# ---------------------------------------------------------------------------
# subcommands


def _cmd_simulate(args) -> int:
    seed = _resolve_seed(args.seed)
    if args.frames < 0:
        raise _UsageError(f"--frames must be >= 0, got {args.frames}")
    stream = _simulate_stream(args, seed)
    write_observations(args.out, stream, has_gt=True)
    _echo(["posefuse", "simulate"] + _sim_echo(args, seed) + ["--out", args.out])
    if not stream:
        print("warning: --frames 0 produced an empty stream", file=sys.stderr)
    print(f"wrote {len(stream)} observations to {args.out} "
          f"(kind={args.kind}, extent={args.extent} m, seed={seed})")
    return EXIT_OK


def _cmd_fuse(args) -> int:
    cfg = _fusion_config(args)
    obs = read_observations(args.input)
    engine, outputs = _run_engine(cfg, obs)

    with open(args.out_traj, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("# timestamp tx ty tz qx qy qz qw\n")
        for out, ob in zip(outputs, obs):
            if out.pose is None:
                fh.write(f"# pending frame_id={out.frame_id} timestamp={_fmt(ob.timestamp)}\n")
                continue
            p = out.pose
            w, x, y, z = p.q
            fields = [_fmt(ob.timestamp), _fmt(p.x[0]), _fmt(p.x[1]), _fmt(p.x[2]),
                      _fmt(x), _fmt(y), _fmt(z), _fmt(w)]
            fh.write(" ".join(fields) + "\n")

    log_rows = [
        [str(o.frame_id), _fmt(ob.timestamp), o.stage.value, o.category.value,
         "" if o.similarity is None else _fmt(o.similarity)]
        for o, ob in zip(outputs, obs)
    ]
    _write_csv(args.out_log, LOG_HEADER, log_rows)

    if args.out_obs is not None:
        has_gt = bool(obs) and obs[0].gt is not None
        fused_obs = [
            FrameObservation(o.frame_id, ob.timestamp, o.pose, ob.vio, ob.gt)
            for o, ob in zip(outputs, obs)
            if o.pose is not None
        ]
        write_observations(args.out_obs, fused_obs, has_gt=has_gt)

    _echo(["posefuse", "fuse", "--input", args.input, "--out-traj", args.out_traj,
           "--out-log", args.out_log]
          + (["--out-obs", args.out_obs] if args.out_obs else [])
          + _fusion_echo(cfg))
    counts = {c: 0 for c in Category}
    for o in outputs:
        counts[o.category] += 1
    print(f"fused {len(outputs)} frames: "
          + ", ".join(f"{c.value}={n}" for c, n in counts.items() if n)
          + f"; alignments={engine.alignment_count}")
    return EXIT_OK


def _cmd_evaluate(args) -> int:
    cfg = _fusion_config(args)
    obs = read_observations(args.input)
    if not obs:
        raise ValueError(f"{args.input}: empty observation stream, nothing to evaluate")
    if any(ob.gt is None for ob in obs):
        raise ValueError(f"{args.input}: observations lack ground-truth columns")

    engine, outputs, raw, fused = _evaluate(cfg, obs)
    payload = {
        "artifact_version": __version__,
        "kind": "evaluation",
        "config": dict(_fusion_config_dict(cfg), input=str(args.input)),
        "seed": None,
        "alignments": engine.alignment_count,
        "raw": raw.to_dict(),
        "fused": fused.to_dict(),
    }
    write_report(args.report, payload)
    if args.series is not None:
        _write_csv(args.series, SERIES_HEADER, _series_rows(outputs, obs))

    _echo(["posefuse", "evaluate", "--input", args.input, "--report", args.report]
          + (["--series", args.series] if args.series else [])
          + _fusion_echo(cfg))
    r_all, f_all = raw.partitions["all"], fused.partitions["all"]
    print(f"raw   mean APE/AOE: {r_all.mean_ape:.3f} m / {r_all.mean_aoe:.3f} deg")
    print(f"fused mean APE/AOE: {f_all.mean_ape:.3f} m / {f_all.mean_aoe:.3f} deg")
    print(f"outside (5 m, 10 deg): raw {100 * _low_miss(raw):.1f}% "
          f"-> fused {100 * _low_miss(fused):.1f}%")
    return EXIT_OK


def _bench_row(args, cfg: FusionConfig, seed: int) -> dict:
    stream = _simulate_stream(args, seed)
    engine, outputs, raw, fused = _evaluate(cfg, stream)
    r_all, f_all = raw.partitions["all"], fused.partitions["all"]
    raw_miss, fused_miss = _low_miss(raw), _low_miss(fused)
    return {
        "seed": seed,
        "raw_mean_ape": r_all.mean_ape,
        "fused_mean_ape": f_all.mean_ape,
        "ape_ratio": f_all.mean_ape / r_all.mean_ape if r_all.mean_ape > 0 else None,
        "raw_mean_aoe": r_all.mean_aoe,
        "fused_mean_aoe": f_all.mean_aoe,
        "aoe_ratio": f_all.mean_aoe / r_all.mean_aoe if r_all.mean_aoe > 0 else None,
        "raw_low_miss": raw_miss,
        "fused_low_miss": fused_miss,
        "low_miss_ratio": fused_miss / raw_miss if raw_miss > 0 else None,
        "alignments": engine.alignment_count,
    }


def _cmd_bench(args) -> int:
    if args.seeds < 1:
        raise _UsageError(f"--seeds must be >= 1, got {args.seeds}")
    if args.frames < 1:
        raise _UsageError(f"--frames must be >= 1 for bench, got {args.frames}")
    cfg = _fusion_config(args)
    base_seed = _resolve_seed(args.seed)
    rows = [_bench_row(args, cfg, base_seed + i) for i in range(args.seeds)]

    def _mean(key):
        vals = [r[key] for r in rows if r[key] is not None]
        return sum(vals) / len(vals) if vals else None

    agg = {
        "mean_ape_ratio": _mean("ape_ratio"),
        "mean_aoe_ratio": _mean("aoe_ratio"),
        "mean_low_miss_ratio": _mean("low_miss_ratio"),
    }
    _echo(["posefuse", "bench", "--seeds", str(args.seeds)]
          + _sim_echo(args, base_seed) + _fusion_echo(cfg)
          + (["--report", args.report] if args.report else []))
    print(f"{'seed':>6} {'rawAPE':>8} {'fusAPE':>8} {'ratio':>6} "
          f"{'rawAOE':>8} {'fusAOE':>8} {'ratio':>6} {'rawMiss':>8} {'fusMiss':>8} {'align':>5}")
    for r in rows:
        print(f"{r['seed']:>6} {r['raw_mean_ape']:>8.3f} {r['fused_mean_ape']:>8.3f} "
              f"{r['ape_ratio']:>6.3f} {r['raw_mean_aoe']:>8.3f} {r['fused_mean_aoe']:>8.3f} "
              f"{r['aoe_ratio']:>6.3f} {r['raw_low_miss']:>8.3f} {r['fused_low_miss']:>8.3f} "
              f"{r['alignments']:>5}")
    print("aggregate ratios: "
          f"APE {agg['mean_ape_ratio']:.3f}, AOE {agg['mean_aoe_ratio']:.3f}, "
          f"low-miss {agg['mean_low_miss_ratio'] if agg['mean_low_miss_ratio'] is None else round(agg['mean_low_miss_ratio'], 3)}")

    if args.report is not None:
        payload = {
            "artifact_version": __version__,
            "kind": "bench",
            "config": {
                "fusion": _fusion_config_dict(cfg),
                "seeds": args.seeds,
                "base_seed": base_seed,
                "frames": args.frames,
                "kind": args.kind,
                "extent": args.extent,
                "interval": args.interval,
            },
            "seed": base_seed,
            "rows": rows,
            "aggregate": agg,
        }
        write_report(args.report, payload)
    return EXIT_OK


# ---------------------------------------------------------------------------


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as err:
        print(f"posefuse: error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as err:  # --help / --version
        return EXIT_OK if not err.code else EXIT_USAGE
    try:
        return args.func(args)
    except _UsageError as err:
        print(f"posefuse: error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except (FormatError, OSError, ValueError) as err:
        print(f"posefuse: error: {err}", file=sys.stderr)
        return EXIT_DATA


def cli_entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    cli_entry()
