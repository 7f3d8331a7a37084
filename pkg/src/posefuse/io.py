"""File formats: trajectories, observation streams, and evaluation reports.

All three formats are decimal text for cross-language reproducibility.
Floats are written as shortest round-trip decimals (up to 17 significant
digits), so write(read(file)) is value-exact and, for reports, byte-exact.

Trajectory files follow the common benchmark convention::

    # comment
    timestamp tx ty tz qx qy qz qw

with space-separated fields and the quaternion scalar last on disk (internal
order is (w, x, y, z); the conversion lives here and only here).

Observation files are CSV with an exact header; the ground-truth columns are
optional as a block::

    frame_id,timestamp,apr_tx,...,apr_qw,vio_tx,...,vio_qw[,gt_tx,...,gt_qw]

Report files are JSON with sorted keys and two-space indentation.
"""

from __future__ import annotations

import csv
import json
import math
from typing import Optional, Sequence

import numpy as np

from .fusion import FrameObservation
from .geometry import Pose

# maximum deviation of an on-disk quaternion norm from 1 before rejection;
# anything closer is silently renormalized on load
QUAT_NORM_SLACK = 1e-3

_POSE_FIELDS = ("tx", "ty", "tz", "qx", "qy", "qz", "qw")


def _pose_columns(prefix: str) -> list[str]:
    return [f"{prefix}_{f}" for f in _POSE_FIELDS]


OBS_HEADER = ["frame_id", "timestamp"] + _pose_columns("apr") + _pose_columns("vio")
OBS_HEADER_GT = OBS_HEADER + _pose_columns("gt")


class FormatError(ValueError):
    """A file violated its format contract; message carries file:line context."""

    def __init__(self, path, lineno: int, message: str):
        super().__init__(f"{path}:{lineno}: {message}")
        self.path = path
        self.lineno = lineno


def _fmt(value: float) -> str:
    return repr(float(value))


def _parse_float(token: str, path, lineno: int) -> float:
    try:
        value = float(token)
    except ValueError:
        raise FormatError(path, lineno, f"malformed number {token!r}") from None
    if not math.isfinite(value):
        raise FormatError(path, lineno, f"non-finite number {token!r}")
    return value


def _pose_from_disk(vals: Sequence[float], raw: Sequence[str], path, lineno: int) -> Pose:
    """Build a Pose from on-disk order tx ty tz qx qy qz qw, checking the norm."""
    tx, ty, tz, qx, qy, qz, qw = vals
    norm = math.sqrt(qx * qx + qy * qy + qz * qz + qw * qw)
    if abs(norm - 1.0) > QUAT_NORM_SLACK:
        raise FormatError(
            path, lineno,
            f"quaternion {' '.join(raw[-4:])!r} has norm {norm:.6g}, "
            f"more than {QUAT_NORM_SLACK} from unit",
        )
    return Pose(np.array([tx, ty, tz]), np.array([qw, qx, qy, qz]))


def _pose_to_disk(p: Pose) -> list[str]:
    w, x, y, z = p.q
    return [_fmt(p.x[0]), _fmt(p.x[1]), _fmt(p.x[2]), _fmt(x), _fmt(y), _fmt(z), _fmt(w)]


# ---------------------------------------------------------------------------
# trajectory files


def read_trajectory(path) -> list[tuple[float, Pose]]:
    """Parse a trajectory file into (timestamp, pose) pairs."""
    items: list[tuple[float, Pose]] = []
    prev_ts = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw_line in enumerate(fh, start=1):
            line = raw_line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 8:
                raise FormatError(path, lineno, f"expected 8 fields, got {len(parts)}: {line!r}")
            vals = [_parse_float(tok, path, lineno) for tok in parts]
            ts = vals[0]
            if prev_ts is not None and ts < prev_ts:
                raise FormatError(path, lineno, f"timestamp {parts[0]!r} decreases (previous {prev_ts!r})")
            prev_ts = ts
            items.append((ts, _pose_from_disk(vals[1:], parts, path, lineno)))
    return items


def write_trajectory(path, items: Sequence[tuple[float, Pose]]) -> None:
    """Write (timestamp, pose) pairs in trajectory format."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("# timestamp tx ty tz qx qy qz qw\n")
        for ts, pose in items:
            fh.write(" ".join([_fmt(ts)] + _pose_to_disk(pose)) + "\n")


# ---------------------------------------------------------------------------
# observation files


def read_observations(path) -> list[FrameObservation]:
    """Parse an observation CSV into FrameObservation records."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise FormatError(path, 1, "missing header") from None
        if header == OBS_HEADER_GT:
            has_gt = True
        elif header == OBS_HEADER:
            has_gt = False
        else:
            raise FormatError(path, 1, f"unrecognized header {','.join(header)!r}")
        n_cols = len(header)

        observations: list[FrameObservation] = []
        prev_id = None
        prev_ts = None
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != n_cols:
                raise FormatError(path, lineno, f"expected {n_cols} fields, got {len(row)}")
            try:
                frame_id = int(row[0])
            except ValueError:
                raise FormatError(path, lineno, f"malformed frame_id {row[0]!r}") from None
            if prev_id is not None and frame_id <= prev_id:
                raise FormatError(
                    path, lineno, f"frame_id {row[0]!r} does not increase (previous {prev_id})"
                )
            prev_id = frame_id
            ts = _parse_float(row[1], path, lineno)
            if prev_ts is not None and ts < prev_ts:
                raise FormatError(path, lineno, f"timestamp {row[1]!r} decreases (previous {prev_ts!r})")
            prev_ts = ts
            apr_vals = [_parse_float(tok, path, lineno) for tok in row[2:9]]
            vio_vals = [_parse_float(tok, path, lineno) for tok in row[9:16]]
            apr = _pose_from_disk(apr_vals, row[2:9], path, lineno)
            vio = _pose_from_disk(vio_vals, row[9:16], path, lineno)
            gt = None
            if has_gt:
                gt_vals = [_parse_float(tok, path, lineno) for tok in row[16:23]]
                gt = _pose_from_disk(gt_vals, row[16:23], path, lineno)
            observations.append(FrameObservation(frame_id, ts, apr, vio, gt))
    return observations


def write_observations(
    path, observations: Sequence[FrameObservation], has_gt: Optional[bool] = None
) -> None:
    """Write observations as CSV; ground-truth columns appear when every
    record carries ground truth (a mixed stream is rejected). has_gt forces
    the header choice for empty streams; it must match the records otherwise."""
    flags = {obs.gt is not None for obs in observations}
    if flags == {True, False}:
        raise ValueError("mixed stream: some observations have ground truth, some do not")
    if has_gt is None:
        has_gt = flags == {True}
    elif flags and flags != {has_gt}:
        raise ValueError(f"has_gt={has_gt} does not match the stream contents")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(OBS_HEADER_GT if has_gt else OBS_HEADER)
        for obs in observations:
            row = [str(obs.frame_id), _fmt(obs.timestamp)]
            row += _pose_to_disk(obs.apr)
            row += _pose_to_disk(obs.vio)
            if has_gt:
                row += _pose_to_disk(obs.gt)
            writer.writerow(row)


# ---------------------------------------------------------------------------
# report files


def read_report(path) -> dict:
    """Parse a report file into its JSON payload."""
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as err:
        raise FormatError(path, err.lineno, f"invalid JSON: {err.msg}") from None
    if not isinstance(payload, dict):
        raise FormatError(path, 1, f"report must be a JSON object, got {type(payload).__name__}")
    return payload


def write_report(path, payload: dict) -> None:
    """Serialize a report payload; byte-stable under read/write round trips."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
