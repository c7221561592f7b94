"""Plain-text file formats.

* IMU stream: CSV ``t,wx,wy,wz,ax,ay,az``
* sweeps, truth scans and de-skewed sweeps: CSV ``t,x,y,z``
* anchors: CSV ``sweep,t,vx,vy,vz,r00,...,r22`` (row-major world-to-body rotation)
* poses: CSV ``t,x,y,z,r00,...,r22`` (row-major body-to-world rotation)
* reports: ``key = value`` lines under a versioned header

Floats are written with 17 significant digits, so every format round-trips
float64 values exactly.
"""

import csv
import hashlib
import json
from pathlib import Path

import numpy as np

from .exceptions import FormatError

IMU_HEADER = ("t", "wx", "wy", "wz", "ax", "ay", "az")
SWEEP_HEADER = ("t", "x", "y", "z")
_ROT = tuple(f"r{i}{j}" for i in range(3) for j in range(3))
ANCHOR_HEADER = ("sweep", "t", "vx", "vy", "vz") + _ROT
POSE_HEADER = ("t", "x", "y", "z") + _ROT
REPORT_HEADER = "# imudeskew-report v1"


def fmt(x):
    return "%.17g" % x


def write_table(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in np.asarray(rows, dtype=float).reshape(-1, len(header)):
            fh.write(",".join(fmt(v) for v in row) + "\n")


def read_table(path, header):
    """Read a CSV written by :func:`write_table`; returns an ``(n, len(header))`` array."""
    path = Path(path)
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise FormatError(f"cannot open: {exc.strerror}", path) from exc
    with fh:
        reader = csv.reader(fh)
        first = next(reader, None)
        if first is None or tuple(c.strip() for c in first) != tuple(header):
            raise FormatError(f"expected header {','.join(header)!r}, got {','.join(first or [])!r}", path)
        rows = []
        for record, row in enumerate(reader, start=1):
            if not row:
                continue
            if len(row) != len(header):
                raise FormatError(f"expected {len(header)} fields, got {len(row)}", path, record)
            try:
                values = [float(v) for v in row]
            except ValueError as exc:
                raise FormatError(f"not a number ({exc})", path, record) from exc
            if not all(np.isfinite(values)):
                raise FormatError("non-finite value", path, record)
            rows.append(values)
    return np.array(rows, dtype=float).reshape(-1, len(header))


def write_imu(path, imu):
    write_table(path, IMU_HEADER, imu.to_array())


def read_imu(path):
    from .preintegration import ImuStream

    data = read_table(path, IMU_HEADER)
    try:
        return ImuStream.from_array(data)
    except ValueError as exc:
        raise FormatError(str(exc), path) from exc


def write_sweep(path, t, points):
    write_table(path, SWEEP_HEADER, np.column_stack([t, points]))


def read_sweep(path, index=0):
    from .deskew import Sweep

    data = read_table(path, SWEEP_HEADER)
    if data.shape[0] == 0:
        raise FormatError("sweep has no points", path)
    bad = np.flatnonzero(np.diff(data[:, 0]) < 0)
    if bad.size:
        raise FormatError("timestamp decreases", path, int(bad[0]) + 2)
    return Sweep(data[:, 0], data[:, 1:], index)


def write_anchors(path, indices, times, anchors):
    rows = [
        [i, t, *a.velocity, *a.rotation.reshape(-1)] for i, t, a in zip(indices, times, anchors)
    ]
    write_table(path, ANCHOR_HEADER, rows)


def read_anchors(path):
    """Returns ``{sweep_index: (t, AnchorState)}``."""
    from .preintegration import AnchorState

    data = read_table(path, ANCHOR_HEADER)
    out = {}
    for record, row in enumerate(data, start=1):
        try:
            out[int(row[0])] = (float(row[1]), AnchorState(row[2:5], row[5:].reshape(3, 3)))
        except ValueError as exc:
            raise FormatError(str(exc), path, record) from exc
    return out


def write_poses(path, t, R_wb, position):
    write_table(path, POSE_HEADER, np.column_stack([t, position, np.asarray(R_wb).reshape(-1, 9)]))


def read_poses(path):
    data = read_table(path, POSE_HEADER)
    return {"t": data[:, 0], "position": data[:, 1:4], "R_wb": data[:, 4:].reshape(-1, 3, 3)}


def write_report(path, fields):
    """Write an ordered mapping as ``key = value`` lines."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [REPORT_HEADER]
    for key, value in fields.items():
        if isinstance(value, (float, np.floating)):
            value = fmt(value)
        lines.append(f"{key} = {value}")
    path.write_text("\n".join(lines) + "\n")


def read_report(path):
    """Parse a report; numeric values come back as float, others as str."""
    path = Path(path)
    lines = path.read_text().splitlines()
    if not lines or lines[0] != REPORT_HEADER:
        raise FormatError(f"missing header {REPORT_HEADER!r}", path)
    out = {}
    for record, line in enumerate(lines[1:], start=1):
        if not line.strip():
            continue
        key, sep, value = line.partition(" = ")
        if not sep:
            raise FormatError("expected 'key = value'", path, record)
        try:
            out[key] = float(value)
        except ValueError:
            out[key] = value
    return out


def sha256(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=False) + "\n")


def read_json(path):
    path = Path(path)
    try:
        return json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise FormatError(f"cannot read JSON ({exc})", path) from exc
