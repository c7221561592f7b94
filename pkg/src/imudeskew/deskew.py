"""Piecewise de-skewing of LiDAR sweeps and the linear-interpolation baseline.

Every point is moved into the body frame of a single synchronization instant
using the pre-integrated IMU motion between the point's scan instant and that
instant. Both directions (points before and after the synchronization point)
reduce to one expression once the segments are accumulated from the sweep's
first IMU sample ``i0``::

    x_sync = F_s^T (F_l x_l + c_l - c_s),    c = chi + zeta

where ``F``, ``c`` are the prefix rotation and translation offset at the
point's and the synchronization point's instants.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.transform import Rotation

from .exceptions import CardinalityMismatch, ImuCoverageGap, NonMonotoneTimestamps
from .preintegration import GRAVITY, RigidTransform, _corrected, _extend, prefix_arrays

MODES = ("snap", "fractional")


@dataclass(frozen=True)
class Sweep:
    """A LiDAR sweep: per-point scan times and sensor-frame coordinates."""

    t: np.ndarray
    points: np.ndarray
    index: int = 0

    def __post_init__(self):
        t = np.array(self.t, dtype=float).reshape(-1)
        points = np.array(self.points, dtype=float)
        if t.size == 0:
            raise ValueError("a sweep needs at least one point")
        if points.shape != (t.size, 3):
            raise ValueError(f"points must have shape ({t.size}, 3), got {points.shape}")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(points))):
            raise ValueError("sweep contains non-finite values")
        bad = np.flatnonzero(np.diff(t) < 0)
        if bad.size:
            raise NonMonotoneTimestamps(
                f"sweep {self.index}: point {int(bad[0]) + 1} is earlier than its predecessor"
            )
        t.flags.writeable = False
        points.flags.writeable = False
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "index", int(self.index))

    def __len__(self):
        return self.t.size

    @property
    def t_first(self):
        return float(self.t[0])

    @property
    def t_last(self):
        return float(self.t[-1])


@dataclass(frozen=True)
class DeskewedSweep:
    """Points of a sweep expressed in the body frame at ``sync_time``.

    ``t`` passes the original scan times through unchanged.
    """

    index: int
    points: np.ndarray
    sync_time: float
    t: np.ndarray = field(default=None)


def resolve_sync(sync, n):
    """Index of the synchronization point for a policy ``"first"``, ``"last"`` or an int."""
    if isinstance(sync, str):
        if sync == "first":
            return 0
        if sync == "last":
            return n - 1
        raise ValueError(f"unknown sync policy {sync!r}")
    k = int(sync)
    if k != sync or not 0 <= k < n:
        raise ValueError(f"sync index {sync!r} outside [0, {n})")
    return k


def _check_mode(mode):
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")


class _SweepMotion:
    """Prefix pre-integration over the IMU samples that span one sweep."""

    def __init__(self, sweep, imu, anchor, bias, g, mode):
        _check_mode(mode)
        if len(imu) == 0 or imu.t[0] > sweep.t_first or imu.t[-1] < sweep.t_last:
            span = "empty stream" if len(imu) == 0 else f"[{imu.t[0]!r}, {imu.t[-1]!r}]"
            raise ImuCoverageGap(
                f"sweep {sweep.index}: IMU {span} does not span [{sweep.t_first!r}, {sweep.t_last!r}]",
                sweep_index=sweep.index,
            )
        self.i0 = int(np.searchsorted(imu.t, sweep.t_first, side="right")) - 1
        j_end = int(np.searchsorted(imu.t, sweep.t_last, side="right")) - 1
        self.imu = imu[self.i0:j_end + 1]
        self.F, self.mu, self.zeta, self.elapsed = prefix_arrays(self.imu, bias)
        self.omega, self.accel = _corrected(self.imu.gyro, self.imu.accel, bias)
        self.anchor = anchor
        self.g = g
        self.mode = mode

    def snapped(self, times):
        """Prefix row of the latest IMU sample at-or-before each time."""
        return np.searchsorted(self.imu.t, times, side="right") - 1

    def effective_times(self, times):
        times = np.asarray(times, dtype=float)
        if self.mode == "snap":
            return self.imu.t[self.snapped(times)]
        return times

    def at(self, times):
        """Rotation ``F`` (..., 3, 3) and offset ``c = chi + zeta`` (..., 3) at each time."""
        times = np.asarray(times, dtype=float)
        k = self.snapped(times)
        F, mu, zeta, elapsed = self.F[k], self.mu[k], self.zeta[k], self.elapsed[k]
        if self.mode == "fractional":
            dt = times - self.imu.t[k]
            F, mu, zeta, elapsed = _extend(F, mu, zeta, elapsed, self.omega[k], self.accel[k], dt)
        R3 = self.anchor.rotation[:, 2]
        chi = elapsed[..., None] * self.anchor.velocity + 0.5 * self.g * elapsed[..., None] ** 2 * R3
        return F, chi + zeta

    def transform_between(self, t_from, t_to):
        """Rigid transform carrying point coordinates from ``t_from`` to ``t_to``."""
        F_a, c_a = self.at(np.array([t_from]))
        F_b, c_b = self.at(np.array([t_to]))
        Ft = F_b[0].T
        return RigidTransform(Ft @ F_a[0], Ft @ (c_a[0] - c_b[0]))


def deskew(sweep, imu, anchor, *, bias=None, sync="last", mode="snap", g=GRAVITY):
    """Align every point of ``sweep`` to the synchronization point.

    Parameters
    ----------
    sweep : Sweep
    imu : ImuStream
        Must contain a sample at-or-before the first point and one at-or-after
        the last point.
    anchor : AnchorState
        Body velocity and attitude at the IMU sample at-or-before the first point.
    bias : ImuBias, optional
        Subtracted from every sample.
    sync : {"last", "first"} or int
        Synchronization point.
    mode : {"snap", "fractional"}
        ``"snap"`` moves each point with the transform of the latest IMU sample
        at-or-before its scan time. ``"fractional"`` extends that sample over
        the remaining partial interval.

    Returns
    -------
    DeskewedSweep
    """
    motion = _SweepMotion(sweep, imu, anchor, bias, g, mode)
    kappa = resolve_sync(sync, len(sweep))
    F_l, c_l = motion.at(sweep.t)
    F_s, c_s = F_l[kappa], c_l[kappa]
    body = (F_l @ sweep.points[..., None])[..., 0] + (c_l - c_s)
    out = body @ F_s
    if mode == "snap":
        # points snapped to the sync point's sample need no motion at all
        k = motion.snapped(sweep.t)
        same = k == k[kappa]
        out[same] = sweep.points[same]
    out[kappa] = sweep.points[kappa]
    sync_time = float(motion.effective_times(sweep.t[kappa]))
    return DeskewedSweep(sweep.index, out, sync_time, sweep.t)


def sweep_transform(sweep, imu, anchor, *, bias=None, mode="snap", g=GRAVITY):
    """Transform from the first point's frame to the last point's frame.

    In snap mode this is ``T(i0, j0)`` between the snapped IMU samples.
    """
    motion = _SweepMotion(sweep, imu, anchor, bias, g, mode)
    return motion.transform_between(sweep.t_first, sweep.t_last)


def deskew_linear_baseline(sweep, imu, anchor, *, bias=None, mode="snap", g=GRAVITY):
    """Linear-interpolation de-skewing, synchronized to the last point.

    The whole-sweep transform is pre-integrated once; point ``l`` receives the
    fraction ``s = (t_last - t_l) / (t_last - t_first)`` of its rotation vector
    and translation. Times are snapped to IMU samples in snap mode.
    """
    motion = _SweepMotion(sweep, imu, anchor, bias, g, mode)
    T = motion.transform_between(sweep.t_first, sweep.t_last)
    tau = motion.effective_times(sweep.t)
    span = tau[-1] - tau[0]
    s = (tau[-1] - tau) / span if span > 0 else np.zeros_like(tau)
    rotvec = Rotation.from_matrix(T.rotation).as_rotvec()
    R = Rotation.from_rotvec(s[:, None] * rotvec).as_matrix()
    out = (R @ sweep.points[..., None])[..., 0] + s[:, None] * T.translation
    out[-1] = sweep.points[-1]
    return DeskewedSweep(sweep.index, out, float(tau[-1]), sweep.t)


QUANTILES = (0.5, 0.9, 0.99)


@dataclass(frozen=True)
class Metrics:
    """Point-wise error statistics of a de-skewed sweep against ground truth."""

    rmse: float
    mean: float
    max: float
    count: int
    axis_quantiles: dict
    errors: np.ndarray = field(repr=False)


def _coords(cloud):
    if hasattr(cloud, "points"):
        cloud = cloud.points
    return np.asarray(cloud, dtype=float).reshape(-1, 3)


def evaluate(deskewed, truth):
    """Compare corresponding points (by index) of two clouds.

    ``deskewed`` and ``truth`` may be sweeps or ``(n, 3)`` arrays.
    """
    a, b = _coords(deskewed), _coords(truth)
    if a.shape != b.shape:
        raise CardinalityMismatch(f"{a.shape[0]} de-skewed points vs {b.shape[0]} truth points")
    diff = a - b
    err = np.linalg.norm(diff, axis=1)
    if err.size == 0:
        raise CardinalityMismatch("cannot evaluate empty clouds")
    absdiff = np.abs(diff)
    quant = {q: np.quantile(absdiff, q, axis=0) for q in QUANTILES}
    return Metrics(
        rmse=float(np.sqrt(np.mean(err**2))),
        mean=float(np.mean(err)),
        max=float(np.max(err)),
        count=int(err.size),
        axis_quantiles=quant,
        errors=err,
    )


def improvement_percentage(rmse_baseline, rmse_proposed):
    """Relative RMSE reduction of the proposed method, in percent."""
    return (rmse_baseline - rmse_proposed) / rmse_baseline * 100.0
