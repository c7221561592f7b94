"""Body-frame pre-integration of a static 3D point.

A static world point seen from the moving LiDAR frame obeys a linear ODE whose
coefficients switch at every IMU sample (angular rate and specific force are
held constant over each IMU interval). Over one interval the flow is solved in
closed form; over many intervals the flow collapses into a rigid transform
``P(j) = F(i,j)^T P(i) + t(i,j)`` built from anchor-free sums plus one
anchor-dependent term.

Conventions
-----------
* World frame has gravity ``+g e3`` (z down). A stationary accelerometer then
  reads ``a_b = -g R_bw[:, 2]``.
* Sample ``k`` of an IMU stream is held constant on ``[t_k, t_{k+1})``.
* Interval lengths may vary from one interval to the next.
"""

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .exceptions import InvalidInterval, NonMonotoneTimestamps
from .so3 import exp_so3, lambda_kernel, orthonormality_error, project_to_rotation, right_jacobian, upsilon

GRAVITY = 9.80665
#: Rotations drifting further than this from orthonormal are projected back.
REORTHONORMALIZE_TOL = 1e-9


def _frozen(a, shape=None):
    a = np.array(a, dtype=float)
    if shape is not None and a.shape != shape:
        raise ValueError(f"expected shape {shape}, got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("non-finite values")
    a.flags.writeable = False
    return a


def _check_rotation(R, name="rotation", tol=1e-6):
    if orthonormality_error(R) > tol or abs(np.linalg.det(R) - 1.0) > tol:
        raise ValueError(f"{name} is not a proper rotation matrix")


class ImuSample(NamedTuple):
    """One IMU reading, already expressed in the LiDAR frame."""

    t: float
    omega: np.ndarray
    accel: np.ndarray


@dataclass(frozen=True)
class ImuStream:
    """Time-ordered IMU readings in the LiDAR frame.

    Parameters
    ----------
    t : (n,) array
        Sample times in seconds, strictly increasing.
    gyro : (n, 3) array
        Angular velocity in rad/s.
    accel : (n, 3) array
        Specific force in m/s^2.
    """

    t: np.ndarray
    gyro: np.ndarray
    accel: np.ndarray

    def __post_init__(self):
        t = _frozen(self.t)
        n = t.shape[0] if t.ndim == 1 else -1
        if t.ndim != 1:
            raise ValueError("IMU times must be one-dimensional")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "gyro", _frozen(self.gyro, (n, 3)))
        object.__setattr__(self, "accel", _frozen(self.accel, (n, 3)))
        bad = np.flatnonzero(np.diff(t) <= 0)
        if bad.size:
            k = int(bad[0])
            raise NonMonotoneTimestamps(
                f"IMU timestamps not strictly increasing at sample {k + 1} "
                f"(t={t[k + 1]!r} after t={t[k]!r})"
            )

    @classmethod
    def from_samples(cls, samples):
        samples = list(samples)
        if not samples:
            return cls(np.empty(0), np.empty((0, 3)), np.empty((0, 3)))
        return cls(
            np.array([s.t for s in samples], dtype=float),
            np.array([s.omega for s in samples], dtype=float),
            np.array([s.accel for s in samples], dtype=float),
        )

    @classmethod
    def from_array(cls, data):
        """Build from an ``(n, 7)`` array of ``t, wx, wy, wz, ax, ay, az`` rows."""
        data = np.asarray(data, dtype=float).reshape(-1, 7)
        return cls(data[:, 0], data[:, 1:4], data[:, 4:7])

    def to_array(self):
        return np.column_stack([self.t, self.gyro, self.accel])

    def __len__(self):
        return self.t.shape[0]

    def __getitem__(self, index):
        if isinstance(index, slice):
            return ImuStream(self.t[index], self.gyro[index], self.accel[index])
        return ImuSample(float(self.t[index]), self.gyro[index], self.accel[index])

    def __iter__(self):
        for k in range(len(self)):
            yield self[k]


@dataclass(frozen=True)
class ImuBias:
    """Constant accelerometer and gyroscope biases over a segment."""

    accel: np.ndarray = field(default_factory=lambda: np.zeros(3))
    gyro: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        object.__setattr__(self, "accel", _frozen(self.accel, (3,)))
        object.__setattr__(self, "gyro", _frozen(self.gyro, (3,)))


ZERO_BIAS = ImuBias()


@dataclass(frozen=True)
class AnchorState:
    """Body-frame velocity and world-to-body rotation at a segment start."""

    velocity: np.ndarray
    rotation: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "velocity", _frozen(self.velocity, (3,)))
        R = _frozen(self.rotation, (3, 3))
        _check_rotation(R, "anchor rotation")
        object.__setattr__(self, "rotation", R)


@dataclass(frozen=True)
class PreintegratedSegment:
    """Anchor-free accumulated quantities over a run of IMU intervals.

    Attributes
    ----------
    rotation : (3, 3)
        Product of the per-interval rotation increments ``F(i,j)``.
    mu : (3,)
        Accumulated specific-force velocity term ``mu(i,j)``.
    zeta : (3,)
        Accumulated specific-force position term ``zeta(i,j)``.
    elapsed : float
        Total duration in seconds.
    count : int
        Number of intervals consumed.
    """

    rotation: np.ndarray
    mu: np.ndarray
    zeta: np.ndarray
    elapsed: float = 0.0
    count: int = 0

    @classmethod
    def empty(cls):
        return cls(np.eye(3), np.zeros(3), np.zeros(3), 0.0, 0)


@dataclass(frozen=True)
class RigidTransform:
    """``x -> rotation @ x + translation``."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "rotation", _frozen(self.rotation, (3, 3)))
        object.__setattr__(self, "translation", _frozen(self.translation, (3,)))

    @classmethod
    def identity(cls):
        return cls(np.eye(3), np.zeros(3))

    def apply(self, points):
        points = np.asarray(points, dtype=float)
        return points @ self.rotation.T + self.translation

    def compose(self, other):
        """Transform equivalent to applying ``other`` first, then ``self``."""
        return RigidTransform(
            self.rotation @ other.rotation, self.rotation @ other.translation + self.translation
        )

    def inverse(self):
        return invert(self)

    def as_matrix(self):
        M = np.eye(4)
        M[:3, :3] = self.rotation
        M[:3, 3] = self.translation
        return M


def _corrected(omega, accel, bias):
    if bias is None:
        return np.asarray(omega, dtype=float), np.asarray(accel, dtype=float)
    return np.asarray(omega, dtype=float) - bias.gyro, np.asarray(accel, dtype=float) - bias.accel


def step_point(P, V, R_bw, sample, dt, bias=None, g=GRAVITY):
    """Propagate point, velocity and attitude over one IMU interval.

    Parameters
    ----------
    P, V : (..., 3)
        Point coordinates and body velocity in the LiDAR frame at the interval start.
    R_bw : (..., 3, 3)
        World-to-body rotation at the interval start.
    sample : ImuSample
        Reading held over the interval (its ``t`` is ignored).
    dt : float
        Interval length in seconds.

    Returns
    -------
    (P', V', R_bw') one interval later.
    """
    if not dt > 0:
        raise InvalidInterval(f"interval length must be positive, got {dt!r}")
    omega, accel = _corrected(sample.omega, sample.accel, bias)
    theta = np.asarray(omega, dtype=float) * dt
    En = exp_so3(-theta)
    P = np.asarray(P, dtype=float)
    V = np.asarray(V, dtype=float)
    R_bw = np.asarray(R_bw, dtype=float)
    R3 = R_bw[..., :, 2]

    def mv(M, v):
        return (M @ v[..., None])[..., 0]

    P_hat = accel * dt**2
    V_hat = accel * dt
    P_next = mv(En, P - dt * V - 0.5 * g * dt**2 * R3) - mv(upsilon(-theta), P_hat)
    V_next = mv(En, V + g * dt * R3) + mv(right_jacobian(-theta), V_hat)
    return P_next, V_next, En @ R_bw


def _extend(F, mu, zeta, elapsed, omega, accel, dt):
    """Append one interval (or a stack of independent intervals) to a segment."""
    theta = omega * np.asarray(dt)[..., None]
    dt = np.asarray(dt, dtype=float)
    F_next = F @ exp_so3(theta)
    mu_next = mu + (F @ (right_jacobian(theta) @ (accel * dt[..., None])[..., None]))[..., 0]
    zeta_next = (
        zeta
        + (F @ (lambda_kernel(theta) @ (accel * dt[..., None] ** 2)[..., None]))[..., 0]
        + mu * dt[..., None]
    )
    return F_next, mu_next, zeta_next, elapsed + dt


def _intervals(imu):
    dt = np.diff(imu.t)
    if np.any(dt <= 0):
        raise NonMonotoneTimestamps("IMU timestamps not strictly increasing")
    return dt


def _as_stream(imu):
    if isinstance(imu, ImuStream):
        return imu
    return ImuStream.from_samples(imu)


def _rotation_prefix(F, E):
    """Fill ``F[k+1] = F[k] @ E[k]``, projecting rows that drift past the tolerance."""
    start = 0
    while start < len(E):
        for k in range(start, len(E)):
            F[k + 1] = F[k] @ E[k]
        R = F[start + 1:]
        err = np.max(np.abs(np.swapaxes(R, -1, -2) @ R - np.eye(3)), axis=(-2, -1))
        bad = np.flatnonzero(err > REORTHONORMALIZE_TOL)
        if not bad.size:
            return
        k = start + 1 + int(bad[0])
        F[k] = project_to_rotation(F[k])
        start = k


def prefix_arrays(imu, bias=None):
    """Segments over ``imu[0..k]`` for every ``k``, stacked.

    Returns
    -------
    F : (n, 3, 3), mu : (n, 3), zeta : (n, 3), elapsed : (n,)
        Row ``k`` holds the segment spanning samples ``0`` to ``k``
        (``k`` intervals); row 0 is the empty segment.
    """
    imu = _as_stream(imu)
    n = len(imu)
    F = np.empty((max(n, 1), 3, 3))
    mu = np.zeros((max(n, 1), 3))
    zeta = np.zeros((max(n, 1), 3))
    elapsed = np.zeros(max(n, 1))
    F[0] = np.eye(3)
    if n < 2:
        return F[:n], mu[:n], zeta[:n], elapsed[:n]
    dts = _intervals(imu)
    omega, accel = _corrected(imu.gyro[:-1], imu.accel[:-1], bias)
    theta = omega * dts[:, None]
    E = exp_so3(theta)
    _rotation_prefix(F, E)
    # per-interval forcing terms rotated into the segment-start frame
    dmu = (F[:-1] @ (right_jacobian(theta) @ (accel * dts[:, None])[..., None]))[..., 0]
    dzeta = (F[:-1] @ (lambda_kernel(theta) @ (accel * dts[:, None] ** 2)[..., None]))[..., 0]
    mu[1:] = np.cumsum(dmu, axis=0)
    zeta[1:] = np.cumsum(dzeta + mu[:-1] * dts[:, None], axis=0)
    elapsed[1:] = np.cumsum(dts)
    return F, mu, zeta, elapsed


def accumulate(imu, bias=None):
    """Pre-integrate an IMU stream into a :class:`PreintegratedSegment`.

    ``imu`` is an :class:`ImuStream` or a sequence of :class:`ImuSample`;
    ``len(imu) - 1`` intervals are consumed.
    """
    imu = _as_stream(imu)
    if len(imu) < 2:
        return PreintegratedSegment.empty()
    F, mu, zeta, elapsed = prefix_arrays(imu, bias)
    return PreintegratedSegment(F[-1], mu[-1], zeta[-1], float(elapsed[-1]), len(imu) - 1)


def _translation(F, zeta, elapsed, velocity, R3, g):
    elapsed = np.asarray(elapsed, dtype=float)[..., None]
    chi = elapsed * velocity + 0.5 * g * elapsed**2 * R3
    return -(np.swapaxes(F, -1, -2) @ (chi + zeta)[..., None])[..., 0]


def finalize_transform(seg, anchor, g=GRAVITY):
    """Rigid transform ``T(i,j)`` mapping point coordinates at ``i`` to ``j``."""
    t = _translation(seg.rotation, seg.zeta, seg.elapsed, anchor.velocity, anchor.rotation[:, 2], g)
    return RigidTransform(seg.rotation.T, t)


def propagate_anchor(anchor, seg, g=GRAVITY):
    """Body velocity and attitude at the end of ``seg``."""
    Ft = seg.rotation.T
    R3 = anchor.rotation[:, 2]
    velocity = Ft @ (anchor.velocity + g * seg.elapsed * R3 + seg.mu)
    rotation = Ft @ anchor.rotation
    if orthonormality_error(rotation) > REORTHONORMALIZE_TOL:
        rotation = project_to_rotation(rotation)
    return AnchorState(velocity, rotation)


def invert(T):
    """Inverse transform: ``(R, t) -> (R^T, -R^T t)``."""
    Rt = T.rotation.T
    return RigidTransform(Rt, -Rt @ T.translation)


def anchor_table(imu, anchor, bias=None, g=GRAVITY):
    """Anchor states at every sample of ``imu`` given the state at sample 0.

    Returns ``(velocities (n, 3), rotations (n, 3, 3))``.
    """
    F, mu, _, elapsed = prefix_arrays(imu, bias)
    Ft = np.swapaxes(F, -1, -2)
    R3 = anchor.rotation[:, 2]
    velocities = (Ft @ (anchor.velocity + g * elapsed[:, None] * R3 + mu)[..., None])[..., 0]
    rotations = Ft @ anchor.rotation
    return velocities, rotations
