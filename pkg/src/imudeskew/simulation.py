"""Synthetic ground truth: trajectories, IMU streams, environments and sweeps.

World frame is z-down with gravity ``+g e3``. Trajectories are defined in a
local frame and then placed in the world with a seeded heading and origin
offset, so that different seeds give different scans of the same scene.

Two motion models produce the ground truth poses:

* ``"smooth"``: the analytic trajectory itself. IMU samples are constant over
  each interval, so the pre-integration incurs its discretization error here.
* ``"piecewise"``: the exact flow of the (noise-free) IMU samples held constant
  over each interval. The pre-integration model is exact for this motion.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm
from scipy.spatial.transform import Rotation

from .deskew import DeskewedSweep, Sweep, resolve_sync
from .exceptions import UnsupportedRate
from .preintegration import GRAVITY, AnchorState, ImuBias, ImuStream

MIN_RATE = 100.0
E3 = np.array([0.0, 0.0, 1.0])


def _rz(psi):
    c, s = np.cos(psi), np.sin(psi)
    z, o = np.zeros_like(psi), np.ones_like(psi)
    return np.stack([np.stack([c, -s, z], -1), np.stack([s, c, z], -1), np.stack([z, z, o], -1)], -2)


def _rx(phi):
    c, s = np.cos(phi), np.sin(phi)
    z, o = np.zeros_like(phi), np.ones_like(phi)
    return np.stack([np.stack([o, z, z], -1), np.stack([z, c, -s], -1), np.stack([z, s, c], -1)], -2)


def seed_streams(seed, n=3):
    """Independent generators derived from one master seed."""
    return [np.random.default_rng(s) for s in np.random.SeedSequence(int(seed)).spawn(n)]


@dataclass(frozen=True)
class Kinematics:
    """World-frame pose, velocity, acceleration and body angular rate at times ``t``."""

    t: np.ndarray
    R_wb: np.ndarray
    position: np.ndarray
    velocity: np.ndarray
    acceleration: np.ndarray
    omega_b: np.ndarray


@dataclass(frozen=True)
class Trajectory:
    """Base trajectory; subclasses implement :meth:`local`.

    The seed draws a heading in ``[0, 2 pi)`` and a horizontal origin offset in
    ``[-0.5, 0.5]`` m that place the local trajectory in the world.
    """

    duration: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if not (np.isfinite(self.duration) and self.duration > 0):
            raise ValueError("trajectory duration must be positive")

    def local(self, t):
        raise NotImplementedError

    @property
    def placement(self):
        rng = seed_streams(self.seed, 1)[0]
        yaw = rng.uniform(0.0, 2 * np.pi)
        offset = np.array([*rng.uniform(-0.5, 0.5, size=2), 0.0])
        return yaw, offset

    def kinematics(self, t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        R, p, v, a, w = self.local(t)
        yaw, offset = self.placement
        Q = _rz(np.float64(yaw))
        return Kinematics(t, Q @ R, offset + p @ Q.T, v @ Q.T, a @ Q.T, w)


@dataclass(frozen=True)
class Stationary(Trajectory):
    def local(self, t):
        n = t.size
        z = np.zeros((n, 3))
        return np.broadcast_to(np.eye(3), (n, 3, 3)).copy(), z, z.copy(), z.copy(), z.copy()


@dataclass(frozen=True)
class ConstantVelocity(Trajectory):
    velocity: tuple = (1.0, 0.0, 0.0)

    def local(self, t):
        n = t.size
        V = np.asarray(self.velocity, dtype=float)
        z = np.zeros((n, 3))
        return np.broadcast_to(np.eye(3), (n, 3, 3)).copy(), t[:, None] * V, np.tile(V, (n, 1)), z, z.copy()


@dataclass(frozen=True)
class StraightThenTurn(Trajectory):
    """Drive straight at ``speed``, then yaw at ``turn_rate`` from ``switch_time`` on."""

    speed: float = 1.0
    turn_rate: float = 1.5
    switch_time: float = 0.5

    def local(self, t):
        v, w, ts = self.speed, self.turn_rate, self.switch_time
        after = t > ts
        tau = np.where(after, t - ts, 0.0)
        psi = w * tau
        rate = np.where(after, w, 0.0)
        if w != 0:
            x = v * np.minimum(t, ts) + (v / w) * np.sin(psi)
            y = (v / w) * (1 - np.cos(psi))
        else:
            x, y = v * t, np.zeros_like(t)
        z = np.zeros_like(t)
        p = np.stack([x, y, z], -1)
        vel = v * np.stack([np.cos(psi), np.sin(psi), z], -1)
        acc = v * rate[:, None] * np.stack([-np.sin(psi), np.cos(psi), z], -1)
        omega = np.stack([z, z, rate], -1)
        return _rz(psi), p, vel, acc, omega


@dataclass(frozen=True)
class FigureEight(Trajectory):
    """Lemniscate-like path, heading along the velocity, with a sinusoidal bank."""

    amplitude: float = 2.0
    period: float = 8.0
    bank: float = 0.1

    def local(self, t):
        A, W = self.amplitude, 2 * np.pi / self.period
        s1, c1, s2, c2 = np.sin(W * t), np.cos(W * t), np.sin(2 * W * t), np.cos(2 * W * t)
        z = np.zeros_like(t)
        p = np.stack([A * s1, 0.5 * A * s2, z], -1)
        vel = np.stack([A * W * c1, A * W * c2, z], -1)
        acc = np.stack([-A * W**2 * s1, -2 * A * W**2 * s2, z], -1)
        psi = np.arctan2(vel[:, 1], vel[:, 0])
        psi_dot = (vel[:, 0] * acc[:, 1] - vel[:, 1] * acc[:, 0]) / (vel[:, 0] ** 2 + vel[:, 1] ** 2)
        phi = self.bank * s1
        phi_dot = self.bank * W * c1
        Rx = _rx(phi)
        omega = psi_dot[:, None] * np.swapaxes(Rx, -1, -2)[..., :, 2] + phi_dot[:, None] * np.array([1.0, 0, 0])
        return _rz(psi) @ Rx, p, vel, acc, omega


TRAJECTORIES = {
    "stationary": Stationary,
    "constant_velocity": ConstantVelocity,
    "straight_then_turn": StraightThenTurn,
    "figure_eight": FigureEight,
}


def _hat(w):
    w = np.asarray(w, dtype=float)
    H = np.zeros(w.shape[:-1] + (3, 3))
    H[..., 0, 1], H[..., 0, 2] = -w[..., 2], w[..., 1]
    H[..., 1, 0], H[..., 1, 2] = w[..., 2], -w[..., 0]
    H[..., 2, 0], H[..., 2, 1] = -w[..., 1], w[..., 0]
    return H


def _held_flow(omega, accel, dt):
    """Exact world-frame increments of constant body rate and specific force.

    Returns ``(E, dv, dp)`` with ``E = Exp(omega dt)``, ``dv = int_0^dt E(s) ds a``
    and ``dp = int_0^dt int_0^s E(u) du ds a``; all via matrix exponentials.
    """
    omega, accel = np.broadcast_arrays(np.asarray(omega, float), np.asarray(accel, float))
    dt = np.broadcast_to(np.asarray(dt, dtype=float), omega.shape[:-1])
    M = np.zeros(omega.shape[:-1] + (5, 5))
    M[..., :3, :3] = _hat(omega)
    M[..., :3, 3] = accel
    M[..., 3, 4] = 1.0
    X = expm(M * dt[..., None, None])
    return X[..., :3, :3], X[..., :3, 3], X[..., :3, 4]


def _velocity_integral(omega, dt):
    """``int_0^dt Exp(omega s) ds`` as a matrix."""
    M = np.zeros(omega.shape[:-1] + (6, 6))
    M[..., :3, :3] = _hat(omega) * dt[..., None, None]
    M[..., :3, 3:] = np.eye(3)
    return expm(M)[..., :3, 3:] * dt[..., None, None]


def imu_times(duration, rate):
    if not rate >= MIN_RATE:
        raise UnsupportedRate(f"IMU rate {rate!r} Hz is below the {MIN_RATE:g} Hz minimum")
    n = int(np.floor(duration * rate + 1e-9))
    return np.arange(n + 1) / rate


def synthesize_imu(trajectory, rate, g=GRAVITY, bias=None, noise_std=(0.0, 0.0), *,
                   sampling="increment", rng=None):
    """Sample an IMU stream along ``trajectory``.

    Parameters
    ----------
    sampling : {"increment", "instant"}
        ``"instant"`` reads the analytic body rate and specific force
        ``R_bw (a_w - g e3)`` at each sample time. ``"increment"`` instead
        returns the constant rate and specific force that reproduce the
        trajectory's attitude and velocity at the next sample exactly.
    noise_std : (gyro rad/s, accel m/s^2)
        White Gaussian noise added per axis.

    Returns
    -------
    (measured, true) : tuple of ImuStream
        ``measured`` adds bias and noise to ``true``.
    """
    t = imu_times(trajectory.duration, rate)
    dt = 1.0 / rate
    if sampling == "instant":
        k = trajectory.kinematics(t)
        R_bw = np.swapaxes(k.R_wb, -1, -2)
        omega = k.omega_b
        accel = (R_bw @ (k.acceleration - g * E3)[..., None])[..., 0]
    elif sampling == "increment":
        k = trajectory.kinematics(np.append(t, t[-1] + dt))
        R_bw = np.swapaxes(k.R_wb[:-1], -1, -2)
        rel = R_bw @ k.R_wb[1:]
        omega = Rotation.from_matrix(rel).as_rotvec() / dt
        dv = k.velocity[1:] - k.velocity[:-1] - g * dt * E3
        B = _velocity_integral(omega, np.full(t.size, dt))
        accel = np.linalg.solve(B, (R_bw @ dv[..., None]))[..., 0]
    else:
        raise ValueError(f"unknown sampling {sampling!r}")
    true = ImuStream(t, omega, accel)
    bias = bias or ImuBias()
    gyro_std, accel_std = noise_std
    if rng is None:
        rng = np.random.default_rng(0)
    noise_g = rng.normal(0.0, 1.0, omega.shape) * gyro_std
    noise_a = rng.normal(0.0, 1.0, accel.shape) * accel_std
    measured = ImuStream(t, omega + bias.gyro + noise_g, accel + bias.accel + noise_a)
    return measured, true


class SmoothMotion:
    """Ground-truth poses read from an analytic trajectory."""

    def __init__(self, trajectory):
        self.trajectory = trajectory

    def state(self, t):
        """``(R_wb, position, velocity)`` in the world frame."""
        k = self.trajectory.kinematics(t)
        return k.R_wb, k.position, k.velocity


class PiecewiseMotion:
    """Ground-truth poses from the exact flow of held IMU samples.

    The flow starts from the trajectory's state at the first sample time.
    """

    def __init__(self, trajectory, imu_true, g=GRAVITY):
        self.imu = imu_true
        self.g = g
        k0 = trajectory.kinematics(imu_true.t[:1])
        n = len(imu_true)
        R = np.empty((n, 3, 3))
        p = np.empty((n, 3))
        v = np.empty((n, 3))
        R[0], p[0], v[0] = k0.R_wb[0], k0.position[0], k0.velocity[0]
        E, dv, dp = _held_flow(imu_true.gyro[:-1], imu_true.accel[:-1], np.diff(imu_true.t))
        for k in range(n - 1):
            R[k + 1], p[k + 1], v[k + 1] = self._advance(R[k], p[k], v[k], E[k], dv[k], dp[k], imu_true.t[k + 1] - imu_true.t[k])
        self.R, self.p, self.v = R, p, v

    def _advance(self, R, p, v, E, dv, dp, dt):
        dt = np.asarray(dt)[..., None]
        gw = self.g * E3
        v_next = v + gw * dt + (R @ dv[..., None])[..., 0]
        p_next = p + v * dt + 0.5 * gw * dt**2 + (R @ dp[..., None])[..., 0]
        return R @ E, p_next, v_next

    def state(self, t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        k = np.clip(np.searchsorted(self.imu.t, t, side="right") - 1, 0, len(self.imu) - 1)
        dt = t - self.imu.t[k]
        E, dv, dp = _held_flow(self.imu.gyro[k], self.imu.accel[k], dt)
        return self._advance(self.R[k], self.p[k], self.v[k], E, dv, dp, dt)


@dataclass(frozen=True)
class Rectangle:
    """Axis-aligned rectangle ``x[axis] == offset`` bounded on the other two axes."""

    axis: int
    offset: float
    lo: tuple
    hi: tuple

    def __post_init__(self):
        if self.axis not in (0, 1, 2):
            raise ValueError("axis must be 0, 1 or 2")
        if not np.all(np.asarray(self.hi, float) > np.asarray(self.lo, float)):
            raise ValueError("degenerate rectangle extents")


def box_faces(lo, hi):
    lo, hi = np.asarray(lo, dtype=float), np.asarray(hi, dtype=float)
    if not np.all(hi > lo):
        raise ValueError("degenerate box extents")
    faces = []
    for axis in range(3):
        others = [a for a in range(3) if a != axis]
        for offset in (lo[axis], hi[axis]):
            faces.append(Rectangle(axis, float(offset), tuple(lo[others]), tuple(hi[others])))
    return faces


@dataclass(frozen=True)
class EnvironmentModel:
    """Static scene of axis-aligned rectangles (room walls and box obstacles)."""

    faces: tuple
    max_range: float = 100.0

    @classmethod
    def room(cls, lo, hi, obstacles=(), max_range=100.0):
        faces = box_faces(lo, hi)
        for box_lo, box_hi in obstacles:
            faces.extend(box_faces(box_lo, box_hi))
        return cls(tuple(faces), float(max_range))

    def cast(self, origins, directions):
        """Range to the nearest hit along each ray; NaN where nothing is hit."""
        origins = np.asarray(origins, dtype=float)
        directions = np.asarray(directions, dtype=float)
        best = np.full(origins.shape[0], np.inf)
        for face in self.faces:
            d = directions[:, face.axis]
            with np.errstate(divide="ignore", invalid="ignore"):
                r = (face.offset - origins[:, face.axis]) / d
                hit = origins + r[:, None] * directions
            others = [a for a in range(3) if a != face.axis]
            inside = (
                np.isfinite(r)
                & (r > 1e-9)
                & np.all(hit[:, others] >= np.asarray(face.lo) - 1e-12, axis=1)
                & np.all(hit[:, others] <= np.asarray(face.hi) + 1e-12, axis=1)
            )
            best = np.where(inside & (r < best), r, best)
        best[~(best <= self.max_range)] = np.nan
        return best


def default_environment():
    """A 12 m x 10 m x 5 m room with two pillars."""
    return EnvironmentModel.room(
        (-6.0, -5.0, -3.0),
        (6.0, 5.0, 2.0),
        obstacles=[((2.0, 2.0, -3.0), (2.8, 2.6, 2.0)), ((-3.5, -3.8, -3.0), (-2.5, -3.0, 2.0))],
    )


def _as_motion(motion):
    return SmoothMotion(motion) if isinstance(motion, Trajectory) else motion


def _snap(times, clock):
    k = np.searchsorted(clock, times, side="right") - 1
    if np.any(k < 0):
        raise ValueError("time precedes the clock")
    return clock[k]


def render_sweep(motion, env, t_start, sweep_duration, rays, range_noise_std=0.0, *, index=0,
                 sync="last", ray_clock=None, sync_clock=None, rng=None):
    """Simulate one revolution of a single-beam spinning rangefinder.

    Ray ``l`` fires at ``t_start + l * sweep_duration / rays`` with azimuth
    ``2 pi l / rays`` in the instantaneous body frame. Rays that hit nothing
    are dropped from both outputs.

    Parameters
    ----------
    motion : Trajectory or motion model
    ray_clock : array, optional
        If given, each ray's fire time is snapped to the latest clock tick
        at-or-before it (azimuths are unchanged).
    sync_clock : array, optional
        If given, the truth is expressed at the latest clock tick at-or-before
        the synchronization point's time instead of at that time itself.

    Returns
    -------
    (Sweep, DeskewedSweep)
        The distorted sweep and the same hits expressed in the body frame at
        the synchronization instant.
    """
    motion = _as_motion(motion)
    ell = np.arange(int(rays))
    t = t_start + ell * (sweep_duration / rays)
    if ray_clock is not None:
        t = _snap(t, np.asarray(ray_clock))
    az = 2 * np.pi * ell / rays
    d_body = np.stack([np.cos(az), np.sin(az), np.zeros_like(az)], -1)
    R_wb, p, _ = motion.state(t)
    d_world = (R_wb @ d_body[..., None])[..., 0]
    r = env.cast(p, d_world)
    keep = np.isfinite(r)
    if not np.any(keep):
        raise ValueError("no ray hit the environment")
    t, d_body, r, p, R_wb = t[keep], d_body[keep], r[keep], p[keep], R_wb[keep]
    clean = r[:, None] * d_body
    noise = rng.normal(0.0, range_noise_std, r.shape) if (rng is not None and range_noise_std > 0) else 0.0
    measured = (r + noise)[:, None] * d_body
    kappa = resolve_sync(sync, t.size)
    t_sync = float(t[kappa])
    if sync_clock is not None:
        t_sync = float(_snap(np.array([t_sync]), np.asarray(sync_clock))[0])
    R_s, p_s, _ = motion.state(np.array([t_sync]))
    R_s, p_s = R_s[0], p_s[0]
    # relative pose of each ray instant in the sync frame
    rel_R = R_s.T @ R_wb
    rel_t = (p - p_s) @ R_s
    truth = (rel_R @ clean[..., None])[..., 0] + rel_t
    same = np.all(R_wb == R_s, axis=(-2, -1)) & np.all(p == p_s, axis=-1)
    truth[same] = clean[same]
    return Sweep(t, measured, index), DeskewedSweep(index, truth, t_sync, t)


@dataclass
class GroundTruthBundle:
    """Everything a de-skew run needs, plus the answers."""

    imu: ImuStream
    sweeps: list
    truths: list
    anchors: list
    anchor_times: np.ndarray
    pose_log: dict = field(default_factory=dict)


def anchor_at(motion, t):
    R_wb, _, v = motion.state(np.array([t]))
    R_bw = R_wb[0].T
    return AnchorState(R_bw @ v[0], R_bw)


def generate_bundle(trajectory, env, *, rate, sweep_start, sweep_duration, n_sweeps, rays,
                    g=GRAVITY, bias=None, noise_std=(0.0, 0.0), range_noise_std=0.0,
                    motion="smooth", sampling="increment", sync="last", mode="snap",
                    snap_rays=False):
    """Simulate an IMU stream and ``n_sweeps`` consecutive distorted sweeps.

    All randomness comes from ``trajectory.seed``. With ``mode="snap"`` the
    truth scans are expressed at the IMU sample at-or-before each
    synchronization point (the frame snap-mode de-skewing outputs).
    """
    rng_imu, rng_range = seed_streams(trajectory.seed, 3)[1:]
    measured, true = synthesize_imu(trajectory, rate, g, bias, noise_std, sampling=sampling, rng=rng_imu)
    t_end = sweep_start + n_sweeps * sweep_duration
    if sweep_start < 0 or t_end > measured.t[-1] + 1e-12:
        raise ValueError(
            f"sweeps [{sweep_start}, {t_end}] s exceed the IMU stream [0, {measured.t[-1]}] s"
        )
    if motion == "smooth":
        model = SmoothMotion(trajectory)
    elif motion == "piecewise":
        model = PiecewiseMotion(trajectory, true, g)
    else:
        raise ValueError(f"unknown motion model {motion!r}")
    sweeps, truths, anchors, anchor_times = [], [], [], []
    for m in range(n_sweeps):
        sweep, truth = render_sweep(
            model, env, sweep_start + m * sweep_duration, sweep_duration, rays, range_noise_std,
            index=m, sync=sync,
            ray_clock=measured.t if snap_rays else None,
            sync_clock=measured.t if mode == "snap" else None,
            rng=rng_range,
        )
        i0 = int(np.searchsorted(measured.t, sweep.t_first, side="right")) - 1
        sweeps.append(sweep)
        truths.append(truth)
        anchors.append(anchor_at(model, measured.t[i0]))
        anchor_times.append(measured.t[i0])
    R_wb, p, _ = model.state(measured.t)
    return GroundTruthBundle(
        measured, sweeps, truths, anchors, np.array(anchor_times),
        {"t": measured.t, "R_wb": R_wb, "position": p},
    )
