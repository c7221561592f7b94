"""Brute-force reference integrators.

Nothing here touches the closed-form kernels: the RK4 integrator evaluates the
raw right-hand side of the 15-dimensional point/velocity/attitude ODE and the
quadrature builds its rotations through SciPy. These routines are slow on
purpose and exist only to validate the closed forms.
"""

from dataclasses import dataclass

import numpy as np
from scipy.spatial.transform import Rotation

from .exceptions import InvalidInterval


def _hat(w):
    w = np.asarray(w, dtype=float)
    H = np.zeros(w.shape[:-1] + (3, 3))
    H[..., 0, 1], H[..., 0, 2] = -w[..., 2], w[..., 1]
    H[..., 1, 0], H[..., 1, 2] = w[..., 2], -w[..., 0]
    H[..., 2, 0], H[..., 2, 1] = -w[..., 1], w[..., 0]
    return H


@dataclass
class ContinuousState:
    """Point ``P``, body velocity ``V`` and world-to-body rotation ``R``.

    Arrays may carry leading batch dimensions: ``P, V`` are ``(..., 3)`` and
    ``R`` is ``(..., 3, 3)``.
    """

    P: np.ndarray
    V: np.ndarray
    R: np.ndarray

    def stacked(self):
        # rows: P, V, R_1, R_2, R_3 (the columns of R)
        R = np.asarray(self.R, dtype=float)
        return np.concatenate(
            [np.asarray(self.P, dtype=float)[..., None, :], np.asarray(self.V, dtype=float)[..., None, :],
             np.swapaxes(R, -1, -2)],
            axis=-2,
        )

    @classmethod
    def from_stacked(cls, X):
        return cls(X[..., 0, :].copy(), X[..., 1, :].copy(), np.swapaxes(X[..., 2:, :], -1, -2).copy())


def _rhs(X, W, accel, g):
    # d/dt x = -w^ x for every row; as row vectors that is x @ w^
    dX = X @ W
    dX[..., 0, :] -= X[..., 1, :]
    dX[..., 1, :] += g * X[..., 4, :] + accel
    return dX


def _rk4(X, omega, accel, g, duration, substep):
    if not duration > 0:
        raise InvalidInterval(f"duration must be positive, got {duration!r}")
    if not 0 < substep <= duration * (1 + 1e-12):
        raise InvalidInterval(f"substep {substep!r} must lie in (0, duration]")
    n = int(np.ceil(duration / substep - 1e-9))
    h = duration / n
    W = _hat(omega)
    accel = np.asarray(accel, dtype=float)
    for _ in range(n):
        k1 = _rhs(X, W, accel, g)
        k2 = _rhs(X + 0.5 * h * k1, W, accel, g)
        k3 = _rhs(X + 0.5 * h * k2, W, accel, g)
        k4 = _rhs(X + h * k3, W, accel, g)
        X = X + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return X


def rk4_propagate(state, omega, accel, g, duration, substep):
    """Classical RK4 on the continuous dynamics with constant inputs."""
    X = _rk4(state.stacked(), omega, accel, g, duration, substep)
    return ContinuousState.from_stacked(X)


def _orthonormalize_rows(X):
    Rt = X[..., 2:, :]
    U, _, Vt = np.linalg.svd(Rt)
    X = X.copy()
    X[..., 2:, :] = U @ Vt
    return X


def rk4_switched(state, imu, g, substep, bias=None):
    """RK4 across an IMU stream, holding each sample's inputs over its interval.

    ``imu`` is an :class:`~imudeskew.preintegration.ImuStream`; its rotation
    columns are projected back to orthonormal after every interval.
    """
    return rk4_switched_batch(state, imu.t, imu.gyro, imu.accel, g, substep, bias)


def rk4_switched_batch(state, t, gyro, accel, g, substep, bias=None):
    """Batched :func:`rk4_switched` sharing one time grid.

    ``gyro`` and ``accel`` are ``(..., n, 3)`` with the same leading shape as
    the state arrays.
    """
    t = np.asarray(t, dtype=float)
    gyro = np.asarray(gyro, dtype=float)
    accel = np.asarray(accel, dtype=float)
    if bias is not None:
        gyro = gyro - bias.gyro
        accel = accel - bias.accel
    X = state.stacked()
    for k, dt in enumerate(np.diff(t)):
        X = _rk4(X, gyro[..., k, :], accel[..., k, :], g, dt, min(substep, dt))
        X = _orthonormalize_rows(X)
    return ContinuousState.from_stacked(X)


def _simpson_weights(n):
    if n < 2 or n % 2:
        raise ValueError("Simpson's rule needs an even number (>= 2) of intervals")
    w = np.ones(n + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w / (3.0 * n)


def _nested_simpson(kernel_argument, omega, varsigma, nodes, chunk=64):
    # (1/s^2) int_0^s int_0^tau Exp(omega * r(tau, u)) du dtau on the unit square
    nodes = int(nodes) + int(nodes) % 2
    w = _simpson_weights(nodes)
    grid = np.linspace(0.0, 1.0, nodes + 1)
    omega = np.asarray(omega, dtype=float)
    total = np.zeros((3, 3))
    for start in range(0, nodes + 1, chunk):
        tau = grid[start:start + chunk]
        u = tau[:, None] * grid[None, :]
        r = kernel_argument(tau[:, None], u) * varsigma
        mats = Rotation.from_rotvec((r[..., None] * omega).reshape(-1, 3)).as_matrix()
        mats = mats.reshape(r.shape + (3, 3))
        inner = np.einsum("j,ijkl->ikl", w, mats) * tau[:, None, None]
        total += np.einsum("i,ikl->kl", w[start:start + chunk], inner)
    return total


def quadrature_forcing(omega, varsigma, nodes=1000):
    """Forcing kernel ``(1/s^2) int_0^s int_0^tau Exp(omega (s - tau + u)) du dtau``.

    This is the specific-force double integral of one interval of length
    ``varsigma`` and equals ``upsilon(omega * varsigma)``.
    """
    return _nested_simpson(lambda tau, u: 1.0 - tau + u, omega, varsigma, nodes)


def quadrature_double_integral(omega, varsigma, nodes=1000):
    """``(1/s^2) int_0^s int_0^tau Exp(-omega u) du dtau``; equals ``lambda_kernel(-omega * varsigma)``."""
    return _nested_simpson(lambda tau, u: -u, omega, varsigma, nodes)
