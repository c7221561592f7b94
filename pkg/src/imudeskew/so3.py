"""Closed-form SO(3) kernels used by the body-frame point pre-integration.

All kernels accept a rotation increment ``theta`` of shape ``(..., 3)`` and
return matrices of shape ``(..., 3, 3)``. Each kernel has the form

    K(theta) = d * I + a(|theta|) * theta^ + b(|theta|) * (theta^)^2

and the scalar coefficients are evaluated by their Taylor series near zero,
where the closed forms lose precision to cancellation.

Series identities (``n`` runs over the powers of ``theta^``)::

    exp_so3(theta)        = sum (theta^)^n / n!
    right_jacobian(theta) = sum (theta^)^n / (n+1)!
    upsilon(theta)        = sum (n+1) (theta^)^n / (n+2)!
    lambda_kernel(theta)  = sum (theta^)^n / (n+2)!
"""

from math import factorial, pi

import numpy as np
from numpy.polynomial import polynomial as P
from scipy.spatial.transform import Rotation

from .exceptions import InvalidRotationIncrement

#: Below this angle (rad) every coefficient uses its series truncated at |theta|^4.
SMALL_ANGLE = 1e-4
# Coefficients whose closed form cancels to O(|theta|^3) keep the (long) series
# up to this angle; above it the closed form is accurate to round-off.
_CANCELLATION_CUTOFF = 1.0
_N_TERMS = 14


def _series(sign_and_term):
    return np.array([(-1) ** k * sign_and_term(k) for k in range(_N_TERMS)])


# coefficient of x^(2k) in each scalar function of x = |theta|
_SINC = _series(lambda k: 1.0 / factorial(2 * k + 1))              # s / x
_COSC = _series(lambda k: 1.0 / factorial(2 * k + 2))              # (1 - c) / x^2
_SINC3 = _series(lambda k: 1.0 / factorial(2 * k + 3))             # (x - s) / x^3
_UPS1 = _series(lambda k: (2 * k + 2) / factorial(2 * k + 3))      # (s - x c) / x^3
_UPS2 = _series(lambda k: (2 * k + 3) / factorial(2 * k + 4))      # (1 - c + x^2/2 - x s) / x^4
_COSC4 = _series(lambda k: 1.0 / factorial(2 * k + 4))             # (c - 1 + x^2/2) / x^4


def _coefficient(x, series, closed, cutoff=SMALL_ANGLE):
    x = np.asarray(x, dtype=float)
    x2 = x * x
    out = np.empty_like(x)
    small = x < SMALL_ANGLE
    out[small] = P.polyval(x2[small], series[:3])
    mid = ~small & (x < cutoff)
    out[mid] = P.polyval(x2[mid], series)
    big = x >= cutoff
    xb = x[big]
    out[big] = closed(xb, np.sin(xb), np.cos(xb))
    return out


def _one_minus_cos(x):
    return 2.0 * np.sin(0.5 * x) ** 2


def _a_exp(x):
    return _coefficient(x, _SINC, lambda x, s, c: s / x)


def _b_exp(x):
    return _coefficient(x, _COSC, lambda x, s, c: _one_minus_cos(x) / x**2)


def _b_jac(x):
    return _coefficient(x, _SINC3, lambda x, s, c: (x - s) / x**3, _CANCELLATION_CUTOFF)


def _a_ups(x):
    return _coefficient(x, _UPS1, lambda x, s, c: (s - x * c) / x**3, _CANCELLATION_CUTOFF)


def _b_ups(x):
    return _coefficient(
        x,
        _UPS2,
        lambda x, s, c: (_one_minus_cos(x) + 0.5 * x**2 - x * s) / x**4,
        _CANCELLATION_CUTOFF,
    )


def _b_lam(x):
    return _coefficient(
        x, _COSC4, lambda x, s, c: (0.5 * x**2 - _one_minus_cos(x)) / x**4, _CANCELLATION_CUTOFF
    )


def skew(omega):
    """Return the antisymmetric matrix ``w^`` with ``w^ @ v == cross(w, v)``.

    Works on a single 3-vector or any stack of them.
    """
    omega = np.asarray(omega, dtype=float)
    if omega.shape[-1] != 3:
        raise ValueError(f"expected trailing dimension 3, got shape {omega.shape}")
    x, y, z = omega[..., 0], omega[..., 1], omega[..., 2]
    zero = np.zeros_like(x)
    return np.stack(
        [
            np.stack([zero, -z, y], axis=-1),
            np.stack([z, zero, -x], axis=-1),
            np.stack([-y, x, zero], axis=-1),
        ],
        axis=-2,
    )


def as_rotation_increment(theta):
    """Validate a rotation increment and return it as a float array.

    Raises
    ------
    InvalidRotationIncrement
        If any component is non-finite or any increment has norm >= pi.
    """
    theta = np.asarray(theta, dtype=float)
    if theta.ndim == 0 or theta.shape[-1] != 3:
        raise InvalidRotationIncrement(f"rotation increment must have shape (..., 3), got {theta.shape}")
    if not np.all(np.isfinite(theta)):
        raise InvalidRotationIncrement("rotation increment has non-finite components")
    norm = np.linalg.norm(theta, axis=-1)
    if np.any(norm >= pi):
        raise InvalidRotationIncrement(
            f"rotation increment norm {float(np.max(norm)):.6g} rad is not below pi"
        )
    return theta


def _assemble(theta, diag, a, b):
    K = skew(theta)
    K2 = K @ K
    eye = np.broadcast_to(np.eye(3), K.shape)
    return diag * eye + a[..., None, None] * K + b[..., None, None] * K2


def exp_so3(theta):
    """Exponential map (Rodrigues formula)."""
    theta = as_rotation_increment(theta)
    x = np.linalg.norm(theta, axis=-1)
    return _assemble(theta, 1.0, _a_exp(x), _b_exp(x))


def right_jacobian(theta):
    """``I + (1-c)/x^2 theta^ + (x-s)/x^3 (theta^)^2``.

    This is the integral ``(1/T) int_0^T exp(omega^ t) dt`` with
    ``theta = omega T``; it satisfies ``exp_so3(theta) @ right_jacobian(-theta)
    == right_jacobian(theta)``.
    """
    theta = as_rotation_increment(theta)
    x = np.linalg.norm(theta, axis=-1)
    return _assemble(theta, 1.0, _b_exp(x), _b_jac(x))


def upsilon(theta):
    """Double-integral kernel of the constant specific-force forcing term.

    ``upsilon(theta) == (1/T^2) int_0^T t exp(omega^ t) dt`` with
    ``theta = omega T``; ``upsilon(0) == I/2``.
    """
    theta = as_rotation_increment(theta)
    x = np.linalg.norm(theta, axis=-1)
    return _assemble(theta, 0.5, _a_ups(x), _b_ups(x))


def lambda_kernel(theta):
    """``exp_so3(theta) @ upsilon(-theta)``, evaluated in closed form.

    Closed form: ``I/2 + (x-s)/x^3 theta^ + (2c-2+x^2)/(2 x^4) (theta^)^2``.
    """
    theta = as_rotation_increment(theta)
    x = np.linalg.norm(theta, axis=-1)
    return _assemble(theta, 0.5, _b_jac(x), _b_lam(x))


def log_so3(R):
    """Rotation vector of a rotation matrix (any angle up to pi)."""
    R = np.asarray(R, dtype=float)
    return Rotation.from_matrix(R.reshape(-1, 3, 3)).as_rotvec().reshape(R.shape[:-2] + (3,))


def project_to_rotation(R):
    """Nearest rotation matrix in the Frobenius sense."""
    U, _, Vt = np.linalg.svd(R)
    D = np.ones(U.shape[:-1])
    D[..., -1] = np.sign(np.linalg.det(U @ Vt))
    return (U * D[..., None, :]) @ Vt


def orthonormality_error(R):
    """Max-abs entry of ``R^T R - I``."""
    R = np.asarray(R, dtype=float)
    return float(np.max(np.abs(np.swapaxes(R, -1, -2) @ R - np.eye(3))))
