"""Input checks shared by the estimator wrappers."""

import numpy as np
from sklearn.utils.validation import check_array

from .exceptions import NonMonotoneTimestamps
from .preintegration import AnchorState, ImuStream


def check_imu_array(X):
    """Validate an ``(n, 7)`` array of ``t, wx, wy, wz, ax, ay, az`` rows."""
    if isinstance(X, ImuStream):
        return X
    X = check_array(X, dtype=np.float64, ensure_min_samples=2)
    if X.shape[1] != 7:
        raise ValueError(f"IMU array must have 7 columns (t, wx, wy, wz, ax, ay, az), got {X.shape[1]}")
    return ImuStream.from_array(X)


def check_sweep_array(X):
    """Validate an ``(n, 4)`` array of ``t, x, y, z`` rows with non-decreasing ``t``."""
    X = check_array(X, dtype=np.float64)
    if X.shape[1] != 4:
        raise ValueError(f"sweep array must have 4 columns (t, x, y, z), got {X.shape[1]}")
    if np.any(np.diff(X[:, 0]) < 0):
        raise NonMonotoneTimestamps("sweep timestamps must be non-decreasing")
    return X


def check_anchor(anchor):
    """Accept an :class:`AnchorState` or a ``(velocity, rotation)`` pair."""
    if anchor is None:
        raise ValueError("an anchor state (body velocity, world-to-body rotation) is required")
    if isinstance(anchor, AnchorState):
        return anchor
    velocity, rotation = anchor
    return AnchorState(velocity, rotation)


def check_vector3(v, name):
    v = np.zeros(3) if v is None else np.asarray(v, dtype=float)
    if v.shape != (3,) or not np.all(np.isfinite(v)):
        raise ValueError(f"{name} must be a finite 3-vector")
    return v
