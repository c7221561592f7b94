"""Scikit-learn style wrappers around the functional de-skewing core.

``fit`` takes the IMU stream (an ``(n, 7)`` array) plus the anchor state at
its first sample; ``transform`` takes one sweep as an ``(m, 4)`` array of
``t, x, y, z`` rows and returns the de-skewed ``(m, 3)`` coordinates.

Examples
--------
>>> est = ImuDeskewer(mode="fractional").fit(imu_array, anchor=(v0, R0))  # doctest: +SKIP
>>> points = est.transform(sweep_array)  # doctest: +SKIP
"""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .deskew import Sweep, _check_mode, deskew, deskew_linear_baseline
from .exceptions import ImuCoverageGap
from .preintegration import GRAVITY, AnchorState, ImuBias, anchor_table
from .validation import check_anchor, check_imu_array, check_sweep_array, check_vector3


class _DeskewerBase(TransformerMixin, BaseEstimator):
    def __init__(self, gravity=GRAVITY, mode="snap", accel_bias=None, gyro_bias=None):
        self.gravity = gravity
        self.mode = mode
        self.accel_bias = accel_bias
        self.gyro_bias = gyro_bias

    def _bias(self):
        return ImuBias(check_vector3(self.accel_bias, "accel_bias"), check_vector3(self.gyro_bias, "gyro_bias"))

    def fit(self, X, y=None, anchor=None):
        """Store the IMU stream and propagate the anchor to every sample.

        Parameters
        ----------
        X : array of shape (n_samples, 7)
        y : ignored
        anchor : AnchorState or (velocity, rotation)
            State at the first IMU sample.
        """
        _check_mode(self.mode)
        if not (np.isfinite(self.gravity) and self.gravity > 0):
            raise ValueError("gravity must be positive")
        self.imu_ = check_imu_array(X)
        self.bias_ = self._bias()
        self.velocities_, self.rotations_ = anchor_table(self.imu_, check_anchor(anchor), self.bias_, self.gravity)
        self.n_features_in_ = 7
        return self

    def _anchor_for(self, sweep):
        i0 = int(np.searchsorted(self.imu_.t, sweep.t_first, side="right")) - 1
        if i0 < 0:
            raise ImuCoverageGap("IMU stream starts after the sweep", sweep_index=sweep.index)
        return AnchorState(self.velocities_[i0], self.rotations_[i0])

    def _deskew(self, sweep, anchor):
        raise NotImplementedError

    def transform(self, X):
        """De-skew one sweep given as ``(m, 4)`` rows of ``t, x, y, z``."""
        check_is_fitted(self, "imu_")
        X = check_sweep_array(X)
        sweep = Sweep(X[:, 0], X[:, 1:])
        out = self._deskew(sweep, self._anchor_for(sweep))
        self.sync_time_ = out.sync_time
        return out.points


class ImuDeskewer(_DeskewerBase):
    """Piecewise IMU de-skewing with a configurable synchronization point.

    Parameters
    ----------
    gravity : float
    mode : {"snap", "fractional"}
    sync : {"last", "first"} or int
    accel_bias, gyro_bias : array-like of shape (3,), optional
    """

    def __init__(self, gravity=GRAVITY, mode="snap", sync="last", accel_bias=None, gyro_bias=None):
        super().__init__(gravity, mode, accel_bias, gyro_bias)
        self.sync = sync

    def _deskew(self, sweep, anchor):
        return deskew(sweep, self.imu_, anchor, bias=self.bias_, sync=self.sync, mode=self.mode, g=self.gravity)


class LinearInterpolationDeskewer(_DeskewerBase):
    """Baseline: interpolate the whole-sweep transform linearly in time (sync at the last point)."""

    def _deskew(self, sweep, anchor):
        return deskew_linear_baseline(sweep, self.imu_, anchor, bias=self.bias_, mode=self.mode, g=self.gravity)
