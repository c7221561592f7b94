"""IMU-driven de-skewing of spinning LiDAR sweeps.

A static point observed from a moving body obeys a switched linear ODE driven
by the IMU. This package pre-integrates that ODE in closed form and uses it to
move every point of a sweep into the body frame of one synchronization point.
"""

__version__ = "0.1.0"

from .deskew import (
    DeskewedSweep,
    Metrics,
    Sweep,
    deskew,
    deskew_linear_baseline,
    evaluate,
    improvement_percentage,
    sweep_transform,
)
from .estimators import ImuDeskewer, LinearInterpolationDeskewer
from .exceptions import (
    CardinalityMismatch,
    ConfigError,
    DeskewError,
    FormatError,
    ImuCoverageGap,
    InvalidInterval,
    InvalidRotationIncrement,
    NonMonotoneTimestamps,
    UnsupportedRate,
)
from .preintegration import (
    GRAVITY,
    AnchorState,
    ImuBias,
    ImuSample,
    ImuStream,
    PreintegratedSegment,
    RigidTransform,
    accumulate,
    finalize_transform,
    invert,
    propagate_anchor,
    step_point,
)
from .so3 import exp_so3, lambda_kernel, right_jacobian, skew, upsilon

__all__ = [
    "GRAVITY", "AnchorState", "CardinalityMismatch", "ConfigError", "DeskewError", "DeskewedSweep",
    "FormatError", "ImuBias", "ImuCoverageGap", "ImuDeskewer", "ImuSample", "ImuStream",
    "InvalidInterval", "InvalidRotationIncrement", "LinearInterpolationDeskewer", "Metrics",
    "NonMonotoneTimestamps", "PreintegratedSegment", "RigidTransform", "Sweep", "UnsupportedRate",
    "accumulate", "deskew", "deskew_linear_baseline", "evaluate", "exp_so3", "finalize_transform",
    "improvement_percentage", "invert", "lambda_kernel", "propagate_anchor", "right_jacobian",
    "skew", "step_point", "sweep_transform", "upsilon",
]
