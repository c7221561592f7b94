import numpy as np
import pytest

from imudeskew.preintegration import GRAVITY, AnchorState, ImuStream
from imudeskew.so3 import exp_so3


def random_thetas(rng, n, lo=1e-10, hi=3.0):
    """Random rotation vectors with log-uniform norms in [lo, hi]."""
    axis = rng.normal(size=(n, 3))
    axis /= np.linalg.norm(axis, axis=1, keepdims=True)
    norms = np.exp(rng.uniform(np.log(lo), np.log(hi), n))
    return axis * norms[:, None]


def random_rotation(rng):
    return exp_so3(random_thetas(rng, 1, 0.1, 3.0)[0])


def random_anchor(rng, speed=2.0):
    return AnchorState(rng.normal(scale=speed, size=3), random_rotation(rng))


def random_stream(rng, n, rate=400.0, gyro=1.0, accel=3.0, jitter=0.0, R0=None, t0=0.0):
    """IMU stream of ``n`` samples with random rates and roughly gravity-balanced specific force."""
    dt = np.full(n - 1, 1.0 / rate)
    if jitter:
        dt *= 1.0 + rng.uniform(-jitter, jitter, n - 1)
    t = t0 + np.concatenate([[0.0], np.cumsum(dt)])
    R3 = np.array([0.0, 0.0, 1.0]) if R0 is None else R0[:, 2]
    w = rng.normal(scale=gyro, size=(n, 3))
    a = rng.normal(scale=accel, size=(n, 3)) - GRAVITY * R3
    return ImuStream(t, w, a)


def stationary_stream(R, duration=1.0, rate=400.0, t0=0.0, g=GRAVITY):
    n = int(round(duration * rate)) + 1
    t = t0 + np.arange(n) / rate
    return ImuStream(t, np.zeros((n, 3)), np.tile(-g * R[:, 2], (n, 1)))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    import test_acceptance

    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for k in sorted(test_acceptance.RESULTS):
            terminalreporter.write_line(test_acceptance.RESULTS[k])
