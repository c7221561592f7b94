"""Run configuration parsed from YAML.

Every field must be present in the file; nothing is filled in silently.
Validation errors carry the 1-based line of the offending entry.
"""

from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np
import yaml

from .deskew import MODES
from .exceptions import ConfigError
from .preintegration import ImuBias
from .simulation import MIN_RATE, TRAJECTORIES, EnvironmentModel

_TRAJECTORY_PARAMS = {
    "stationary": (),
    "constant_velocity": ("velocity",),
    "straight_then_turn": ("speed", "turn_rate", "switch_time"),
    "figure_eight": ("amplitude", "period", "bank"),
}

EXAMPLE = """\
gravity: 9.80665
imu_rate: 400.0
sweep_start: 0.4
sweep_duration: 0.2
n_sweeps: 2
rays: 4000
range_noise_std: 0.0
motion: smooth
imu_sampling: increment
snap_rays: false
sync_policy: last
deskew_mode: fractional
seed: 7
runs: 20
trajectory:
  kind: straight_then_turn
  duration: 1.0
  speed: 1.0
  turn_rate: 1.5
  switch_time: 0.5
bias:
  accel: [0.0, 0.0, 0.0]
  gyro: [0.0, 0.0, 0.0]
noise:
  gyro_std: 0.0
  accel_std: 0.0
environment:
  room: [[-6.0, -5.0, -3.0], [6.0, 5.0, 2.0]]
  obstacles:
    - [[2.0, 2.0, -3.0], [2.8, 2.6, 2.0]]
    - [[-3.5, -3.8, -3.0], [-2.5, -3.0, 2.0]]
  max_range: 100.0
output_dir: out
"""


@dataclass(frozen=True)
class TrajectorySpec:
    kind: str
    duration: float
    params: dict

    def build(self, seed):
        return TRAJECTORIES[self.kind](duration=self.duration, seed=int(seed), **self.params)


@dataclass(frozen=True)
class RunConfig:
    gravity: float
    imu_rate: float
    sweep_start: float
    sweep_duration: float
    n_sweeps: int
    rays: int
    range_noise_std: float
    motion: str
    imu_sampling: str
    snap_rays: bool
    sync_policy: object
    deskew_mode: str
    seed: int
    runs: int
    trajectory: TrajectorySpec
    bias: ImuBias
    noise_std: tuple
    room: tuple
    obstacles: tuple
    max_range: float
    output_dir: str

    def environment(self):
        return EnvironmentModel.room(self.room[0], self.room[1], self.obstacles, self.max_range)

    def with_overrides(self, **kw):
        return replace(self, **{k: v for k, v in kw.items() if v is not None})

    def to_dict(self):
        d = asdict(self)
        d["bias"] = {"accel": list(self.bias.accel), "gyro": list(self.bias.gyro)}
        return d

    @classmethod
    def from_yaml(cls, path):
        path = Path(path)
        try:
            text = path.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read {path}: {exc.strerror}") from exc
        return parse_config(text)


class _Node:
    """A YAML node with its 1-based line, converted to plain Python lazily."""

    def __init__(self, node):
        self.node = node
        self.line = node.start_mark.line + 1

    def value(self):
        return yaml.safe_load(yaml.serialize(self.node))


def _mapping(node, what):
    if not isinstance(node.node, yaml.MappingNode):
        raise ConfigError(f"{what} must be a mapping", node.line)
    out = {}
    for k, v in node.node.value:
        key = k.value
        if key in out:
            raise ConfigError(f"duplicate key {key!r}", k.start_mark.line + 1)
        out[key] = _Node(v)
    return out


class _Fields:
    def __init__(self, node, what):
        self.items = _mapping(node, what)
        self.line = node.line
        self.what = what
        self.used = set()

    def get(self, key):
        if key not in self.items:
            raise ConfigError(f"{self.what}: missing required field {key!r}", self.line)
        self.used.add(key)
        return self.items[key]

    def finish(self):
        extra = [k for k in self.items if k not in self.used]
        if extra:
            raise ConfigError(f"{self.what}: unknown field {extra[0]!r}", self.items[extra[0]].line)


def _number(node, name, *, positive=False, nonneg=False, integer=False):
    v = node.value()
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{name} must be a number, got {v!r}", node.line)
    if integer and int(v) != v:
        raise ConfigError(f"{name} must be an integer, got {v!r}", node.line)
    if not np.isfinite(v):
        raise ConfigError(f"{name} must be finite", node.line)
    if positive and not v > 0:
        raise ConfigError(f"{name} must be positive, got {v!r}", node.line)
    if nonneg and v < 0:
        raise ConfigError(f"{name} must be non-negative, got {v!r}", node.line)
    return int(v) if integer else float(v)


def _choice(node, name, options):
    v = node.value()
    if v not in options:
        raise ConfigError(f"{name} must be one of {list(options)}, got {v!r}", node.line)
    return v


def _vector(node, name, n=3):
    v = node.value()
    try:
        a = np.asarray(v, dtype=float)
    except (TypeError, ValueError):
        a = None
    if a is None or a.shape != (n,) or not np.all(np.isfinite(a)):
        raise ConfigError(f"{name} must be a list of {n} finite numbers, got {v!r}", node.line)
    return tuple(float(x) for x in a)


def _box(node, name):
    v = node.value()
    try:
        a = np.asarray(v, dtype=float)
    except (TypeError, ValueError):
        a = None
    if a is None or a.shape != (2, 3) or not np.all(np.isfinite(a)):
        raise ConfigError(f"{name} must be [[xmin, ymin, zmin], [xmax, ymax, zmax]]", node.line)
    if not np.all(a[1] > a[0]):
        raise ConfigError(f"{name} has degenerate extents", node.line)
    return tuple(map(tuple, a.tolist()))


def _sync(node):
    v = node.value()
    if v in ("first", "last"):
        return v
    if isinstance(v, int) and not isinstance(v, bool) and v >= 0:
        return v
    raise ConfigError(f"sync_policy must be 'first', 'last' or a point index, got {v!r}", node.line)


def _trajectory(node):
    f = _Fields(node, "trajectory")
    kind = _choice(f.get("kind"), "trajectory.kind", tuple(_TRAJECTORY_PARAMS))
    duration = _number(f.get("duration"), "trajectory.duration", positive=True)
    params = {}
    for name in _TRAJECTORY_PARAMS[kind]:
        sub = f.get(name)
        if name == "velocity":
            params[name] = _vector(sub, f"trajectory.{name}")
        elif name in ("period", "speed"):
            params[name] = _number(sub, f"trajectory.{name}", positive=True)
        elif name in ("switch_time", "bank", "amplitude"):
            params[name] = _number(sub, f"trajectory.{name}", nonneg=name != "bank")
        else:
            params[name] = _number(sub, f"trajectory.{name}")
    f.finish()
    return TrajectorySpec(kind, duration, params), node.line


def parse_config(text):
    """Parse and validate a YAML configuration string into a :class:`RunConfig`."""
    try:
        root = yaml.compose(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(f"invalid YAML: {getattr(exc, 'problem', exc)}",
                          mark.line + 1 if mark else None) from exc
    if root is None:
        raise ConfigError("empty configuration", 1)
    f = _Fields(_Node(root), "config")
    kw = {}
    kw["gravity"] = _number(f.get("gravity"), "gravity", positive=True)
    rate = f.get("imu_rate")
    kw["imu_rate"] = _number(rate, "imu_rate", positive=True)
    if kw["imu_rate"] < MIN_RATE:
        raise ConfigError(f"imu_rate must be at least {MIN_RATE:g} Hz", rate.line)
    kw["sweep_start"] = _number(f.get("sweep_start"), "sweep_start", nonneg=True)
    kw["sweep_duration"] = _number(f.get("sweep_duration"), "sweep_duration", positive=True)
    kw["n_sweeps"] = _number(f.get("n_sweeps"), "n_sweeps", positive=True, integer=True)
    kw["rays"] = _number(f.get("rays"), "rays", positive=True, integer=True)
    kw["range_noise_std"] = _number(f.get("range_noise_std"), "range_noise_std", nonneg=True)
    kw["motion"] = _choice(f.get("motion"), "motion", ("smooth", "piecewise"))
    kw["imu_sampling"] = _choice(f.get("imu_sampling"), "imu_sampling", ("increment", "instant"))
    snap = f.get("snap_rays")
    if not isinstance(snap.value(), bool):
        raise ConfigError("snap_rays must be true or false", snap.line)
    kw["snap_rays"] = snap.value()
    kw["sync_policy"] = _sync(f.get("sync_policy"))
    kw["deskew_mode"] = _choice(f.get("deskew_mode"), "deskew_mode", MODES)
    kw["seed"] = _number(f.get("seed"), "seed", nonneg=True, integer=True)
    kw["runs"] = _number(f.get("runs"), "runs", positive=True, integer=True)
    traj_node = f.get("trajectory")
    kw["trajectory"], traj_line = _trajectory(traj_node)
    end = kw["sweep_start"] + kw["n_sweeps"] * kw["sweep_duration"]
    if end > kw["trajectory"].duration + 1e-9:
        raise ConfigError(
            f"sweeps end at {end:g} s, after the trajectory duration {kw['trajectory'].duration:g} s",
            traj_line,
        )

    b = _Fields(f.get("bias"), "bias")
    kw["bias"] = ImuBias(_vector(b.get("accel"), "bias.accel"), _vector(b.get("gyro"), "bias.gyro"))
    b.finish()
    n = _Fields(f.get("noise"), "noise")
    kw["noise_std"] = (_number(n.get("gyro_std"), "noise.gyro_std", nonneg=True),
                       _number(n.get("accel_std"), "noise.accel_std", nonneg=True))
    n.finish()
    e = _Fields(f.get("environment"), "environment")
    kw["room"] = _box(e.get("room"), "environment.room")
    obs = e.get("obstacles")
    if not isinstance(obs.node, yaml.SequenceNode):
        raise ConfigError("environment.obstacles must be a list", obs.line)
    kw["obstacles"] = tuple(_box(_Node(o), "environment.obstacles entry") for o in obs.node.value)
    kw["max_range"] = _number(e.get("max_range"), "environment.max_range", positive=True)
    e.finish()
    out = f.get("output_dir").value()
    if not isinstance(out, str) or not out:
        raise ConfigError("output_dir must be a non-empty string", f.get("output_dir").line)
    kw["output_dir"] = out
    f.finish()
    return RunConfig(**kw)
