"""Run configuration: a flat ``key = value`` text format with dotted sections.

Example::

    # geometry (meters)
    anchors.p11 = -51, -100
    noise.sigma = 0.01
    solver.epsilon = 0.05

Omitted keys take the defaults below (the reference experiment). Points are
written ``x, y``. ``#`` starts a comment. Unknown or repeated keys are errors.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from .estimator import SolverConfig
from .measurement import AnchorArray, DEFAULT_ANCHORS
from .simulation import McSpec, TrajectorySpec


class ConfigError(ValueError):
    def __init__(self, message, key=None, line=None):
        self.key = key
        self.line = line
        where = []
        if line is not None:
            where.append(f"line {line}")
        if key is not None:
            where.append(key)
        super().__init__(f"{': '.join(where)}: {message}" if where else message)


def _point(text):
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 2:
        raise ValueError("expected a point 'x, y'")
    return tuple(float(p) for p in parts)


def _int(text):
    value = int(text)
    if str(value) != text.lstrip("+"):
        raise ValueError("expected an integer")
    return value


_KEYS = {
    "seed": _int,
    "output": str,
    "anchors.p11": _point,
    "anchors.p12": _point,
    "anchors.p21": _point,
    "anchors.p22": _point,
    "anchors.spacing": float,
    "bias.b1": float,
    "bias.b2": float,
    "noise.sigma": float,
    "trajectory.start": _point,
    "trajectory.steps": _int,
    "trajectory.dt": float,
    "trajectory.speed_std": float,
    "trajectory.seed": _int,
    "mc.trials": _int,
    "mc.noise_seed_base": _int,
    "solver.epsilon": float,
    "solver.k_max": _int,
    "solver.condition_guard": float,
}

KNOWN_KEYS = tuple(_KEYS)


@dataclass(frozen=True)
class RunConfig:
    """Validated run settings; sub-seeds left as ``None`` derive from ``seed``."""

    anchors: AnchorArray = DEFAULT_ANCHORS
    bias: tuple = (5.0, -5.0)
    sigma: float = 1e-2
    start: tuple = (0.0, 50.0)
    steps: int = 3000
    dt: float = 0.5
    speed_std: float = 0.5
    trials: int = 5000
    solver: SolverConfig = field(default_factory=SolverConfig)
    seed: int = 0
    trajectory_seed: int = None
    noise_seed_base: int = None
    output: str = None

    @property
    def trajectory(self):
        seed = self.seed if self.trajectory_seed is None else self.trajectory_seed
        return TrajectorySpec(start=self.start, steps=self.steps, dt=self.dt,
                              speed_std=self.speed_std, seed=seed)

    @property
    def mc(self):
        base = self.seed + 1 if self.noise_seed_base is None else self.noise_seed_base
        return McSpec(trials=self.trials, noise_seed_base=base, solver=self.solver,
                      bias=self.bias, sigma=self.sigma)

    def with_seed(self, seed):
        return replace(self, seed=seed)


def parse_config(text):
    """Parse and validate config text into a :class:`RunConfig`."""
    values, lines = {}, {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError("expected 'key = value'", line=lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in _KEYS:
            raise ConfigError("unknown key", key=key, line=lineno)
        if key in values:
            raise ConfigError(f"duplicate key (first set on line {lines[key]})", key=key, line=lineno)
        try:
            values[key] = _KEYS[key](value)
        except ValueError as exc:
            raise ConfigError(f"bad value {value!r}: {exc}", key=key, line=lineno) from None
        lines[key] = lineno
    return _build(values, lines)


def load_config(path):
    with open(path) as fh:
        return parse_config(fh.read())


def _build(values, lines):
    def fail(keys, exc):
        # Blame the key whose field the message names, else the first one set.
        keys = (keys,) if isinstance(keys, str) else keys
        named = [k for k in keys if k.rsplit(".", 1)[1] in str(exc)]
        owner = next((k for k in named + list(keys) if k in lines), named[0] if named else keys[0])
        raise ConfigError(str(exc), key=owner, line=lines.get(owner)) from None

    get = values.get
    seed = get("seed", 0)
    keys = ("anchors.p11", "anchors.p12", "anchors.p21", "anchors.p22")
    if any(k in values for k in keys + ("anchors.spacing",)):
        pts = [get(k, getattr(DEFAULT_ANCHORS, k.split(".")[1])) for k in keys]
        spacing = get("anchors.spacing")
        if spacing is None:
            spacing = float(np.hypot(pts[0][0] - pts[1][0], pts[0][1] - pts[1][1]))
        try:
            anchors = AnchorArray(*pts, spacing)
        except ValueError as exc:
            fail(("anchors.spacing",) + keys, exc)
    else:
        anchors = DEFAULT_ANCHORS

    sigma = get("noise.sigma", 1e-2)
    if not (np.isfinite(sigma) and sigma >= 0):
        fail("noise.sigma", ValueError(f"sigma must be finite and >= 0, got {sigma}"))
    bias = (get("bias.b1", 5.0), get("bias.b2", -5.0))
    for key, b in zip(("bias.b1", "bias.b2"), bias):
        if not np.isfinite(b):
            fail(key, ValueError("bias must be finite"))

    traj_fields = {"start": "trajectory.start", "steps": "trajectory.steps", "dt": "trajectory.dt",
                   "speed_std": "trajectory.speed_std"}
    traj = {f: values[k] for f, k in traj_fields.items() if k in values}
    try:
        TrajectorySpec(**traj)
    except ValueError as exc:
        fail(tuple(traj_fields.values()), exc)

    solver_fields = {"epsilon": "solver.epsilon", "k_max": "solver.k_max",
                     "condition_guard": "solver.condition_guard"}
    try:
        solver = SolverConfig(**{f: values[k] for f, k in solver_fields.items() if k in values})
    except ValueError as exc:
        fail(tuple(solver_fields.values()), exc)

    trials = get("mc.trials", 5000)
    if trials < 1:
        fail("mc.trials", ValueError(f"trials must be >= 1, got {trials}"))

    return RunConfig(anchors=anchors, bias=bias, sigma=sigma, trials=trials, solver=solver,
                     seed=seed, trajectory_seed=get("trajectory.seed"),
                     noise_seed_base=get("mc.noise_seed_base"), output=get("output"), **traj)
