"""Random-walk trajectories and Monte-Carlo evaluation of the tracker against the bounds."""

import json
from dataclasses import dataclass, field, asdict

import numpy as np

from .crlb import crlb_trajectory
from .estimator import SolverConfig, advance, start
from .measurement import BIAS_MATRIX, MeasurementFrame, NoiseSpec, range_vector, synthesize_run


@dataclass(frozen=True)
class TrajectorySpec:
    start: tuple = (0.0, 50.0)
    steps: int = 3000
    dt: float = 0.5
    speed_std: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if int(self.steps) != self.steps or self.steps < 1:
            raise ValueError(f"steps must be an integer >= 1, got {self.steps}")
        if not self.dt > 0:
            raise ValueError(f"dt must be > 0, got {self.dt}")
        if not self.speed_std >= 0:
            raise ValueError(f"speed_std must be >= 0, got {self.speed_std}")

    @property
    def step_std(self):
        """Per-axis displacement std between samples (speed std times interval)."""
        return self.speed_std * self.dt


@dataclass(frozen=True)
class McSpec:
    trials: int = 5000
    noise_seed_base: int = 1
    solver: SolverConfig = field(default_factory=SolverConfig)
    bias: tuple = (5.0, -5.0)
    sigma: float = 1e-2

    def __post_init__(self):
        if int(self.trials) != self.trials or self.trials < 1:
            raise ValueError(f"trials must be an integer >= 1, got {self.trials}")
        if not self.sigma >= 0:
            raise ValueError(f"sigma must be >= 0, got {self.sigma}")


@dataclass
class McReport:
    pos_rmse: np.ndarray
    bias_rmse: np.ndarray        # (N, 2)
    pos_crlb_root: np.ndarray
    bias_crlb_root: np.ndarray   # (N, 2)
    flagged: np.ndarray          # per step: trials not converged
    metadata: dict
    errors: dict = None          # per-trial squared errors, when kept

    def __len__(self):
        return len(self.pos_rmse)

    def to_json(self):
        """Lossless JSON text (floats keep their shortest round-trip repr)."""
        data = {
            "pos_rmse": self.pos_rmse.tolist(),
            "bias_rmse": self.bias_rmse.tolist(),
            "pos_crlb_root": self.pos_crlb_root.tolist(),
            "bias_crlb_root": self.bias_crlb_root.tolist(),
            "flagged": self.flagged.tolist(),
            "metadata": self.metadata,
        }
        return json.dumps(data, sort_keys=True)

    @classmethod
    def from_json(cls, text):
        data = json.loads(text)
        return cls(
            pos_rmse=np.array(data["pos_rmse"], dtype=float),
            bias_rmse=np.array(data["bias_rmse"], dtype=float).reshape(-1, 2),
            pos_crlb_root=np.array(data["pos_crlb_root"], dtype=float),
            bias_crlb_root=np.array(data["bias_crlb_root"], dtype=float).reshape(-1, 2),
            flagged=np.array(data["flagged"], dtype=int),
            metadata=data["metadata"],
        )


def generate_trajectory(spec):
    """``(N, 2)`` positions; increments are iid per-axis normals of std ``speed_std * dt``."""
    steps = np.random.default_rng(spec.seed).standard_normal((spec.steps - 1, 2)) * spec.step_std
    out = np.empty((spec.steps, 2))
    out[0] = spec.start
    out[1:] = np.asarray(spec.start, dtype=float) + np.cumsum(steps, axis=0)
    return out


def run_trial(trajectory, anchors, bias, sigma, trial_seed, solver=SolverConfig()):
    """One tracking run over a shared trajectory; returns the per-step results.

    Geometry failures do not stop the run; they show up in the result flags.
    """
    z = synthesize_run(trajectory, anchors, bias, NoiseSpec(sigma, trial_seed))
    state, result = start(MeasurementFrame(z[0], 1), anchors, solver)
    results = [result]
    for k in range(2, len(z) + 1):
        state, result = advance(state, MeasurementFrame(z[k - 1], k), anchors, solver)
        results.append(result)
    return results


def _noise_chunks(seeds, n_steps, chunk):
    gens = [np.random.default_rng(s) for s in seeds]
    for lo in range(0, n_steps, chunk):
        hi = min(n_steps, lo + chunk)
        yield lo, np.stack([g.standard_normal((hi - lo, 4)) for g in gens], axis=1)


def run_monte_carlo(traj_spec, anchors, mc_spec, keep_errors=False, chunk=256):
    """RMSE of position and biases over ``trials`` noise realizations of one trajectory.

    Trial ``m`` uses noise seed ``noise_seed_base + m``; all trials run in
    lockstep as one batch, so the result does not depend on scheduling.
    """
    traj = generate_trajectory(traj_spec)
    n, m = len(traj), mc_spec.trials
    bias = np.asarray(mc_spec.bias, dtype=float)
    clean = range_vector(traj, anchors) + bias @ BIAS_MATRIX.T
    seeds = [mc_spec.noise_seed_base + i for i in range(m)]

    pos_ms = np.empty(n)
    bias_ms = np.empty((n, 2))
    if keep_errors:
        errors = {"pos_sq": np.empty((n, m)), "bias_sq": np.empty((n, m, 2))}
    flagged = np.zeros(n, dtype=int)
    state = None
    for lo, noise in _noise_chunks(seeds, n, chunk):
        for j in range(noise.shape[0]):
            k = lo + j + 1
            z = clean[k - 1] + mc_spec.sigma * noise[j]
            frame = MeasurementFrame(z, k)
            if state is None:
                state, res = start(frame, anchors, mc_spec.solver)
            else:
                state, res = advance(state, frame, anchors, mc_spec.solver)
            e = res.position - traj[k - 1]
            pos_sq = np.sum(e * e, axis=-1)
            bias_sq = (res.bias - bias) ** 2
            pos_ms[k - 1] = np.mean(pos_sq)
            bias_ms[k - 1] = np.mean(bias_sq, axis=0)
            if keep_errors:
                errors["pos_sq"][k - 1] = pos_sq
                errors["bias_sq"][k - 1] = bias_sq
            flagged[k - 1] = np.count_nonzero(~res.converged)

    bounds = crlb_trajectory(traj, anchors, mc_spec.sigma) if mc_spec.sigma > 0 else None
    if bounds is None:
        pos_root = np.zeros(n)
        bias_root = np.zeros((n, 2))
    else:
        pos_root = np.sqrt(bounds.pos)
        bias_root = np.sqrt(np.stack([bounds.bias1, bounds.bias2], axis=-1))
    # JSON-native so the report survives serialization unchanged.
    metadata = json.loads(json.dumps({
        "trajectory": asdict(traj_spec),
        "mc": asdict(mc_spec),
        "anchors": asdict(anchors),
    }))
    return McReport(
        pos_rmse=np.sqrt(pos_ms),
        bias_rmse=np.sqrt(bias_ms),
        pos_crlb_root=pos_root,
        bias_crlb_root=bias_root,
        flagged=flagged,
        metadata=metadata,
        errors=errors if keep_errors else None,
    )
