"""Joint position / clock-bias tracking with a time-recursive Gauss-Newton solver.

At every step the four biased ranges are linearized around the current
position guess. A Householder QR of the ``4 x 2`` Jacobian splits the
linearized equations into a part that pins the position given the biases
(``R_k, F_k, r_k``) and a part that only sees the biases (``G_k, s_k``).
The bias-only rows of all past steps are folded into a ``2 x 2`` triangular
factor ``T_k`` by one more small orthogonal update, so the cost and memory
per step stay constant.

Everything here takes an optional leading batch shape: a state built from
frames with ``z.shape == (M, 4)`` tracks ``M`` independent trials in lockstep.
Elements never interact, so a batch is equivalent to ``M`` separate runs.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from .linalg import householder_qr, apply_qt, singular_pivots, solve_upper_triangular
from .measurement import BIAS_MATRIX, MeasurementFrame


class InvalidRange(ValueError):
    pass


class ParallelBearings(ValueError):
    pass


class DegenerateGeometry(ValueError):
    pass


class GeometryIllConditioned(ArithmeticError):
    pass


class NotAvailable(LookupError):
    pass


@dataclass(frozen=True)
class SolverConfig:
    epsilon: float = 0.05
    k_max: int = 5
    condition_guard: float = 1e8

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be > 0, got {self.epsilon}")
        if int(self.k_max) != self.k_max or self.k_max < 1:
            raise ValueError(f"k_max must be an integer >= 1, got {self.k_max}")
        if not self.condition_guard > 1:
            raise ValueError(f"condition_guard must be > 1, got {self.condition_guard}")


@dataclass(frozen=True)
class AoaEstimate:
    """Angles (radians, in ``[0, pi]``) between the target direction and each receiver's baseline."""

    alpha11: np.ndarray
    alpha21: np.ndarray


@dataclass(frozen=True)
class StepRecord:
    """Per-step quantities kept only when history retention is on."""

    k: int
    x_lin: np.ndarray
    R: np.ndarray
    F: np.ndarray
    r: np.ndarray
    G: np.ndarray
    s: np.ndarray


@dataclass(frozen=True)
class StepResult:
    k: int
    position: np.ndarray
    bias: np.ndarray
    iterations: np.ndarray
    converged: np.ndarray
    bias_held: np.ndarray
    ill_conditioned: np.ndarray


@dataclass(frozen=True)
class EstimatorState:
    """Carried quantities of the recursion after step ``k``.

    ``residual_sq`` accumulates the squared norm of the bias-only residual
    components rotated out of ``T``; it never decreases.
    """

    k: int
    t: np.ndarray
    s_hat: np.ndarray
    residual_sq: np.ndarray
    position: np.ndarray
    bias: np.ndarray
    snapshot_t: np.ndarray = None
    snapshot_s_hat: np.ndarray = None
    history: tuple = None

    @property
    def batch_shape(self):
        return self.position.shape[:-1]


@dataclass
class OpCounter:
    """Tally of arithmetic operations and square roots, summed over passes and batch elements.

    Counts are intrinsic to the algorithm (reflectors touch only their active
    rows), not a trace of numpy calls.
    """

    flops: int = 0
    sqrts: int = 0
    passes: int = 0
    by_stage: dict = field(default_factory=dict)

    def add_pass(self, first_step, n=1):
        for stage, (f, s) in pass_cost(first_step).items():
            tf, ts = self.by_stage.get(stage, (0, 0))
            self.by_stage[stage] = (tf + n * f, ts + n * s)
            self.flops += n * f
            self.sqrts += n * s
        self.passes += n


def _qr_cost(m, n, p):
    # Householder QR of an m x n block plus application to p extra columns.
    flops = sqrts = 0
    for j in range(n):
        L = m - j
        W = n - j - 1 + p
        flops += L + (2 * L - 1) + 1 + (2 * L - 1) + L + 1 + 4 * L * W
        sqrts += 2
    return flops, sqrts


def pass_cost(first_step):
    """Operation count of one Gauss-Newton pass, keyed by stage."""
    stack_rows = 2 if first_step else 4
    return {
        "jacobian": (4 * 7, 4),
        "qr_jacobian": _qr_cost(4, 2, 0),
        "rotate_data": (4 + _qr_cost(4, 2, 3)[0] - _qr_cost(4, 2, 0)[0], 0),
        "bias_update": (_qr_cost(stack_rows, 2, 1)[0] + 4 + 8, _qr_cost(stack_rows, 2, 1)[1]),
        "position_solve": (8 + 4 + 2 + 3, 0),
    }


def aoa_from_frame(frame, anchors):
    """Angle of arrival at the first antenna of each receiver from one frame."""
    z = frame.z
    a = anchors.spacing
    alphas = []
    for i, (c1, c2) in enumerate([(0, 1), (2, 3)], start=1):
        z1 = z[..., c1]
        if np.any(z1 <= 0):
            raise InvalidRange(f"range z{i}1 must be positive, got {np.min(z1)!r}")
        dz = z1 - z[..., c2]
        arg = (a * a - dz * dz + 2.0 * z1 * dz) / (2.0 * z1 * a)
        alphas.append(np.arccos(np.clip(arg, -1.0, 1.0)))
    return AoaEstimate(*alphas)


def _baseline_angles(anchors):
    p = anchors.positions
    return (np.arctan2(p[1, 1] - p[0, 1], p[1, 0] - p[0, 0]),
            np.arctan2(p[3, 1] - p[2, 1], p[3, 0] - p[2, 0]))


def _intersect(aoa, anchors):
    # Bearings are measured counter-clockwise from the p_i1 -> p_i2 baseline,
    # which reduces to absolute angles for baselines along +x.
    phi1, phi2 = _baseline_angles(anchors)
    t1 = np.asarray(aoa.alpha11, dtype=float) + phi1
    t2 = np.asarray(aoa.alpha21, dtype=float) + phi2
    (X11, Y11), (X21, Y21) = anchors.p11, anchors.p21
    s1, c1, s2, c2 = np.sin(t1), np.cos(t1), np.sin(t2), np.cos(t2)
    det = -s1 * c2 + c1 * s2
    parallel = np.abs(det) < 1e-10
    safe = np.where(parallel, 1.0, det)
    h1 = Y11 * c1 - X11 * s1
    h2 = Y21 * c2 - X21 * s2
    x = (c2 * h1 - c1 * h2) / safe
    y = (-s1 * h2 + s2 * h1) / safe
    return np.stack([x, y], axis=-1), parallel


def intersect_bearings(aoa, anchors):
    """Crossing point of the two bearing lines through ``p11`` and ``p21``."""
    x, parallel = _intersect(aoa, anchors)
    if np.any(parallel):
        raise ParallelBearings("bearing lines are (nearly) parallel")
    return x


def fallback_start(anchors):
    """Midpoint of the receivers moved 1 m to the left of the p11 -> p21 line."""
    p = anchors.positions
    mid = p.mean(axis=0)
    base = p[2] - p[0]
    normal = np.array([-base[1], base[0]]) / np.hypot(*base)
    return mid + normal


def jacobian(x, anchors):
    """Rows are unit vectors from each antenna toward ``x``; shape ``(..., 4, 2)``."""
    d = np.asarray(x, dtype=float)[..., None, :] - anchors.positions
    dist = np.sqrt(np.sum(d * d, axis=-1))
    if np.any(dist == 0):
        raise DegenerateGeometry("position coincides with an antenna")
    return d / dist[..., None]


def _cond1_upper2(t):
    # Exact 1-norm condition number of a 2x2 upper triangular matrix.
    a, b, c = t[..., 0, 0], t[..., 0, 1], t[..., 1, 1]
    norm = np.maximum(np.abs(a), np.abs(b) + np.abs(c))
    with np.errstate(divide="ignore", invalid="ignore"):
        inv_norm = np.maximum(1.0 / np.abs(a), np.abs(b / (a * c)) + 1.0 / np.abs(c))
        cond = norm * inv_norm
    return np.where(np.isfinite(cond), cond, np.inf)


def _gauss_newton_pass(x_lin, z, positions, snap_t, snap_s, bias_prev, guard):
    # All arrays carry one flat batch axis.
    d = x_lin[:, None, :] - positions
    dist = np.sqrt(np.sum(d * d, axis=-1))
    if np.any(dist == 0):
        raise DegenerateGeometry("linearization point coincides with an antenna")
    J = d / dist[..., None]
    qr = householder_qr(J)
    rhs = np.concatenate([np.broadcast_to(BIAS_MATRIX, J.shape), (z - dist)[..., None]], axis=-1)
    rot = apply_qt(qr, rhs)
    R = qr.r[:, :2, :]
    F, r = rot[:, :2, :2], rot[:, :2, 2]
    G, s = rot[:, 2:, :2], rot[:, 2:, 2]

    if snap_t is None:
        stack, srhs = G, s
    else:
        stack = np.concatenate([snap_t, G], axis=-2)
        srhs = np.concatenate([snap_s, s], axis=-1)
    w = householder_qr(stack)
    u = apply_qt(w, srhs[..., None])[..., 0]
    T, s_hat, s_check = w.r[:, :2, :], u[:, :2], u[:, 2:]

    t_singular = np.any(singular_pivots(T), axis=-1)
    held = ~t_singular & (_cond1_upper2(T) > guard)
    bad_b = t_singular | held
    b = solve_upper_triangular(np.where(bad_b[:, None, None], np.eye(2), T), s_hat, check=False)
    b = np.where(bad_b[:, None], bias_prev, b)

    r_singular = np.any(singular_pivots(R), axis=-1)
    rhs_x = r - np.sum(F * b[:, None, :], axis=-1)
    dx = solve_upper_triangular(np.where(r_singular[:, None, None], np.eye(2), R), rhs_x, check=False)
    dx = np.where(r_singular[:, None], 0.0, dx)
    return dict(dx=dx, b=b, T=T, s_hat=s_hat, s_check=s_check, R=R, F=F, r=r, G=G, s=s,
                held=held, ill=t_singular | r_singular)


def _solve_step(x_start, z, k, anchors, cfg, snap_t, snap_s, bias_prev, counter):
    """Iterate Gauss-Newton passes for one step on a flat batch.

    Every pass rebuilds the bias update from the step-entry snapshot, so only
    the final linearization of step ``k`` ever enters ``T_k``.
    """
    n = x_start.shape[0]
    positions = anchors.positions
    x_lin = x_start.copy()
    out = {}
    iterations = np.zeros(n, dtype=int)
    converged = np.zeros(n, dtype=bool)
    active = np.ones(n, dtype=bool)
    eps_sq = cfg.epsilon * cfg.epsilon
    for it in range(1, cfg.k_max + 1):
        idx = np.nonzero(active)[0]
        sub = lambda a: None if a is None else a[idx]  # noqa: E731
        res = _gauss_newton_pass(x_lin[idx], z[idx], positions, sub(snap_t), sub(snap_s),
                                 bias_prev[idx], cfg.condition_guard)
        if counter is not None:
            counter.add_pass(snap_t is None, len(idx))
        res["x_lin"] = x_lin[idx]
        res["x"] = x_lin[idx] + res["dx"]
        for key, val in res.items():
            if key not in out:
                out[key] = np.zeros((n,) + val.shape[1:], dtype=val.dtype)
            out[key][idx] = val
        iterations[idx] = it
        small = np.sum(res["dx"] * res["dx"], axis=-1) <= eps_sq
        converged[idx] = small & ~res["ill"] & ~res["held"]
        stop = small | res["ill"]
        go = idx[~stop]
        x_lin[go] = res["x"][~stop]
        active[idx[stop]] = False
        if not active.any():
            break
    out["iterations"] = iterations
    out["converged"] = converged
    return out


def _flat(a, tail):
    return None if a is None else np.reshape(a, (-1,) + tail)


def _commit(out, k, batch_shape, residual_prev, snap_t, snap_s, history):
    shape = lambda a, tail: np.reshape(a, batch_shape + tail)  # noqa: E731
    residual = np.sum(out["s_check"] * out["s_check"], axis=-1)
    if residual_prev is not None:
        residual = np.reshape(residual_prev, -1) + residual
    if history is not None:
        record = StepRecord(k, shape(out["x_lin"], (2,)), shape(out["R"], (2, 2)),
                            shape(out["F"], (2, 2)), shape(out["r"], (2,)),
                            shape(out["G"], (2, 2)), shape(out["s"], (2,)))
        history = history + (record,)
    state = EstimatorState(
        k=k,
        t=shape(out["T"], (2, 2)),
        s_hat=shape(out["s_hat"], (2,)),
        residual_sq=shape(residual, ()),
        position=shape(out["x"], (2,)),
        bias=shape(out["b"], (2,)),
        snapshot_t=snap_t,
        snapshot_s_hat=snap_s,
        history=history,
    )
    result = StepResult(
        k=k,
        position=state.position,
        bias=state.bias,
        iterations=shape(out["iterations"], ()),
        converged=shape(out["converged"], ()),
        bias_held=shape(out["held"], ()),
        ill_conditioned=shape(out["ill"], ()),
    )
    return state, result


def start(frame, anchors, cfg=SolverConfig(), keep_history=False, counter=None):
    """Non-raising first step: geometry failures are reported through result flags."""
    aoa = aoa_from_frame(frame, anchors)
    x0, parallel = _intersect(aoa, anchors)
    x0 = np.where(parallel[..., None], fallback_start(anchors), x0)
    batch_shape = frame.z.shape[:-1]
    n = int(np.prod(batch_shape, dtype=int))
    out = _solve_step(_flat(x0, (2,)), _flat(frame.z, (4,)), frame.k, anchors, cfg,
                      None, None, np.zeros((n, 2)), counter)
    out["converged"] &= ~np.reshape(parallel, -1)
    return _commit(out, frame.k, batch_shape, None, None, None, () if keep_history else None)


def advance(state, frame, anchors, cfg=SolverConfig(), counter=None):
    """Non-raising step ``k > 1``; see :func:`step_ingest`."""
    if frame.k != state.k + 1:
        raise ValueError(f"expected frame for step {state.k + 1}, got {frame.k}")
    if frame.z.shape[:-1] != state.batch_shape:
        raise ValueError(f"frame batch {frame.z.shape[:-1]} != state batch {state.batch_shape}")
    snap_t, snap_s = state.t.copy(), state.s_hat.copy()
    out = _solve_step(_flat(state.position, (2,)), _flat(frame.z, (4,)), frame.k, anchors, cfg,
                      _flat(snap_t, (2, 2)), _flat(snap_s, (2,)), _flat(state.bias, (2,)), counter)
    return _commit(out, frame.k, state.batch_shape, state.residual_sq, snap_t, snap_s, state.history)


def _raise_if_ill(result):
    if np.any(result.ill_conditioned):
        raise GeometryIllConditioned(f"singular triangular factor at step {result.k}")


def initialize_first_step(frame, anchors, cfg=SolverConfig(), keep_history=False, counter=None):
    """Process the first frame: bearing-based start, then Gauss-Newton on step-1 data.

    ``T_1`` comes from the QR of ``G_1`` alone. Parallel bearings fall back to
    :func:`fallback_start` and the step is reported unconverged.
    """
    state, result = start(frame, anchors, cfg, keep_history, counter)
    _raise_if_ill(result)
    return state, result


def step_ingest(state, frame, anchors, cfg=SolverConfig(), counter=None):
    """Process frame ``k = state.k + 1`` and return the new state and the step estimate.

    Raises :class:`GeometryIllConditioned` when ``T_k`` or ``R_k`` is singular.
    When ``T_k`` is merely ill-conditioned (condition number above
    ``cfg.condition_guard``) the previous bias is kept and the step is
    flagged unconverged.
    """
    state, result = advance(state, frame, anchors, cfg, counter)
    _raise_if_ill(result)
    return state, result


def track(z, anchors, cfg=SolverConfig(), keep_history=False, counter=None):
    """Run the tracker over frames ``z`` of shape ``(N, ..., 4)``; returns ``(state, results)``."""
    z = np.asarray(z, dtype=float)
    state, result = start(MeasurementFrame(z[0], 1), anchors, cfg, keep_history, counter)
    results = [result]
    for k in range(2, len(z) + 1):
        state, result = advance(state, MeasurementFrame(z[k - 1], k), anchors, cfg, counter)
        results.append(result)
    return state, results


def smooth_all(history, bias):
    """Re-solve every stored step with the final bias, giving ``x_{l|k}`` for ``l = 1..k``."""
    if history is None:
        raise NotAvailable("history was not retained; build the state with keep_history=True")
    bias = np.asarray(bias, dtype=float)
    out = []
    for rec in history:
        rhs = rec.r - np.sum(rec.F * bias[..., None, :], axis=-1)
        out.append(rec.x_lin + solve_upper_triangular(rec.R, rhs))
    return np.stack(out)
