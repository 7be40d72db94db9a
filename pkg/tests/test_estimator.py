import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import batch_bias, fd_jacobian
from conftest import random_anchors
from toaloc.estimator import (
    AoaEstimate,
    GeometryIllConditioned,
    InvalidRange,
    NotAvailable,
    OpCounter,
    ParallelBearings,
    SolverConfig,
    DegenerateGeometry,
    aoa_from_frame,
    initialize_first_step,
    intersect_bearings,
    pass_cost,
    jacobian,
    smooth_all,
    start,
    step_ingest,
    track,
)
from toaloc.measurement import DEFAULT_ANCHORS, AnchorArray, MeasurementFrame, NoiseSpec, range_vector, synthesize_run

TRUE_X = np.array([0.0, 50.0])
TRUE_B = np.array([5.0, -5.0])


def clean_frames(traj, bias=TRUE_B, anchors=DEFAULT_ANCHORS):
    return synthesize_run(np.atleast_2d(traj), anchors, bias, NoiseSpec(0.0))


def frame_with(z11, dz, z21=100.0):
    return MeasurementFrame([z11, z11 - dz, z21, z21], 1)


# --- bearings ---------------------------------------------------------------

def test_aoa_endfire_toward_second_antenna():
    assert aoa_from_frame(frame_with(10.0, 2.0), DEFAULT_ANCHORS).alpha11 == 0.0


def test_aoa_endfire_away():
    assert aoa_from_frame(frame_with(10.0, -2.0), DEFAULT_ANCHORS).alpha11 == pytest.approx(math.pi, abs=1e-15)


def test_aoa_broadside():
    # (4 - 0 + 0) / 40 = 0.1
    assert aoa_from_frame(frame_with(10.0, 0.0), DEFAULT_ANCHORS).alpha11 == pytest.approx(1.4706289056333368, abs=1e-15)


def test_aoa_clamps_noisy_argument():
    aoa = aoa_from_frame(frame_with(10.0, 2.3), DEFAULT_ANCHORS)
    assert aoa.alpha11 == 0.0


def test_aoa_rejects_nonpositive_range():
    with pytest.raises(InvalidRange):
        aoa_from_frame(frame_with(0.0, 0.0), DEFAULT_ANCHORS)
    with pytest.raises(InvalidRange):
        aoa_from_frame(MeasurementFrame([10.0, 10.0, -1.0, -1.0], 1), DEFAULT_ANCHORS)


LINE_ANCHORS = AnchorArray((0.0, 0.0), (0.5, 0.0), (2.0, 0.0), (2.5, 0.0), 0.5)


def test_symmetric_crossing():
    x = intersect_bearings(AoaEstimate(math.pi / 4, 3 * math.pi / 4), LINE_ANCHORS)
    assert np.allclose(x, [1.0, 1.0], atol=1e-14)


def test_parallel_bearings():
    with pytest.raises(ParallelBearings):
        intersect_bearings(AoaEstimate(math.pi / 2, math.pi / 2), LINE_ANCHORS)


def test_noiseless_bearing_round_trip():
    z = range_vector(TRUE_X, DEFAULT_ANCHORS)
    x = intersect_bearings(aoa_from_frame(MeasurementFrame(z, 1), DEFAULT_ANCHORS), DEFAULT_ANCHORS)
    assert np.max(np.abs(x - TRUE_X)) < 1e-6


def test_crossing_lies_on_both_lines(rng):
    for _ in range(20):
        a1, a2 = rng.uniform(0.2, 2.9, size=2)
        if abs(a1 - a2) < 0.1:
            continue
        x = intersect_bearings(AoaEstimate(a1, a2), DEFAULT_ANCHORS)
        for p, a in ((DEFAULT_ANCHORS.p11, a1), (DEFAULT_ANCHORS.p21, a2)):
            d = x - np.array(p)
            resid = abs(-math.sin(a) * d[0] + math.cos(a) * d[1])
            assert resid < 1e-9 * max(1.0, np.max(np.abs(x)))


def test_tilted_baselines_round_trip(rng):
    anchors = random_anchors(rng)
    x = np.array([10.0, 20.0])
    aoa = aoa_from_frame(MeasurementFrame(range_vector(x, anchors), 1), anchors)
    assert np.max(np.abs(intersect_bearings(aoa, anchors) - x)) < 1e-6


# --- jacobian ---------------------------------------------------------------

def test_jacobian_simple_row():
    J = jacobian([0.0, 1.0], LINE_ANCHORS)
    assert np.array_equal(J[0], [0.0, 1.0])


def test_jacobian_matches_finite_differences():
    J = jacobian(TRUE_X, DEFAULT_ANCHORS)
    assert np.max(np.abs(J - fd_jacobian(TRUE_X, DEFAULT_ANCHORS.positions, h=1e-6))) < 1e-6


def test_jacobian_degenerate():
    with pytest.raises(DegenerateGeometry):
        jacobian(DEFAULT_ANCHORS.p12, DEFAULT_ANCHORS)


@settings(max_examples=100, deadline=None)
@given(st.floats(-100, 100), st.floats(-99, 100))
def test_jacobian_rows_unit(x, y):
    J = jacobian([x, y], DEFAULT_ANCHORS)
    assert np.all(np.abs(np.linalg.norm(J, axis=1) - 1) < 1e-14)


# --- first step -------------------------------------------------------------

def test_first_step_exact_without_noise_or_bias():
    z = clean_frames(TRUE_X, bias=(0.0, 0.0))[0]
    state, res = initialize_first_step(MeasurementFrame(z, 1), DEFAULT_ANCHORS)
    assert np.max(np.abs(res.position - TRUE_X)) < 1e-6
    assert state.k == 1 and bool(res.converged)
    assert state.residual_sq == 0.0


def test_first_step_invalid_range():
    with pytest.raises(InvalidRange):
        initialize_first_step(MeasurementFrame([0.0, 1.0, 2.0, 3.0], 1), DEFAULT_ANCHORS)


def test_biased_bearing_start_is_close():
    z = clean_frames(TRUE_X)[0]
    x0 = intersect_bearings(aoa_from_frame(MeasurementFrame(z, 1), DEFAULT_ANCHORS), DEFAULT_ANCHORS)
    err = np.linalg.norm(x0 - TRUE_X)
    assert 0 < err < 1.0
    assert np.all(np.abs(x0) <= 100)


def test_parallel_bearings_fall_back():
    # Target far along the antenna line: both bearings are 0.
    z = clean_frames([400.0, -100.0], bias=(0.0, 0.0))[0]
    _, res = start(MeasurementFrame(z, 1), DEFAULT_ANCHORS)
    assert not bool(res.converged)


def test_singular_bias_factor_raises():
    # Target in line with receiver 1's antennas: its two rows coincide.
    anchors = AnchorArray((0.0, 0.0), (0.0, 2.0), (50.0, 0.0), (52.0, 0.0), 2.0)
    z = clean_frames([0.0, 30.0], bias=(0.0, 0.0), anchors=anchors)[0]
    _, res = start(MeasurementFrame(z, 1), anchors)
    assert bool(res.ill_conditioned) and not bool(res.converged)
    with pytest.raises(GeometryIllConditioned):
        initialize_first_step(MeasurementFrame(z, 1), anchors)


# --- recursion --------------------------------------------------------------

def test_zero_noise_stationary_step_two():
    z = clean_frames(np.tile(TRUE_X, (2, 1)))
    state, _ = initialize_first_step(MeasurementFrame(z[0], 1), DEFAULT_ANCHORS)
    state, res = step_ingest(state, MeasurementFrame(z[1], 2), DEFAULT_ANCHORS)
    assert np.max(np.abs(res.position - TRUE_X)) < 1e-6
    assert np.max(np.abs(res.bias - TRUE_B)) < 1e-6


def test_step_index_must_follow():
    z = clean_frames(np.tile(TRUE_X, (2, 1)))
    state, _ = initialize_first_step(MeasurementFrame(z[0], 1), DEFAULT_ANCHORS)
    with pytest.raises(ValueError):
        step_ingest(state, MeasurementFrame(z[1], 3), DEFAULT_ANCHORS)


def test_single_pass_with_infinite_tolerance():
    z = synthesize_run(np.tile(TRUE_X, (3, 1)), DEFAULT_ANCHORS, TRUE_B, NoiseSpec(0.01, 1))
    _, results = track(z, DEFAULT_ANCHORS, SolverConfig(epsilon=math.inf))
    assert all(int(r.iterations) == 1 for r in results)


def test_recursive_matches_batch_solve(rng):
    traj = TRUE_X + np.cumsum(rng.normal(0, 0.25, size=(20, 2)), axis=0)
    z = synthesize_run(traj, DEFAULT_ANCHORS, TRUE_B, NoiseSpec(0.05, 5))
    state, _ = start(MeasurementFrame(z[0], 1), DEFAULT_ANCHORS, keep_history=True)
    for k in range(2, 21):
        state, res = step_ingest(state, MeasurementFrame(z[k - 1], k), DEFAULT_ANCHORS)
        ref = batch_bias(state.history)
        assert np.linalg.norm(res.bias - ref) <= 1e-10 * np.linalg.norm(ref)


def test_norm_conservation_and_monotone_residual(rng):
    traj = TRUE_X + np.cumsum(rng.normal(0, 0.25, size=(60, 2)), axis=0)
    z = synthesize_run(traj, DEFAULT_ANCHORS, TRUE_B, NoiseSpec(0.05, 8))
    state, _ = start(MeasurementFrame(z[0], 1), DEFAULT_ANCHORS, keep_history=True)
    prev_res, prev_sv = float(state.residual_sq), np.linalg.svd(state.t, compute_uv=False)[-1]
    for k in range(2, 61):
        state, _ = step_ingest(state, MeasurementFrame(z[k - 1], k), DEFAULT_ANCHORS)
        total = sum(float(rec.s @ rec.s) for rec in state.history)
        lhs = float(state.s_hat @ state.s_hat + state.residual_sq)
        assert abs(lhs - total) <= 1e-10 * total
        assert float(state.residual_sq) >= prev_res
        sv = np.linalg.svd(state.t, compute_uv=False)[-1]
        assert sv >= prev_sv * (1 - 1e-12)
        prev_res, prev_sv = float(state.residual_sq), sv


def test_local_contraction():
    z = clean_frames(np.array([TRUE_X, TRUE_X + [0.6, -0.7]]))
    cfg = SolverConfig(epsilon=1e-8, k_max=5)
    state, _ = initialize_first_step(MeasurementFrame(z[0], 1), DEFAULT_ANCHORS, cfg)
    _, res = step_ingest(state, MeasurementFrame(z[1], 2), DEFAULT_ANCHORS, cfg)
    assert bool(res.converged) and int(res.iterations) <= 5


def test_condition_guard_holds_bias():
    z = clean_frames(np.tile(TRUE_X, (2, 1)))
    cfg = SolverConfig(condition_guard=1.5)
    state, res = initialize_first_step(MeasurementFrame(z[0], 1), DEFAULT_ANCHORS, cfg)
    assert bool(res.bias_held) and not bool(res.converged)
    assert np.array_equal(res.bias, [0.0, 0.0])
    state, res = step_ingest(state, MeasurementFrame(z[1], 2), DEFAULT_ANCHORS, cfg)
    assert np.array_equal(res.bias, [0.0, 0.0])


def test_batch_equals_individual_runs(rng):
    traj = TRUE_X + np.cumsum(rng.normal(0, 0.25, size=(15, 2)), axis=0)
    zs = np.stack([synthesize_run(traj, DEFAULT_ANCHORS, TRUE_B, NoiseSpec(0.02, s)) for s in range(6)], axis=1)
    _, batch = track(zs, DEFAULT_ANCHORS)
    for m in range(6):
        _, single = track(zs[:, m], DEFAULT_ANCHORS)
        for rb, rs in zip(batch, single):
            assert np.array_equal(rb.position[m], rs.position)
            assert np.array_equal(rb.bias[m], rs.bias)
            assert rb.iterations[m] == rs.iterations


# --- smoothing --------------------------------------------------------------

def test_smooth_single_step():
    z = clean_frames(TRUE_X)
    state, res = track(z, DEFAULT_ANCHORS, keep_history=True)
    assert np.allclose(smooth_all(state.history, state.bias)[0], res[0].position, atol=1e-12)


def test_smooth_zero_noise_stationary():
    z = clean_frames(np.tile(TRUE_X, (8, 1)))
    state, _ = track(z, DEFAULT_ANCHORS, keep_history=True)
    xs = smooth_all(state.history, state.bias)
    assert xs.shape == (8, 2)
    assert np.max(np.abs(xs - TRUE_X)) < 1e-6


def test_smooth_needs_history():
    state, _ = track(clean_frames(np.tile(TRUE_X, (2, 1))), DEFAULT_ANCHORS)
    with pytest.raises(NotAvailable):
        smooth_all(state.history, state.bias)


def test_smoothing_improves_early_positions(rng):
    traj = TRUE_X + np.cumsum(rng.normal(0, 0.25, size=(200, 2)), axis=0)
    err_f, err_s = [], []
    for seed in range(20):
        z = synthesize_run(traj, DEFAULT_ANCHORS, TRUE_B, NoiseSpec(0.01, seed))
        state, results = track(z, DEFAULT_ANCHORS, keep_history=True)
        xs = smooth_all(state.history, state.bias)
        err_f.append(np.linalg.norm(results[0].position - traj[0]))
        err_s.append(np.linalg.norm(xs[0] - traj[0]))
    assert np.mean(np.square(err_s)) < 0.2 * np.mean(np.square(err_f))


# --- operation count ----------------------------------------------------------

def test_op_counter_order_of_magnitude():
    counter = OpCounter()
    z = synthesize_run(np.tile(TRUE_X, (3, 1)), DEFAULT_ANCHORS, TRUE_B, NoiseSpec(0.01, 1))
    track(z, DEFAULT_ANCHORS, SolverConfig(epsilon=math.inf), counter=counter)
    assert counter.passes == 3
    per_pass = sum(f for f, _ in pass_cost(False).values())
    assert 108 <= per_pass <= 432
    assert counter.by_stage["jacobian"] == (3 * 28, 3 * 4)
    assert counter.by_stage["rotate_data"][0] == 3 * 88
