import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_cfg
from fdi_mpc.dynamics import CoupledTanks
from fdi_mpc.nmpc import (
    MpcConfig,
    Norm,
    ProximityBall,
    SolveResult,
    SolveStatus,
    affine_terminal_cost,
    check_proximity,
    cost_gradient,
    evaluate_cost,
    riccati_terminal_weight,
    rollout,
    solve,
    with_riccati_terminal,
)
from oracles import tank_rollout, tracking_cost

U_STAR = 0.07891403330879258
MODEL = CoupledTanks()


def test_rollout_from_empty_with_no_input():
    np.testing.assert_array_equal(rollout(MODEL, [0, 0], np.zeros((3, 1))), np.zeros((3, 2)))


def test_rollout_length_one_is_one_step():
    np.testing.assert_array_equal(rollout(MODEL, [0.25, 0.25], [[0.0]])[0], MODEL.step(np.array([0.25, 0.25]), np.array([0.0])))


@given(
    st.lists(st.floats(0.0, 1.0), min_size=2, max_size=2),
    st.lists(st.floats(0.0, 1.0), min_size=2, max_size=12),
    st.integers(1, 11),
)
def test_rollout_composes(x0, u, cut):
    cut = min(cut, len(u) - 1)
    U = np.array(u).reshape(-1, 1)
    whole = rollout(MODEL, x0, U)
    head = rollout(MODEL, x0, U[:cut])
    tail = rollout(MODEL, head[-1], U[cut:])
    np.testing.assert_array_equal(whole, np.vstack([head, tail]))


@given(
    st.lists(st.floats(0.0, 1.0), min_size=2, max_size=2),
    st.lists(st.floats(0.0, 1.0), min_size=1, max_size=10),
)
def test_rollout_matches_scalar_oracle(x0, u):
    np.testing.assert_allclose(rollout(MODEL, x0, np.array(u).reshape(-1, 1)), tank_rollout(x0, u), rtol=1e-13, atol=1e-15)


def test_cost_hand_value():
    cfg = make_cfg(horizon=1, r=1.0)
    assert evaluate_cost(cfg, [[0.9, 0.8]], [[0.5]]) == pytest.approx(0.26, abs=1e-15)


def test_cost_zero_at_exact_tracking():
    cfg = make_cfg(horizon=4)
    assert evaluate_cost(cfg, np.tile([0.8, 0.8], (4, 1)), np.zeros((4, 1))) == 0.0


def test_cost_state_part_linear_in_q():
    rng = np.random.default_rng(3)
    Y, U = rng.uniform(0, 1, (5, 2)), rng.uniform(0, 1, (5, 1))
    base = make_cfg(r=0.3)
    double = make_cfg(q=(2.0, 2.0), r=0.3)
    input_part = 0.3 * float(np.sum(U**2))
    assert evaluate_cost(double, Y, U) - input_part == pytest.approx(2 * (evaluate_cost(base, Y, U) - input_part), rel=1e-12)


def test_cost_dimension_mismatch():
    with pytest.raises(ValueError):
        evaluate_cost(make_cfg(horizon=3), np.zeros((2, 2)), np.zeros((3, 1)))


def test_cost_matches_oracle_with_terminal_and_stage_zero():
    rng = np.random.default_rng(11)
    P = np.array([[2.0, 0.3], [0.3, 1.5]])
    cfg = make_cfg(horizon=6, q=(1.3, 0.7), r=0.2, P=P)
    x0 = rng.uniform(0.1, 0.9, 2)
    U = rng.uniform(0, 1, (6, 1))
    Y = rollout(MODEL, x0, U)
    expect = tracking_cost(tank_rollout(x0, U[:, 0]), U[:, 0], [[1.3, 0], [0, 0.7]], 0.2, P.tolist(), (0.8, 0.8), y0=x0)
    assert evaluate_cost(cfg, Y, U, y0=x0) == pytest.approx(expect, rel=1e-13)


def _central_difference(cfg, x0, U, h=1e-6):
    f = lambda v: evaluate_cost(cfg, rollout(MODEL, x0, v.reshape(U.shape)), v.reshape(U.shape))
    flat = U.reshape(-1)
    g = np.empty_like(flat)
    for i in range(flat.size):
        e = np.zeros_like(flat)
        e[i] = h
        g[i] = (f(flat + e) - f(flat - e)) / (2 * h)
    return g


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(50):
        N = int(rng.integers(1, 12))
        q, r = rng.uniform(0.2, 3.0, 2), float(rng.uniform(0.01, 1.0))
        cfg = make_cfg(horizon=N, q=q, r=r, riccati=rng.random() < 0.5)
        cfg = with_riccati_terminal(cfg, MODEL)
        x0 = rng.uniform(0.1, 0.9, 2)
        U = rng.uniform(0.05, 0.6, (N, 1))
        g = cost_gradient(cfg, MODEL, x0, U)
        fd = _central_difference(cfg, x0, U)
        worst = max(worst, np.linalg.norm(g - fd) / np.linalg.norm(fd))
    assert worst < 1e-5


def test_gradient_at_equilibrium_is_input_penalty_only():
    cfg = make_cfg(horizon=5, r=0.3)
    U = np.full((5, 1), U_STAR)
    np.testing.assert_allclose(cost_gradient(cfg, MODEL, [0.8, 0.8], U), 2 * 0.3 * U_STAR, atol=1e-12)


def test_gradient_without_state_weights():
    # Q must be positive definite, so use a vanishing weight
    cfg = make_cfg(horizon=4, q=(1e-300, 1e-300), r=0.5)
    U = np.array([[0.1], [0.4], [0.7], [0.2]])
    np.testing.assert_allclose(cost_gradient(cfg, MODEL, [0.3, 0.6], U), 2 * 0.5 * U[:, 0], rtol=1e-12)


def test_equilibrium_solve():
    cfg = with_riccati_terminal(make_cfg(horizon=10, riccati=True, proximity=ProximityBall()), MODEL)
    ref = np.tile([0.8, 0.8], (10, 1))
    res = solve(cfg, MODEL, [0.8, 0.8], ref)
    assert res.status is SolveStatus.CONVERGED
    np.testing.assert_allclose(res.controls, U_STAR, atol=1e-3)
    assert res.cost == pytest.approx(10 * 0.01 * U_STAR**2, abs=1e-4)


def test_quadratic_terminal_alone_lets_the_plan_sag():
    # without the linear terminal term the last move is cut to save input cost
    P, _ = affine_terminal_cost(MODEL, [0.8, 0.8], np.eye(2), np.array([[0.01]]))
    res = solve(make_cfg(horizon=10, P=P), MODEL, [0.8, 0.8])
    assert U_STAR - res.controls[-1, 0] > 5e-3
    full = solve(with_riccati_terminal(make_cfg(horizon=10, riccati=True), MODEL), MODEL, [0.8, 0.8])
    assert abs(U_STAR - full.controls[-1, 0]) < 1e-3


def test_pure_input_penalty_gives_zero_controls():
    cfg = make_cfg(horizon=5, q=(1e-300, 1e-300))
    res = solve(cfg, MODEL, [0.8, 0.8])
    np.testing.assert_allclose(res.controls, 0.0, atol=1e-6)
    assert res.cost == pytest.approx(0.0, abs=1e-10)


def _grid_best(x0, q, r, P, setpoint, points=101):
    grid = np.linspace(0.0, 1.0, points)
    Q = [[q[0], 0.0], [0.0, q[1]]]
    best = np.inf
    for u0, u1 in itertools.product(grid, grid):
        traj = tank_rollout(x0, (u0, u1))
        if any(h > 1.0 for y in traj for h in y):
            continue
        best = min(best, tracking_cost(traj, (u0, u1), Q, r, P, setpoint, y0=x0))
    return best


def test_solver_beats_grid_oracle():
    rng = np.random.default_rng(99)
    for _ in range(10):
        q = rng.uniform(0.5, 2.0, 2)
        r = float(rng.uniform(0.01, 0.5))
        setpoint = rng.uniform(0.2, 0.9, 2)
        x0 = rng.uniform(0.2, 0.8, 2)
        P = np.diag(rng.uniform(0.0, 2.0, 2))
        cfg = make_cfg(horizon=2, q=q, r=r, setpoint=setpoint, P=P)
        res = solve(cfg, MODEL, x0)
        assert res.status is SolveStatus.CONVERGED
        assert res.cost <= _grid_best(x0, q, r, P.tolist(), setpoint) + 1e-10


def test_shooting_consistency_and_projection():
    cfg = with_riccati_terminal(make_cfg(horizon=8, riccati=True), MODEL)
    res = solve(cfg, MODEL, [0.0, 0.0])
    np.testing.assert_array_equal(res.predicted_outputs, rollout(MODEL, [0.0, 0.0], res.controls))
    assert np.all((res.controls >= 0.0) & (res.controls <= 1.0))
    assert np.all(res.predicted_outputs <= 1.0)


def test_feasible_candidate_dominance():
    cfg = with_riccati_terminal(make_cfg(horizon=6, riccati=True), MODEL)
    hold = np.full((6, 1), U_STAR)
    candidate = evaluate_cost(cfg, rollout(MODEL, [0.8, 0.8], hold), hold, y0=[0.8, 0.8])
    res = solve(cfg, MODEL, [0.8, 0.8])
    assert res.status is SolveStatus.CONVERGED
    assert res.cost <= candidate + 1e-8


def test_proximity_constraint_respected():
    cfg = with_riccati_terminal(make_cfg(horizon=6, riccati=True, proximity=ProximityBall()), MODEL)
    x0 = np.array([0.5, 0.5])
    # a reference the unconstrained plan would leave quickly
    ref = np.tile(x0, (6, 1))
    res = solve(cfg, MODEL, x0, ref)
    assert res.status is SolveStatus.CONVERGED
    d = np.linalg.norm(res.predicted_outputs[:-1] - ref[:-1], axis=1)
    assert np.all(d < 0.01)


def test_infeasible_problem_reports_instead_of_raising():
    cfg = with_riccati_terminal(make_cfg(horizon=3, riccati=True, proximity=ProximityBall()), MODEL)
    far = np.tile([0.0, 0.9], (3, 1))
    res = solve(cfg, MODEL, [0.9, 0.1], far)
    assert res.status is SolveStatus.INFEASIBLE_RELAXED
    assert res.constraint_violation > cfg.tol_feas
    assert np.all(np.isfinite(res.controls))


def test_penalty_loop_reduces_violation():
    cfg = with_riccati_terminal(make_cfg(horizon=6, riccati=True, proximity=ProximityBall()), MODEL)
    ref = rollout(MODEL, [0.4, 0.4], np.full((6, 1), 0.3))
    res = solve(cfg, MODEL, [0.4, 0.4], ref, warm_start=np.zeros((6, 1)))
    trace = res.violation_trace
    assert trace and trace[-1] <= cfg.tol_feas
    assert trace[-1] <= trace[0]


@settings(max_examples=30, deadline=None)
@given(
    st.lists(st.floats(0.05, 0.95), min_size=2, max_size=2),
    st.floats(0.0, 1.0),
    st.floats(-0.05, 0.05),
)
def test_accepted_violation_never_increases(x0, u_ref, shift):
    cfg = with_riccati_terminal(make_cfg(horizon=6, riccati=True, proximity=ProximityBall()), MODEL)
    ref = np.clip(rollout(MODEL, x0, np.full((6, 1), u_ref)) + shift, 0.0, 1.0)
    res = solve(cfg, MODEL, x0, ref, warm_start=np.zeros((6, 1)))
    trace = res.violation_trace
    assert all(b <= a for a, b in zip(trace, trace[1:]))
    assert np.all((res.controls >= 0.0) & (res.controls <= 1.0))
    np.testing.assert_array_equal(res.predicted_outputs, rollout(MODEL, x0, res.controls))


def test_solve_rejects_state_outside_box():
    with pytest.raises(ValueError):
        solve(make_cfg(), MODEL, [1.2, 0.5])


def test_projected_gradient_option_agrees():
    base = with_riccati_terminal(make_cfg(horizon=5, riccati=True), MODEL)
    pg = with_riccati_terminal(make_cfg(horizon=5, riccati=True, inner_solver="projected_gradient"), MODEL)
    a = solve(base, MODEL, [0.3, 0.2])
    b = solve(pg, MODEL, [0.3, 0.2])
    assert b.cost == pytest.approx(a.cost, rel=1e-4)


def test_warm_start_shift():
    res = SolveResult(np.array([[0.1], [0.2], [0.3]]), np.zeros((3, 2)), 0.0, SolveStatus.CONVERGED, 0.0)
    np.testing.assert_array_equal(res.shifted_controls(), [[0.2], [0.3], [0.3]])


def test_terminal_linear_term_matches_oracle():
    cfg = with_riccati_terminal(make_cfg(horizon=4, riccati=True), MODEL)
    rng = np.random.default_rng(5)
    x0, U = rng.uniform(0.2, 0.9, 2), rng.uniform(0, 1, (4, 1))
    traj = tank_rollout(x0, U[:, 0])
    e_N = np.array(traj[-1]) - 0.8
    expect = tracking_cost(traj, U[:, 0], [[1, 0], [0, 1]], 0.01, cfg.P.tolist(), (0.8, 0.8)) + cfg.c @ e_N
    assert evaluate_cost(cfg, rollout(MODEL, x0, U), U) == pytest.approx(expect, rel=1e-13)
    # more stored water means less pumping later
    assert np.all(cfg.c < 0)


def test_riccati_weight_is_symmetric_psd():
    P = riccati_terminal_weight(MODEL, [0.8, 0.8], np.eye(2), np.array([[0.01]]))
    np.testing.assert_allclose(P, P.T, atol=1e-12)
    assert np.all(np.linalg.eigvalsh(P) > 0)


@pytest.mark.parametrize(
    "kw",
    [
        dict(horizon=0),
        dict(q=(1.0, -1.0)),
        dict(r=0.0),
        dict(setpoint=(0.8, 1.2)),
        dict(inner_solver="newton"),
    ],
)
def test_config_validation(kw):
    with pytest.raises(ValueError):
        make_cfg(**kw)


def test_config_rejects_indefinite_terminal_weight():
    with pytest.raises(ValueError):
        make_cfg(P=[[1.0, 0.0], [0.0, -1.0]])


def test_proximity_examples():
    ball = ProximityBall(radius=0.01)
    assert check_proximity([0.5, 0.5], [0.5, 0.5], ball) == (True, 0.0)
    inside, r = check_proximity([0.505, 0.505], [0.5, 0.5], ball)
    assert inside and r == pytest.approx(0.0070710678118654, abs=1e-12)
    inside, r = check_proximity([0.52, 0.5], [0.5, 0.5], ball)
    assert not inside and r == pytest.approx(0.02, abs=1e-15)
    with pytest.raises(ValueError):
        check_proximity([0.5], [0.5, 0.5], ball)


def test_proximity_infinity_norm():
    inside, r = check_proximity([0.509, 0.495], [0.5, 0.5], ProximityBall(radius=0.01, norm=Norm.INFINITY))
    assert inside and r == pytest.approx(0.009, abs=1e-12)


def test_proximity_margin_shrinks_radius():
    assert ProximityBall(radius=0.01, margin=1e-3).enforced_radius == pytest.approx(0.00999)
    with pytest.raises(ValueError):
        ProximityBall(radius=-1.0)
