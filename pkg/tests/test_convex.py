import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from uavslice import convex


def neg_sq(target):
    target = np.asarray(target, dtype=np.float64)

    def f(x, derivs=True):
        d = x - target
        v = -float(d @ d)
        if not derivs:
            return (v,)
        return v, -2.0 * d, -2.0 * np.eye(x.size)
    return f


def sum_log(x, derivs=True):
    if np.any(x <= 0):
        return (-np.inf, None, None) if derivs else (-np.inf,)
    v = float(np.log(x).sum())
    if not derivs:
        return (v,)
    return v, 1.0 / x, -np.diag(1.0 / x ** 2)


def test_unconstrained_newton():
    res = convex.barrier_maximize(neg_sq([3.0, -1.0]), np.zeros(2), convex.ConstraintSet(2))
    np.testing.assert_allclose(res.x, [3.0, -1.0], atol=1e-10)
    assert res.status == "optimal"


def test_simplex_log_utility():
    n = 5
    cons = convex.ConstraintSet(n, A=np.vstack([np.ones(n), -np.eye(n)]),
                                b=np.concatenate([[1.0], np.zeros(n)]))
    res = convex.barrier_maximize(sum_log, np.full(n, 0.1), cons)
    np.testing.assert_allclose(res.x, 1.0 / n, rtol=1e-7)
    assert res.kkt <= 1e-8


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-50, 50), min_size=2, max_size=2),
       st.lists(st.floats(-50, 50), min_size=2, max_size=2),
       st.floats(0.5, 20))
def test_ball_projection(target, centre, radius):
    cons = convex.ConstraintSet(2, ball_idx=[[0, 1]], ball_centre=[centre], ball_radius=[radius])
    res = convex.barrier_maximize(neg_sq(target), np.array(centre), cons)
    t, c = np.array(target), np.array(centre)
    d = np.linalg.norm(t - c)
    expect = t if d <= radius else c + radius * (t - c) / d
    np.testing.assert_allclose(res.x, expect, atol=1e-5 * max(1.0, radius))
    assert cons.values(res.x).max() <= 1e-9


def test_box_projection_from_infeasible_start():
    lo, hi = np.array([0.0, 0.0, 0.0]), np.array([1.0, 2.0, 3.0])
    cons = convex.ConstraintSet(3, A=np.vstack([np.eye(3), -np.eye(3)]), b=np.concatenate([hi, -lo]))
    target = np.array([-4.0, 1.5, 9.0])
    res = convex.barrier_maximize(neg_sq(target), np.array([10.0, -10.0, 10.0]), cons)
    np.testing.assert_allclose(res.x, np.clip(target, lo, hi), atol=1e-7)


def test_phase_one_and_infeasible():
    cons = convex.ConstraintSet(1, A=[[1.0], [-1.0]], b=[1.0, -2.0])     # x<=1 and x>=2
    assert convex.find_strictly_feasible(cons, np.array([0.0])) is None
    res = convex.barrier_maximize(neg_sq([0.0]), np.array([0.0]), cons)
    assert res.status == "infeasible_start"
    ok = convex.ConstraintSet(1, A=[[1.0], [-1.0]], b=[3.0, -2.0])
    x = convex.find_strictly_feasible(ok, np.array([-40.0]))
    assert 2.0 < x[0] < 3.0


def test_constraint_gradients_match_differences():
    rng = np.random.default_rng(0)
    cons = convex.ConstraintSet(4, A=rng.normal(size=(3, 4)), b=rng.normal(size=3),
                                ball_idx=[[0, 1], [2, 3]], ball_centre=rng.normal(size=(2, 2)),
                                ball_radius=[1.0, 2.0])
    x = rng.normal(size=4)
    G = cons.grads(x)
    for k in range(4):
        e = np.zeros(4)
        e[k] = 1e-6
        fd = (cons.values(x + e) - cons.values(x - e)) / 2e-6
        np.testing.assert_allclose(np.asarray(G)[:, k], fd, rtol=1e-6, atol=1e-8)
