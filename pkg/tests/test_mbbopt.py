import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from uavslice import mbbopt
from uavslice.units import LN2

from conftest import random_slot_problem


def brute_force_matching(C):
    """Best total weight over every partial one-to-one assignment."""
    N, J = C.shape
    best, best_A = 0.0, np.zeros((N, J), dtype=np.int8)
    for k in range(0, min(N, J) + 1):
        for users in itertools.combinations(range(N), k):
            for uavs in itertools.permutations(range(J), k):
                val = sum(C[i, j] for i, j in zip(users, uavs))
                if val > best:
                    best = val
                    best_A = np.zeros((N, J), dtype=np.int8)
                    best_A[list(users), list(uavs)] = 1
    return best, best_A


def test_interference_hand_summed():
    h = np.array([[1.0, 2.0, 3.0], [0.5, 0.25, 4.0]])
    p = np.array([10.0, 20.0, 30.0])
    I = mbbopt.interference(h, p)
    assert I[0, 0] == 2 * 20 + 3 * 30
    assert I[0, 1] == 1 * 10 + 3 * 30
    assert I[1, 2] == 0.5 * 10 + 0.25 * 20


def test_rates_direct_recompute():
    rng = np.random.default_rng(0)
    prob = random_slot_problem(rng, 3, 2)
    X = prob.prev_pos
    p = np.array([300.0, 900.0])
    R = mbbopt.rate_matrix(prob, X, p)
    for i in range(3):
        for j in range(2):
            h = [prob.theta[i, k] / (prob.height_gap2[i, k]
                                     + np.sum((X[k] - prob.user_pos[i]) ** 2)) for k in range(2)]
            sinr = p[j] * h[j] / (prob.n0 * prob.w_e + p[1 - j] * h[1 - j])
            assert R[i, j] == pytest.approx(prob.w_e / 1e6 * np.log2(1 + sinr), rel=1e-12)
    A = np.array([[0, 1], [0, 0], [1, 0]], dtype=np.int8)
    u = mbbopt.user_rates(A, R)
    assert u[1] == 0.0 and u[0] == R[0, 1]
    cost = np.dot(prob.V * prob.rho + prob.h_pen, p)
    assert mbbopt.merit(prob, A, X, p) == pytest.approx(cost - prob.weights @ u, rel=1e-12)


def test_matching_examples():
    C = np.array([[9.0, 1.0, 1.0], [1.0, 9.0, 1.0], [1.0, 1.0, 9.0]])
    np.testing.assert_array_equal(mbbopt.match_requests(C), np.eye(3))
    A = mbbopt.match_requests(np.zeros((3, 2)))
    assert A.sum() == 0
    assert np.all(A.sum(axis=0) <= 1) and np.all(A.sum(axis=1) <= 1)
    with pytest.raises(ValueError):
        mbbopt.match_requests(np.array([[np.nan]]))


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 4), st.integers(1, 4), st.integers(0, 2 ** 32 - 1))
def test_matching_equals_brute_force(n, j, seed):
    rng = np.random.default_rng(seed)
    C = rng.uniform(0, 1, (n, j)) * (rng.uniform(size=(n, j)) > 0.3)
    A = mbbopt.match_requests(C)
    best, best_A = brute_force_matching(C)
    assert float(np.sum(C * A)) == pytest.approx(best, rel=1e-12, abs=0)
    np.testing.assert_array_equal(A, best_A)


def test_slot_one_uses_plain_rates():
    prob = random_slot_problem(np.random.default_rng(1), 3, 2)
    p = np.array([100.0, 100.0])
    prob.slot_one = True
    np.testing.assert_array_equal(mbbopt.matching_weights(prob, prob.prev_pos, p),
                                  mbbopt.rate_matrix(prob, prob.prev_pos, p))


def _rand_accept(rng, N, J):
    return mbbopt.match_requests(rng.uniform(size=(N, J)))


def test_location_minorant_touch_and_dominance():
    rng = np.random.default_rng(2)
    for _ in range(10):
        prob = random_slot_problem(rng, 4, 3)
        p = rng.uniform(10, 1630, 3)
        A = _rand_accept(rng, 4, 3)
        lin = mbbopt.linearize_location(prob, A, prob.prev_pos, p)
        for i, j in lin.pairs:
            t = mbbopt.true_pair_rate(prob, p, i, j, prob.prev_pos)
            m = mbbopt.location_minorant_rate(prob, lin, p, i, j, prob.prev_pos)
            assert abs(t - m) <= 1e-9 * max(1.0, abs(t))
            for _ in range(50):
                X = prob.prev_pos + rng.normal(0, 30, (3, 2))
                assert mbbopt.location_minorant_rate(prob, lin, p, i, j, X) <= \
                    mbbopt.true_pair_rate(prob, p, i, j, X) + 1e-9


def test_power_minorant_touch_and_dominance():
    rng = np.random.default_rng(3)
    for _ in range(10):
        prob = random_slot_problem(rng, 4, 3)
        X = prob.prev_pos
        p0 = rng.uniform(10, 1630, 3)
        A = _rand_accept(rng, 4, 3)
        lin = mbbopt.linearize_power(prob, A, X, p0)
        h = mbbopt.gain_matrix(prob, X)
        for i, j in lin.pairs:
            t = mbbopt.true_pair_rate(prob, p0, i, j, X)
            assert abs(mbbopt.power_minorant_rate(prob, lin, h, i, j, p0) - t) <= 1e-9 * max(1, abs(t))
            for _ in range(50):
                p = rng.uniform(0, 1630, 3)
                assert mbbopt.power_minorant_rate(prob, lin, h, i, j, p) <= \
                    mbbopt.true_pair_rate(prob, p, i, j, X) + 1e-9


def test_linearization_coefficients_nonnegative():
    rng = np.random.default_rng(4)
    prob = random_slot_problem(rng, 5, 3)
    A = _rand_accept(rng, 5, 3)
    p = rng.uniform(10, 1630, 3)
    loc = mbbopt.linearize_location(prob, A, prob.prev_pos, p)
    pw = mbbopt.linearize_power(prob, A, prob.prev_pos, p)
    for arr in (loc.D, loc.E, pw.F, pw.G):
        assert np.all(np.isfinite(arr))
    assert np.all(loc.E >= 0) and np.all(pw.G >= 0)


def test_location_objective_derivatives():
    rng = np.random.default_rng(5)
    prob = random_slot_problem(rng, 4, 3)
    p = rng.uniform(100, 1630, 3)
    A = _rand_accept(rng, 4, 3)
    lin = mbbopt.linearize_location(prob, A, prob.prev_pos, p)
    f, active = mbbopt._location_objective(prob, lin, p)
    assert active
    x0 = prob.prev_pos.ravel() + rng.normal(0, 3, 6)
    val, grad, hess = f(x0)
    assert f(x0, False)[0] == val
    step = 1e-4
    for k in range(6):
        e = np.zeros(6)
        e[k] = step
        gp, gm = f(x0 + e)[1], f(x0 - e)[1]
        fd = (f(x0 + e)[0] - f(x0 - e)[0]) / (2 * step)
        assert grad[k] == pytest.approx(fd, rel=1e-5, abs=1e-8 * max(1, abs(val)))
        np.testing.assert_allclose(hess[:, k], (gp - gm) / (2 * step), rtol=1e-4,
                                   atol=1e-6 * np.abs(hess).max())
    # concavity: the Hessian is negative semidefinite
    assert np.linalg.eigvalsh(hess).max() <= 1e-9 * np.abs(hess).max()


def test_power_objective_derivatives():
    rng = np.random.default_rng(6)
    prob = random_slot_problem(rng, 4, 3)
    A = _rand_accept(rng, 4, 3)
    p0 = rng.uniform(100, 1630, 3)
    lin = mbbopt.linearize_power(prob, A, prob.prev_pos, p0)
    f = mbbopt._power_objective(prob, lin, mbbopt.gain_matrix(prob, prob.prev_pos))
    val, grad, hess = f(p0)
    for k in range(3):
        e = np.zeros(3)
        e[k] = 1e-3
        fd = (f(p0 + e)[0] - f(p0 - e)[0]) / 2e-3
        assert grad[k] == pytest.approx(fd, rel=1e-5, abs=1e-9)
    assert np.linalg.eigvalsh(hess).max() <= 1e-12


def test_solvers_feasible_and_improving():
    rng = np.random.default_rng(7)
    for _ in range(5):
        prob = random_slot_problem(rng, 5, 3)
        p = np.full(3, 200.0)
        A = mbbopt.match_requests(mbbopt.matching_weights(prob, prob.prev_pos, p))
        before = mbbopt.merit(prob, A, prob.prev_pos, p)
        X, info = mbbopt.solve_location(prob, A, prob.prev_pos, p)
        assert not info["fallback"]
        assert np.all(np.linalg.norm(X - prob.prev_pos, axis=1) <= prob.e_max + 1e-6)
        mid = mbbopt.merit(prob, A, X, p)
        assert mid <= before + 1e-6 * abs(before)
        P, info = mbbopt.solve_power(prob, A, X, p)
        assert np.all(P >= 0) and np.all(P <= prob.p_max)
        assert mbbopt.merit(prob, A, X, P) <= mid + 1e-6 * abs(mid)


def test_alternate_monotone_and_valid():
    rng = np.random.default_rng(8)
    for _ in range(5):
        prob = random_slot_problem(rng, 6, 3)
        dec = mbbopt.alternate(prob, prob.prev_pos, np.full(3, 16.3), r_max=50)
        tr = dec.step_trace
        assert all(b <= a + 1e-6 * max(1.0, abs(a)) for a, b in zip(tr, tr[1:]))
        dec.w_u, dec.w_e = 1e4, prob.w_e
        assert mbbopt.validate(dec, prob.prev_pos, prob.p_max, prob.e_max, prob.d_min, 1e7,
                               area=prob.area) == []
        assert dec.fallbacks == 0


def test_alternate_r_max_zero_and_frozen():
    prob = random_slot_problem(np.random.default_rng(9), 4, 2)
    P0 = np.array([5.0, 6.0])
    dec = mbbopt.alternate(prob, prob.prev_pos, P0, r_max=0)
    np.testing.assert_array_equal(dec.uav_pos, prob.prev_pos)
    np.testing.assert_array_equal(dec.powers, P0)
    assert dec.accept.sum() == 0 and dec.iterations == 0
    frozen = mbbopt.alternate(prob, prob.prev_pos, P0, r_max=20, move=False)
    np.testing.assert_array_equal(frozen.uav_pos, prob.prev_pos)


def test_validate_catches_violations():
    prev = np.array([[100.0, 100.0], [200.0, 100.0]])
    good = mbbopt.SlotDecision(accept=np.array([[1, 0], [0, 1]]), uav_pos=prev.copy(),
                               powers=np.array([10.0, 20.0]), w_e=9e6, w_u=1e6)
    assert mbbopt.validate(good, prev, np.full(2, 1630.0), 50.0, 5.0, 1e7) == []
    cases = [
        dict(accept=np.array([[1, 1], [0, 0]])),
        dict(accept=np.array([[1, 0], [1, 0]])),
        dict(powers=np.array([-1.0, 20.0])),
        dict(powers=np.array([2000.0, 20.0])),
        dict(uav_pos=prev + np.array([[60.0, 0.0], [0.0, 0.0]])),
        dict(uav_pos=np.array([[100.0, 100.0], [102.0, 100.0]])),
        dict(w_u=0.0),
        dict(w_e=9.5e6),
    ]
    for change in cases:
        bad = mbbopt.SlotDecision(**{**good.__dict__, **change})
        prev_ok = bad.uav_pos if "uav_pos" in change and change["uav_pos"][1, 0] == 102.0 else prev
        assert mbbopt.validate(bad, prev_ok, np.full(2, 1630.0), 50.0, 5.0, 1e7) != []


def test_single_user_closed_form_power():
    """One user and one UAV overhead: the power step lands on w W / (c ln2)."""
    prob = mbbopt.SlotProblem(
        user_pos=np.array([[500.0, 500.0]]), theta=np.array([[1e-4]]),
        height_gap2=np.array([[48.2 ** 2]]), weights=np.array([3.0]), h_pen=np.array([0.5]),
        V=2.0, rho=0.01, n0=10 ** -23.5, w_e=1e7, p_max=np.array([1630.0]),
        prev_pos=np.array([[500.0, 500.0]]))
    A = np.array([[1]], dtype=np.int8)
    P, info = mbbopt.solve_power(prob, A, prob.prev_pos, np.array([100.0]))
    cost = prob.V * prob.rho + 0.5
    # the rate is log2(1 + s p) with s huge, so the optimum is essentially w W / (c ln2)
    s = 1e-4 / 48.2 ** 2 / (prob.n0 * prob.w_e)
    p_star = 3.0 * 10.0 / (cost * LN2) - 1.0 / s
    assert P[0] == pytest.approx(p_star, rel=1e-6)
