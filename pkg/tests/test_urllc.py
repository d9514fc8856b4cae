import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from uavslice import urllc
from uavslice.units import dbm_per_hz_to_mw_per_hz

REQ = urllc.UrllcSliceReq(5e-3, 1e-7, 160.0)
N0 = dbm_per_hz_to_mw_per_hz(-174.0)


def _qinv_bisect(p):
    """Independent oracle: bisection on Q(x) = erfc(x/sqrt2)/2."""
    lo, hi = -40.0, 40.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if 0.5 * math.erfc(mid / math.sqrt(2.0)) > p:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def test_req_validation():
    with pytest.raises(ValueError):
        urllc.UrllcSliceReq(0.0, 1e-7, 160)
    with pytest.raises(ValueError):
        urllc.UrllcSliceReq(1e-3, 0.5, 160)
    with pytest.raises(ValueError):
        urllc.UrllcSliceReq(1e-3, 1e-3, -1)


def test_q_inv_values():
    assert urllc.q_inv(0.5) == 0.0
    assert urllc.q_inv(1e-7) == pytest.approx(_qinv_bisect(1e-7), abs=1e-9)
    assert urllc.q_inv(1e-7) == pytest.approx(5.1993, abs=1e-4)
    for p in (1e-3, 1e-5, 1e-9):
        assert abs(urllc.q_func(urllc.q_inv(p)) - p) <= 1e-12 * p
    for p in (0.0, 1.0, -0.1, 2.0):
        with pytest.raises(ValueError):
            urllc.q_inv(p)


@given(st.floats(1e-300, 0.999999))
def test_q_inv_round_trip_property(p):
    x = urllc.q_inv(p)
    assert abs(float(urllc.q_func(x)) - p) <= 1e-12 * p + 1e-300


def _power_oracle(h, w, req, n0):
    expo = req.b_req * math.log(2) / (req.tau_req * w) + _qinv_bisect(req.eps_req) / math.sqrt(req.tau_req * w)
    return n0 * w / h * (math.exp(expo) - 1.0)


def test_required_power_examples():
    zero = urllc.UrllcSliceReq(5e-3, 0.4999999999999999, 1e-300)
    # the exponent vanishes, so p is zero relative to the N0 w / h scale
    assert 0.0 <= urllc.required_power(1e-9, 1e6, zero, N0) <= 1e-15 * N0 * 1e6 / 1e-9
    got = urllc.required_power(1e-9, 1e6, REQ, N0)
    assert got == pytest.approx(_power_oracle(1e-9, 1e6, REQ, N0), rel=1e-10)
    assert urllc.required_power(2e-9, 1e6, REQ, N0) == pytest.approx(got / 2, rel=1e-14)


def test_required_power_derivative_matches_fd():
    for w in (1e3, 5e4, 1e6):
        d = urllc.required_power_dw(1e-9, w, REQ, N0)
        step = 1e-4 * w
        fd = (urllc.required_power(1e-9, w + step, REQ, N0)
              - urllc.required_power(1e-9, w - step, REQ, N0)) / (2 * step)
        assert d == pytest.approx(fd, rel=1e-5)


def test_total_power_curve_examples():
    single = urllc.total_power_curve([3e-9], 2e5, REQ, N0)
    assert single == pytest.approx(urllc.required_power(3e-9, 2e5, REQ, N0), rel=1e-14)
    two = urllc.total_power_curve([3e-9, 3e-9], 2e5, REQ, N0)
    assert two == pytest.approx(2 * urllc.required_power(3e-9, 1e5, REQ, N0), rel=1e-14)
    with pytest.raises(ValueError):
        urllc.total_power_curve([0.0], 1e5, REQ, N0)


def test_u_shape_grid():
    h = [1e-9, 4e-9, 2e-9]
    grid = np.linspace(100.0, 5e6, 20001)
    p = urllc.total_power_curve(h, grid, REQ, N0)
    k = int(np.argmin(p))
    assert 0 < k < grid.size - 1
    alloc = urllc.min_bandwidth(h, REQ, N0, 1e9, 5e6, tol=1.0)
    assert abs(alloc.w_threshold - grid[k]) <= 2 * (grid[1] - grid[0])
    d = urllc.total_power_dw(h, grid, REQ, N0)
    assert np.all(d[grid < alloc.w_threshold - 1] < 0)
    assert np.all(d[grid > alloc.w_threshold + 1] > 0)


def test_min_bandwidth_definition_and_infeasible():
    h = np.array([1e-9, 3e-9])
    alloc = urllc.min_bandwidth(h, REQ, N0, 50.0, 1e7, tol=1.0)
    assert alloc.feasible
    assert urllc.total_power_curve(h, alloc.w_u, REQ, N0) <= 50.0
    assert urllc.total_power_curve(h, alloc.w_u - 1.0, REQ, N0) > 50.0
    assert alloc.p_b.sum() == pytest.approx(50.0, rel=1e-12)
    bad = urllc.min_bandwidth(h, REQ, N0, 1e-30, 1e7, tol=1.0)
    assert not bad.feasible and bad.w_u == 1e7
    with pytest.raises(ValueError):
        urllc.min_bandwidth(h, REQ, N0, 1.0, 1e7, tol=0.0)


def test_min_bandwidth_large_gain_tiny_payload():
    req = urllc.UrllcSliceReq(5e-3, 1e-3, 1.0)
    h = [1.0]
    alloc = urllc.min_bandwidth(h, req, N0, 1.0, 1e6, tol=1.0)
    grid = np.arange(1.0, 20000.0, 1.0)
    ok = grid[urllc.total_power_curve(h, grid, req, N0) <= 1.0]
    assert abs(alloc.w_u - ok[0]) <= 10.0


def test_qos_closure_after_allocation():
    h = np.array([1e-9, 5e-10, 3e-9])
    alloc = urllc.min_bandwidth(h, REQ, N0, 50.0, 1e7, tol=1.0)
    w = alloc.w_u / h.size
    for hj, pj in zip(h, alloc.p_b):
        assert urllc.fbl_rate(hj, pj, w, REQ, N0) >= REQ.b_req / REQ.tau_req * (1 - 1e-9)


def test_closing_powers():
    np.testing.assert_allclose(urllc.closing_powers([2.0, 2.0, 2.0], 9.0), [3.0, 3.0, 3.0])
    p = urllc.closing_powers([1.0, 2.0], 10.0)
    assert p[0] / p[1] == pytest.approx(4.0, rel=1e-14)
    rng = np.random.default_rng(0)
    h = rng.uniform(1e-10, 1e-8, 5)
    assert urllc.closing_powers(h, 123.0).sum() == pytest.approx(123.0, rel=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.floats(1e-10, 1e-7), st.floats(1e-10, 1e-7))
def test_required_power_monotone(h1, h2):
    w = np.linspace(100.0, 1e5, 50)
    if h1 < h2:
        assert np.all(urllc.required_power(h1, w, REQ, N0) > urllc.required_power(h2, w, REQ, N0))
    alloc = urllc.min_bandwidth([h1, h2], REQ, N0, 1e12, 1e7)
    left = w[w < alloc.w_threshold]
    p = urllc.total_power_curve([h1, h2], left, REQ, N0)
    assert np.all(np.diff(p) < 0)
