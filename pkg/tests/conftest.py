import numpy as np
import pytest

from uavslice import mbbopt


def random_slot_problem(rng, n_users=4, n_uavs=3, n0=10 ** -23.5, w_e=9.99e6, spread=1000.0):
    """A slot instance with realistic magnitudes (mW, m, Hz)."""
    area = (1000.0, 1000.0)
    centre = rng.uniform(0.2, 0.8, 2) * 1000.0
    users = np.clip(centre + rng.uniform(-0.5, 0.5, (n_users, 2)) * spread, 0, 1000)
    prev = np.clip(centre + rng.uniform(-0.5, 0.5, (n_uavs, 2)) * spread, 60, 940)
    # keep the previous deployment at least d_min apart
    for j in range(1, n_uavs):
        while np.min(np.linalg.norm(prev[:j] - prev[j], axis=1)) < 10.0:
            prev[j] = rng.uniform(60, 940, 2)
    return mbbopt.SlotProblem(
        user_pos=users,
        theta=10.0 ** rng.uniform(-4.5, -3.0, (n_users, n_uavs)),
        height_gap2=np.full((n_users, n_uavs), 48.2 ** 2),
        weights=rng.uniform(0.0, 10.0, n_users),
        h_pen=rng.uniform(0.0, 0.05, n_uavs),
        V=2.0, rho=0.01, n0=n0, w_e=w_e,
        p_max=np.full(n_uavs, 1630.0), prev_pos=prev, area=area)


@pytest.fixture
def slot_problem():
    return random_slot_problem


ACCEPTANCE_LINES = {}


def report(criterion, ok, detail):
    """Record one acceptance line; the terminal summary prints them in order."""
    line = f"criterion {criterion:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES[criterion] = line
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
