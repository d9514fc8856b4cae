"""Small dense log-barrier interior-point solver.

Maximises a smooth concave objective subject to linear rows ``A x <= b``
and Euclidean balls ``||x[idx] - c|| <= r``.  Problems here have at most a
few dozen variables, so Newton systems are solved densely.  The objective
callable ``f(x, derivs=True)`` returns (value, grad, hess), or a 1-tuple
(value,) when ``derivs`` is false, and may return -inf when x leaves its
domain.
"""

from dataclasses import dataclass

import numpy as np


@dataclass
class BarrierResult:
    x: np.ndarray
    value: float
    kkt: float
    newton_steps: int
    status: str          # "optimal", "max_iter", "infeasible_start"


class ConstraintSet:
    """Linear rows A x <= b plus balls over index pairs of x.

    With ``lifted`` set, every constraint is written g_i(x) - s <= 0 where
    s is an extra trailing variable (used by the phase-I search).
    """

    def __init__(self, n, A=None, b=None, ball_idx=None, ball_centre=None,
                 ball_radius=None, lifted=False):
        self.n = n
        self.A = np.zeros((0, n)) if A is None else np.asarray(A, dtype=np.float64).reshape(-1, n)
        self.b = np.zeros(0) if b is None else np.asarray(b, dtype=np.float64).ravel()
        self.ball_idx = (np.zeros((0, 2), dtype=np.int64) if ball_idx is None
                         else np.asarray(ball_idx, dtype=np.int64).reshape(-1, 2))
        self.ball_centre = (np.zeros((0, 2)) if ball_centre is None
                            else np.asarray(ball_centre, dtype=np.float64).reshape(-1, 2))
        self.ball_radius = (np.zeros(0) if ball_radius is None
                            else np.asarray(ball_radius, dtype=np.float64).ravel())
        self.lifted = lifted

    @property
    def m(self):
        return self.A.shape[0] + self.ball_idx.shape[0]

    def _split(self, x):
        if self.lifted:
            return x[:-1], x[-1]
        return x, 0.0

    def values(self, x):
        xx, s = self._split(x)
        lin = self.A @ xx - self.b
        d = xx[self.ball_idx] - self.ball_centre
        balls = (d * d).sum(axis=1) - self.ball_radius ** 2
        return np.concatenate([lin, balls]) - s

    def grads(self, x):
        """(m, dim) matrix of constraint gradients."""
        xx, _ = self._split(x)
        dim = x.size
        G = np.zeros((self.m, dim))
        na = self.A.shape[0]
        G[:na, :self.n] = self.A
        d = xx[self.ball_idx] - self.ball_centre
        rows = na + np.arange(self.ball_idx.shape[0])
        G[rows, self.ball_idx[:, 0]] = 2.0 * d[:, 0]
        G[rows, self.ball_idx[:, 1]] = 2.0 * d[:, 1]
        if self.lifted:
            G[:, -1] = -1.0
        return G

    def barrier_terms(self, x):
        """Value, gradient and Hessian of -sum log(-g_i)."""
        g = self.values(x)
        G = self.grads(x)
        inv = 1.0 / (-g)
        grad = G.T @ inv
        hess = (G * (inv * inv)[:, None]).T @ G
        na = self.A.shape[0]
        w = 2.0 * inv[na:]
        for k, (a, c) in enumerate(self.ball_idx):
            hess[a, a] += w[k]
            hess[c, c] += w[k]
        return -np.sum(np.log(-g)), grad, hess

    def lift(self):
        return ConstraintSet(self.n, self.A, self.b, self.ball_idx, self.ball_centre,
                             self.ball_radius, lifted=True)


def _newton_center(f, cons, x, t, max_steps, decrement_tol):
    """Minimise -f(x) - (1/t) sum log(-g_i(x)) from a strictly feasible x.

    The barrier is scaled by 1/t rather than f by t so that the merit keeps
    the magnitude of f and line-search comparisons stay above round-off.
    """
    n = x.size
    steps = 0
    inv_t = 1.0 / t

    def phi(y):
        fv = f(y, False)[0]
        if not np.isfinite(fv):
            return np.inf
        g = cons.values(y)
        if np.any(g >= 0.0):
            return np.inf
        return -fv - inv_t * np.sum(np.log(-g))

    eye = np.eye(n)
    for steps in range(1, max_steps + 1):
        fv, fg, fh = f(x)
        bv, bg, bh = cons.barrier_terms(x)
        grad = -fg + inv_t * bg
        hess = -fh + inv_t * bh
        hess = 0.5 * (hess + hess.T)
        reg = 0.0
        while True:
            try:
                L = np.linalg.cholesky(hess + reg * eye)
                break
            except np.linalg.LinAlgError:
                reg = max(1e-12 * np.abs(np.diag(hess)).max(), 1e-300, 10.0 * reg)
        dx = -np.linalg.solve(L.T, np.linalg.solve(L, grad))
        dec2 = -float(grad @ dx)
        phi0 = -fv + inv_t * bv
        if dec2 / 2.0 <= decrement_tol * max(1.0, abs(phi0)):
            return x, steps, dec2
        alpha = 1.0
        while True:
            cand = x + alpha * dx
            if phi(cand) <= phi0 - 0.25 * alpha * dec2:
                break
            alpha *= 0.5
            if alpha < 1e-10:
                return x, steps, dec2
        x = cand
    return x, steps, dec2


def find_strictly_feasible(cons, x0, max_rounds=60):
    """Phase I: minimise s subject to g_i(x) <= s until s < 0."""
    x0 = np.asarray(x0, dtype=np.float64)
    if cons.m == 0 or cons.values(x0).max() < 0.0:
        return x0
    s0 = cons.values(x0).max() + 1.0
    # a lower bound on s keeps the phase-I problem bounded
    floor = -10.0 * (abs(s0) + 1.0)
    lifted = cons.lift()
    row = np.zeros((1, cons.n))
    lifted.A = np.vstack([lifted.A, row])
    lifted.b = np.append(lifted.b, 0.0)
    # the extra row reads 0.x - s <= -floor  <=>  s >= floor
    lifted.b[-1] = -floor
    n = cons.n
    z = np.append(x0, s0)

    def obj(zz, derivs=True):
        g = np.zeros(n + 1)
        g[-1] = -1.0
        return -zz[-1], g, np.zeros((n + 1, n + 1))

    t = 1.0
    for _ in range(max_rounds):
        z, _, _ = _newton_center(obj, lifted, z, t, 100, 1e-15)
        if cons.values(z[:n]).max() < 0.0:
            return z[:n]
        t *= 8.0
    return None


def barrier_maximize(f, x0, cons, gap_tol=1e-9, mu=50.0, max_outer=40,
                     max_newton=100):
    """Maximise concave f over the constraint set starting from x0.

    x0 need not be strictly feasible; a phase-I search runs when it is not.
    ``gap_tol`` bounds the duality gap m/t relative to max(1, |f|).  The
    reported ``kkt`` is (m/t + decrement^2/2) / max(1, |f|), a bound on the
    relative suboptimality.  Gradient-norm residuals are not used because
    slacks of active constraints are resolved only to round-off.
    """
    x = np.asarray(x0, dtype=np.float64).copy()
    if cons.m and cons.values(x).max() >= 0.0:
        start = find_strictly_feasible(cons, x)
        if start is None or not np.isfinite(f(start, False)[0]):
            return BarrierResult(x, f(x, False)[0], np.inf, 0, "infeasible_start")
        x = start
    m = cons.m
    fv = f(x, False)[0]
    if not np.isfinite(fv):
        return BarrierResult(x, fv, np.inf, 0, "infeasible_start")
    t = max(1.0, m / max(abs(fv), 1.0))
    total = 0
    dec2 = 0.0
    status = "max_iter"
    for _ in range(max_outer):
        x, steps, dec2 = _newton_center(f, cons, x, t, max_newton, 1e-15)
        total += steps
        fv = f(x, False)[0]
        if m == 0 or m / t <= gap_tol * max(1.0, abs(fv)):
            status = "optimal"
            break
        t *= mu
    fv = f(x, False)[0]
    kkt = ((m / t if m else 0.0) + 0.5 * dec2) / max(1.0, abs(fv))
    return BarrierResult(x, fv, float(kkt), total, status)
