"""Per-slot MBB decisions: request matching, UAV placement and power.

The slot objective (to be minimised) is the merit

    Gamma = sum_j (V rho + [H_j]^+) p_j - sum_i w_i u_i,   w_i = [Q_i]^+ + [Z_i]^+

with u_i the Shannon rate (Mbps) of user i from its matched UAV under
interference from every other UAV.  ``alternate`` cycles through an exact
matching, one convex placement step and one convex power step, each built
from first-order minorants of the rate at the current anchor, so Gamma
never increases.

Powers are in mW, positions in metres, bandwidth in Hz, rates in Mbps.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .convex import ConstraintSet, barrier_maximize
from .units import LN2, MHZ

_DOMAIN_FRACTION = 1e-3


@dataclass
class SlotProblem:
    user_pos: np.ndarray        # (N, 2) predicted user positions
    theta: np.ndarray           # (N, J) estimated channel coefficients
    height_gap2: np.ndarray     # (N, J) squared UAV-user height difference
    weights: np.ndarray         # (N,) [Q]^+ + [Z]^+
    h_pen: np.ndarray           # (J,) [H]^+
    V: float
    rho: float
    n0: float                   # mW / Hz
    w_e: float                  # Hz
    p_max: np.ndarray           # (J,) p_hat - p_c
    prev_pos: np.ndarray        # (J, 2) positions in the previous slot
    e_max: float = 50.0
    d_min: float = 5.0
    area: tuple = (1000.0, 1000.0)
    slot_one: bool = False      # use queue-free matching weights

    @property
    def n_users(self):
        return self.user_pos.shape[0]

    @property
    def n_uavs(self):
        return self.prev_pos.shape[0]

    @property
    def noise(self):
        return self.n0 * self.w_e

    @property
    def w_mhz(self):
        return self.w_e / MHZ


@dataclass
class SlotDecision:
    accept: np.ndarray          # (N, J) 0/1
    uav_pos: np.ndarray         # (J, 2)
    powers: np.ndarray          # (J,) transmit power, mW
    w_e: float = 0.0
    w_u: float = 0.0
    gamma: np.ndarray = None
    merit_trace: list = field(default_factory=list)
    step_trace: list = field(default_factory=list)
    iterations: int = 0
    fallbacks: int = 0
    max_kkt: float = 0.0


@dataclass
class ScaLinearization:
    anchor: np.ndarray          # X^(r) (J, 2) or P^(r) (J,)
    pairs: list                 # matched (user, uav) pairs
    D: np.ndarray = None        # (N,) location: log2 received power at anchor
    E: np.ndarray = None        # (N, J) location: distance sensitivities
    F: np.ndarray = None        # (N,) power: log2 interference at anchor
    G: np.ndarray = None        # (N, J) power: interference sensitivities


# ---------------------------------------------------------------------------
# rates and merit
# ---------------------------------------------------------------------------

def dist2(prob, X):
    diff = X[None, :, :] - prob.user_pos[:, None, :]
    return (diff * diff).sum(axis=2)


def gain_matrix(prob, X):
    return prob.theta / (prob.height_gap2 + dist2(prob, X))


def interference(h, p):
    """I_ij = sum_{k != j} p_k h_ik, summed explicitly (no cancellation)."""
    M = h * p[None, :]
    J = M.shape[1]
    return M @ (np.ones((J, J)) - np.eye(J))


def sinr_matrix(prob, X, p):
    h = gain_matrix(prob, X)
    return p[None, :] * h / (prob.noise + interference(h, p))


def rate_matrix(prob, X, p):
    """Mbps each user would get from each UAV."""
    return prob.w_mhz * np.log1p(sinr_matrix(prob, X, p)) / LN2


def user_rates(accept, rates):
    return (accept * rates).sum(axis=1)


def merit(prob, accept, X, p):
    """Gamma: power cost minus queue-weighted served rate."""
    u = user_rates(accept, rate_matrix(prob, X, p))
    return float(np.dot(prob.V * prob.rho + prob.h_pen, p) - np.dot(prob.weights, u))


# ---------------------------------------------------------------------------
# matching
# ---------------------------------------------------------------------------

def matching_weights(prob, X, p):
    rates = rate_matrix(prob, X, p)
    if prob.slot_one:
        return rates
    return prob.weights[:, None] * rates


def match_requests(weights):
    """Maximum-weight one-to-one matching; zero-weight pairs are dropped."""
    C = np.asarray(weights, dtype=np.float64)
    if np.any(~np.isfinite(C)):
        raise ValueError("matching weights must be finite")
    C = np.maximum(C, 0.0)
    A = np.zeros(C.shape, dtype=np.int8)
    if C.size == 0:
        return A
    rows, cols = linear_sum_assignment(C, maximize=True)
    keep = C[rows, cols] > 0.0
    A[rows[keep], cols[keep]] = 1
    return A


def matched_pairs(accept):
    return [(int(i), int(j)) for i, j in zip(*np.nonzero(accept))]


# ---------------------------------------------------------------------------
# placement subproblem
# ---------------------------------------------------------------------------

def _jitter_coincident(X, rng=None):
    X = X.copy()
    rng = rng if rng is not None else np.random.default_rng(0)
    J = X.shape[0]
    for j in range(J):
        for k in range(j + 1, J):
            if np.allclose(X[j], X[k], atol=1e-9):
                X[k] += rng.uniform(-0.1, 0.1, size=2)
    return X


def linearize_location(prob, accept, X_anchor, p):
    """Coefficients of the rate minorant around the anchor positions."""
    d2 = dist2(prob, X_anchor)
    c = p[None, :] * prob.theta
    denom = prob.height_gap2 + d2
    S = prob.noise + (c / denom).sum(axis=1)
    D = np.log2(S)
    E = c / (denom ** 2 * S[:, None] * LN2)
    return ScaLinearization(anchor=X_anchor.copy(), pairs=matched_pairs(accept), D=D, E=E)


def location_minorant_rate(prob, lin, p, i, j, X):
    """Minorant (bit/s/Hz) of user i's rate from UAV j at positions X."""
    a = lin.anchor - prob.user_pos[i]
    vx = X - prob.user_pos[i]
    d2 = (vx * vx).sum(axis=1)
    d2r = (a * a).sum(axis=1)
    lin_d2 = -d2r + 2.0 * (a * vx).sum(axis=1)
    c = p * prob.theta[i]
    b = prob.height_gap2[i]
    mask = (np.arange(prob.n_uavs) != j) & (c > 0.0)
    den = b[mask] + lin_d2[mask]
    if np.any(den <= 0.0):
        # outside the domain of the linearised interference the surrogate is -inf
        return -np.inf
    M = prob.noise + np.sum(c[mask] / den)
    return lin.D[i] - np.dot(lin.E[i], d2 - d2r) - np.log2(M)


def true_pair_rate(prob, p, i, j, X):
    """Exact log2(1 + SINR) of user i from UAV j at positions X."""
    vx = X - prob.user_pos[i]
    h = prob.theta[i] / (prob.height_gap2[i] + (vx * vx).sum(axis=1))
    rx = p * h
    mask = np.arange(prob.n_uavs) != j
    return np.log2(prob.noise + rx.sum()) - np.log2(prob.noise + rx[mask].sum())


def _location_objective(prob, lin, p):
    """Concave surrogate sum_i w_i W r_i(X) with analytic derivatives.

    Returns (f, active); f(x, derivs=True) gives (value, grad, hess) over the
    flattened positions, or just (value,) when ``derivs`` is false.
    """
    J = prob.n_uavs
    rows = [(i, j) for i, j in lin.pairs if prob.weights[i] > 0.0]
    if not rows:
        return None, False
    ui = np.array([r[0] for r in rows])
    uj = np.array([r[1] for r in rows])
    wi = prob.weights[ui] * prob.w_mhz                    # (n,)
    xi = prob.user_pos[ui]                                # (n, 2)
    a = lin.anchor[None, :, :] - xi[:, None, :]           # (n, J, 2)
    d2r = (a * a).sum(axis=2)
    c = p[None, :] * prob.theta[ui]                       # (n, J)
    b = prob.height_gap2[ui]
    mask = (np.arange(J)[None, :] != uj[:, None]) & (c > 0.0)
    c_m = np.where(mask, c, 0.0)
    E = lin.E[ui]
    D = lin.D[ui]
    noise = prob.noise

    def f(x, derivs=True):
        X = x.reshape(J, 2)
        vx = X[None, :, :] - xi[:, None, :]
        d2 = (vx * vx).sum(axis=2)
        L = -d2r + 2.0 * (a * vx).sum(axis=2)
        den = np.where(mask, b + L, 1.0)
        if np.any(den <= 0.0):
            return (-np.inf, None, None) if derivs else (-np.inf,)
        M = noise + (c_m / den).sum(axis=1)
        val = float(np.dot(wi, D - (E * (d2 - d2r)).sum(axis=1) - np.log2(M)))
        if not derivs:
            return (val,)
        wE = wi[:, None] * E
        q = c_m / den ** 2
        coef = (wi / (M * LN2))[:, None] * q
        grad = (-2.0 * wE[:, :, None] * vx + 2.0 * coef[:, :, None] * a).sum(axis=0)
        # Hessian of -log2(M) in the L variables, mapped through dL/dv = 2a
        HL = -(np.einsum("pk,kl->pkl", 2.0 * c_m / den ** 3 / M[:, None], np.eye(J))
               - np.einsum("pk,pl->pkl", q, q) / (M * M)[:, None, None])
        HL *= (wi / LN2)[:, None, None]
        hess = 4.0 * np.einsum("pkl,pka,plb->kalb", HL, a, a).reshape(2 * J, 2 * J)
        hess[np.arange(2 * J), np.arange(2 * J)] += np.repeat(-2.0 * wE.sum(axis=0), 2)
        return val, grad.ravel(), hess

    return f, True


def location_constraints(prob, lin):
    J = prob.n_uavs
    n = 2 * J
    rows, rhs = [], []
    W_a, H_a = prob.area
    for j in range(J):
        for ax, hi in ((0, W_a), (1, H_a)):
            r = np.zeros(n)
            r[2 * j + ax] = 1.0
            rows.append(r)
            rhs.append(hi)
            rows.append(-r)
            rhs.append(0.0)
    X_r = lin.anchor
    for j in range(J):
        for k in range(j + 1, J):
            d = X_r[j] - X_r[k]
            r = np.zeros(n)
            r[2 * j:2 * j + 2] = -2.0 * d
            r[2 * k:2 * k + 2] = 2.0 * d
            rows.append(r)
            rhs.append(-(prob.d_min ** 2 + d @ d))
    for i, j in lin.pairs:
        xi = prob.user_pos[i]
        for k in range(J):
            if k == j:
                continue
            a = X_r[k] - xi
            b = prob.height_gap2[i, k]
            r = np.zeros(n)
            r[2 * k:2 * k + 2] = -2.0 * a
            rows.append(r)
            rhs.append(b * (1.0 - _DOMAIN_FRACTION) - a @ a - 2.0 * a @ xi)
    ball_idx = np.array([[2 * j, 2 * j + 1] for j in range(J)])
    return ConstraintSet(n, np.array(rows), np.array(rhs), ball_idx,
                         prob.prev_pos, np.full(J, prob.e_max))


def solve_location(prob, accept, X_anchor, p, lin=None):
    """One SCA placement step; returns (X_new, info dict)."""
    X_anchor = _jitter_coincident(np.asarray(X_anchor, dtype=np.float64))
    if lin is None:
        lin = linearize_location(prob, accept, X_anchor, p)
    f, active = _location_objective(prob, lin, p)
    if not active:
        return X_anchor.copy(), {"status": "constant", "kkt": 0.0, "fallback": False}
    cons = location_constraints(prob, lin)
    res = barrier_maximize(f, X_anchor.ravel(), cons)
    if res.status == "infeasible_start" or not np.all(np.isfinite(res.x)):
        return X_anchor.copy(), {"status": res.status, "kkt": np.inf, "fallback": True}
    return res.x.reshape(-1, 2), {"status": res.status, "kkt": res.kkt, "fallback": False}


# ---------------------------------------------------------------------------
# power subproblem
# ---------------------------------------------------------------------------

def linearize_power(prob, accept, X, p_anchor):
    h = gain_matrix(prob, X)
    pairs = matched_pairs(accept)
    N, J = h.shape
    F = np.zeros(N)
    G = np.zeros((N, J))
    for i, j in pairs:
        mask = np.arange(J) != j
        F[i] = np.log2(prob.noise + np.dot(p_anchor[mask], h[i, mask]))
        G[i, mask] = h[i, mask] / (2.0 ** F[i] * LN2)
    return ScaLinearization(anchor=np.asarray(p_anchor, dtype=np.float64).copy(),
                            pairs=pairs, F=F, G=G)


def power_minorant_rate(prob, lin, h, i, j, p):
    """Minorant (bit/s/Hz) of user i's rate from UAV j at powers p."""
    mask = np.arange(prob.n_uavs) != j
    return (np.log2(prob.noise + np.dot(p, h[i])) - lin.F[i]
            - np.dot(lin.G[i, mask], p[mask] - lin.anchor[mask]))


def _power_objective(prob, lin, h):
    J = prob.n_uavs
    W = prob.w_mhz
    cost = prob.V * prob.rho + prob.h_pen
    terms = []
    for i, j in lin.pairs:
        wi = prob.weights[i] * W
        if wi > 0.0:
            g_lin = lin.G[i].copy()
            g_lin[j] = 0.0
            terms.append((wi, h[i], g_lin, lin.F[i]))

    def f(p, derivs=True):
        val = -float(cost @ p)
        if not derivs:
            for wi, hi, g_lin, F in terms:
                S = prob.noise + hi @ p
                if S <= 0.0:
                    return (-np.inf,)
                val += wi * (np.log2(S) - F - g_lin @ (p - lin.anchor))
            return (val,)
        grad = -cost.copy()
        hess = np.zeros((J, J))
        for wi, hi, g_lin, F in terms:
            S = prob.noise + hi @ p
            val += wi * (np.log2(S) - F - g_lin @ (p - lin.anchor))
            grad += wi * (hi / (S * LN2) - g_lin)
            hess -= wi * np.outer(hi, hi) / (S * S * LN2)
        return val, grad, hess

    return f


def solve_power(prob, accept, X, p_anchor, lin=None):
    """One SCA power step on the box 0 <= p <= p_max; returns (p, info)."""
    p_anchor = np.asarray(p_anchor, dtype=np.float64)
    h = gain_matrix(prob, X)
    if lin is None:
        lin = linearize_power(prob, accept, X, p_anchor)
    f = _power_objective(prob, lin, h)
    J = prob.n_uavs
    A = np.vstack([np.eye(J), -np.eye(J)])
    b = np.concatenate([prob.p_max, np.zeros(J)])
    # start next to the anchor: the interference tangent can be very steep there
    start = np.clip(p_anchor, 1e-9 * prob.p_max, (1.0 - 1e-9) * prob.p_max)
    res = barrier_maximize(f, start, ConstraintSet(J, A, b))
    if res.status == "infeasible_start" or not np.all(np.isfinite(res.x)):
        return p_anchor.copy(), {"status": res.status, "kkt": np.inf, "fallback": True}
    return np.clip(res.x, 0.0, prob.p_max), {"status": res.status, "kkt": res.kkt,
                                             "fallback": False}


# ---------------------------------------------------------------------------
# alternation
# ---------------------------------------------------------------------------

def alternate(prob, X0, P0, r_max=1000, rel_tol=1e-5, move=True):
    """Match -> place -> power until Gamma stops improving.

    ``move=False`` freezes the positions (hovering and scripted baselines).
    ``step_trace`` records Gamma after every sub-step; ``merit_trace`` after
    every full iteration.
    """
    X = np.asarray(X0, dtype=np.float64).copy()
    P = np.asarray(P0, dtype=np.float64).copy()
    A = np.zeros((prob.n_users, prob.n_uavs), dtype=np.int8)
    dec = SlotDecision(accept=A, uav_pos=X, powers=P, w_e=prob.w_e)
    if r_max <= 0:
        return dec
    prev = None
    for r in range(1, r_max + 1):
        A = match_requests(matching_weights(prob, X, P))
        dec.step_trace.append(merit(prob, A, X, P))
        if move:
            X, info = solve_location(prob, A, X, P)
            dec.fallbacks += int(info["fallback"])
            dec.max_kkt = max(dec.max_kkt, info["kkt"])
            dec.step_trace.append(merit(prob, A, X, P))
        P, info = solve_power(prob, A, X, P)
        dec.fallbacks += int(info["fallback"])
        dec.max_kkt = max(dec.max_kkt, info["kkt"])
        gam = merit(prob, A, X, P)
        dec.step_trace.append(gam)
        dec.merit_trace.append(gam)
        dec.iterations = r
        if prev is not None and abs(prev - gam) <= rel_tol * max(abs(prev), 1e-12):
            break
        prev = gam
    dec.accept, dec.uav_pos, dec.powers = A, X, P
    return dec


# ---------------------------------------------------------------------------
# feasibility
# ---------------------------------------------------------------------------

def validate(decision, prev_pos, p_max, e_max, d_min, w_tot, area=None, tol=1e-6):
    """List of violated constraints (empty when the decision is feasible)."""
    bad = []
    A = np.asarray(decision.accept)
    if not np.all((A == 0) | (A == 1)):
        bad.append("accept not binary")
    if np.any(A.sum(axis=1) > 1):
        bad.append("user served by more than one UAV")
    if np.any(A.sum(axis=0) > 1):
        bad.append("UAV accepts more than one request")
    p = np.asarray(decision.powers)
    if np.any(p < -tol) or np.any(p > np.asarray(p_max) + tol):
        bad.append("power outside [0, p_hat - p_c]")
    X = np.asarray(decision.uav_pos)
    step = np.linalg.norm(X - np.asarray(prev_pos), axis=1)
    if np.any(step > e_max + tol):
        bad.append(f"movement {step.max():.6f} m exceeds e_max")
    J = X.shape[0]
    for j in range(J):
        for k in range(j + 1, J):
            if np.linalg.norm(X[j] - X[k]) < d_min - tol:
                bad.append(f"UAVs {j},{k} closer than d_min")
    if area is not None and (np.any(X < -tol) or np.any(X > np.asarray(area) + tol)):
        bad.append("UAV outside area")
    if decision.w_u <= 0 or decision.w_e < 0 or decision.w_u + decision.w_e > w_tot * (1 + 1e-12):
        bad.append("bandwidth split invalid")
    return bad
