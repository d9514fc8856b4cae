"""Virtual queues, stability metrics and the drift-plus-penalty pieces.

Queues (one entry per user for Q and Z, one per UAV for H):

    Q_i <- Q_i + C_i^th - u_i          (minimum-rate constraint)
    Z_i <- Z_i + gamma_i - u_i         (auxiliary-rate constraint)
    H_j <- H_j + p_tot_j - p_tilde_j   (average-power constraint)

Values may go negative; only the positive part enters weights and metrics.
Rates are in Mbps and powers in mW.
"""

from dataclasses import dataclass, field

import numpy as np

from .units import LN2, MHZ, positive_part


@dataclass
class LyapParams:
    V: float = 2.0
    rho: float = 0.01
    c_th: np.ndarray = field(default_factory=lambda: np.zeros(0))  # Mbps per user
    p_tilde: np.ndarray = field(default_factory=lambda: np.zeros(0))  # mW per UAV
    p_hat: np.ndarray = field(default_factory=lambda: np.zeros(0))
    p_c: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        if self.V < 0 or self.rho < 0:
            raise ValueError("V and rho must be nonnegative")
        self.c_th = np.asarray(self.c_th, dtype=np.float64)
        self.p_tilde = np.asarray(self.p_tilde, dtype=np.float64)
        self.p_hat = np.asarray(self.p_hat, dtype=np.float64)
        self.p_c = np.asarray(self.p_c, dtype=np.float64)


@dataclass
class QueueState:
    q: np.ndarray
    z: np.ndarray
    h: np.ndarray
    t: int = 0

    @classmethod
    def zeros(cls, n_users, n_uavs):
        return cls(np.zeros(n_users), np.zeros(n_users), np.zeros(n_uavs), 0)

    def copy(self):
        return QueueState(self.q.copy(), self.z.copy(), self.h.copy(), self.t)


def update_queues(state, u, gamma, p_tot, params):
    """Apply one slot of the three queue recurrences; returns a new state."""
    u = np.asarray(u, dtype=np.float64)
    gamma = np.asarray(gamma, dtype=np.float64)
    p_tot = np.asarray(p_tot, dtype=np.float64)
    n, j = state.q.shape[0], state.h.shape[0]
    if u.shape != (n,) or gamma.shape != (n,) or params.c_th.shape != (n,):
        raise ValueError("rate vectors must cover every user")
    if p_tot.shape != (j,) or params.p_tilde.shape != (j,):
        raise ValueError("power vectors must cover every UAV")
    return QueueState(q=state.q + params.c_th - u,
                      z=state.z + gamma - u,
                      h=state.h + p_tot - params.p_tilde,
                      t=state.t + 1)


def stability_metrics(state):
    """(S_Q, S_Z, S_H): largest positive backlog divided by elapsed slots."""
    if state.t < 1:
        raise ValueError("stability metrics need t >= 1")

    def s(x):
        return float(positive_part(x).max() / state.t) if x.size else 0.0

    return s(state.q), s(state.z), s(state.h)


def lyapunov_value(state):
    """L = 1/2 (sum [Q]^+^2 + sum [Z]^+^2 + sum [H]^+^2)."""
    return 0.5 * float(np.sum(positive_part(state.q) ** 2)
                       + np.sum(positive_part(state.z) ** 2)
                       + np.sum(positive_part(state.h) ** 2))


def bound_constant(u_max, p_hat):
    """B = sum u_max^2 + sum p_hat^2 / 2."""
    u_max = np.asarray(u_max, dtype=np.float64)
    p_hat = np.asarray(p_hat, dtype=np.float64)
    return float(np.sum(u_max ** 2) + 0.5 * np.sum(p_hat ** 2))


def utility(gamma):
    """phi(gamma) = sum log2(1 + gamma)."""
    return float(np.sum(np.log2(1.0 + np.asarray(gamma, dtype=np.float64))))


def drift_penalty_value(state, u, gamma, p, params, u_max):
    """Right-hand side of the drift-plus-penalty upper bound.

    ``p`` are UAV transmit powers (circuit power p_c is added inside).
    The bound dominates  L(t+1) - L(t) - V (phi(gamma) - rho sum p_tot).
    """
    qp = positive_part(state.q)
    zp = positive_part(state.z)
    hp = positive_part(state.h)
    u = np.asarray(u, dtype=np.float64)
    gamma = np.asarray(gamma, dtype=np.float64)
    p = np.asarray(p, dtype=np.float64)
    V, rho = params.V, params.rho
    return (bound_constant(u_max, params.p_hat)
            + float(np.dot(qp, params.c_th))
            - float(np.dot(hp, params.p_tilde - params.p_c))
            + V * rho * float(np.sum(params.p_c))
            - V * utility(gamma)
            + float(np.dot(zp, gamma))
            + float(np.dot(V * rho + hp, p))
            - float(np.dot(qp + zp, u)))


def solve_gamma(z, u_max, V):
    """Per-user minimiser of -V log2(1+g) + [Z]^+ g over g in [0, u_max]."""
    zp = positive_part(np.asarray(z, dtype=np.float64))
    u_max = np.asarray(u_max, dtype=np.float64)
    if np.any(u_max < 0):
        raise ValueError("u_max must be nonnegative")
    with np.errstate(divide="ignore"):
        interior = positive_part(V / (zp * LN2) - 1.0)
    return np.where(zp > 0.0, np.minimum(interior, u_max), u_max)


def u_max_approx(theta, w_tot_hz, p_hat, p_c, n0, height_gap):
    """Interference-free rate cap (Mbps) with the UAV directly overhead.

    ``theta`` may be (users, UAVs); the cap uses the best UAV per user.
    """
    theta = np.asarray(theta, dtype=np.float64)
    p_avail = np.asarray(p_hat, dtype=np.float64) - np.asarray(p_c, dtype=np.float64)
    snr = p_avail * theta / (n0 * w_tot_hz * height_gap ** 2)
    rate = (w_tot_hz / MHZ) * np.log2(1.0 + snr)
    if rate.ndim == 2:
        rate = rate.max(axis=1)
    return rate


__all__ = [
    "LyapParams", "QueueState", "update_queues", "stability_metrics",
    "lyapunov_value", "bound_constant", "utility", "drift_penalty_value",
    "solve_gamma", "u_max_approx",
]
