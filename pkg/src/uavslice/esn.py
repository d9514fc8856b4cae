"""Distributed echo-state-network location prediction.

Each UAV holds short beacon histories of the users it can hear.  For a user,
every UAV with enough history builds a local ridge system from the reservoir
states, and the UAVs agree on one readout through consensus ADMM.  The
readout then rolls the reservoir forward in closed loop for K slots.

Positions inside this module are in km so tanh does not saturate.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from . import _kernels

N_IN = 2
N_OUT = 2


@dataclass(frozen=True)
class EsnHyper:
    Q: int = 6
    K: int = 10
    xi: float = 1e-3
    lam: float = 1e-3
    eta: float = 1e-2
    r_max: int = 100
    spectral_radius: float = 0.9
    n_reservoir: int = 300
    tol: float = 1e-6

    def __post_init__(self):
        if self.Q < 2 or self.K < 1:
            raise ValueError("need Q >= 2 and K >= 1")
        if not (self.xi > 0 and self.lam > 0 and self.eta > 0):
            raise ValueError("xi, lam and eta must be positive")


@dataclass
class Reservoir:
    w_in: np.ndarray                   # (N_r, N_i)
    w_rec: np.ndarray                  # (N_r, N_r)
    state_per_user: dict = field(default_factory=dict)

    @property
    def size(self):
        return self.w_rec.shape[0]


@dataclass
class OutputWeights:
    w_hat: np.ndarray                  # (N_i + N_r, N_o) global readout
    w_local: np.ndarray                # (J, N_i + N_r, N_o)
    multipliers: np.ndarray            # (J, N_i + N_r, N_o)
    iterations: int = 0
    residual: float = float("inf")

    @classmethod
    def zeros(cls, n_agents, dim, n_out=N_OUT):
        return cls(np.zeros((dim, n_out)), np.zeros((n_agents, dim, n_out)),
                   np.zeros((n_agents, dim, n_out)))

    def to_json(self):
        return json.dumps({"w_hat": self.w_hat.tolist(),
                           "iterations": self.iterations,
                           "residual": self.residual})

    @classmethod
    def from_json(cls, text):
        d = json.loads(text)
        w = np.asarray(d["w_hat"], dtype=np.float64)
        out = cls(w, np.zeros((0,) + w.shape), np.zeros((0,) + w.shape))
        out.iterations = d["iterations"]
        out.residual = d["residual"]
        return out


def make_reservoir(hyper, rng, n_in=N_IN):
    """Uniform(0,1) weights; recurrent matrix rescaled to the target radius."""
    n = hyper.n_reservoir
    w_in = rng.uniform(0.0, 1.0, size=(n, n_in))
    w_rec = rng.uniform(0.0, 1.0, size=(n, n))
    radius = np.max(np.abs(np.linalg.eigvals(w_rec)))
    if radius > 0:
        w_rec *= hyper.spectral_radius / radius
    return Reservoir(w_in, w_rec)


def _step(res, q_prev, x):
    return np.tanh(res.w_in @ x + res.w_rec @ q_prev)


def reservoir_step(res, user, x):
    """Advance the stored state of ``user`` by one input and return it."""
    x = np.asarray(x, dtype=np.float64)
    q_prev = res.state_per_user.get(user)
    if q_prev is None:
        q_prev = np.zeros(res.size)
    q = _step(res, q_prev, x)
    res.state_per_user[user] = q
    return q


def replay_states(res, xs, q0=None):
    """States after feeding ``xs`` (L, 2) one by one from ``q0`` (default 0)."""
    q = np.zeros(res.size) if q0 is None else np.asarray(q0, dtype=np.float64)
    out = np.empty((len(xs), res.size))
    for k, x in enumerate(xs):
        q = _step(res, q, x)
        out[k] = q
    return out


def window_positions(samples, Q):
    """Slot-grid window of Q+1 positions ending at the newest sample.

    ``samples`` is a time-ordered sequence of (slot, pos_km).  Slots missing
    inside the window are forward-filled; returns None when the window
    cannot be filled (fewer than Q+1 samples or a leading gap).
    """
    if len(samples) < Q + 1:
        return None
    slots = [s for s, _ in samples]
    t_last = slots[-1]
    start = t_last - Q
    if slots[0] > start:
        return None
    out = np.empty((Q + 1, N_IN))
    k = 0
    current = None
    for idx, slot in enumerate(range(start, t_last + 1)):
        while k < len(samples) and samples[k][0] <= slot:
            current = samples[k][1]
            k += 1
        out[idx] = current
    return out


def build_local_system(samples, res, hyper):
    """Hidden matrix X (Q x (2+N_r)) and targets Y (Q x 2) for one UAV/user.

    Row r (r = 1..Q) holds [x(t-r), q(t-r)] and its target is x(t-r+1),
    where the states are replayed from zero over the window.  Returns
    (X, Y, last_state) or None when the history is too short ("cold").
    """
    win = window_positions(samples, hyper.Q)
    if win is None:
        return None
    Q = hyper.Q
    inputs = win[:Q]                  # x(t-Q) .. x(t-1)
    states = replay_states(res, inputs)
    X = np.hstack([inputs, states])[::-1].copy()
    Y = win[1:][::-1].copy()
    return X, Y, states[-1]


def admm_round(locals_, weights, hyper):
    """One consensus iteration: local solves, aggregation, multiplier step."""
    lam, xi, eta = hyper.lam, hyper.xi, hyper.eta
    J = len(locals_)
    W = np.empty_like(weights.multipliers)
    for j, (X, Y) in enumerate(locals_):
        lhs = X.T @ X + lam * np.eye(X.shape[1])
        rhs = X.T @ Y + lam * weights.w_hat - weights.multipliers[j]
        try:
            W[j] = np.linalg.solve(lhs, rhs)
        except np.linalg.LinAlgError as exc:
            raise FloatingPointError("local normal equation failed") from exc
    w_hat = (weights.multipliers.sum(axis=0) + lam * W.sum(axis=0)) / (xi + lam * J)
    A = weights.multipliers + eta * (W - w_hat[None])
    res = float(np.sqrt(((W - w_hat[None]) ** 2).sum(axis=(1, 2))).max()) if J else 0.0
    return OutputWeights(w_hat, W, A, weights.iterations + 1, res)


def train_consensus(locals_, hyper, init=None):
    """Iterate ADMM rounds until the consensus residual drops below tol.

    ``init`` (an OutputWeights with matching agent count) warm-starts the
    global readout and multipliers; otherwise both start at zero.
    """
    if not locals_:
        raise ValueError("train_consensus needs at least one agent with data")
    X = np.stack([x for x, _ in locals_])
    Y = np.stack([y for _, y in locals_])
    J, _, D = X.shape
    if init is None or init.multipliers.shape[0] != J:
        w0 = np.zeros((D, Y.shape[2])) if init is None else init.w_hat
        A0 = np.zeros((J, D, Y.shape[2]))
    else:
        w0, A0 = init.w_hat, init.multipliers
    w_hat, W, A, it, res = _kernels.admm_consensus(
        X, Y, hyper.xi, hyper.lam, hyper.eta, hyper.r_max, hyper.tol, w0, A0)
    return OutputWeights(w_hat, W, A, it, res)


def stacked_ridge(locals_, xi):
    """Closed-form minimiser of 1/2 sum ||X_j W - Y_j||^2 + xi/2 ||W||^2."""
    D = locals_[0][0].shape[1]
    lhs = xi * np.eye(D)
    rhs = np.zeros((D, locals_[0][1].shape[1]))
    for X, Y in locals_:
        lhs += X.T @ X
        rhs += X.T @ Y
    return np.linalg.solve(lhs, rhs)


def augmented_lagrangian(locals_, weights, hyper):
    """Value of the consensus augmented Lagrangian at the current iterate."""
    val = 0.5 * hyper.xi * float(np.sum(weights.w_hat ** 2))
    for j, (X, Y) in enumerate(locals_):
        Wj = weights.w_local[j]
        diff = Wj - weights.w_hat
        val += 0.5 * float(np.sum((X @ Wj - Y) ** 2))
        val += float(np.sum(weights.multipliers[j] * diff))
        val += 0.5 * hyper.lam * float(np.sum(diff ** 2))
    return val


def predict_k(res, w_hat, user, x_t, K, area_km=None):
    """Closed-loop K-step rollout starting from the stored user state.

    Returns a (K, 2) array; the stored reservoir state is left untouched.
    Outputs are clipped to ``area_km`` = (width, height) when given.
    """
    q = res.state_per_user.get(user)
    if q is None:
        q = np.zeros(res.size)
    x = np.asarray(x_t, dtype=np.float64)
    w_in_o, w_r_o = w_hat[:N_IN], w_hat[N_IN:]
    out = np.empty((K, N_OUT))
    for k in range(K):
        q = _step(res, q, x)
        y = x @ w_in_o + q @ w_r_o
        if area_km is not None:
            y = np.clip(y, 0.0, area_km)
        out[k] = y
        x = y
    return out
