"""Finite-blocklength URLLC provisioning for the BS -> UAV control links.

With dispersion set to one, the power UAV j needs on a per-UAV band ``w`` is

    p = (N0 w / h) * (exp(b ln2 / (tau w) + Qinv(eps) / sqrt(tau w)) - 1)

and the BS total is the sum over UAVs under an equal split of W^u.  The
total is U-shaped in W^u: it falls until a threshold bandwidth and then
rises, so the minimum feasible URLLC bandwidth is found by two bisections.

Units: powers in mW, bandwidth in Hz, n0 in mW/Hz.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

LN2 = math.log(2.0)


@dataclass(frozen=True)
class UrllcSliceReq:
    tau_req: float = 5e-3      # s
    eps_req: float = 1e-7
    b_req: float = 160.0       # bits

    def __post_init__(self):
        if not self.tau_req > 0:
            raise ValueError("tau_req must be positive")
        if not 0.0 < self.eps_req < 0.5:
            raise ValueError("eps_req must lie in (0, 0.5)")
        if self.b_req < 0:
            raise ValueError("b_req must be nonnegative")


@dataclass
class UrllcAlloc:
    w_u: float                          # Hz
    p_b: np.ndarray                     # per-UAV BS power, mW
    feasible: bool
    w_threshold: float = float("nan")   # minimiser of the total power curve
    diagnostics: dict = field(default_factory=dict)


def q_func(x):
    """Gaussian tail probability Q(x)."""
    return special.ndtr(-np.asarray(x, dtype=np.float64))


def q_inv(p):
    """Inverse of the Gaussian tail: returns x with Q(x) = p.

    ``ndtri`` gives the quantile; one Newton step on Q polishes the last
    ulps so the round trip holds to ~1e-15 relative.
    """
    p_arr = np.asarray(p, dtype=np.float64)
    if np.any(~((p_arr > 0.0) & (p_arr < 1.0))):
        raise ValueError("q_inv needs p in (0, 1)")
    x = -special.ndtri(p_arr)
    pdf = np.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)
    x = x + (q_func(x) - p_arr) / pdf
    return float(x) if np.ndim(x) == 0 else x


def _exponent(w, req):
    w = np.asarray(w, dtype=np.float64)
    a = req.b_req * LN2 / req.tau_req
    c = q_inv(req.eps_req) / math.sqrt(req.tau_req)
    return a / w + c / np.sqrt(w)


def required_power(h_b, w, req, n0):
    """BS power (mW) that lets a UAV with gain ``h_b`` decode b bits in tau."""
    w = np.asarray(w, dtype=np.float64)
    with np.errstate(over="ignore"):
        p = (n0 * w / h_b) * np.expm1(_exponent(w, req))
    return float(p) if np.ndim(p) == 0 else p


def required_power_dw(h_b, w, req, n0):
    """Analytic d(required_power)/dw."""
    w = np.asarray(w, dtype=np.float64)
    a = req.b_req * LN2 / req.tau_req
    c = q_inv(req.eps_req) / math.sqrt(req.tau_req)
    g = a / w + c / np.sqrt(w)
    dg = -a / w ** 2 - 0.5 * c / w ** 1.5
    with np.errstate(over="ignore", invalid="ignore"):
        d = (n0 / h_b) * (np.expm1(g) + w * np.exp(g) * dg)
    return float(d) if np.ndim(d) == 0 else d


def total_power_curve(h_list, w_u, req, n0, split_rule="equal"):
    """Sum of per-UAV required powers when W^u is split across the UAVs."""
    if split_rule != "equal":
        raise ValueError(f"unknown split rule {split_rule!r}")
    h = np.asarray(h_list, dtype=np.float64)
    if np.any(h <= 0):
        raise ValueError("gains must be positive")
    w = np.asarray(w_u, dtype=np.float64) / h.size
    p = required_power(1.0, w, req, n0) * np.sum(1.0 / h)
    return float(p) if np.ndim(p) == 0 else p


def total_power_dw(h_list, w_u, req, n0):
    h = np.asarray(h_list, dtype=np.float64)
    return required_power_dw(1.0, w_u / h.size, req, n0) * np.sum(1.0 / h) / h.size


def _threshold_bandwidth(h, req, n0, w_start, tol):
    """Bisection on the sign of dp/dW for the minimiser of the U-curve."""
    lo, hi = 0.0, float(w_start)
    while total_power_dw(h, hi, req, n0) <= 0.0:
        lo, hi = hi, 2.0 * hi
        if hi > 1e15:
            return hi
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if total_power_dw(h, mid, req, n0) < 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def min_bandwidth(h_list, req, n0, p_b_max, w_tot, tol=1.0):
    """Smallest W^u (within ``tol`` Hz) whose total BS power fits p_b_max."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    h = np.asarray(h_list, dtype=np.float64)
    j = h.size
    w_th = _threshold_bandwidth(h, req, n0, w_tot, tol)
    w_ub = min(w_th, w_tot)
    p_ub = total_power_curve(h, w_ub, req, n0)
    if not p_ub <= p_b_max:
        return UrllcAlloc(w_u=float(w_tot), p_b=np.zeros(j), feasible=False,
                          w_threshold=w_th, diagnostics={"p_at_w_ub": p_ub})
    lo, hi = 0.0, w_ub
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if total_power_curve(h, mid, req, n0) <= p_b_max:
            hi = mid
        else:
            lo = mid
    # Split the whole budget in proportion to each UAV's own requirement so
    # every link keeps the same relative margin over its minimum power.
    need = required_power(h, hi / j, req, n0)
    p_b = p_b_max * need / need.sum()
    closing = closing_powers(h, p_b_max)
    shortfall = float(np.max((need - closing) / need))
    return UrllcAlloc(w_u=float(hi), p_b=p_b, feasible=True, w_threshold=w_th,
                      diagnostics={"closing_rule_shortfall": shortfall})


def closing_powers(h_list, p_b_max):
    """Budget split with p_j proportional to |h_j|^-2, summing to p_b_max."""
    h = np.asarray(h_list, dtype=np.float64)
    inv = h ** -2.0
    return p_b_max * inv / inv.sum()


def fbl_rate(h_b, p, w, req, n0):
    """Finite-blocklength achievable rate (bit/s) with dispersion one."""
    snr = p * h_b / (n0 * w)
    return (w / LN2) * (np.log1p(snr) - q_inv(req.eps_req) / np.sqrt(req.tau_req * w))
