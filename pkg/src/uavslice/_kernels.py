"""Hot loops with two interchangeable backends.

Every kernel has a numba ``@njit`` body and a pure-numpy body with the same
signature.  The numba versions are used when numba imports cleanly, unless
the environment variable ``UAVSLICE_NUMBA`` is set to ``0``; the flag is read
once at import time.  ``benchmarks/bench_kernels.py`` times both paths.
"""

import os

import numpy as np

try:
    from numba import njit
    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    _HAVE_NUMBA = False

USE_NUMBA = _HAVE_NUMBA and os.environ.get("UAVSLICE_NUMBA", "1") != "0"
BACKEND = "numba" if USE_NUMBA else "numpy"

_EPS_T = 1e-9


# ---------------------------------------------------------------------------
# segment / axis-aligned box blockage
# ---------------------------------------------------------------------------

def segments_blocked_numpy(p1, p2, boxes):
    """Return a bool per segment: does p1[m]->p2[m] cut any box interior?

    ``boxes`` rows are (x0, y0, x1, y1, height); every box sits on z=0.
    Touching a face (rooftop, wall plane) does not count as blockage.
    """
    p1 = np.atleast_2d(np.asarray(p1, dtype=np.float64))
    p2 = np.atleast_2d(np.asarray(p2, dtype=np.float64))
    m = p1.shape[0]
    if boxes.shape[0] == 0 or m == 0:
        return np.zeros(m, dtype=np.bool_)
    lo = np.stack([boxes[:, 0], boxes[:, 1], np.zeros(boxes.shape[0])], axis=1)
    hi = np.stack([boxes[:, 2], boxes[:, 3], boxes[:, 4]], axis=1)
    d = p2 - p1                                     # (m, 3)
    t_enter = np.zeros((m, boxes.shape[0]))
    t_exit = np.ones((m, boxes.shape[0]))
    outside = np.zeros((m, boxes.shape[0]), dtype=np.bool_)
    for ax in range(3):
        da = d[:, ax][:, None]
        pa = p1[:, ax][:, None]
        flat = np.abs(da) < 1e-12
        with np.errstate(divide="ignore", invalid="ignore"):
            t1 = (lo[None, :, ax] - pa) / da
            t2 = (hi[None, :, ax] - pa) / da
        tmin = np.where(flat, -np.inf, np.minimum(t1, t2))
        tmax = np.where(flat, np.inf, np.maximum(t1, t2))
        outside |= flat & ((pa <= lo[None, :, ax] + 1e-12) | (pa >= hi[None, :, ax] - 1e-12))
        t_enter = np.maximum(t_enter, tmin)
        t_exit = np.minimum(t_exit, tmax)
    hit = (~outside) & (t_exit - t_enter > _EPS_T)
    return hit.any(axis=1)


if _HAVE_NUMBA:
    @njit(cache=True)
    def _segments_blocked_nb(p1, p2, boxes):
        m = p1.shape[0]
        nb = boxes.shape[0]
        out = np.zeros(m, dtype=np.bool_)
        for k in range(m):
            for b in range(nb):
                t_in = 0.0
                t_out = 1.0
                miss = False
                for ax in range(3):
                    if ax == 0:
                        lo, hi = boxes[b, 0], boxes[b, 2]
                    elif ax == 1:
                        lo, hi = boxes[b, 1], boxes[b, 3]
                    else:
                        lo, hi = 0.0, boxes[b, 4]
                    da = p2[k, ax] - p1[k, ax]
                    pa = p1[k, ax]
                    if abs(da) < 1e-12:
                        if pa <= lo + 1e-12 or pa >= hi - 1e-12:
                            miss = True
                            break
                        continue
                    t1 = (lo - pa) / da
                    t2 = (hi - pa) / da
                    if t1 > t2:
                        t1, t2 = t2, t1
                    if t1 > t_in:
                        t_in = t1
                    if t2 < t_out:
                        t_out = t2
                    if t_out - t_in <= 1e-9:
                        miss = True
                        break
                if not miss and t_out - t_in > 1e-9:
                    out[k] = True
                    break
        return out


def segments_blocked(p1, p2, boxes):
    p1 = np.ascontiguousarray(np.atleast_2d(p1), dtype=np.float64)
    p2 = np.ascontiguousarray(np.atleast_2d(p2), dtype=np.float64)
    boxes = np.ascontiguousarray(boxes, dtype=np.float64).reshape(-1, 5)
    if USE_NUMBA:
        return _segments_blocked_nb(p1, p2, boxes)
    return segments_blocked_numpy(p1, p2, boxes)


# ---------------------------------------------------------------------------
# ADMM consensus for ridge readouts
# ---------------------------------------------------------------------------

def admm_consensus_numpy(X, Y, xi, lam, eta, r_max, tol, w_hat, A):
    """Run consensus ADMM iterations for one user.

    X: (J, Q, D) hidden matrices, Y: (J, Q, O) targets.  ``w_hat`` (D, O)
    and ``A`` (J, D, O) are the starting global weights and multipliers and
    are not modified.  Returns (w_hat, W, A, iterations, residual).

    Each local solve (X^T X + lam I)^{-1} r uses the Woodbury identity
    through the small Q x Q system, so a round costs O(J Q D O).
    """
    J, Q, D = X.shape
    w_hat = w_hat.copy()
    A = A.copy()
    W = np.repeat(w_hat[None], J, axis=0)
    if r_max <= 0 or J == 0:
        return w_hat, W, A, 0, np.inf
    gram = lam * np.eye(Q)[None] + X @ X.transpose(0, 2, 1)
    P = np.linalg.solve(gram, X)                    # (J, Q, D)
    XtY = X.transpose(0, 2, 1) @ Y                  # (J, D, O)
    Xt = X.transpose(0, 2, 1)
    res = np.inf
    it = 0
    for it in range(1, r_max + 1):
        R = XtY + lam * w_hat[None] - A
        W = (R - Xt @ (P @ R)) / lam
        w_hat = (A.sum(axis=0) + lam * W.sum(axis=0)) / (xi + lam * J)
        diff = W - w_hat[None]
        A = A + eta * diff
        res = np.sqrt((diff * diff).sum(axis=(1, 2))).max()
        if res <= tol:
            break
    return w_hat, W, A, it, res


if _HAVE_NUMBA:
    @njit(cache=True)
    def _admm_consensus_nb(X, Y, xi, lam, eta, r_max, tol, w_hat0, A0):
        J, Q, D = X.shape
        O = Y.shape[2]
        w_hat = w_hat0.copy()
        A = A0.copy()
        W = np.empty((J, D, O))
        for j in range(J):
            W[j] = w_hat
        if r_max <= 0 or J == 0:
            return w_hat, W, A, 0, np.inf
        P = np.empty((J, Q, D))
        XtY = np.zeros((J, D, O))
        for j in range(J):
            gram = X[j] @ X[j].T
            for q in range(Q):
                gram[q, q] += lam
            P[j] = np.linalg.solve(gram, np.ascontiguousarray(X[j]))
            for d in range(D):
                for o in range(O):
                    acc = 0.0
                    for q in range(Q):
                        acc += X[j, q, d] * Y[j, q, o]
                    XtY[j, d, o] = acc
        R = np.empty((D, O))
        PR = np.empty((Q, O))
        res = np.inf
        it = 0
        denom = xi + lam * J
        for it in range(1, r_max + 1):
            for j in range(J):
                for d in range(D):
                    for o in range(O):
                        R[d, o] = XtY[j, d, o] + lam * w_hat[d, o] - A[j, d, o]
                for q in range(Q):
                    for o in range(O):
                        acc = 0.0
                        for d in range(D):
                            acc += P[j, q, d] * R[d, o]
                        PR[q, o] = acc
                for d in range(D):
                    for o in range(O):
                        W[j, d, o] = R[d, o]
                for q in range(Q):
                    for d in range(D):
                        xqd = X[j, q, d]
                        for o in range(O):
                            W[j, d, o] -= xqd * PR[q, o]
                for d in range(D):
                    for o in range(O):
                        W[j, d, o] /= lam
            for d in range(D):
                for o in range(O):
                    acc = 0.0
                    for j in range(J):
                        acc += A[j, d, o] + lam * W[j, d, o]
                    w_hat[d, o] = acc / denom
            res = 0.0
            for j in range(J):
                nrm = 0.0
                for d in range(D):
                    for o in range(O):
                        diff = W[j, d, o] - w_hat[d, o]
                        A[j, d, o] += eta * diff
                        nrm += diff * diff
                nrm = np.sqrt(nrm)
                if nrm > res:
                    res = nrm
            if res <= tol:
                break
        return w_hat, W, A, it, res


def admm_consensus(X, Y, xi, lam, eta, r_max, tol, w_hat, A):
    X = np.ascontiguousarray(X, dtype=np.float64)
    Y = np.ascontiguousarray(Y, dtype=np.float64)
    w_hat = np.ascontiguousarray(w_hat, dtype=np.float64)
    A = np.ascontiguousarray(A, dtype=np.float64)
    if USE_NUMBA:
        w, W, A2, it, res = _admm_consensus_nb(X, Y, float(xi), float(lam), float(eta),
                                               int(r_max), float(tol), w_hat, A)
        return w, W, A2, int(it), float(res)
    return admm_consensus_numpy(X, Y, xi, lam, eta, int(r_max), tol, w_hat, A)


# ---------------------------------------------------------------------------
# Adam parameter update
# ---------------------------------------------------------------------------

def adam_update_numpy(p, g, m, v, lr, beta1, beta2, c1, c2, eps):
    """In-place Adam step on one parameter array (bias corrections c1, c2)."""
    m *= beta1
    m += (1.0 - beta1) * g
    v *= beta2
    v += (1.0 - beta2) * g * g
    p -= lr * (m / c1) / (np.sqrt(v / c2) + eps)


if _HAVE_NUMBA:
    @njit(cache=True)
    def _adam_update_nb(p, g, m, v, lr, beta1, beta2, c1, c2, eps):
        for k in range(p.size):
            mk = beta1 * m[k] + (1.0 - beta1) * g[k]
            vk = beta2 * v[k] + (1.0 - beta2) * g[k] * g[k]
            m[k] = mk
            v[k] = vk
            p[k] -= lr * (mk / c1) / (np.sqrt(vk / c2) + eps)


def adam_update(p, g, m, v, lr, beta1, beta2, c1, c2, eps):
    if USE_NUMBA and p.flags.c_contiguous and m.flags.c_contiguous and v.flags.c_contiguous:
        _adam_update_nb(p.reshape(-1), np.ascontiguousarray(g).reshape(-1), m.reshape(-1),
                        v.reshape(-1), lr, beta1, beta2, c1, c2, eps)
    else:
        adam_update_numpy(p, g, m, v, lr, beta1, beta2, c1, c2, eps)
