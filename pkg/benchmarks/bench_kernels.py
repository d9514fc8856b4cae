"""Time the numba kernels against their pure-numpy fallbacks.

    python benchmarks/bench_kernels.py [--repeat 20]

Each kernel is first checked for agreement with its fallback, then timed
(median of ``--repeat`` calls, after one warm-up call that triggers JIT
compilation).
"""

import argparse
import time

import numpy as np

from uavslice import _kernels as k


def _median_time(fn, repeat):
    fn()
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return float(np.median(times))


def bench_los(rng, repeat):
    n_links, n_boxes = 2000, 300
    p1 = rng.uniform(0, 1000, (n_links, 3))
    p1[:, 2] = 50.0
    p2 = rng.uniform(0, 1000, (n_links, 3))
    p2[:, 2] = 1.8
    lo = rng.uniform(0, 980, (n_boxes, 2))
    size = rng.uniform(5, 20, (n_boxes, 2))
    h = rng.uniform(1, 40, n_boxes)
    boxes = np.column_stack([lo, lo + size, h])
    a = k._segments_blocked_nb(p1, p2, boxes)
    b = k.segments_blocked_numpy(p1, p2, boxes)
    assert np.array_equal(a, b)
    return ("segments_blocked 2000 links x 300 boxes",
            _median_time(lambda: k._segments_blocked_nb(p1, p2, boxes), repeat),
            _median_time(lambda: k.segments_blocked_numpy(p1, p2, boxes), repeat))


def bench_admm(rng, repeat):
    J, Q, D, O = 3, 6, 302, 2
    X = rng.normal(size=(J, Q, D))
    Y = rng.normal(size=(J, Q, O))
    w0 = np.zeros((D, O))
    A0 = np.zeros((J, D, O))
    args = (X, Y, 1e-3, 1.0, 1.0, 100, 0.0, w0, A0)
    a = k._admm_consensus_nb(*args)
    b = k.admm_consensus_numpy(*args)
    assert np.allclose(a[0], b[0], rtol=1e-9, atol=1e-12)
    return ("admm_consensus J=3 Q=6 D=302, 100 rounds",
            _median_time(lambda: k._admm_consensus_nb(*args), repeat),
            _median_time(lambda: k.admm_consensus_numpy(*args), repeat))


def bench_adam(rng, repeat):
    shape = (512, 256)
    p = rng.normal(size=shape)
    g = rng.normal(size=shape)
    m = np.zeros(shape)
    v = np.zeros(shape)
    hyper = (1e-3, 0.9, 0.999, 0.1, 0.001, 1e-8)
    pa, ma, va = p.copy(), m.copy(), v.copy()
    k._adam_update_nb(pa.reshape(-1), g.reshape(-1), ma.reshape(-1), va.reshape(-1), *hyper)
    k.adam_update_numpy(p, g, m, v, *hyper)
    assert np.allclose(pa, p, rtol=1e-12, atol=1e-15)
    flat = (pa.reshape(-1), g.reshape(-1), ma.reshape(-1), va.reshape(-1))
    return ("adam_update 512x256",
            _median_time(lambda: k._adam_update_nb(*flat, *hyper), repeat),
            _median_time(lambda: k.adam_update_numpy(p, g, m, v, *hyper), repeat))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    if not k._HAVE_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")
    rng = np.random.default_rng(args.seed)
    print(f"{'kernel':45s} {'numba ms':>10s} {'numpy ms':>10s} {'speedup':>8s}")
    for bench in (bench_los, bench_admm, bench_adam):
        name, t_nb, t_np = bench(rng, args.repeat)
        print(f"{name:45s} {1e3 * t_nb:10.3f} {1e3 * t_np:10.3f} {t_np / t_nb:8.1f}x")


if __name__ == "__main__":
    main()
