import copy

import numpy as np
import pytest

from uavslice import _kernels, cgnet


def _small(rng, hidden=(16, 8), lr=1e-3, capacity=1000, batch=8):
    return cgnet.make_cgnet(rng, hidden=hidden, lr=lr, capacity=capacity, batch_size=batch)


def test_architecture_and_xavier():
    net = cgnet.make_cgnet(np.random.default_rng(0))
    shapes = [p.shape for p in net.mlp.params]
    assert shapes == [(7, 512), (512,), (512, 256), (256,), (256, 1), (1,)]
    lim = np.sqrt(6.0 / (7 + 512))
    assert np.abs(net.mlp.params[0]).max() <= lim
    assert all(np.all(np.isfinite(p)) for p in net.mlp.params)


def test_zero_weights_and_purity():
    net = _small(np.random.default_rng(1))
    x = np.random.default_rng(2).uniform(size=(5, 7))
    a = net.mlp.forward(x)
    np.testing.assert_array_equal(a, net.mlp.forward(x))
    for p in net.mlp.params:
        p[...] = 0.0
    assert not net.mlp.forward(x).any()


def _central_diff_check(mlp, x, y, h=1e-6):
    _, grads = cgnet.mse_loss_and_grads(mlp, x, y)
    worst = 0.0
    for p, g in zip(mlp.params, grads):
        flat = p.reshape(-1)
        gflat = g.reshape(-1)
        for k in range(flat.size):
            old = flat[k]
            flat[k] = old + h
            lp, _ = cgnet.mse_loss_and_grads(mlp, x, y)
            flat[k] = old - h
            lm, _ = cgnet.mse_loss_and_grads(mlp, x, y)
            flat[k] = old
            fd = (lp - lm) / (2 * h)
            err = abs(fd - gflat[k]) / max(abs(fd), abs(gflat[k]), 1e-6)
            worst = max(worst, err)
    return worst


def test_backprop_matches_central_differences():
    rng = np.random.default_rng(3)
    for _ in range(3):
        mlp = cgnet.Mlp((7, 6, 5, 1), rng)
        for p in mlp.params[1::2]:
            p[...] = rng.normal(scale=0.1, size=p.shape)
        x = rng.normal(size=(9, 7))
        y = rng.normal(size=9)
        assert _central_diff_check(mlp, x, y) <= 1e-4


def test_replay_buffer_fifo():
    buf = cgnet.ReplayBuffer(5, 1, batch_size=2)
    oracle = []
    for k in range(12):
        buf.add([float(k)], float(k))
        oracle.append(k)
        oracle = oracle[-5:]
        xs, ys = buf.contents()
        assert list(ys) == oracle
    assert buf.size == 5


def test_observe_and_reject():
    net = _small(np.random.default_rng(4))
    raw = cgnet.link_input([1.0, 2.0, 50.0], [25.0, 37.5, 25.0], 1)
    assert cgnet.observe(net, raw, 2.5)
    assert net.buffer.size == 1
    assert not cgnet.observe(net, raw, 0.0)
    assert not cgnet.observe(net, raw, -1.0)
    assert net.rejected == 2 and net.buffer.size == 1


def test_train_step_small_buffer_noop():
    net = _small(np.random.default_rng(5), batch=8)
    raw = cgnet.link_input([1.0, 2.0, 50.0], [5.0, 6.0, 1.8], 0)
    for _ in range(7):
        cgnet.observe(net, raw, 1.0)
    assert cgnet.train_step(net, np.random.default_rng(0)) is None


def test_zero_learning_rate_keeps_params():
    rng = np.random.default_rng(6)
    net = _small(rng, lr=0.0)
    for _ in range(20):
        cgnet.observe(net, rng.uniform(0, 100, 7), rng.uniform(0.1, 10))
    before = [p.copy() for p in net.mlp.params]
    state = np.random.default_rng(7)
    probe = copy.deepcopy(state)
    loss = cgnet.train_step(net, state)
    for a, b in zip(before, net.mlp.params):
        np.testing.assert_array_equal(a, b)
    x, y = net.buffer.sample(probe)
    assert loss == pytest.approx(float(np.mean((net.mlp.forward(x)[:, 0] - y) ** 2)), rel=1e-14)


def _link_inputs(rng, n):
    x = rng.uniform(0, 1000, (n, 7))
    x[:, 2] = rng.uniform(0, 100, n)
    x[:, 5] = rng.uniform(0, 100, n)
    x[:, 6] = rng.integers(0, 2, n)
    return x


def test_constant_target_fit():
    """A constant log-coefficient is learned to 1e-3 within 2000 Adam steps."""
    rng = np.random.default_rng(8)
    net = _small(rng, hidden=(8, 4), lr=3e-3, batch=32)
    X = _link_inputs(rng, 200)
    for x in X:
        cgnet.observe(net, x, 10.0 ** -2.5)
    train_rng = np.random.default_rng(9)
    first = cgnet.train_step(net, train_rng)
    for _ in range(1999):
        loss = cgnet.train_step(net, train_rng)
    assert loss < 1e-6 * first
    np.testing.assert_allclose(cgnet.forward_log(net, X), -2.5, atol=1e-3)


def test_adam_reproducible():
    def train(seed):
        rng = np.random.default_rng(10)
        net = _small(rng)
        for _ in range(50):
            cgnet.observe(net, rng.uniform(0, 100, 7), rng.uniform(0.1, 10))
        r = np.random.default_rng(seed)
        for _ in range(30):
            cgnet.train_step(net, r)
        return net
    a, b = train(1), train(1)
    for p, q in zip(a.mlp.params, b.mlp.params):
        np.testing.assert_array_equal(p, q)


def test_adam_kernel_matches_numpy():
    rng = np.random.default_rng(11)
    p, g = rng.normal(size=(30, 20)), rng.normal(size=(30, 20))
    m, v = rng.normal(size=(30, 20)), rng.uniform(size=(30, 20))
    p2, m2, v2 = p.copy(), m.copy(), v.copy()
    _kernels.adam_update(p, g, m, v, 1e-3, 0.9, 0.999, 0.3, 0.01, 1e-8)
    _kernels.adam_update_numpy(p2, g, m2, v2, 1e-3, 0.9, 0.999, 0.3, 0.01, 1e-8)
    np.testing.assert_allclose(p, p2, rtol=1e-14, atol=1e-16)
    np.testing.assert_allclose(v, v2, rtol=1e-14)


def test_estimate_gain():
    net = _small(np.random.default_rng(12))
    for p in net.mlp.params:
        p[...] = 0.0        # log10 theta = 0  ->  theta = 1
    raw = cgnet.link_input([0.0, 0.0, 50.0], [1.0, 1.0, 1.8], 1)
    assert cgnet.estimate_gain(net, raw, 10.0) == pytest.approx(0.01)
    assert cgnet.estimate_gain(net, raw, 20.0) == pytest.approx(0.01 / 4)
    with pytest.raises(ValueError):
        cgnet.estimate_gain(net, raw, 0.0)
    net.mlp.params[-1][...] = -40.0
    assert cgnet.estimate_gain(net, raw, 10.0) > 0.0


def test_link_input_layout():
    raw = cgnet.link_input([[1, 2, 3], [4, 5, 6]], [[7, 8, 9], [1, 1, 1]], [1, 0])
    np.testing.assert_array_equal(raw, [[1, 2, 3, 7, 8, 9, 1], [4, 5, 6, 1, 1, 1, 0]])
