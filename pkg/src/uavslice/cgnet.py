"""Channel-gain coefficient estimators: ReLU MLPs trained with Adam.

A net maps a 7-D link description (two 3-D endpoints and a LoS flag) to the
log10 of the coefficient theta = gain * D^2.  Coordinates are divided by
the area extents (and by ``z_scale`` for heights) before entering the net.
Backpropagation is written out by hand.
"""

from dataclasses import dataclass, field

import numpy as np

from . import _kernels

THETA_FLOOR = 1e-12


class Mlp:
    """Fully connected net with ReLU hidden layers and a linear output."""

    def __init__(self, sizes, rng):
        self.sizes = tuple(sizes)
        self.params = []
        for n_in, n_out in zip(sizes[:-1], sizes[1:]):
            lim = np.sqrt(6.0 / (n_in + n_out))       # Xavier uniform
            self.params.append(rng.uniform(-lim, lim, size=(n_in, n_out)))
            self.params.append(np.zeros(n_out))

    def forward(self, x, keep=False):
        acts = [x]
        h = x
        n_layers = len(self.params) // 2
        for k in range(n_layers):
            W, b = self.params[2 * k], self.params[2 * k + 1]
            h = h @ W + b
            if k < n_layers - 1:
                h = np.maximum(h, 0.0)
            acts.append(h)
        return (h, acts) if keep else h

    def backward(self, acts, grad_out):
        """Gradients of sum(grad_out * output) w.r.t. every parameter."""
        grads = [None] * len(self.params)
        g = grad_out
        n_layers = len(self.params) // 2
        for k in reversed(range(n_layers)):
            W = self.params[2 * k]
            grads[2 * k] = acts[k].T @ g
            grads[2 * k + 1] = g.sum(axis=0)
            if k > 0:
                g = (g @ W.T) * (acts[k] > 0.0)
        return grads


class Adam:
    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.step_count = 0

    def step(self, params, grads):
        self.step_count += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1 ** self.step_count
        c2 = 1.0 - b2 ** self.step_count
        for p, g, m, v in zip(params, grads, self.m, self.v):
            _kernels.adam_update(p, g, m, v, self.lr, b1, b2, c1, c2, self.eps)


class ReplayBuffer:
    """FIFO ring buffer of (input, log10 target) pairs."""

    def __init__(self, capacity, dim, batch_size=64):
        self.capacity = int(capacity)
        self.batch_size = batch_size
        self._x = np.empty((min(self.capacity, 1024), dim))
        self._y = np.empty(min(self.capacity, 1024))
        self._next = 0
        self.size = 0

    def _grow(self):
        new = min(self.capacity, 2 * self._x.shape[0])
        self._x = np.concatenate([self._x, np.empty((new - self._x.shape[0],) + self._x.shape[1:])])
        self._y = np.concatenate([self._y, np.empty(new - self._y.shape[0])])

    def add(self, x, y):
        if self.size < self.capacity and self.size == self._x.shape[0]:
            self._grow()
        self._x[self._next] = x
        self._y[self._next] = y
        self._next = (self._next + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def contents(self):
        """Stored pairs, oldest first."""
        if self.size < self.capacity:
            return self._x[:self.size].copy(), self._y[:self.size].copy()
        order = np.r_[self._next:self.capacity, 0:self._next]
        return self._x[order], self._y[order]

    def sample(self, rng):
        idx = rng.integers(0, self.size, size=self.batch_size)
        return self._x[idx], self._y[idx]


@dataclass
class CgNet:
    mlp: Mlp
    opt: Adam
    buffer: ReplayBuffer
    area: tuple = (1000.0, 1000.0)
    z_scale: float = 100.0
    losses: list = field(default_factory=list)
    rejected: int = 0

    @property
    def lr(self):
        return self.opt.lr


def make_cgnet(rng, hidden=(512, 256), lr=1e-3, capacity=1_000_000, batch_size=64,
               area=(1000.0, 1000.0), z_scale=100.0):
    mlp = Mlp((7,) + tuple(hidden) + (1,), rng)
    return CgNet(mlp, Adam(mlp.params, lr=lr), ReplayBuffer(capacity, 7, batch_size),
                 tuple(area), z_scale)


def link_input(p_a, p_b, los):
    """Raw 7-vector [p_a (3); p_b (3); los] in metres.

    BtU uses p_a = UAV, p_b = BS; UtG uses p_a = user, p_b = UAV.
    Accepts row-aligned (m, 3) arrays as well.
    """
    p_a = np.atleast_2d(np.asarray(p_a, dtype=np.float64))
    p_b = np.atleast_2d(np.asarray(p_b, dtype=np.float64))
    flag = np.asarray(los, dtype=np.float64).reshape(-1, 1)
    flag = np.broadcast_to(flag, (p_a.shape[0], 1))
    return np.hstack([p_a, p_b, flag])


def normalise(net, raw):
    raw = np.atleast_2d(raw)
    scale = np.array([net.area[0], net.area[1], net.z_scale] * 2 + [1.0])
    return raw / scale


def forward(net, raw_input):
    """Estimated coefficient(s) theta_hat in linear units (floored)."""
    x = normalise(net, raw_input)
    out = net.mlp.forward(x)[:, 0]
    theta = np.maximum(10.0 ** out, THETA_FLOOR)
    return theta if theta.size > 1 else float(theta[0])


def forward_log(net, raw_input):
    return net.mlp.forward(normalise(net, raw_input))[:, 0]


def observe(net, raw_input, measured_coeff):
    """Store one measurement; nonpositive coefficients are rejected."""
    if not measured_coeff > 0:
        net.rejected += 1
        return False
    net.buffer.add(normalise(net, raw_input)[0], np.log10(measured_coeff))
    return True


def mse_loss_and_grads(mlp, x, y):
    pred, acts = mlp.forward(x, keep=True)
    err = pred[:, 0] - y
    loss = float(np.mean(err ** 2))
    grads = mlp.backward(acts, (2.0 / len(y)) * err[:, None])
    return loss, grads


def train_step(net, rng):
    """One Adam step on a random minibatch; returns the pre-update loss."""
    if net.buffer.size < net.buffer.batch_size:
        return None
    x, y = net.buffer.sample(rng)
    loss, grads = mse_loss_and_grads(net.mlp, x, y)
    net.opt.step(net.mlp.params, grads)
    net.losses.append(loss)
    return loss


def estimate_gain(net, raw_input, distance_m):
    """h_hat = theta_hat / D^2."""
    d = np.asarray(distance_m, dtype=np.float64)
    if np.any(d <= 0):
        raise ValueError("distance must be positive")
    return forward(net, raw_input) / d ** 2
