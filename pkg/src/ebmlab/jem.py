"""Joint classifier-EBM over fixed-dimensional observations.

A K-logit network defines the joint potential U(x,y) = logit_y; the induced
conditional p(y|x) is the usual softmax classifier and the induced marginal
potential is U(x) = logsumexp of the logits.  Semi-supervised training mixes
the marginal KL objective with the discriminative log-loss; the negative
phase is exact on a grid discretization by default (an SGLD variant is
available through the samplers module).
"""

import numpy as np
from scipy.special import logsumexp, softmax

from .nets import DenseNet
from .rng import derive_rng


class JemModel:
    def __init__(self, net: DenseNet):
        if net.n_out < 2:
            raise ValueError("JEM classifier needs at least two logits")
        self.net = net
        self.n_classes = net.n_out

    def logits(self, x) -> np.ndarray:
        return self.net.output(np.asarray(x, dtype=np.float64))

    def joint_potential(self, x, y) -> float:
        return float(self.logits(x)[int(y)])

    def marginal_potential(self, x) -> float:
        return float(logsumexp(self.logits(x)))

    def marginal_potential_batch(self, xs) -> np.ndarray:
        return logsumexp(self.logits(xs), axis=1)

    def class_posterior(self, x) -> np.ndarray:
        return softmax(self.logits(x))

    def predict(self, xs) -> np.ndarray:
        return np.argmax(self.logits(np.atleast_2d(xs)), axis=1)

    def potential(self, x) -> float:  # EnergyModel view of the marginal
        return self.marginal_potential(x)

    def grad_x(self, x) -> np.ndarray:
        cache = self.net.forward(np.asarray(x, dtype=np.float64))
        out = cache["activations"][-1]
        _, input_grad = self.net.backward(cache, softmax(out, axis=-1))
        return input_grad

    def get_flat_params(self) -> np.ndarray:
        return self.net.get_flat_params()

    def set_flat_params(self, values) -> None:
        self.net.set_flat_params(values)


def jem_ssl_objective(jem: JemModel, labeled, unlabeled, alpha_d, grid):
    """Semi-supervised objective (to be minimized) and its flat gradient.

    The generative term is KL(p_emp || p_model) up to the empirical-entropy
    and grid-cell constants, with the partition sum enumerated over ``grid``;
    the discriminative term is -alpha_d * sum of label log-likelihoods.
    """
    labeled = list(labeled)
    if alpha_d > 0 and not labeled:
        raise ValueError("alpha_d > 0 requires a labeled set")
    xs_lab = np.array([x for x, _ in labeled], dtype=np.float64).reshape(len(labeled), -1)
    ys_lab = np.array([int(y) for _, y in labeled])
    unlabeled = np.asarray(unlabeled, dtype=np.float64).reshape(len(unlabeled), -1)
    data = np.concatenate([xs_lab, unlabeled], axis=0) if len(labeled) else unlabeled
    grid = np.asarray(grid, dtype=np.float64)
    n = len(data)

    cache_data = jem.net.forward(data)
    logits_data = cache_data["activations"][-1]
    cache_grid = jem.net.forward(grid)
    logits_grid = cache_grid["activations"][-1]

    u_data = logsumexp(logits_data, axis=1)
    u_grid = logsumexp(logits_grid, axis=1)
    log_z = float(logsumexp(u_grid))
    value = -float(u_data.mean()) + log_z

    # dU/dlogits is the per-point softmax; grid points weight by p_model
    gd = -softmax(logits_data, axis=1) / n
    w_grid = np.exp(u_grid - log_z)
    gg = softmax(logits_grid, axis=1) * w_grid[:, None]

    if alpha_d > 0:
        logits_lab = logits_data[:len(labeled)]
        post = softmax(logits_lab, axis=1)
        ll = logits_lab[np.arange(len(labeled)), ys_lab] - logsumexp(logits_lab, axis=1)
        value -= alpha_d * float(ll.sum())
        onehot = np.zeros_like(post)
        onehot[np.arange(len(labeled)), ys_lab] = 1.0
        gd[:len(labeled)] -= alpha_d * (onehot - post)

    grads_d, _ = jem.net.backward(cache_data, gd)
    grads_g, _ = jem.net.backward(cache_grid, gg)
    return value, grads_d.flat() + grads_g.flat()


def jem_ssl_train(jem: JemModel, labeled, unlabeled, grid, alpha_d=1.0,
                  steps=300, lr=0.5, seed=0):
    """Full-batch gradient descent on the semi-supervised objective."""
    del seed  # deterministic given the initial network
    trace = []
    for t in range(steps):
        value, grad = jem_ssl_objective(jem, labeled, unlabeled, alpha_d, grid)
        theta = jem.get_flat_params() - lr * grad
        jem.set_flat_params(theta)
        trace.append(value)
    return np.array(trace)


def make_grid(lo, hi, resolution) -> np.ndarray:
    """Uniform 2-D grid of cell centers over [lo, hi]^2."""
    ticks = np.linspace(lo, hi, resolution)
    xx, yy = np.meshgrid(ticks, ticks)
    return np.stack([xx.ravel(), yy.ravel()], axis=1)
