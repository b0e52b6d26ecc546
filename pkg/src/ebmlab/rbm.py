"""Restricted Boltzmann machine over binary visible/hidden units.

Joint potential U(v,h) = v'Wh + b'v + a'h (the negated energy).  The
bipartite structure factorizes both conditionals, and summing the hidden
layer in closed form gives the exact marginal ("free energy") used for
likelihood evaluation on small instances.
"""

import numpy as np

from .oracle import DiscreteSpace, EnergyModel, EnumerationRefused, StreamingLogSumExp
from .params import ParamVector
from .rng import derive_rng


def _sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


def _softplus(z):
    return np.logaddexp(0.0, z)


class Rbm(EnergyModel):
    """Configurations are 0/1 tuples of length D+H: visibles then hiddens."""

    def __init__(self, n_visible, n_hidden, seed=0, scale=0.1, rng=None):
        self.n_visible = int(n_visible)
        self.n_hidden = int(n_hidden)
        rng = rng if rng is not None else derive_rng(seed, "rbm")
        self.W = rng.uniform(-scale, scale, size=(self.n_visible, self.n_hidden))
        self.b = np.zeros(self.n_visible)
        self.a = np.zeros(self.n_hidden)

    # -- joint potential over (v, h) ----------------------------------------
    def _split(self, x):
        x = np.asarray(x, dtype=np.float64)
        return x[..., :self.n_visible], x[..., self.n_visible:]

    def potential(self, x) -> float:
        v, h = self._split(x)
        return float(v @ self.W @ h + self.b @ v + self.a @ h)

    def potential_batch(self, xs) -> np.ndarray:
        v, h = self._split(xs)
        return ((v @ self.W) * h).sum(axis=1) + v @ self.b + h @ self.a

    def grad_params(self, x) -> np.ndarray:
        v, h = self._split(x)
        return np.concatenate([np.outer(v, h).ravel(), v, h])

    def grad_params_batch(self, xs) -> np.ndarray:
        v, h = self._split(xs)
        outer = v[:, :, None] * h[:, None, :]
        return np.concatenate([outer.reshape(len(v), -1), v, h], axis=1)

    def param_vector(self) -> ParamVector:
        return ParamVector({"W": self.W, "b": self.b, "a": self.a})

    def set_param_vector(self, pv: ParamVector) -> None:
        self.W, self.b, self.a = pv["W"].copy(), pv["b"].copy(), pv["a"].copy()

    def get_flat_params(self) -> np.ndarray:
        return self.param_vector().flat()

    def set_flat_params(self, values) -> None:
        pv = self.param_vector()
        pv.set_flat(values)
        self.set_param_vector(pv)

    # -- factored conditionals ------------------------------------------------
    def p_h_given_v(self, v) -> np.ndarray:
        return _sigmoid(np.asarray(v, dtype=np.float64) @ self.W + self.a)

    def p_v_given_h(self, h) -> np.ndarray:
        return _sigmoid(np.asarray(h, dtype=np.float64) @ self.W.T + self.b)

    def sample_h_given_v(self, rng, v) -> np.ndarray:
        p = self.p_h_given_v(v)
        return (rng.random(p.shape) < p).astype(np.int64)

    def sample_v_given_h(self, rng, h) -> np.ndarray:
        p = self.p_v_given_h(h)
        return (rng.random(p.shape) < p).astype(np.int64)

    def block_gibbs_sweep(self, rng, v) -> np.ndarray:
        """v -> h -> v' block sweep; returns the new visible configuration."""
        return self.sample_v_given_h(rng, self.sample_h_given_v(rng, v))

    # single-site conditionals on the joint space (for the generic Gibbs sweep)
    @property
    def n_coords(self) -> int:
        return self.n_visible + self.n_hidden

    def conditional(self, x, i) -> np.ndarray:
        v, h = self._split(x)
        if i < self.n_visible:
            p_on = float(_sigmoid(self.W[i] @ h + self.b[i]))
        else:
            j = i - self.n_visible
            p_on = float(_sigmoid(v @ self.W[:, j] + self.a[j]))
        return np.array([1.0 - p_on, p_on])

    # -- exact marginal ---------------------------------------------------------
    def free_energy(self, v) -> float:
        """log sum_h exp U(v, h), the unnormalized log marginal of v."""
        v = np.asarray(v, dtype=np.float64)
        return float(self.b @ v + _softplus(v @ self.W + self.a).sum())

    def free_energy_batch(self, vs) -> np.ndarray:
        vs = np.asarray(vs, dtype=np.float64)
        return vs @ self.b + _softplus(vs @ self.W + self.a).sum(axis=1)

    def joint_space(self, cap=None) -> DiscreteSpace:
        kwargs = {} if cap is None else {"cap": cap}
        return DiscreteSpace.binary(self.n_visible + self.n_hidden, **kwargs)

    def log_z(self) -> float:
        """log Z by enumerating the visible space with the hidden layer summed out."""
        lse = StreamingLogSumExp()
        for batch in DiscreteSpace.binary(self.n_visible).batches():
            lse.add(self.free_energy_batch(batch))
        return lse.value()

    def log_likelihood(self, v) -> float:
        return self.free_energy(v) - self.log_z()


def rbm_loglik_exact(rbm: Rbm, dataset) -> float:
    """Average exact log p(v) over a dataset of visible configurations."""
    if rbm.n_visible + rbm.n_hidden > 24:
        raise EnumerationRefused(
            f"exact RBM likelihood refused: {rbm.n_visible}+{rbm.n_hidden} units exceed 24")
    log_z = rbm.log_z()
    vs = np.asarray(dataset, dtype=np.float64)
    return float(np.mean(rbm.free_energy_batch(vs) - log_z))


class RbmVisibleMarginal(EnergyModel):
    """EnergyModel view over visibles only: the potential is the free energy
    log sum_h exp U(v,h) and the gradient marginalizes the hidden layer."""

    def __init__(self, rbm: Rbm):
        self.rbm = rbm
        self.n_coords = rbm.n_visible

    def potential(self, v) -> float:
        return self.rbm.free_energy(v)

    def potential_batch(self, vs) -> np.ndarray:
        return self.rbm.free_energy_batch(vs)

    def grad_params(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=np.float64)
        mu = _sigmoid(v @ self.rbm.W + self.rbm.a)
        return np.concatenate([np.outer(v, mu).ravel(), v, mu])

    def grad_params_batch(self, vs) -> np.ndarray:
        vs = np.asarray(vs, dtype=np.float64)
        mu = _sigmoid(vs @ self.rbm.W + self.rbm.a)
        outer = vs[:, :, None] * mu[:, None, :]
        return np.concatenate([outer.reshape(len(vs), -1), vs, mu], axis=1)

    def get_flat_params(self) -> np.ndarray:
        return self.rbm.get_flat_params()

    def set_flat_params(self, values) -> None:
        self.rbm.set_flat_params(values)


class RbmLatentView:
    """Adapter exposing the RBM's hidden units as enumerable latents.

    ``marginal_grad`` is the closed-form gradient of the unnormalized log
    marginal log sum_h exp U(v,h); the enumeration side of the identity uses
    the raw joint potential gradients.
    """

    def __init__(self, rbm: Rbm):
        self.rbm = rbm

    def marginal_grad(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=np.float64)
        mu = _sigmoid(v @ self.rbm.W + self.rbm.a)
        return np.concatenate([np.outer(v, mu).ravel(), v, mu])

    def enumerate_latents(self, v):
        return DiscreteSpace.binary(self.rbm.n_hidden).states()

    def joint_logp_grad(self, v, h):
        x = tuple(v) + tuple(h)
        return self.rbm.potential(x), self.rbm.grad_params(x)
