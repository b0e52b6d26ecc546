"""Analytic continuous test densities with exact gradients and samplers.

Used as targets and proposals for the gradient-guided samplers and as the
data distributions in the continuous-learning experiments.
"""

import numpy as np
from scipy.special import logsumexp


class Gaussian:
    """Multivariate normal with full log density, score, and exact sampling."""

    def __init__(self, mean, cov):
        self.mean = np.atleast_1d(np.asarray(mean, dtype=np.float64))
        cov = np.asarray(cov, dtype=np.float64)
        if cov.ndim == 0:
            cov = np.eye(self.mean.size) * float(cov)
        self.cov = cov
        self.dim = self.mean.size
        self._prec = np.linalg.inv(self.cov)
        sign, logdet = np.linalg.slogdet(self.cov)
        if sign <= 0:
            raise ValueError("covariance must be positive definite")
        self._log_norm = -0.5 * (self.dim * np.log(2.0 * np.pi) + logdet)
        self._chol = np.linalg.cholesky(self.cov)

    def log_prob(self, x) -> float:
        d = np.asarray(x, dtype=np.float64) - self.mean
        return float(self._log_norm - 0.5 * d @ self._prec @ d)

    # EnergyModel-style views used by the samplers
    def potential(self, x) -> float:
        return self.log_prob(x)

    def grad_x(self, x) -> np.ndarray:
        d = np.asarray(x, dtype=np.float64) - self.mean
        return -self._prec @ d

    def sample(self, rng) -> np.ndarray:
        return self.mean + self._chol @ rng.standard_normal(self.dim)

    def sample_n(self, rng, n) -> np.ndarray:
        return self.mean + rng.standard_normal((n, self.dim)) @ self._chol.T


class GaussianMixture:
    def __init__(self, weights, means, covs):
        self.weights = np.asarray(weights, dtype=np.float64)
        self.weights = self.weights / self.weights.sum()
        self.components = [Gaussian(m, c) for m, c in zip(means, covs)]
        self.dim = self.components[0].dim

    def log_prob(self, x) -> float:
        parts = [np.log(w) + c.log_prob(x) for w, c in zip(self.weights, self.components)]
        return float(logsumexp(parts))

    def potential(self, x) -> float:
        return self.log_prob(x)

    def grad_x(self, x) -> np.ndarray:
        parts = np.array([np.log(w) + c.log_prob(x)
                          for w, c in zip(self.weights, self.components)])
        resp = np.exp(parts - logsumexp(parts))
        grads = np.stack([c.grad_x(x) for c in self.components])
        return np.einsum("k,kd->d", resp, grads)

    def sample(self, rng) -> np.ndarray:
        k = int(rng.choice(len(self.components), p=self.weights))
        return self.components[k].sample(rng)

    def sample_n(self, rng, n) -> np.ndarray:
        return np.stack([self.sample(rng) for _ in range(n)])

    def responsibility(self, x) -> np.ndarray:
        parts = np.array([np.log(w) + c.log_prob(x)
                          for w, c in zip(self.weights, self.components)])
        return np.exp(parts - logsumexp(parts))


class QuadraticPotential:
    """Trainable quadratic family U(x) = -0.5 x'Ax + b'x with A symmetric.

    Parameterized by the upper triangle of A and by b; covers all Gaussian
    shapes, so fitting it to Gaussian data has a known closed-form answer.
    """

    def __init__(self, dim):
        self.dim = int(dim)
        self._triu = np.triu_indices(self.dim)
        self.A = np.eye(self.dim)
        self.b = np.zeros(self.dim)

    def potential(self, x) -> float:
        x = np.asarray(x, dtype=np.float64)
        return float(-0.5 * x @ self.A @ x + self.b @ x)

    def grad_x(self, x) -> np.ndarray:
        # A is symmetric, so x @ A broadcasts over an optional batch axis
        return -np.asarray(x, dtype=np.float64) @ self.A + self.b

    def grad_params_batch(self, xs) -> np.ndarray:
        xs = np.atleast_2d(np.asarray(xs, dtype=np.float64))
        outer = xs[:, :, None] * xs[:, None, :]
        scale = np.where(self._triu[0] == self._triu[1], 1.0, 2.0)
        dA = -0.5 * outer[:, self._triu[0], self._triu[1]] * scale
        return np.concatenate([dA, xs], axis=1)

    def grad_params(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        outer = np.outer(x, x)
        # off-diagonal upper entries appear twice in x'Ax under symmetry
        scale = np.where(self._triu[0] == self._triu[1], 1.0, 2.0)
        dA = -0.5 * outer[self._triu] * scale
        return np.concatenate([dA, x])

    def get_flat_params(self) -> np.ndarray:
        return np.concatenate([self.A[self._triu], self.b])

    def set_flat_params(self, values) -> None:
        values = np.asarray(values, dtype=np.float64)
        k = len(self._triu[0])
        A = np.zeros((self.dim, self.dim))
        A[self._triu] = values[:k]
        self.A = A + np.triu(A, 1).T
        self.b = values[k:].copy()

    def implied_gaussian(self) -> Gaussian:
        cov = np.linalg.inv(self.A)
        return Gaussian(cov @ self.b, cov)
