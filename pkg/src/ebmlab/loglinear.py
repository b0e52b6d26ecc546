"""Log-linear (maxent) models: U(x) = weights . features(x).

The parameter gradient is the feature vector itself, which makes these the
reference models for testing estimators: the likelihood is concave and the
maximum-likelihood optimum matches empirical feature moments exactly.
"""

import numpy as np

from .oracle import DiscreteSpace, EnergyModel, enumerate_expectation, enumerate_log_z


class LogLinearModel(EnergyModel):
    def __init__(self, feature_fn, dim, weights=None, batch_feature_fn=None):
        self.feature_fn = feature_fn
        self.batch_feature_fn = batch_feature_fn
        self.dim = int(dim)
        self.weights = np.zeros(self.dim) if weights is None else np.array(weights, dtype=np.float64)
        if self.weights.shape != (self.dim,):
            raise ValueError("weights shape does not match feature dimension")

    def features(self, x) -> np.ndarray:
        return np.asarray(self.feature_fn(x), dtype=np.float64)

    def feature_batch(self, xs) -> np.ndarray:
        if self.batch_feature_fn is not None:
            return np.asarray(self.batch_feature_fn(xs), dtype=np.float64)
        return np.stack([self.features(tuple(int(v) for v in row)) for row in xs])

    def potential(self, x) -> float:
        return float(self.features(x) @ self.weights)

    def potential_batch(self, xs) -> np.ndarray:
        return self.feature_batch(xs) @ self.weights

    def grad_params(self, x) -> np.ndarray:
        return self.features(x)

    def grad_params_batch(self, xs) -> np.ndarray:
        return self.feature_batch(xs)

    def get_flat_params(self) -> np.ndarray:
        return self.weights.copy()

    def set_flat_params(self, values) -> None:
        self.weights = np.array(values, dtype=np.float64).reshape(self.dim)


class IndexedLogLinear(LogLinearModel):
    """Log-linear model over an enumerable space with a precomputed feature table.

    Rows of the (S, d) table follow the space's enumeration order, so batch
    scoring reduces to index lookups.  Useful when an estimator must score
    hundreds of thousands of samples per iteration.
    """

    def __init__(self, space: DiscreteSpace, feature_table, weights=None):
        self.space = space
        self.table = np.asarray(feature_table, dtype=np.float64)
        if self.table.shape[0] != space.size:
            raise ValueError("feature table must have one row per configuration")

        def feature_fn(x):
            return self.table[space.index_of(x)]

        def batch_feature_fn(xs):
            return self.table[space.indices_of(np.asarray(xs))]

        super().__init__(feature_fn, self.table.shape[1], weights, batch_feature_fn)

    @classmethod
    def from_feature_fn(cls, space, feature_fn, dim, weights=None):
        table = np.zeros((space.size, dim))
        pos = 0
        for batch in space.batches():
            for row in batch:
                table[pos] = feature_fn(tuple(int(v) for v in row))
                pos += 1
        return cls(space, table, weights)

    def features_by_index(self, indices) -> np.ndarray:
        return self.table[np.asarray(indices, dtype=np.int64)]

    def potentials_by_index(self, indices) -> np.ndarray:
        return self.features_by_index(indices) @ self.weights


def fit_exact_mle(model: LogLinearModel, space: DiscreteSpace, empirical_means,
                  steps=2000, lr=0.5, l2=0.0, tol=1e-10):
    """Full-batch gradient ascent with exact (enumerated) model expectations.

    Converges to the maxent solution matching ``empirical_means`` when the
    optimum is interior; an l2 weight makes degenerate instances finite.
    """
    empirical_means = np.asarray(empirical_means, dtype=np.float64)
    for _ in range(steps):
        model_means = enumerate_expectation(
            model, space, None, batch_statistic=model.feature_batch)
        grad = empirical_means - model_means - l2 * model.weights
        model.weights = model.weights + lr * grad
        if np.max(np.abs(grad)) < tol:
            break
    return model


def log_likelihood(model: LogLinearModel, space: DiscreteSpace, xs) -> float:
    log_z = enumerate_log_z(model, space)
    return float(np.mean([model.potential(x) for x in xs]) - log_z)
