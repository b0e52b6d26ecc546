"""Exact brute-force reference computations.

Everything else in the package is tested against this module: partition
functions and expectations by full enumeration with streaming log-sum-exp,
total-variation distances between probability tables, central-difference
gradients, and the marginal-gradient identity for latent-variable models.
"""

import numpy as np

DEFAULT_ENUMERATION_CAP = 2 ** 24
_BATCH = 65536


class EnumerationRefused(RuntimeError):
    """Raised when a space is too large to enumerate under the configured cap."""


class SupportMismatch(ValueError):
    """Raised when two probability tables do not share a support."""


# ---------------------------------------------------------------------------
# configuration spaces
# ---------------------------------------------------------------------------

class DiscreteSpace:
    """An enumerable configuration space.

    Either fixed-dimensional (per-coordinate cardinalities ``axes``) or
    trans-dimensional (union over lengths l in [min_len, max_len] of the
    sequences over a vocabulary of size ``vocab_size``).  Configurations are
    tuples of ints; batches are (B, l) int arrays with one common row length.
    """

    def __init__(self, axes=None, vocab_size=None, min_len=1, max_len=None,
                 cap=DEFAULT_ENUMERATION_CAP):
        if (axes is None) == (vocab_size is None):
            raise ValueError("give exactly one of axes / vocab_size")
        self.cap = int(cap)
        if axes is not None:
            self.axes = [int(a) for a in axes]
            if any(a < 1 for a in self.axes):
                raise ValueError("axis cardinalities must be >= 1")
            self.lengths = [len(self.axes)]
            self._counts = {len(self.axes): int(np.prod(self.axes, dtype=object))}
        else:
            if max_len is None:
                raise ValueError("sequence space needs max_len")
            self.vocab_size = int(vocab_size)
            self.lengths = list(range(int(min_len), int(max_len) + 1))
            self._counts = {l: self.vocab_size ** l for l in self.lengths}
        self._offsets = {}
        total = 0
        for l in self.lengths:
            self._offsets[l] = total
            total += self._counts[l]
        self.size = total

    @classmethod
    def fixed(cls, axes, cap=DEFAULT_ENUMERATION_CAP):
        return cls(axes=axes, cap=cap)

    @classmethod
    def binary(cls, n, cap=DEFAULT_ENUMERATION_CAP):
        return cls(axes=[2] * n, cap=cap)

    @classmethod
    def sequences(cls, vocab_size, max_len, min_len=1, cap=DEFAULT_ENUMERATION_CAP):
        return cls(vocab_size=vocab_size, min_len=min_len, max_len=max_len, cap=cap)

    @property
    def is_sequence_space(self) -> bool:
        return not hasattr(self, "axes")

    def check_cap(self) -> None:
        if self.size > self.cap:
            raise EnumerationRefused(
                f"enumeration refused: {self.size} states exceed cap {self.cap}")

    def _radices(self, length):
        return self.axes if not self.is_sequence_space else [self.vocab_size] * length

    def _decode(self, indices, length) -> np.ndarray:
        radices = self._radices(length)
        out = np.empty((indices.size, length), dtype=np.int64)
        rem = indices.astype(np.int64)
        for pos in range(length - 1, -1, -1):
            rem, out[:, pos] = np.divmod(rem, radices[pos])
        return out

    def batches(self, batch_size=_BATCH):
        """Yield (B, l) int arrays covering every configuration exactly once."""
        self.check_cap()
        for l in self.lengths:
            count = self._counts[l]
            for start in range(0, count, batch_size):
                idx = np.arange(start, min(start + batch_size, count))
                yield self._decode(idx, l)

    def states(self):
        for batch in self.batches():
            for row in batch:
                yield tuple(int(v) for v in row)

    def index_of(self, x) -> int:
        """Rank of a configuration in enumeration order."""
        x = tuple(int(v) for v in x)
        l = len(x)
        if l not in self._offsets:
            raise ValueError(f"no length-{l} configurations in this space")
        radices = self._radices(l)
        idx = 0
        for v, r in zip(x, radices):
            if not 0 <= v < r:
                raise ValueError(f"coordinate {v} out of range [0,{r})")
            idx = idx * r + v
        return self._offsets[l] + idx

    def indices_of(self, batch) -> np.ndarray:
        """Vectorized ``index_of`` for a (B, l) batch of one common length."""
        batch = np.asarray(batch, dtype=np.int64)
        l = batch.shape[1]
        if l not in self._offsets:
            raise ValueError(f"no length-{l} configurations in this space")
        radices = self._radices(l)
        idx = np.zeros(batch.shape[0], dtype=np.int64)
        for pos, r in enumerate(radices):
            idx = idx * r + batch[:, pos]
        return idx + self._offsets[l]


# ---------------------------------------------------------------------------
# energy models
# ---------------------------------------------------------------------------

class EnergyModel:
    """A parameterized unnormalized density.

    Subclasses implement the log-domain potential U(x) and its parameter
    gradient.  Samplers see only ``potential`` (and, for continuous models,
    ``grad_x``); the normalizing constant is never part of the interface.
    """

    def potential(self, x) -> float:
        raise NotImplementedError

    def potential_batch(self, xs) -> np.ndarray:
        return np.array([self.potential(x) for x in xs], dtype=np.float64)

    def grad_params(self, x) -> np.ndarray:
        raise NotImplementedError

    def grad_params_batch(self, xs) -> np.ndarray:
        return np.stack([self.grad_params(x) for x in xs])

    def get_flat_params(self) -> np.ndarray:
        raise NotImplementedError

    def set_flat_params(self, values) -> None:
        raise NotImplementedError

    @property
    def n_params(self) -> int:
        return self.get_flat_params().size


# ---------------------------------------------------------------------------
# streaming log-sum-exp
# ---------------------------------------------------------------------------

class StreamingLogSumExp:
    """Numerically stable log of a streamed sum of exponentials."""

    def __init__(self):
        self._max = -np.inf
        self._sum = 0.0

    def add(self, values) -> None:
        values = np.asarray(values, dtype=np.float64).ravel()
        if values.size == 0:
            return
        m = float(values.max())
        if m == -np.inf:
            return
        if m > self._max:
            if self._max > -np.inf:
                self._sum *= np.exp(self._max - m)
            self._max = m
        self._sum += float(np.exp(values - self._max).sum())

    def value(self) -> float:
        if self._max == -np.inf:
            return -np.inf
        return self._max + np.log(self._sum)


# ---------------------------------------------------------------------------
# enumeration operations
# ---------------------------------------------------------------------------

def enumerate_log_z(model: EnergyModel, space: DiscreteSpace) -> float:
    """log sum_x exp U(x) over the whole space."""
    space.check_cap()
    lse = StreamingLogSumExp()
    for batch in space.batches():
        lse.add(model.potential_batch(batch))
    return lse.value()


def enumerate_expectation(model, space, statistic, batch_statistic=None) -> np.ndarray:
    """E_p[statistic(x)] under p(x) = exp(U(x) - log Z).

    ``statistic`` maps one configuration to a scalar or vector;
    ``batch_statistic`` optionally maps a (B, l) batch to a (B, d) array.
    """
    log_z = enumerate_log_z(model, space)
    total = None
    for batch in space.batches():
        w = np.exp(model.potential_batch(batch) - log_z)
        if batch_statistic is not None:
            stats = np.atleast_2d(np.asarray(batch_statistic(batch), dtype=np.float64))
        else:
            stats = np.atleast_2d(
                np.array([np.atleast_1d(statistic(tuple(int(v) for v in row)))
                          for row in batch], dtype=np.float64))
        contrib = w @ stats
        total = contrib if total is None else total + contrib
    return total


def enumerate_probs(model, space) -> np.ndarray:
    """Full probability table in enumeration order."""
    log_z = enumerate_log_z(model, space)
    out = np.empty(space.size)
    pos = 0
    for batch in space.batches():
        u = model.potential_batch(batch)
        out[pos:pos + len(u)] = np.exp(u - log_z)
        pos += len(u)
    return out


def tv_distance(p, q) -> float:
    """Total variation distance (1/2) sum |p - q| between two tables."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise SupportMismatch(f"supports differ: {p.shape} vs {q.shape}")
    for name, table in (("p", p), ("q", q)):
        s = table.sum()
        if abs(s - 1.0) > 1e-9:
            raise SupportMismatch(f"{name} sums to {s}, not 1")
    return 0.5 * float(np.abs(p - q).sum())


# ---------------------------------------------------------------------------
# finite differences
# ---------------------------------------------------------------------------

def central_difference(f, theta0, h=1e-5) -> np.ndarray:
    """Central-difference gradient of a scalar function of a flat vector."""
    if h <= 0:
        raise ValueError("h must be positive")
    theta0 = np.asarray(theta0, dtype=np.float64)
    grad = np.empty_like(theta0)
    for i in range(theta0.size):
        up = theta0.copy()
        dn = theta0.copy()
        up[i] += h
        dn[i] -= h
        grad[i] = (f(up) - f(dn)) / (2.0 * h)
    return grad


def finite_diff_grad(model: EnergyModel, x, h=1e-5) -> np.ndarray:
    """Central-difference gradient of U(x) w.r.t. the flat parameters."""
    theta0 = model.get_flat_params()

    def f(theta):
        model.set_flat_params(theta)
        return model.potential(x)

    try:
        return central_difference(f, theta0, h)
    finally:
        model.set_flat_params(theta0)


# ---------------------------------------------------------------------------
# latent-variable marginal-gradient identity
# ---------------------------------------------------------------------------

def fisher_equality_check(latent_model, x) -> float:
    """Max-abs residual between the model's marginal log-likelihood gradient
    and the posterior-weighted joint gradient, both by enumeration.

    ``latent_model`` must provide:
      marginal_grad(x)        implemented gradient of log p(x)
      enumerate_latents(x)    iterable of latent configurations h
      joint_logp_grad(x, h)   (log p(x, h), gradient of log p(x, h))
    """
    direct = np.asarray(latent_model.marginal_grad(x), dtype=np.float64)
    logps, grads = [], []
    for h in latent_model.enumerate_latents(x):
        lp, g = latent_model.joint_logp_grad(x, h)
        logps.append(lp)
        grads.append(np.asarray(g, dtype=np.float64))
    logps = np.array(logps)
    post = np.exp(logps - (logps.max() + np.log(np.exp(logps - logps.max()).sum())))
    expected = np.einsum("h,hd->d", post, np.stack(grads))
    return float(np.max(np.abs(direct - expected)))
