"""Residual energy models over a tractable autoregressive reference:
p(x) proportional to q(x) exp(U(x)).

Includes top-k resampled generation, the partition sandwich estimators, and
plug-in bounds for step-wise conditionals with exact evaluation at the last
position.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from ..oracle import DiscreteSpace, StreamingLogSumExp
from ..rng import derive_rng
from .ngram import LengthCapExceeded, NgramAlm


class AncestralReference:
    """Sampling/scoring view of an n-gram reference.

    In fixed-length mode the per-step conditionals renormalize over content
    tokens only and every sequence has exactly ``fixed_len`` tokens (finite
    support, exactly enumerable).  Otherwise sampling terminates at EOS and
    raises if ``max_len`` is reached first.
    """

    def __init__(self, alm: NgramAlm, max_len=200, fixed_len=None):
        self.alm = alm
        self.max_len = int(max_len)
        self.fixed_len = None if fixed_len is None else int(fixed_len)
        self.vocab_size = alm.vocab_size
        self._cdf_cache = {}
        self._cache_version = -1

    def step_distribution(self, prefix, top_k=None) -> np.ndarray:
        """Conditional over content tokens (fixed-length mode drops EOS)."""
        probs = self.alm.conditional(prefix)
        if self.fixed_len is not None:
            probs = probs[:self.vocab_size]
        if top_k is not None and top_k < probs.size:
            keep = np.argsort(-probs, kind="stable")[:top_k]
            mask = np.zeros_like(probs)
            mask[keep] = probs[keep]
            probs = mask
        return probs / probs.sum()

    def _step_cdf(self, prefix, top_k):
        if self._cache_version != self.alm._version:
            self._cdf_cache = {}
            self._cache_version = self.alm._version
        key = (self.alm._clip_history(prefix), top_k)
        cdf = self._cdf_cache.get(key)
        if cdf is None:
            cdf = self._cdf_cache[key] = np.cumsum(self.step_distribution(prefix, top_k))
        return cdf

    def sample(self, rng, prefix=(), top_k=None) -> tuple:
        out = list(prefix)
        if self.fixed_len is not None:
            while len(out) < self.fixed_len:
                cdf = self._step_cdf(tuple(out), top_k)
                token = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
                out.append(min(token, cdf.size - 1))
            return tuple(out)
        while True:
            p = self.alm.conditional(tuple(out))
            if top_k is not None:
                raise ValueError("top-k sampling requires fixed-length mode")
            token = int(rng.choice(p.size, p=p))
            if token == self.vocab_size:
                return tuple(out)
            out.append(token)
            if len(out) >= self.max_len:
                raise LengthCapExceeded(f"no EOS within {self.max_len} tokens")

    def log_prob(self, x, prefix=()) -> float:
        """Log probability of the continuation of ``prefix`` out to x."""
        total = 0.0
        out = list(prefix)
        for token in tuple(x)[len(prefix):]:
            p = self.step_distribution(tuple(out))
            total += float(np.log(p[token]))
            out.append(token)
        if self.fixed_len is None:
            total += float(np.log(self.alm.conditional(tuple(out))[self.vocab_size]))
        return total

    def support_space(self, prefix=()) -> DiscreteSpace:
        if self.fixed_len is None:
            raise ValueError("only fixed-length references have finite support")
        free = self.fixed_len - len(prefix)
        return DiscreteSpace.sequences(self.vocab_size, max_len=free, min_len=free)


class ResidualElm:
    """Reference distribution tilted by a residual potential."""

    def __init__(self, reference: AncestralReference, residual_potential):
        self.reference = reference
        self.residual_potential = residual_potential

    def residual(self, x) -> float:
        return float(self.residual_potential(tuple(x)))

    def potential(self, x) -> float:  # unnormalized log density
        return self.reference.log_prob(x) + self.residual(x)

    def exact_log_z(self, prefix=()) -> float:
        """log E_q[exp U] over continuations of the prefix, by enumeration."""
        lse = StreamingLogSumExp()
        space = self.reference.support_space(prefix)
        for batch in space.batches():
            vals = [self.reference.log_prob(tuple(prefix) + tuple(int(v) for v in row),
                                            prefix=prefix)
                    + self.residual(tuple(prefix) + tuple(int(v) for v in row))
                    for row in batch]
            lse.add(np.array(vals))
        return lse.value()

    def exact_conditional_table(self, prefix=()) -> np.ndarray:
        """p(. | prefix) over content tokens, by enumerating all futures."""
        logs = np.array([self.exact_log_z(tuple(prefix) + (w,))
                         + np.log(self.reference.step_distribution(prefix)[w])
                         for w in range(self.reference.vocab_size)])
        return np.exp(logs - logsumexp(logs))


def residual_topk_sample(residual: ResidualElm, prefix, n, k, seed) -> tuple:
    """Draw n reference samples with top-k-constrained ancestral sampling and
    resample one with weight exp(residual potential)."""
    if n < 1 or k < 1:
        raise ValueError("need n >= 1 and k >= 1")
    rng = derive_rng(seed, "topk")
    proposals = [residual.reference.sample(rng, prefix=prefix, top_k=k)
                 for _ in range(n)]
    log_w = np.array([residual.residual(x) for x in proposals])
    if np.all(log_w == -np.inf):
        raise ValueError("all proposals have zero residual weight")
    w = np.exp(log_w - log_w[np.isfinite(log_w)].max())
    w[~np.isfinite(w)] = 0.0
    return proposals[int(rng.choice(n, p=w / w.sum()))]


@dataclass
class SandwichResult:
    lower_mean: float
    upper_mean: float
    lower_se: float
    upper_se: float
    n_samples: int
    repeats: int


def _t_estimate(log_w) -> float:
    """log of the arithmetic mean of exp(log_w)."""
    return float(logsumexp(log_w) - np.log(len(log_w)))


def _sandwich_pair(log_w):
    """(T_n, (2n-1) T_n - 2(n-1) T_bar_{n-1}) with the subset estimate averaged
    over all leave-one-out subsets; by Jensen T_bar_{n-1} <= T_n, so the upper
    value never falls below the lower one."""
    n = len(log_w)
    t_n = _t_estimate(log_w)
    m = float(np.max(log_w))
    w = np.exp(log_w - m)
    total = w.sum()
    loo = m + np.log(total - w) - np.log(n - 1)
    t_nm1 = float(np.mean(loo))
    return t_n, (2 * n - 1) * t_n - 2 * (n - 1) * t_nm1


def partition_bounds(residual: ResidualElm, n, repeats, seed, prefix=()) -> SandwichResult:
    """Monte Carlo means of the lower/upper partition estimators
    T_n and (2n-1) T_n - 2(n-1) T_{n-1}."""
    if n < 2:
        raise ValueError("the upper estimator needs n >= 2")
    rng = derive_rng(seed, "sandwich")
    lows = np.empty(repeats)
    ups = np.empty(repeats)
    for r in range(repeats):
        log_w = np.array([residual.residual(residual.reference.sample(rng, prefix=prefix))
                          for _ in range(n)])
        lows[r], ups[r] = _sandwich_pair(log_w)
    return SandwichResult(
        lower_mean=float(lows.mean()), upper_mean=float(ups.mean()),
        lower_se=float(lows.std(ddof=1) / np.sqrt(repeats)),
        upper_se=float(ups.std(ddof=1) / np.sqrt(repeats)),
        n_samples=n, repeats=repeats,
    )


def stepwise_prob(residual: ResidualElm, prefix, token, mc_samples, seed, repeats=50):
    """Plug-in (lower, upper) bounds on log p(token | prefix).

    Both the numerator and denominator are partition-style expectations over
    sampled futures; the sandwich estimators are averaged over ``repeats``
    independent batches (they bound the value in expectation, so averaging is
    what makes a single reported interval trustworthy).  At the final
    position the future is empty and the value is computed exactly by
    enumerating the vocabulary, collapsing the bounds.
    """
    prefix = tuple(prefix)
    ref = residual.reference
    if ref.fixed_len is None:
        raise ValueError("step-wise bounds require a fixed-length reference")
    if not 0 <= token < ref.vocab_size:
        raise ValueError("token outside vocabulary")
    if mc_samples < 2:
        raise ValueError("the sandwich estimators need at least two samples")
    log_step = float(np.log(ref.step_distribution(prefix)[token]))
    extended = prefix + (token,)

    if len(extended) == ref.fixed_len:
        num = residual.residual(extended)
        den_terms = [float(np.log(ref.step_distribution(prefix)[w]))
                     + residual.residual(prefix + (w,))
                     for w in range(ref.vocab_size)]
        exact = log_step + num - float(logsumexp(den_terms))
        return exact, exact

    rng = derive_rng(seed, "stepwise")

    def sandwich(pfx):
        lows, ups = np.empty(repeats), np.empty(repeats)
        for r in range(repeats):
            log_w = np.array([residual.residual(ref.sample(rng, prefix=pfx))
                              for _ in range(mc_samples)])
            lows[r], ups[r] = _sandwich_pair(log_w)
        return float(lows.mean()), float(ups.mean())

    num_low, num_up = sandwich(extended)
    den_low, den_up = sandwich(prefix)
    return log_step + num_low - den_up, log_step + num_up - den_low
