"""Monte Carlo toolbox: MH, MIS, Gibbs, MH-within-Gibbs, MALA, SGLD, and
(self-normalized) importance sampling.

All steps consult the target only through its unnormalized log density
(and, for the gradient-guided samplers, its configuration gradient); the
normalizing constant is never evaluated.  Chains are independent values:
each carries its own configuration, step counter, and random stream.
"""

from dataclasses import dataclass, field

import numpy as np

from .oracle import DiscreteSpace, StreamingLogSumExp


class InvalidProposal(ValueError):
    """Proposal density is zero / non-finite at a required endpoint."""


@dataclass
class ChainState:
    x: object
    rng: np.random.Generator
    step: int = 0
    proposed: int = 0
    accepted: int = 0
    cache: dict = field(default_factory=dict)

    @property
    def acceptance_rate(self) -> float:
        return self.accepted / self.proposed if self.proposed else 0.0


@dataclass
class WeightedSample:
    x: object
    log_weight: float


# ---------------------------------------------------------------------------
# proposals
# ---------------------------------------------------------------------------

class IndependentProposal:
    """State-independent proposal wrapping a sampleable, scoreable distribution."""

    independent = True

    def __init__(self, dist):
        self.dist = dist

    def sample(self, rng, x=None):
        return self.dist.sample(rng)

    def log_density(self, x_from, x_to) -> float:
        return float(self.dist.log_prob(x_to))


class UniformCoordinateProposal:
    """Pick one coordinate uniformly, resample its value uniformly (symmetric)."""

    independent = False

    def __init__(self, axes):
        self.axes = [int(a) for a in axes]

    def sample(self, rng, x):
        x = list(x)
        i = int(rng.integers(len(self.axes)))
        x[i] = int(rng.integers(self.axes[i]))
        return tuple(x)

    def log_density(self, x_from, x_to) -> float:
        diff = [i for i, (a, b) in enumerate(zip(x_from, x_to)) if a != b]
        n = len(self.axes)
        if len(diff) == 0:
            p = sum(1.0 / (n * c) for c in self.axes)
        elif len(diff) == 1:
            p = 1.0 / (n * self.axes[diff[0]])
        else:
            return -np.inf
        return float(np.log(p))


# ---------------------------------------------------------------------------
# Metropolis-Hastings family
# ---------------------------------------------------------------------------

def _mh_accept(state, log_ratio) -> bool:
    state.proposed += 1
    if log_ratio >= 0 or state.rng.random() < np.exp(log_ratio):
        state.accepted += 1
        return True
    return False


def mh_step(target, proposal, state: ChainState) -> ChainState:
    """One propose/accept transition leaving exp(U)/Z invariant."""
    x = state.x
    x_new = proposal.sample(state.rng, x)
    log_q_fwd = proposal.log_density(x, x_new)
    log_q_bwd = proposal.log_density(x_new, x)
    if not np.isfinite(log_q_fwd) or not np.isfinite(log_q_bwd):
        raise InvalidProposal("proposal density is zero at a required endpoint")
    log_ratio = (target.potential(x_new) - target.potential(x)) + (log_q_bwd - log_q_fwd)
    if _mh_accept(state, log_ratio):
        state.x = x_new
    state.step += 1
    return state


def mis_step(target, independent_proposal, state: ChainState) -> ChainState:
    """Metropolis independence sampler: acceptance min{1, w(x')/w(x)}."""
    if not getattr(independent_proposal, "independent", False):
        raise InvalidProposal("MIS requires a state-independent proposal")
    return mh_step(target, independent_proposal, state)


def gibbs_sweep(target, state: ChainState, order=None) -> ChainState:
    """One full sweep drawing each coordinate from its exact full conditional.

    ``target`` must expose ``n_coords`` and ``conditional(x, i)`` returning
    the probability vector of coordinate i given the rest.  The scan is the
    fixed ascending order unless an explicit order is given.
    """
    x = list(state.x)
    indices = range(target.n_coords) if order is None else order
    for i in indices:
        probs = np.asarray(target.conditional(tuple(x), i), dtype=np.float64)
        x[i] = int(state.rng.choice(len(probs), p=probs / probs.sum()))
    state.x = tuple(x)
    state.step += 1
    return state


def random_scan_order(n_coords, rng):
    """Seeded random coordinate order for the random-scan Gibbs variant."""
    return [int(i) for i in rng.permutation(n_coords)]


def coordinate_log_acceptance(target, per_coordinate_proposal, x, i, value) -> float:
    """Log MH ratio for replacing coordinate i of x by ``value`` with the
    other coordinates clamped; the joint-potential ratio equals the
    full-conditional ratio, so no conditional needs to be computed."""
    candidate = list(x)
    candidate[i] = value
    candidate = tuple(candidate)
    log_q_fwd = per_coordinate_proposal.log_density(tuple(x), i, value)
    log_q_bwd = per_coordinate_proposal.log_density(candidate, i, x[i])
    if not np.isfinite(log_q_fwd) or not np.isfinite(log_q_bwd):
        raise InvalidProposal("per-coordinate proposal density is zero")
    return (target.potential(candidate) - target.potential(tuple(x))
            + log_q_bwd - log_q_fwd)


def mh_within_gibbs_sweep(target, per_coordinate_proposal, state: ChainState) -> ChainState:
    """One sweep of single-coordinate MH moves against the full-conditional ratio."""
    x = list(state.x)
    for i in range(target.n_coords):
        value = per_coordinate_proposal.sample(state.rng, tuple(x), i)
        log_ratio = coordinate_log_acceptance(target, per_coordinate_proposal,
                                              tuple(x), i, value)
        if _mh_accept(state, log_ratio):
            x[i] = value
    state.x = tuple(x)
    state.step += 1
    return state


def mala_step(target, state: ChainState, step_size: float) -> ChainState:
    """Langevin proposal x + (sigma^2/2) grad U + sigma eps with MH correction."""
    if step_size <= 0:
        raise ValueError("step size must be positive")
    sigma = float(step_size)
    x = np.asarray(state.x, dtype=np.float64)
    if "mala" not in state.cache:
        state.cache["mala"] = (target.potential(x), np.asarray(target.grad_x(x)))
    u_x, g_x = state.cache["mala"]
    if not np.all(np.isfinite(g_x)):
        raise FloatingPointError("non-finite target gradient")
    mean_fwd = x + 0.5 * sigma * sigma * g_x
    x_new = mean_fwd + sigma * state.rng.standard_normal(x.shape)
    u_new = target.potential(x_new)
    g_new = np.asarray(target.grad_x(x_new))
    if not np.all(np.isfinite(g_new)):
        raise FloatingPointError("non-finite target gradient at proposal")
    mean_bwd = x_new + 0.5 * sigma * sigma * g_new
    log_q_fwd = -float(((x_new - mean_fwd) ** 2).sum()) / (2.0 * sigma * sigma)
    log_q_bwd = -float(((x - mean_bwd) ** 2).sum()) / (2.0 * sigma * sigma)
    log_ratio = (u_new - u_x) + (log_q_bwd - log_q_fwd)
    if _mh_accept(state, log_ratio):
        state.x = x_new
        state.cache["mala"] = (u_new, g_new)
    state.step += 1
    return state


# ---------------------------------------------------------------------------
# stochastic gradient Langevin dynamics
# ---------------------------------------------------------------------------

class SgldSchedule:
    """Step sizes delta_l for SGLD.

    ``decay``: delta_l = a / (b + l)**gamma with 0.5 < gamma <= 1, so the
    usual divergent-sum / convergent-square-sum condition holds.
    ``constant`` is admitted as a diagnostic control without that guarantee.
    """

    def __init__(self, kind="decay", a=0.1, b=10.0, gamma=1.0, delta=None):
        if kind == "decay":
            if a <= 0 or b <= 0 or not (0.5 < gamma <= 1.0):
                raise ValueError("decay schedule needs a>0, b>0, 0.5<gamma<=1")
            self.a, self.b, self.gamma = float(a), float(b), float(gamma)
        elif kind == "constant":
            if delta is None or delta <= 0:
                raise ValueError("constant schedule needs delta>0")
            self.delta = float(delta)
        else:
            raise ValueError(f"unknown schedule kind {kind!r}")
        self.kind = kind

    def __call__(self, l: int) -> float:
        if self.kind == "constant":
            return self.delta
        return self.a / (self.b + l) ** self.gamma


def sgld_run(target, init, schedule, steps, rng) -> np.ndarray:
    """Iterate z_l = z_{l-1} + delta_l * Delta(z_{l-1}) + sqrt(2 delta_l) eta.

    ``target`` provides ``stochastic_grad(rng, z)``, a noisy unbiased estimate
    of the log-density gradient.  Returns the (steps, d) array of iterates.
    """
    z = np.array(init, dtype=np.float64)
    out = np.empty((steps, z.size))
    for l in range(1, steps + 1):
        delta = schedule(l)
        drift = np.asarray(target.stochastic_grad(rng, z), dtype=np.float64)
        if not np.all(np.isfinite(drift)):
            raise FloatingPointError(f"non-finite stochastic gradient at step {l}")
        z = z + delta * drift + np.sqrt(2.0 * delta) * rng.standard_normal(z.shape)
        out[l - 1] = z.ravel()
    return out


# ---------------------------------------------------------------------------
# importance sampling
# ---------------------------------------------------------------------------

@dataclass
class SnisResult:
    estimate: float
    effective_sample_size: float
    n_samples: int


def snis_estimate(target, proposal_dist, g, n_samples, rng) -> SnisResult:
    """Self-normalized importance sampling estimate of E_p[g(x)].

    Weights use only the unnormalized target density; g may be scalar-valued.
    """
    if n_samples < 1:
        raise ValueError("need at least one sample")
    xs, log_w = [], np.empty(n_samples)
    for j in range(n_samples):
        x = proposal_dist.sample(rng)
        xs.append(x)
        log_w[j] = target.potential(x) - proposal_dist.log_prob(x)
    finite = np.isfinite(log_w)
    if not finite.any():
        raise InvalidProposal("all importance weights are zero")
    shifted = np.where(finite, log_w - log_w[finite].max(), -np.inf)
    w = np.exp(shifted)
    values = np.array([float(g(x)) for x in xs])
    # sum(w * g) / sum(w): bit-exact 1.0 whenever g is constant 1
    estimate = float(np.sum(w * values) / np.sum(w))
    omega = w / w.sum()
    ess = n_samples / (1.0 + float(np.var(omega * n_samples)))
    return SnisResult(estimate, ess, n_samples)


def is_z_ratio(target, proposal_dist, n_samples, rng) -> float:
    """Unbiased (1/M) sum of unnormalized-density ratios, estimating Z_p/Z_q.

    ``proposal_dist`` samples from its normalized law and scores its
    unnormalized density via ``log_unnorm`` (falling back to ``log_prob``).
    """
    if n_samples < 1:
        raise ValueError("need at least one sample")
    score = getattr(proposal_dist, "log_unnorm", proposal_dist.log_prob)
    lse = StreamingLogSumExp()
    for _ in range(n_samples):
        x = proposal_dist.sample(rng)
        lse.add(target.potential(x) - score(x))
    total = lse.value()
    if total == -np.inf:
        raise InvalidProposal("all importance weights are zero")
    return float(np.exp(total - np.log(n_samples)))


# ---------------------------------------------------------------------------
# chain drivers and enumerated kernels (test oracles)
# ---------------------------------------------------------------------------

def run_chain(step_fn, state: ChainState, steps, burn_in=None, thin=1):
    """Drive a chain; returns retained states after burn-in (default 10%)."""
    if burn_in is None:
        burn_in = steps // 10
    kept = []
    for t in range(steps):
        state = step_fn(state)
        if t >= burn_in and (t - burn_in) % thin == 0:
            kept.append(state.x)
    return kept


def empirical_distribution(samples, space: DiscreteSpace) -> np.ndarray:
    """Histogram of configurations over a space, in enumeration order."""
    counts = np.zeros(space.size)
    for x in samples:
        counts[space.index_of(x)] += 1.0
    return counts / counts.sum()


def enumerate_mh_kernel(target, space: DiscreteSpace, proposal) -> np.ndarray:
    """Exact MH transition matrix on an enumerable space (test oracle)."""
    states = list(space.states())
    n = len(states)
    potentials = np.array([target.potential(s) for s in states])
    K = np.zeros((n, n))
    for i, x in enumerate(states):
        for j, y in enumerate(states):
            if i == j:
                continue
            lq_fwd = proposal.log_density(x, y)
            if lq_fwd == -np.inf:
                continue
            lq_bwd = proposal.log_density(y, x)
            r = min(1.0, np.exp(potentials[j] - potentials[i] + lq_bwd - lq_fwd))
            K[i, j] = np.exp(lq_fwd) * r
        K[i, i] = 1.0 - K[i].sum()
    return K


def enumerate_gibbs_kernel(target, space: DiscreteSpace) -> np.ndarray:
    """Exact one-sweep Gibbs transition matrix B_1 B_2 ... B_n (test oracle)."""
    states = list(space.states())
    index = {s: i for i, s in enumerate(states)}
    n = len(states)
    kernel = np.eye(n)
    for coord in range(target.n_coords):
        B = np.zeros((n, n))
        for i, x in enumerate(states):
            probs = np.asarray(target.conditional(x, coord), dtype=np.float64)
            for v, p in enumerate(probs):
                y = list(x)
                y[coord] = v
                B[i, index[tuple(y)]] += p
        kernel = kernel @ B
    return kernel


def write_sample_dump(path, samples, model_id, seed) -> None:
    """One configuration per line, space-separated, with an id/seed header."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# model={model_id} seed={seed}\n")
        for x in samples:
            fh.write(" ".join(repr(v) if isinstance(v, float) else str(v)
                              for v in np.ravel(np.asarray(x))) + "\n")
