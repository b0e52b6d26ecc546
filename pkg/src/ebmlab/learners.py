"""Parameter-estimation engines.

All learners are stochastic-approximation loops: draw something from a
kernel that leaves the current model's law invariant (or from a noise
distribution), form a stochastic update, apply it with a decaying step
size.  Every learner is a deterministic function of (data, seed, config).
"""

import csv
from dataclasses import dataclass, field

import numpy as np

from .nets import DenseNet
from .rng import derive_rng


class ConsistencyViolation(RuntimeError):
    """Noise distribution fails to cover the data support."""


class DivergedError(RuntimeError):
    """A chain or an update became non-finite."""


# ---------------------------------------------------------------------------
# step-size schedules
# ---------------------------------------------------------------------------

class SaSchedule:
    """Constant-then-decay step sizes.

    gamma_t = a for t < t0, then a*b/(b + t - t0): positive, non-increasing,
    with divergent sum and convergent square sum over the decay phase.
    """

    def __init__(self, a=0.1, b=1000.0, t0=0):
        if a <= 0 or b <= 0 or t0 < 0:
            raise ValueError("need a>0, b>0, t0>=0")
        self.a, self.b, self.t0 = float(a), float(b), int(t0)

    @classmethod
    def for_steps(cls, steps, a=0.1, constant_fraction=0.3):
        t0 = int(steps * constant_fraction)
        return cls(a=a, b=max(1.0, 0.2 * steps), t0=t0)

    @classmethod
    def zero(cls):
        sched = cls(a=1.0)
        sched.a = 0.0
        return sched

    def __call__(self, t: int) -> float:
        if t < self.t0:
            return self.a
        return self.a * self.b / (self.b + t - self.t0)


@dataclass
class PersistentChains:
    """Negative-phase chain states retained across parameter updates."""
    states: list
    rngs: list


@dataclass
class NceConfig:
    nu: int = 10
    zeta_init: float = 0.0
    batch_size: int = 256
    zeta_step_scale: float = 1.0

    def __post_init__(self):
        if self.nu < 1:
            raise ValueError("noise ratio nu must be >= 1")


@dataclass
class TrainResult:
    params: np.ndarray
    zeta: np.ndarray = None
    extra: dict = field(default_factory=dict)
    trace: list = field(default_factory=list)


def write_trace_csv(path, trace) -> None:
    """Training trace: step, objective estimate, step size, acceptance, zeta."""
    fields = ["step", "objective", "gamma", "acceptance", "zeta"]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        for row in trace:
            writer.writerow({k: row.get(k, "") for k in fields})


# ---------------------------------------------------------------------------
# generic stochastic approximation
# ---------------------------------------------------------------------------

def sa_run(kernel, update_fn, schedule, steps, init_params, init_state, seed,
           n_moves=1, trace_every=0):
    """Robbins-Monro iteration with Markovian perturbation.

    ``kernel(rng, state, params) -> state`` must leave the params-indexed
    target invariant; ``update_fn(params, state) -> F`` gives the stochastic
    update direction.  With ``n_moves`` > 1 the kernel is applied repeatedly
    and the updates averaged (multiple moves).
    """
    params = np.array(init_params, dtype=np.float64)
    state = init_state
    rng = derive_rng(seed, "sa")
    trace = []
    for t in range(1, steps + 1):
        total = np.zeros_like(params)
        for _ in range(n_moves):
            state = kernel(rng, state, params)
            total += np.asarray(update_fn(params, state), dtype=np.float64)
        step_dir = total / n_moves
        if not np.all(np.isfinite(step_dir)):
            raise DivergedError(f"non-finite update at step {t}: {step_dir}")
        params = params + schedule(t) * step_dir
        if trace_every and t % trace_every == 0:
            trace.append({"step": t, "gamma": schedule(t),
                          "objective": float(np.linalg.norm(step_dir))})
    return TrainResult(params=params, trace=trace)


# ---------------------------------------------------------------------------
# stochastic maximum likelihood (persistent chains)
# ---------------------------------------------------------------------------

def sml_train(model, data, kernel, schedule, steps, seed, batch_size=32,
              n_chains=None, chain_steps=1, init_chains=None, trace_every=0):
    """Fit an energy model by SML: data-minus-chain gradient with chains that
    persist across updates.

    ``kernel(rng, x, model) -> x`` applies one transition leaving the current
    model law invariant (Gibbs sweep, MH step, MALA, ...).  A kernel with a
    truthy ``batched`` attribute is instead called once per transition with
    the whole list of chain states (and a single dedicated stream), which is
    how the vectorized block samplers plug in.
    """
    data = list(data)
    rng = derive_rng(seed, "sml")
    if n_chains is None:
        n_chains = batch_size
    if init_chains is None:
        picks = rng.integers(len(data), size=n_chains)
        states = [data[int(i)] for i in picks]
    else:
        states = list(init_chains)
    batched = bool(getattr(kernel, "batched", False))
    chains = PersistentChains(
        states=states,
        rngs=([derive_rng(seed, "sml-chains")] if batched
              else [derive_rng(seed, "sml-chain", c) for c in range(n_chains)]),
    )
    trace = []
    for t in range(1, steps + 1):
        picks = rng.integers(len(data), size=min(batch_size, len(data)))
        pos = np.mean(model.grad_params_batch([data[int(i)] for i in picks]), axis=0)
        if batched:
            for _ in range(chain_steps):
                chains.states = list(kernel(chains.rngs[0], chains.states, model))
        else:
            for c in range(n_chains):
                x = chains.states[c]
                for _ in range(chain_steps):
                    x = kernel(chains.rngs[c], x, model)
                chains.states[c] = x
        potentials = np.asarray(model.potential_batch(chains.states))
        if not np.all(np.isfinite(potentials)):
            raise DivergedError(f"chain diverged at step {t}")
        neg = np.mean(model.grad_params_batch(chains.states), axis=0)
        update = pos - neg
        if not np.all(np.isfinite(update)):
            raise DivergedError(f"non-finite SML update at step {t}")
        model.set_flat_params(model.get_flat_params() + schedule(t) * update)
        if trace_every and t % trace_every == 0:
            trace.append({"step": t, "gamma": schedule(t),
                          "objective": float(np.linalg.norm(update))})
    return TrainResult(params=model.get_flat_params(), trace=trace,
                       extra={"chains": chains})


def cd_pcd_train(rbm, data, k, mode, schedule, steps, seed, batch_size=32,
                 n_chains=None, trace_every=0):
    """Contrastive-divergence family for RBMs with block Gibbs transitions.

    CD restarts the negative chains at the minibatch every update; PCD keeps
    them persistent.  ``k`` block sweeps are run per update (k=0 drops the
    negative phase entirely, leaving pure data moments).
    """
    if mode not in ("CD", "PCD"):
        raise ValueError("mode must be CD or PCD")
    data = np.asarray(data, dtype=np.float64)
    rng = derive_rng(seed, "cdpcd")
    if n_chains is None:
        n_chains = batch_size
    persistent = data[rng.integers(len(data), size=n_chains)].copy()
    trace = []
    for t in range(1, steps + 1):
        batch = data[rng.integers(len(data), size=min(batch_size, len(data)))]
        mu_pos = rbm.p_h_given_v(batch)
        dW_pos = batch.T @ mu_pos / len(batch)
        db_pos = batch.mean(axis=0)
        da_pos = mu_pos.mean(axis=0)

        if k > 0:
            neg = batch.copy() if mode == "CD" else persistent
            for _ in range(k):
                hs = (rng.random((len(neg), rbm.n_hidden)) < rbm.p_h_given_v(neg))
                neg = (rng.random((len(neg), rbm.n_visible))
                       < rbm.p_v_given_h(hs)).astype(np.float64)
            if mode == "PCD":
                persistent = neg
            mu_neg = rbm.p_h_given_v(neg)
            dW = dW_pos - neg.T @ mu_neg / len(neg)
            db = db_pos - neg.mean(axis=0)
            da = da_pos - mu_neg.mean(axis=0)
        else:
            dW, db, da = dW_pos, db_pos, da_pos

        if not (np.all(np.isfinite(dW)) and np.all(np.isfinite(db)) and np.all(np.isfinite(da))):
            raise DivergedError(f"non-finite CD/PCD update at step {t}")
        gamma = schedule(t)
        rbm.W += gamma * dW
        rbm.b += gamma * db
        rbm.a += gamma * da
        if trace_every and t % trace_every == 0:
            trace.append({"step": t, "gamma": gamma,
                          "objective": float(np.abs(dW).max())})
    return TrainResult(params=rbm.get_flat_params(), trace=trace)


# ---------------------------------------------------------------------------
# noise-contrastive estimation
# ---------------------------------------------------------------------------

def _model_batch_ops(model, xs, zeta, zeta_index):
    """log p_{theta,zeta} and its gradient rows [d/dtheta, d/dzeta]."""
    xs = list(xs)
    log_u = np.asarray(model.potential_batch(xs), dtype=np.float64)
    idx = (np.zeros(len(xs), dtype=np.int64) if zeta_index is None
           else np.asarray(zeta_index(xs), dtype=np.int64))
    logp = log_u - zeta[idx]
    grads_theta = np.asarray(model.grad_params_batch(xs), dtype=np.float64)
    return logp, grads_theta, idx


def _check_noise_support(log_q, what):
    if np.any(~np.isfinite(log_q)):
        raise ConsistencyViolation(f"noise density is zero at a {what} point")


def nce_train(model, data, noise, config: NceConfig, schedule, steps, seed,
              zeta_dim=1, zeta_index=None, trace_every=0):
    """Two-class logistic estimation of an unnormalized model.

    The log normalizer is treated as extra parameters ``zeta`` (one entry by
    default; ``zeta_dim``/``zeta_index`` allow one per length class).  Per
    step, a data minibatch and ``nu`` times as many fresh noise samples are
    scored, and (theta, zeta) ascend the conditional two-class likelihood.
    """
    data = list(data)
    rng = derive_rng(seed, "nce")
    zeta = np.full(zeta_dim, float(config.zeta_init))
    log_nu = np.log(config.nu)
    trace = []
    for t in range(1, steps + 1):
        picks = rng.integers(len(data), size=min(config.batch_size, len(data)))
        batch = [data[int(i)] for i in picks]
        noise_batch = list(noise.sample_n(rng, config.nu * len(batch)))

        logp_d, grads_d, idx_d = _model_batch_ops(model, batch, zeta, zeta_index)
        logq_d = np.asarray(noise.log_prob_batch(batch), dtype=np.float64)
        _check_noise_support(logq_d, "data")
        logp_n, grads_n, idx_n = _model_batch_ops(model, noise_batch, zeta, zeta_index)
        logq_n = np.asarray(noise.log_prob_batch(noise_batch), dtype=np.float64)

        # p(C=-|x) for data rows, p(C=+|x) for noise rows
        post_neg_d = 1.0 / (1.0 + np.exp(logp_d - logq_d - log_nu))
        post_pos_n = 1.0 / (1.0 + np.exp(logq_n + log_nu - logp_n))

        d_theta = (grads_d.T @ post_neg_d) / len(batch) \
            - config.nu * (grads_n.T @ post_pos_n) / len(noise_batch)
        d_zeta = np.zeros(zeta_dim)
        np.add.at(d_zeta, idx_d, -post_neg_d / len(batch))
        np.add.at(d_zeta, idx_n, config.nu * post_pos_n / len(noise_batch))

        if not (np.all(np.isfinite(d_theta)) and np.all(np.isfinite(d_zeta))):
            raise DivergedError(f"non-finite NCE update at step {t}")
        gamma = schedule(t)
        model.set_flat_params(model.get_flat_params() + gamma * d_theta)
        zeta = zeta + gamma * config.zeta_step_scale * d_zeta
        if trace_every and t % trace_every == 0:
            obj = float(np.mean(np.log1p(-post_neg_d + 1e-300))) if len(batch) else 0.0
            trace.append({"step": t, "gamma": gamma, "zeta": float(zeta[0]),
                          "objective": obj})
    return TrainResult(params=model.get_flat_params(), zeta=zeta, trace=trace)


def dnce_train(model, data, noise, config: NceConfig, schedule, steps, seed,
               alpha=0.5, zeta_dim=1, zeta_index=None, noise_lr_scale=1.0,
               noise_update_every=1, trace_every=0):
    """Dynamic NCE: the noise model is MLE-trained alongside, and the positive
    class is the alpha-interpolation of data and noise.

    Per step: |D| data points, |B1| = (1-alpha)/alpha * |D| noise points join
    the positive class, |B2| = nu/alpha * |D| noise points form the negative
    class; (theta, zeta) ascend the two displayed gradients and the noise
    model takes an MLE step on the data batch.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie strictly between 0 and 1")
    data = list(data)
    rng = derive_rng(seed, "dnce")
    zeta = np.full(zeta_dim, float(config.zeta_init))
    log_nu = np.log(config.nu)
    trace = []
    for t in range(1, steps + 1):
        n_d = min(config.batch_size, len(data))
        picks = rng.integers(len(data), size=n_d)
        batch = [data[int(i)] for i in picks]
        n_b1 = max(0, round((1.0 - alpha) / alpha * n_d))
        n_b2 = max(1, round(config.nu / alpha * n_d))
        pos_batch = batch + list(noise.sample_n(rng, n_b1))
        neg_batch = list(noise.sample_n(rng, n_b2))

        logp_p, grads_p, idx_p = _model_batch_ops(model, pos_batch, zeta, zeta_index)
        logq_p = np.asarray(noise.log_prob_batch(pos_batch), dtype=np.float64)
        _check_noise_support(logq_p[:n_d], "data")
        logp_n, grads_n, idx_n = _model_batch_ops(model, neg_batch, zeta, zeta_index)
        logq_n = np.asarray(noise.log_prob_batch(neg_batch), dtype=np.float64)

        post_neg_p = 1.0 / (1.0 + np.exp(logp_p - logq_p - log_nu))
        post_pos_n = 1.0 / (1.0 + np.exp(logq_n + log_nu - logp_n))

        scale = alpha / n_d
        d_theta = scale * (grads_p.T @ post_neg_p) - scale * (grads_n.T @ post_pos_n)
        d_zeta = np.zeros(zeta_dim)
        np.add.at(d_zeta, idx_p, -scale * post_neg_p)
        np.add.at(d_zeta, idx_n, scale * post_pos_n)

        if not (np.all(np.isfinite(d_theta)) and np.all(np.isfinite(d_zeta))):
            raise DivergedError(f"non-finite DNCE update at step {t}")
        gamma = schedule(t)
        model.set_flat_params(model.get_flat_params() + gamma * d_theta)
        zeta = zeta + gamma * config.zeta_step_scale * d_zeta
        if t % noise_update_every == 0:
            noise.mle_step(batch, gamma * noise_lr_scale * noise_update_every)
        if trace_every and t % trace_every == 0:
            trace.append({"step": t, "gamma": gamma, "zeta": float(zeta[0]),
                          "objective": float(np.mean(post_neg_p[:n_d]))})
    return TrainResult(params=model.get_flat_params(), zeta=zeta, trace=trace,
                       extra={"noise": noise})


def conditional_nce_train(model, paired_data, noise, nu, schedule, steps, seed,
                          batch_size=64, trace_every=0):
    """Conditional NCE: per-pair two-class objective with nu noise draws of y
    given x; no per-x normalizer parameters are introduced.

    ``model`` provides cond_log_unnorm(x, y) / cond_grad(x, y) and flat-param
    access; ``noise`` provides sample_y(rng, x, n) and log_prob_y(x, y).
    """
    if nu < 1:
        raise ValueError("nu must be >= 1")
    paired_data = list(paired_data)
    rng = derive_rng(seed, "cnce")
    log_nu = np.log(nu)
    trace = []
    for t in range(1, steps + 1):
        picks = rng.integers(len(paired_data), size=min(batch_size, len(paired_data)))
        grad = np.zeros(model.get_flat_params().size)
        objective = 0.0
        for i in picks:
            x, y = paired_data[int(i)]
            logq_y = noise.log_prob_y(x, y)
            if not np.isfinite(logq_y):
                raise ConsistencyViolation("noise conditional is zero at a data pair")
            logp_y = model.cond_log_unnorm(x, y)
            post_neg = 1.0 / (1.0 + np.exp(logp_y - logq_y - log_nu))
            grad += post_neg * model.cond_grad(x, y)
            objective += float(np.log1p(-post_neg + 1e-300))
            for y_neg in noise.sample_y(rng, x, nu):
                logp_n = model.cond_log_unnorm(x, y_neg)
                logq_n = noise.log_prob_y(x, y_neg)
                post_pos = 1.0 / (1.0 + np.exp(logq_n + log_nu - logp_n))
                grad -= post_pos * model.cond_grad(x, y_neg)
        grad /= len(picks)
        if not np.all(np.isfinite(grad)):
            raise DivergedError(f"non-finite conditional-NCE update at step {t}")
        model.set_flat_params(model.get_flat_params() + schedule(t) * grad)
        if trace_every and t % trace_every == 0:
            trace.append({"step": t, "gamma": schedule(t),
                          "objective": objective / len(picks)})
    return TrainResult(params=model.get_flat_params(), trace=trace)


def conditional_nce_objective(model, noise, pairs, nu, rng) -> float:
    """Monte Carlo value of the per-pair conditional two-class objective.

    ``nu`` may be any positive ratio here (sampling draws ceil(nu) negatives
    and weights them accordingly), which covers per-position losses with
    fractional negative:positive ratios.
    """
    if nu <= 0:
        raise ValueError("nu must be positive")
    n_neg = int(np.ceil(nu))
    log_nu = np.log(nu)
    total = 0.0
    for x, y in pairs:
        diff = model.cond_log_unnorm(x, y) - noise.log_prob_y(x, y) - log_nu
        total += -float(np.logaddexp(0.0, -diff))
        draws = noise.sample_y(rng, x, n_neg)
        acc = 0.0
        for y_neg in draws:
            diff_n = (model.cond_log_unnorm(x, y_neg)
                      - noise.log_prob_y(x, y_neg) - log_nu)
            acc += -float(np.logaddexp(0.0, diff_n))
        total += nu * acc / n_neg
    return total / len(pairs)


# ---------------------------------------------------------------------------
# inclusive-divergence training with a latent-Gaussian generator
# ---------------------------------------------------------------------------

class LatentGaussianGenerator:
    """Auxiliary generator h ~ N(0,I), x = g(h) + eps with a dense decoder.

    ``init_gain`` scales the decoder weights at construction so the initial
    output variance is O(1); starting from a near-constant decoder leaves the
    latent uninformative and the adaptive loop stuck there.
    """

    def __init__(self, latent_dim, obs_dim, hidden=16, sigma=0.5, seed=0,
                 init_gain=5.0):
        self.latent_dim = int(latent_dim)
        self.obs_dim = int(obs_dim)
        self.sigma = float(sigma)
        self.net = DenseNet([latent_dim, hidden, obs_dim],
                            rng=derive_rng(seed, "generator"))
        for W in self.net.weights:
            W *= float(init_gain)

    def sample(self, rng, n):
        h = rng.standard_normal((n, self.latent_dim))
        x = self.net.output(h) + self.sigma * rng.standard_normal((n, self.obs_dim))
        return x, h

    def log_joint(self, h, x) -> float:
        g = self.net.output(h)
        return float(-0.5 * (h @ h) - ((x - g) ** 2).sum() / (2 * self.sigma ** 2))

    def grad_x_log_joint(self, h, x) -> np.ndarray:
        """Works for single vectors or (B, .) batches."""
        return -(np.asarray(x, dtype=np.float64) - self.net.output(h)) / self.sigma ** 2

    def grad_h_log_joint(self, h, x) -> np.ndarray:
        h = np.asarray(h, dtype=np.float64)
        cache = self.net.forward(h)
        resid = (np.asarray(x, dtype=np.float64)
                 - cache["activations"][-1]) / self.sigma ** 2
        if resid.ndim == 1:
            resid = resid[None, :]
        _, input_grad = self.net.backward(cache, resid)
        return -h + (input_grad[0] if h.ndim == 1 else input_grad)

    def grad_phi_log_joint(self, h, x) -> np.ndarray:
        """Summed over the batch when given (B, .) arrays."""
        cache = self.net.forward(np.asarray(h, dtype=np.float64))
        resid = (np.asarray(x, dtype=np.float64)
                 - cache["activations"][-1]) / self.sigma ** 2
        if resid.ndim == 1:
            resid = resid[None, :]
        grads, _ = self.net.backward(cache, resid)
        return grads.flat()

    def get_flat_params(self):
        return self.net.get_flat_params()

    def set_flat_params(self, values):
        self.net.set_flat_params(values)


def revise_batch(ebm, generator, rng, xs, hs, steps, step_size,
                 inner_step_size=None, inner_steps=1):
    """Gradient-guided revision of generator proposals in the (x, h) space.

    Runs the joint Langevin recursion on a (B, .) batch of proposals; the
    intractable marginal score of the generator is replaced by the joint
    score at a refreshed latent (at the first step the initial latent is
    already a posterior sample, so it is used directly).  The refreshed
    latent comes from ``inner_steps`` Langevin steps of size
    ``inner_step_size`` on h alone; the refresh must actually decorrelate
    h* from h, so the inner step size should not be shrunk together with
    the outer one.
    """
    if inner_step_size is None:
        inner_step_size = step_size
    xs = np.array(xs, dtype=np.float64)
    hs = np.array(hs, dtype=np.float64)
    for l in range(1, steps + 1):
        if l == 1:
            h_star = hs
        else:
            h_star = hs
            for _ in range(inner_steps):
                h_star = (h_star + inner_step_size * generator.grad_h_log_joint(h_star, xs)
                          + np.sqrt(2 * inner_step_size) * rng.standard_normal(hs.shape))
        drift_x = (np.asarray(ebm.grad_x(xs))
                   + generator.grad_x_log_joint(hs, xs)
                   - generator.grad_x_log_joint(h_star, xs))
        drift_h = generator.grad_h_log_joint(hs, xs)
        if not (np.all(np.isfinite(drift_x)) and np.all(np.isfinite(drift_h))):
            raise DivergedError("non-finite revision trajectory")
        xs_new = xs + step_size * drift_x + np.sqrt(2 * step_size) * rng.standard_normal(xs.shape)
        hs_new = hs + step_size * drift_h + np.sqrt(2 * step_size) * rng.standard_normal(hs.shape)
        xs, hs = xs_new, hs_new
    return xs, hs


def revise_sample(ebm, generator, rng, x, h, steps, step_size,
                  inner_step_size=None, inner_steps=1):
    """Single-proposal view of ``revise_batch``."""
    xs, hs = revise_batch(ebm, generator, rng,
                          np.asarray(x, dtype=np.float64)[None, :],
                          np.asarray(h, dtype=np.float64)[None, :],
                          steps, step_size, inner_step_size, inner_steps)
    return xs[0], hs[0]


def inclusive_nrf_train(ebm, generator: LatentGaussianGenerator, data, schedule,
                        steps, seed, batch_size=32, revision_steps=5,
                        revision_step_size=0.02, inner_step_size=None,
                        inner_steps=1, generator_lr_scale=1.0, trace_every=0):
    """Joint training of an EBM and an inclusive-divergence generator.

    Negative-phase samples are generator proposals revised by the joint
    Langevin recursion; the EBM ascends data-minus-sample gradients and the
    generator ascends its joint log-likelihood at the revised samples.
    """
    data = np.asarray(data, dtype=np.float64)
    rng = derive_rng(seed, "nrf")
    trace = []
    for t in range(1, steps + 1):
        batch = data[rng.integers(len(data), size=min(batch_size, len(data)))]
        xs, hs = generator.sample(rng, len(batch))
        xs, hs = revise_batch(ebm, generator, rng, xs, hs,
                              steps=revision_steps, step_size=revision_step_size,
                              inner_step_size=inner_step_size, inner_steps=inner_steps)
        pos = np.mean(ebm.grad_params_batch(batch), axis=0)
        neg = np.mean(ebm.grad_params_batch(xs), axis=0)
        if not np.all(np.isfinite(pos - neg)):
            raise DivergedError(f"non-finite EBM update at step {t}")
        gamma = schedule(t)
        ebm.set_flat_params(ebm.get_flat_params() + gamma * (pos - neg))
        gen_grad = generator.grad_phi_log_joint(hs, xs) / len(xs)
        generator.set_flat_params(generator.get_flat_params()
                                  + gamma * generator_lr_scale * gen_grad)
        if trace_every and t % trace_every == 0:
            trace.append({"step": t, "gamma": gamma,
                          "objective": float(np.linalg.norm(pos - neg))})
    return TrainResult(params=ebm.get_flat_params(), trace=trace,
                       extra={"generator": generator})
