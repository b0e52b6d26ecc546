import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import logsumexp

from ebmlab.ising import IsingModel
from ebmlab.loglinear import IndexedLogLinear, fit_exact_mle
from ebmlab.oracle import (
    DiscreteSpace,
    EnergyModel,
    EnumerationRefused,
    StreamingLogSumExp,
    SupportMismatch,
    central_difference,
    enumerate_expectation,
    enumerate_log_z,
    enumerate_probs,
    finite_diff_grad,
    fisher_equality_check,
    tv_distance,
)
from ebmlab.rbm import Rbm, RbmLatentView
from ebmlab.rng import derive_rng


class FlatModel(EnergyModel):
    def potential(self, x):
        return 0.0

    def potential_batch(self, xs):
        return np.zeros(len(xs))


class TableModel(EnergyModel):
    def __init__(self, space, values):
        self.space = space
        self.values = np.asarray(values, dtype=np.float64)

    def potential(self, x):
        return float(self.values[self.space.index_of(x)])

    def potential_batch(self, xs):
        return np.array([self.potential(tuple(int(v) for v in r)) for r in xs])


# ---------------------------------------------------------------------------
# DiscreteSpace
# ---------------------------------------------------------------------------

def test_space_visits_each_state_once():
    space = DiscreteSpace.fixed([2, 3, 2])
    states = list(space.states())
    assert len(states) == 12 == space.size
    assert len(set(states)) == 12
    for s in states:
        assert states[space.index_of(s)] == s


def test_sequence_space_counts():
    space = DiscreteSpace.sequences(vocab_size=3, max_len=3)
    assert space.size == 3 + 9 + 27
    states = list(space.states())
    assert len(states) == space.size
    assert len({tuple(s) for s in states}) == space.size
    assert states[space.index_of((2, 0, 1))] == (2, 0, 1)


def test_cap_exceeded_names_count():
    space = DiscreteSpace.binary(30, cap=2 ** 24)
    with pytest.raises(EnumerationRefused, match=str(2 ** 30)):
        enumerate_log_z(FlatModel(), space)


# ---------------------------------------------------------------------------
# enumerate_log_z
# ---------------------------------------------------------------------------

def test_uniform_log_z():
    space = DiscreteSpace.binary(3)
    assert enumerate_log_z(FlatModel(), space) == pytest.approx(np.log(8), abs=1e-13)


def test_single_binary_closed_form():
    space = DiscreteSpace.binary(1)
    model = TableModel(space, [0.0, 1.0])
    assert enumerate_log_z(model, space) == pytest.approx(np.log(1 + np.e), abs=1e-13)


def transfer_matrix_log_z(model: IsingModel) -> float:
    """Independent oracle: column transfer matrices for the free-boundary grid."""
    side = model.side
    col_states = list(itertools.product([-1, 1], repeat=side))

    def in_column(c):
        vertical = sum(c[i] * c[i + 1] for i in range(side - 1))
        return model.beta * (model.coupling * vertical + model.field * sum(c))

    def between(c1, c2):
        return model.beta * model.coupling * sum(a * b for a, b in zip(c1, c2))

    log_v = np.array([in_column(c) for c in col_states])
    log_t = np.array([[between(c1, c2) for c2 in col_states] for c1 in col_states])
    acc = log_v.copy()
    for _ in range(side - 1):
        acc = logsumexp(acc[:, None] + log_t + log_v[None, :], axis=0)
    return float(logsumexp(acc))


def test_ising_3x3_enumeration_matches_transfer_matrix():
    model = IsingModel(side=3, coupling=1.0, field=0.0, beta=0.4)
    by_enum = enumerate_log_z(model, model.space())
    assert by_enum == pytest.approx(transfer_matrix_log_z(model), rel=1e-12)


def test_exp_log_z_matches_direct_sum():
    rng = derive_rng(7, "logz")
    space = DiscreteSpace.fixed([3, 2, 4])
    values = rng.normal(size=space.size)
    model = TableModel(space, values)
    direct = np.exp(values).sum()
    assert np.exp(enumerate_log_z(model, space)) == pytest.approx(direct, rel=1e-12)


def test_streaming_lse_matches_scipy():
    rng = derive_rng(3, "lse")
    values = rng.normal(scale=50.0, size=1000)
    lse = StreamingLogSumExp()
    for chunk in np.array_split(values, 13):
        lse.add(chunk)
    assert lse.value() == pytest.approx(float(logsumexp(values)), rel=1e-14)


# ---------------------------------------------------------------------------
# enumerate_expectation
# ---------------------------------------------------------------------------

def test_expectation_of_one_is_one():
    space = DiscreteSpace.fixed([2, 2, 2])
    model = TableModel(space, derive_rng(0, "e1").normal(size=space.size))
    val = enumerate_expectation(model, space, lambda x: 1.0)
    assert val[0] == pytest.approx(1.0, abs=1e-12)


def test_ising_infinite_temperature_center_spin():
    model = IsingModel(side=3, beta=0.0)
    val = enumerate_expectation(model, model.space(), lambda x: 2.0 * x[4] - 1.0)
    assert abs(val[0]) < 1e-14


def test_rbm_moments_match_manual_joint_enumeration():
    rbm = Rbm(3, 2, seed=5, scale=0.6)
    space = rbm.joint_space()

    def stat(x):
        v, h = np.array(x[:3]), np.array(x[3:])
        return np.outer(v, h).ravel()

    got = enumerate_expectation(rbm, space, stat)
    # independent route: raw sum over all (v, h) tuples
    weights, stats = [], []
    for x in itertools.product([0, 1], repeat=5):
        v, h = np.array(x[:3], dtype=float), np.array(x[3:], dtype=float)
        weights.append(np.exp(v @ rbm.W @ h + rbm.b @ v + rbm.a @ h))
        stats.append(np.outer(v, h).ravel())
    weights = np.array(weights) / np.sum(weights)
    expected = weights @ np.stack(stats)
    np.testing.assert_allclose(got, expected, rtol=1e-10, atol=1e-12)


# ---------------------------------------------------------------------------
# tv_distance
# ---------------------------------------------------------------------------

def test_tv_trivial_and_hand_value():
    assert tv_distance([0.3, 0.7], [0.3, 0.7]) == 0.0
    assert tv_distance([1.0, 0.0], [0.0, 1.0]) == 1.0
    assert tv_distance([0.5, 0.5], [0.75, 0.25]) == pytest.approx(0.25, abs=1e-15)


def test_tv_support_mismatch():
    with pytest.raises(SupportMismatch):
        tv_distance([1.0], [0.5, 0.5])
    with pytest.raises(SupportMismatch):
        tv_distance([0.6, 0.6], [0.5, 0.5])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0.01, 10.0), min_size=2, max_size=8),
       st.lists(st.floats(0.01, 10.0), min_size=2, max_size=8))
def test_tv_is_a_bounded_symmetric_metric(raw_p, raw_q):
    n = min(len(raw_p), len(raw_q))
    p = np.array(raw_p[:n]) / np.sum(raw_p[:n])
    q = np.array(raw_q[:n]) / np.sum(raw_q[:n])
    d = tv_distance(p, q)
    assert 0.0 <= d <= 1.0
    assert d == tv_distance(q, p)
    assert tv_distance(p, p) == 0.0


# ---------------------------------------------------------------------------
# finite differences
# ---------------------------------------------------------------------------

def test_finite_diff_exact_for_linear_potential():
    space = DiscreteSpace.fixed([4])
    feats = np.array([[1.0, 0.0], [0.0, 2.0], [3.0, 1.0], [1.0, 1.0]])
    model = IndexedLogLinear(space, feats)
    for h in (0.25, 0.0078125):
        for x in space.states():
            np.testing.assert_array_equal(finite_diff_grad(model, x, h=h),
                                          model.features(x))


def test_finite_diff_matches_rbm_analytic_gradient():
    rbm = Rbm(4, 3, seed=1, scale=0.5)
    x = (1, 0, 1, 1, 0, 1, 0)
    fd = finite_diff_grad(rbm, x, h=1e-5)
    np.testing.assert_allclose(fd, rbm.grad_params(x), rtol=1e-6, atol=1e-8)


def test_central_difference_rejects_bad_h():
    with pytest.raises(ValueError):
        central_difference(lambda v: float(v.sum()), np.zeros(2), h=0.0)


# ---------------------------------------------------------------------------
# marginal-gradient identity
# ---------------------------------------------------------------------------

def test_fisher_equality_rbm():
    for seed in range(3):
        rbm = Rbm(4, 3, seed=seed, scale=0.8)
        rng = derive_rng(seed, "fisher")
        v = tuple(int(b) for b in rng.integers(0, 2, size=4))
        assert fisher_equality_check(RbmLatentView(rbm), v) < 1e-10


def test_fisher_equality_deterministic_latent_is_exact():
    rbm = Rbm(3, 0, seed=0)
    assert fisher_equality_check(RbmLatentView(rbm), (1, 0, 1)) == 0.0


# ---------------------------------------------------------------------------
# maxent / MLE moment matching
# ---------------------------------------------------------------------------

def test_mle_matches_empirical_moments():
    rng = derive_rng(11, "maxent")
    space = DiscreteSpace.fixed([2, 2, 2, 2])
    feats = rng.normal(size=(space.size, 3))
    model = IndexedLogLinear(space, feats)
    # interior target: moments of a strictly positive distribution
    weights = rng.random(space.size) + 0.1
    weights /= weights.sum()
    target = weights @ feats
    fit_exact_mle(model, space, target, steps=4000, lr=0.8)
    fitted = enumerate_expectation(model, space, None, batch_statistic=model.feature_batch)
    np.testing.assert_allclose(fitted, target, atol=1e-6)


def test_enumerate_probs_normalized():
    space = DiscreteSpace.fixed([3, 3])
    model = TableModel(space, derive_rng(2, "probs").normal(size=9))
    probs = enumerate_probs(model, space)
    assert probs.sum() == pytest.approx(1.0, abs=1e-12)
    assert (probs > 0).all()
