import numpy as np
import pytest
from scipy.special import logsumexp
from scipy.stats import chisquare

from ebmlab.lm.elm import (
    NeuralSequencePotential,
    SentenceLogLinear,
    SumPotential,
    TrfModel,
    gn_elm_implied_length_mixture,
    gn_elm_matched_to_trf,
    train_trf_dnce,
)
from ebmlab.lm.features import NgramFeatureSet, exchange_cluster
from ebmlab.lm.labelbias import (
    CORPUS,
    TEST_BAD,
    TEST_GOOD,
    demo_bigram_alm_score,
    label_bias_demo,
    label_bias_features,
)
from ebmlab.lm.ngram import LengthCapExceeded, NgramAlm, fit_ngram
from ebmlab.lm.poe import (
    AlmNegLogLik,
    HammingDistance,
    KeywordMissingPenalty,
    PoeSequenceModel,
    poe_energy,
)
from ebmlab.lm.rescore import NbestEntry, read_nbest_tsv, rescore_nbest, write_nbest_tsv
from ebmlab.lm.residual import (
    AncestralReference,
    ResidualElm,
    partition_bounds,
    residual_topk_sample,
    stepwise_prob,
)
from ebmlab.lm.vocab import Vocab, read_corpus, write_corpus
from ebmlab.learners import SaSchedule
from ebmlab.oracle import DiscreteSpace, enumerate_probs, tv_distance
from ebmlab.rng import derive_rng
from ebmlab.samplers import ChainState, mh_within_gibbs_sweep


# ---------------------------------------------------------------------------
# vocab
# ---------------------------------------------------------------------------

def test_vocab_roundtrip_and_reserved_ids(tmp_path):
    vocab = Vocab.from_corpus([["a", "b"], ["b", "c"]])
    assert vocab.decode(vocab.encode(["a", "b", "c"])) == ["a", "b", "c"]
    assert vocab.encode(["never-seen"]) == (vocab.id_of("<unk>"),)
    assert vocab.bos_id == len(vocab) and vocab.eos_id == len(vocab) + 1
    path = tmp_path / "vocab.txt"
    vocab.save(path)
    again = Vocab.load(path)
    assert again.encode(["a", "b", "c"]) == vocab.encode(["a", "b", "c"])
    lines = path.read_text().splitlines()
    assert lines[vocab.id_of("a")] == "a"  # rank = id


def test_corpus_file_roundtrip(tmp_path):
    sents = [["the", "cat"], ["a", "dog", "barks"]]
    path = tmp_path / "corpus.txt"
    write_corpus(path, sents)
    assert read_corpus(path) == sents


# ---------------------------------------------------------------------------
# n-gram reference model
# ---------------------------------------------------------------------------

def toy_corpus(rng, vocab_size=3, n=200, mean_len=3):
    out = []
    for _ in range(n):
        l = 1 + int(rng.poisson(mean_len - 1))
        out.append(tuple(int(v) for v in rng.integers(0, vocab_size, size=l)))
    return out


def test_ngram_conditionals_normalize():
    rng = derive_rng(0, "ngram")
    alm = fit_ngram(toy_corpus(rng), vocab_size=3, order=2)
    histories = [(), (0,), (1,), (2,), (0, 1), (2, 2, 0)]
    for h in histories:
        assert abs(alm.conditional(h).sum() - 1.0) < 1e-10


def test_ngram_sequence_mass_terminates():
    rng = derive_rng(1, "ngram")
    alm = fit_ngram(toy_corpus(rng, n=300), vocab_size=3, order=2)
    assert alm.total_mass_up_to(50) >= 1.0 - 1e-6


def test_ngram_log_prob_is_chain_of_conditionals():
    rng = derive_rng(2, "ngram")
    alm = fit_ngram(toy_corpus(rng), vocab_size=3, order=3)
    x = (0, 2, 1)
    manual = (np.log(alm.conditional(())[0])
              + np.log(alm.conditional((0,))[2])
              + np.log(alm.conditional((0, 2))[1])
              + np.log(alm.conditional((0, 2, 1))[3]))
    assert alm.log_prob(x) == pytest.approx(manual, abs=1e-12)


def test_ngram_sampling_matches_law():
    rng = derive_rng(3, "ngram")
    alm = fit_ngram(toy_corpus(rng, n=100, mean_len=2), vocab_size=2, order=2)
    draws = {}
    sample_rng = derive_rng(4, "draws")
    for _ in range(20_000):
        x = alm.sample(sample_rng, max_len=40)
        draws[x] = draws.get(x, 0) + 1
    for x, count in sorted(draws.items(), key=lambda kv: -kv[1])[:5]:
        p = np.exp(alm.log_prob(x))
        se = np.sqrt(p * (1 - p) / 20_000)
        assert abs(count / 20_000 - p) < 4 * se + 1e-4


def test_ngram_mle_step_with_full_rate_matches_batch():
    alm = NgramAlm(3, order=1)
    alm.add_sentence((0, 1))
    alm.mle_step([(2, 2), (2,)], lr=1.0)
    # unigram counts now reflect only the batch: tokens 2,2,2 and two EOS
    probs = alm.conditional(())
    assert probs[2] > probs[0] and probs[2] > probs[1]


def test_ngram_validates_params():
    with pytest.raises(ValueError):
        NgramAlm(3, order=0)
    with pytest.raises(ValueError):
        NgramAlm(3, discount=1.5)


# ---------------------------------------------------------------------------
# features
# ---------------------------------------------------------------------------

def test_trigram_indicator_fires_once():
    fs = NgramFeatureSet([("w", 3)])
    fs.fit([(5, 6, 7, 8, 9)])
    counts = fs.extract((1, 5, 6, 7, 2))  # contains 5,6,7 once
    key = ("w", 3, (5, 6, 7))
    assert counts.get(fs.index[key], 0) == 1


def test_extraction_is_pure():
    fs = NgramFeatureSet([("w", 2), ("ws", 2)])
    fs.fit([(0, 1, 2, 0, 1)])
    x = (0, 1, 2)
    assert fs.extract(x) == fs.extract(x)
    np.testing.assert_array_equal(fs.extract_dense(x), fs.extract_dense(x))


def test_short_sentence_has_no_higher_order_features():
    fs = NgramFeatureSet([("w", 3)])
    fs.fit([(0, 1, 2)])
    assert fs.extract((0,)) == {}


def test_tied_template_shares_index():
    fs = NgramFeatureSet([("tied", 2, 3)])
    fs.fit([(7, 0, 8), (7, 0, 0, 8)])  # pair (7, 8) at distances 2 and 3
    keys = [k for k in fs.index if k[0] == "tied" and k[3] == (7, 8)]
    assert len(keys) == 1
    idx = fs.index[keys[0]]
    assert fs.extract((7, 0, 8)).get(idx) == 1
    assert fs.extract((7, 1, 1, 8)).get(idx) == 1  # longer skip, same index


def test_class_features_use_class_map():
    fs = NgramFeatureSet([("c", 2)], class_map={0: 0, 1: 0, 2: 1})
    fs.fit([(0, 2)])
    # words 0 and 1 share a class, so (1, 2) fires the same class bigram
    assert fs.extract((1, 2)) == fs.extract((0, 2))


def test_exchange_clustering_groups_by_context():
    # words 0/1 precede 4, words 2/3 precede 5
    corpus = []
    rng = derive_rng(5, "cluster")
    for _ in range(200):
        w = int(rng.integers(0, 2)) if rng.random() < 0.5 else int(rng.integers(2, 4))
        corpus.append((w, 4 if w < 2 else 5))
    classes = exchange_cluster(corpus, vocab_size=6, n_classes=3)
    assert classes[0] == classes[1]
    assert classes[2] == classes[3]
    assert classes[0] != classes[2]


def test_label_bias_feature_vector():
    feats = label_bias_features(("Tom", "likes", "tea"))
    np.testing.assert_array_equal(feats, [1, 0, 0, 1, 0, 0, 1, 0, 1])


# ---------------------------------------------------------------------------
# TRF / GN-ELM
# ---------------------------------------------------------------------------

class ZeroPotential:
    def potential(self, x):
        return 0.0

    def potential_batch(self, xs):
        return np.zeros(len(xs))


def random_sentence_potential(vocab_size, max_len, seed, scale=0.5):
    fs = NgramFeatureSet([("w", 1), ("w", 2)])
    space = DiscreteSpace.sequences(vocab_size, max_len=max_len)
    fs.fit(list(space.states()))
    rng = derive_rng(seed, "pot")
    return SentenceLogLinear(fs, weights=scale * rng.normal(size=fs.dim))


def test_trf_flat_potential_single_length():
    trf = TrfModel(vocab_size=4, max_len=3, potential=ZeroPotential())
    trf.set_enumerated_zetas()
    for l in (1, 2, 3):
        x = tuple([0] * l)
        assert trf.log_prob(x) == pytest.approx(np.log(trf.pi[l - 1]) - l * np.log(4),
                                                abs=1e-12)


def test_trf_normalizes_with_enumerated_zetas():
    pot = random_sentence_potential(4, 3, seed=6)
    trf = TrfModel(4, 3, pot, pi=np.array([0.2, 0.3, 0.5]))
    trf.set_enumerated_zetas()
    assert trf.total_mass() == pytest.approx(1.0, abs=1e-9)
    # probabilities over all 84 sequences sum to 1
    total = sum(np.exp(trf.log_prob(x))
                for x in DiscreteSpace.sequences(4, max_len=3).states())
    assert total == pytest.approx(1.0, abs=1e-10)


def test_gn_elm_matches_trf_with_dimension_features():
    pot = random_sentence_potential(4, 3, seed=7)
    trf = TrfModel(4, 3, pot, pi=np.array([0.25, 0.35, 0.4]))
    trf.set_enumerated_zetas()
    gn = gn_elm_matched_to_trf(trf)
    space = DiscreteSpace.sequences(4, max_len=3)
    # normalize the global model over the whole union space
    states = list(space.states())
    logits = np.array([gn.potential(x) for x in states])
    log_z = logsumexp(logits)
    for x, logit in zip(states, logits):
        assert logit - log_z == pytest.approx(trf.log_prob(x), abs=1e-10)


def test_plain_gn_elm_mixture_weights_proportional_to_z():
    pot = random_sentence_potential(3, 3, seed=8)
    weights = gn_elm_implied_length_mixture(pot, 3, 3)
    # independent route: enumerate the union space and sum by length
    space = DiscreteSpace.sequences(3, max_len=3)
    probs = enumerate_probs(pot, space)
    marginals = []
    offset = 0
    for l in (1, 2, 3):
        count = 3 ** l
        marginals.append(probs[offset:offset + count].sum())
        offset += count
    np.testing.assert_allclose(weights, marginals, atol=1e-12)


def test_empirical_length_distribution_smoothed():
    trf = TrfModel.with_empirical_lengths(3, 4, ZeroPotential(),
                                          [(0,), (0, 1), (0, 1)])
    np.testing.assert_allclose(trf.pi, np.array([2, 3, 1, 1]) / 7.0)


# ---------------------------------------------------------------------------
# TRF training by DNCE
# ---------------------------------------------------------------------------

def test_train_trf_dnce_recovers_planted_model():
    """alpha close to 1 here: with a finite-capacity n-gram noise the DNCE
    optimum is the alpha-interpolation of data and noise, so alpha controls
    that bias (the package default stays at 0.5)."""
    truth_pot = random_sentence_potential(4, 3, seed=9, scale=0.4)
    truth = TrfModel(4, 3, truth_pot, pi=np.array([0.3, 0.4, 0.3]))
    truth.set_enumerated_zetas()
    space = DiscreteSpace.sequences(4, max_len=3)
    states = list(space.states())
    probs = np.array([np.exp(truth.log_prob(x)) for x in states])
    rng = derive_rng(10, "data")
    corpus = [states[int(i)] for i in rng.choice(len(states), p=probs, size=100_000)]

    fs = NgramFeatureSet([("w", 1), ("w", 2)])
    fs.fit(states)
    model = TrfModel.with_empirical_lengths(4, 3, SentenceLogLinear(fs), corpus)
    noise = fit_ngram(corpus[:3000], vocab_size=4, order=2)
    sched = SaSchedule(a=0.5, b=1000.0, t0=1000)
    train_trf_dnce(model, corpus, noise, sched, steps=3000, seed=11,
                   nu=4, alpha=0.95, batch_size=256, noise_lr_scale=0.3)
    errs = [abs(model.log_prob(x) - truth.log_prob(x)) for x in states]
    assert max(errs) < 0.1


def test_train_trf_dnce_zero_steps_is_identity():
    pot = random_sentence_potential(3, 2, seed=12)
    trf = TrfModel(3, 2, pot)
    w0 = pot.get_flat_params().copy()
    z0 = trf.zetas.copy()
    train_trf_dnce(trf, [(0,)], fit_ngram([(0,)], 3), SaSchedule(), steps=0, seed=0)
    np.testing.assert_array_equal(pot.get_flat_params(), w0)
    np.testing.assert_array_equal(trf.zetas, z0)


def held_out_ll(trf, held_out):
    zetas = trf.enumerate_zetas()
    return float(np.mean([np.log(trf.pi[len(x) - 1])
                          + trf.potential.potential(x) - zetas[len(x) - 1]
                          for x in held_out]))


def trigramish_corpus(rng, n, vocab_size=5, length=4):
    """Sequences with a second-order rule: x3 repeats x1, x4 flips around x2."""
    out = []
    for _ in range(n):
        a, b = int(rng.integers(vocab_size)), int(rng.integers(vocab_size))
        c = a if rng.random() < 0.85 else int(rng.integers(vocab_size))
        d = (b + 1) % vocab_size if rng.random() < 0.85 else int(rng.integers(vocab_size))
        out.append((a, b, c, d))
    return out


@pytest.mark.slow
def test_mixed_features_converge_faster_than_linear():
    """With features capped at bigrams, adding the neural component lets the
    model reach the linear-only plateau in fewer epochs on data whose law is
    second-order."""
    wins = 0
    for seed in range(10):
        rng = derive_rng(seed, "mixed")
        corpus = trigramish_corpus(rng, 1200)
        held = trigramish_corpus(rng, 400)
        fs = NgramFeatureSet([("w", 1), ("w", 2)])
        fs.fit(corpus)
        noise0 = fit_ngram(corpus, vocab_size=5, order=2)

        curves = {}
        for kind in ("linear", "mixed"):
            if kind == "linear":
                pot = SentenceLogLinear(fs)
            else:
                pot = SumPotential([SentenceLogLinear(fs),
                                    NeuralSequencePotential(5, embed_dim=4,
                                                            hidden=8, seed=seed)])
            trf = TrfModel.with_empirical_lengths(5, 4, pot, corpus)
            noise = fit_ngram(corpus, vocab_size=5, order=2)
            lls = []
            for epoch in range(8):
                train_trf_dnce(trf, corpus, noise,
                               SaSchedule(a=0.4, b=1e9, t0=0), steps=150,
                               seed=100 * seed + epoch, nu=4, alpha=0.5,
                               batch_size=128, noise_lr_scale=0.02)
                lls.append(held_out_ll(trf, held))
            curves[kind] = lls
        target = max(curves["linear"])  # the linear model's plateau
        first = {k: next((i for i, v in enumerate(c) if v >= target - 1e-9), 99)
                 for k, c in curves.items()}
        if first["mixed"] < first["linear"]:
            wins += 1
    assert wins >= 7


# ---------------------------------------------------------------------------
# label bias demo
# ---------------------------------------------------------------------------

def test_alm_tie_is_exact_for_any_epsilon():
    for eps in (0.001, 0.01, 0.1, 0.32):
        good = demo_bigram_alm_score(TEST_GOOD, eps)
        bad = demo_bigram_alm_score(TEST_BAD, eps)
        assert good == bad == (1.0 / 3.0) * eps


def test_elm_ranks_grammatical_sentence_higher():
    report = label_bias_demo()
    assert report.alm_scores_tie
    assert report.elm_prefers_good
    assert report.elm_log_prob_good > report.elm_log_prob_bad
    assert np.isfinite(report.elm_log_z)
    assert set(report.reference) == {"good", "bad", "log_z"}


def test_label_bias_demo_is_deterministic():
    a = label_bias_demo()
    b = label_bias_demo()
    assert a.elm_log_prob_good == b.elm_log_prob_good
    np.testing.assert_array_equal(a.weights, b.weights)


def test_training_sentences_outscore_their_variants():
    report = label_bias_demo()
    # sanity: corpus sentences get high scores under the fitted model
    w = report.weights
    for sent in CORPUS:
        assert label_bias_features(sent) @ w > label_bias_features(TEST_BAD) @ w


# ---------------------------------------------------------------------------
# residual models
# ---------------------------------------------------------------------------

def small_reference(seed=13, vocab_size=3, fixed_len=3):
    rng = derive_rng(seed, "ref")
    alm = fit_ngram(toy_corpus(rng, vocab_size=vocab_size, n=150), vocab_size, order=2)
    return AncestralReference(alm, fixed_len=fixed_len)


def test_topk_resampling_uniform_when_flat():
    residual = ResidualElm(small_reference(vocab_size=6, fixed_len=4), lambda x: 0.0)
    real_sample = residual.reference.sample

    def recording_sample(rng, prefix=(), top_k=None):
        x = real_sample(rng, prefix=prefix, top_k=top_k)
        trace.append(x)
        return x

    residual.reference.sample = recording_sample
    counts = np.zeros(4)
    kept = 0
    for rep in range(12_000):
        trace = []
        pick = residual_topk_sample(residual, (), n=4, k=3, seed=rep)
        if len(set(trace)) == len(trace):  # index is ambiguous under collisions
            counts[trace.index(pick)] += 1
            kept += 1
    residual.reference.sample = real_sample
    assert kept >= 9_000
    _, pvalue = chisquare(counts)
    assert pvalue > 0.01


def test_topk_full_vocab_large_n_matches_exact_joint():
    rng = derive_rng(14, "resid")
    table = 0.8 * rng.normal(size=27)
    space = DiscreteSpace.sequences(3, max_len=3, min_len=3)
    residual = ResidualElm(small_reference(),
                           lambda x: float(table[space.index_of(x) - space._offsets[3]])
                           if len(x) == 3 else 0.0)
    log_z = residual.exact_log_z()
    states = list(space.states())
    exact = np.array([np.exp(residual.reference.log_prob(x) + residual.residual(x)
                             - log_z) for x in states])
    counts = np.zeros(len(states))
    for rep in range(4000):
        x = residual_topk_sample(residual, (), n=200, k=3, seed=rep)
        counts[states.index(x)] += 1
    assert tv_distance(counts / counts.sum(), exact) < 0.05


def test_hard_constraint_never_sampled():
    banned = (0, 0, 0)
    residual = ResidualElm(small_reference(),
                           lambda x: -np.inf if x == banned else 0.0)
    for rep in range(300):
        assert residual_topk_sample(residual, (), n=5, k=3, seed=rep) != banned


def test_partition_bounds_flat_residual_exactly_zero():
    residual = ResidualElm(small_reference(), lambda x: 0.0)
    res = partition_bounds(residual, n=8, repeats=50, seed=0)
    assert res.lower_mean == 0.0 and res.upper_mean == 0.0


def test_partition_sandwich_brackets_exact_log_z():
    rng = derive_rng(15, "sand")
    table = rng.normal(size=27)
    space = DiscreteSpace.sequences(3, max_len=3, min_len=3)
    residual = ResidualElm(small_reference(),
                           lambda x: float(table[space.index_of(x) - space._offsets[3]]))
    log_z = residual.exact_log_z()
    gaps = []
    for n in (2, 8, 32):
        res = partition_bounds(residual, n=n, repeats=400, seed=n)
        assert res.lower_mean <= log_z + 3 * res.lower_se
        assert res.upper_mean >= log_z - 3 * res.upper_se
        gaps.append(res.upper_mean - res.lower_mean)
    assert gaps[0] > gaps[1] > gaps[2]


def test_stepwise_flat_residual_equals_reference_conditional():
    ref = small_reference()
    residual = ResidualElm(ref, lambda x: 0.0)
    low, up = stepwise_prob(residual, (0,), 1, mc_samples=16, seed=3)
    expected = float(np.log(ref.step_distribution((0,))[1]))
    assert low == up == expected


def test_stepwise_final_position_is_exact():
    rng = derive_rng(16, "step")
    table = rng.normal(size=27)
    space = DiscreteSpace.sequences(3, max_len=3, min_len=3)
    residual = ResidualElm(small_reference(),
                           lambda x: float(table[space.index_of(x) - space._offsets[3]]))
    low, up = stepwise_prob(residual, (0, 1), 2, mc_samples=4, seed=0)
    assert low == up
    # independent route: exact conditional from full enumeration
    cond = residual.exact_conditional_table((0, 1))
    assert low == pytest.approx(np.log(cond[2]), abs=1e-10)


def test_stepwise_interior_bounds_cover_truth():
    rng = derive_rng(17, "step2")
    table = 1.2 * rng.normal(size=27)
    space = DiscreteSpace.sequences(3, max_len=3, min_len=3)
    residual = ResidualElm(small_reference(),
                           lambda x: float(table[space.index_of(x) - space._offsets[3]]))
    cond = residual.exact_conditional_table((0,))
    truth = float(np.log(cond[1]))
    hits = 0
    runs = 60
    for rep in range(runs):
        low, up = stepwise_prob(residual, (0,), 1, mc_samples=4, seed=1000 + rep,
                                repeats=100)
        assert low <= up
        if low - 1e-12 <= truth <= up + 1e-12:
            hits += 1
    assert hits / runs >= 0.95


def test_eos_reference_length_cap():
    alm = NgramAlm(3, order=1)
    alm.add_sentence((0, 1, 2, 0, 1, 2, 0, 1))  # long sentence: EOS rare
    for _ in range(6):
        alm.add_sentence((0, 1, 2, 0, 1, 2, 0, 1))
    ref = AncestralReference(alm, max_len=3)
    with pytest.raises(LengthCapExceeded):
        for seed in range(50):
            ref.sample(derive_rng(seed, "cap"))


# ---------------------------------------------------------------------------
# product of experts
# ---------------------------------------------------------------------------

def test_single_expert_identity():
    scorer = lambda x: 2.5
    assert poe_energy([(1.0, scorer)], (0, 1)) == 2.5


def test_hamming_self_is_zero():
    h = HammingDistance((1, 2, 3))
    assert h((1, 2, 3)) == 0.0
    assert h((1, 0, 3)) == 1.0
    with pytest.raises(ValueError):
        h((1, 2))


def test_poe_requires_experts():
    with pytest.raises(ValueError):
        poe_energy([], (0,))


def test_poe_chain_matches_enumerated_keyword_marginal():
    rng = derive_rng(18, "poe")
    alm = fit_ngram(toy_corpus(rng, vocab_size=6, n=300, mean_len=5), 6, order=2)
    experts = [(1.0, AlmNegLogLik(alm)), (1.0, KeywordMissingPenalty([2], penalty=2.0))]
    target = PoeSequenceModel(experts, length=5, vocab_size=6)

    space = DiscreteSpace.sequences(6, max_len=5, min_len=5)
    probs = enumerate_probs(target, space)
    states = list(space.states())
    truth = sum(p for x, p in zip(states, probs) if 2 in x)

    class AlmProposal:
        """Left-context bigram proposal at the resampled position."""

        def _table(self, x, i):
            hist = (x[i - 1],) if i > 0 else ()
            probs = alm.conditional(hist)[:6]
            return probs / probs.sum()

        def sample(self, rng_, x, i):
            p = self._table(x, i)
            return int(rng_.choice(6, p=p))

        def log_density(self, x, i, value):
            return float(np.log(self._table(x, i)[value]))

    state = ChainState(x=(0, 0, 0, 0, 0), rng=derive_rng(19, "poe-chain"))
    hits, total = 0, 0
    for sweep in range(20_000):
        state = mh_within_gibbs_sweep(target, AlmProposal(), state)
        if sweep >= 2_000:
            hits += 1 if 2 in state.x else 0
            total += 1
    assert abs(hits / total - truth) < 0.03


# ---------------------------------------------------------------------------
# rescoring
# ---------------------------------------------------------------------------

def make_entries():
    return [NbestEntry("u1", -1.0, (0, 1)),
            NbestEntry("u1", -2.0, (0, 2)),
            NbestEntry("u1", -3.0, (1, 1))]


def test_rescore_weight_zero_keeps_alm_order():
    entries = make_entries()
    out = rescore_nbest(entries, [-100.0, 0.0, 50.0], weight=0.0)
    assert [e.sentence for e in out] == [(0, 1), (0, 2), (1, 1)]


def test_rescore_weight_one_orders_by_model():
    entries = make_entries()
    out = rescore_nbest(entries, [-100.0, 0.0, 50.0], weight=1.0)
    assert [e.sentence for e in out] == [(1, 1), (0, 2), (0, 1)]


def test_rescore_ties_are_stable():
    entries = make_entries()
    out = rescore_nbest(entries, [0.0, 0.0, 0.0], weight=1.0)
    assert [e.sentence for e in out] == [(0, 1), (0, 2), (1, 1)]


def test_nbest_tsv_roundtrip(tmp_path):
    vocab = Vocab(["a", "b", "c"])
    entries = [NbestEntry("u1", -1.25, vocab.encode(["a", "c"])),
               NbestEntry("u2", -0.5, vocab.encode(["b"]))]
    path = tmp_path / "nbest.tsv"
    write_nbest_tsv(path, entries, vocab)
    again = read_nbest_tsv(path, vocab)
    assert [(e.utt_id, e.alm_score, e.sentence) for e in again] == \
        [(e.utt_id, e.alm_score, e.sentence) for e in entries]
