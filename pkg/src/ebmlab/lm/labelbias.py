"""Label-bias demonstration on a three-sentence corpus.

A locally-normalized bigram model scores "Alice likes tea" and "Tom like
tea" identically (successors of the wrong history get the same conditional
mass as successors of the right one), while a globally-normalized nine-
feature log-linear model trained on the same corpus ranks the grammatical
sentence strictly higher.
"""

from dataclasses import dataclass, field

import numpy as np

from ..loglinear import LogLinearModel, fit_exact_mle
from ..oracle import DiscreteSpace, enumerate_log_z

CORPUS = [
    ("Tom", "likes", "tea"),
    ("John", "likes", "tea"),
    ("Alice", "like", "tea"),
]
TEST_GOOD = ("Alice", "likes", "tea")
TEST_BAD = ("Tom", "like", "tea")

FIRST_WORDS = ("Tom", "John", "Alice")
SECOND_WORDS = ("likes", "like")
THIRD_WORDS = ("tea",)

# Reference scores reported for this worked example in the literature; they
# depend on an unstated training schedule and are reproduced qualitatively
# (ordering and the locally-normalized tie), not numerically.
REFERENCE_SCORES = {"good": -7.06, "bad": -7.79, "log_z": 19.98}


def demo_bigram_alm_score(sentence, epsilon) -> float:
    """Bigram chain score with the demonstration's smoothing scheme: observed
    transitions keep their count ratio, unseen ones get mass epsilon."""
    bigrams = {}
    unigrams = {}
    for sent in CORPUS:
        seq = ("<s>",) + sent + ("</s>",)
        for a, b in zip(seq, seq[1:]):
            bigrams[(a, b)] = bigrams.get((a, b), 0) + 1
            unigrams[a] = unigrams.get(a, 0) + 1
    prob = 1.0
    seq = ("<s>",) + tuple(sentence) + ("</s>",)
    for a, b in zip(seq, seq[1:]):
        if (a, b) in bigrams:
            prob *= bigrams[(a, b)] / unigrams[a]
        else:
            prob *= epsilon
    return prob


def label_bias_features(sentence) -> np.ndarray:
    """The nine bigram-style indicators of the demonstration."""
    x1, x2, x3 = sentence
    return np.array([
        x1 == "Tom",
        x1 == "John",
        x1 == "Alice",
        x1 == "Tom" and x2 == "likes",
        x1 == "John" and x2 == "likes",
        x1 == "Alice" and x2 == "like",
        x2 == "likes" and x3 == "tea",
        x2 == "like" and x3 == "tea",
        x3 == "tea",
    ], dtype=np.float64)


def _space_and_sentences():
    space = DiscreteSpace.fixed([len(FIRST_WORDS), len(SECOND_WORDS), len(THIRD_WORDS)])
    sentences = {
        idx: (FIRST_WORDS[idx[0]], SECOND_WORDS[idx[1]], THIRD_WORDS[idx[2]])
        for idx in space.states()
    }
    return space, sentences


@dataclass
class LabelBiasReport:
    epsilon: float
    alm_prob_good: float
    alm_prob_bad: float
    elm_log_prob_good: float
    elm_log_prob_bad: float
    elm_log_z: float
    weights: np.ndarray
    reference: dict = field(default_factory=lambda: dict(REFERENCE_SCORES))

    @property
    def alm_scores_tie(self) -> bool:
        return self.alm_prob_good == self.alm_prob_bad

    @property
    def elm_prefers_good(self) -> bool:
        return self.elm_log_prob_good > self.elm_log_prob_bad


def label_bias_demo(epsilon=0.01, l2=1e-3, steps=5000, lr=0.5) -> LabelBiasReport:
    """Run both models on the bundled corpus.

    The log-linear model is fit by full-batch exact-gradient ascent over the
    six-sentence space with l2 regularization (the unregularized optimum is
    degenerate: one positive-probability event has empirical count zero).
    """
    if not 0.0 < epsilon < 1.0 / 3.0:
        raise ValueError("epsilon must lie in (0, 1/3)")
    space, sentences = _space_and_sentences()
    model = LogLinearModel(lambda idx: label_bias_features(sentences[idx]), dim=9)
    emp = np.mean([label_bias_features(s) for s in CORPUS], axis=0)
    fit_exact_mle(model, space, emp, steps=steps, lr=lr, l2=l2)
    log_z = enumerate_log_z(model, space)

    def elm_log_prob(sentence):
        return float(label_bias_features(sentence) @ model.weights) - log_z

    return LabelBiasReport(
        epsilon=epsilon,
        alm_prob_good=demo_bigram_alm_score(TEST_GOOD, epsilon),
        alm_prob_bad=demo_bigram_alm_score(TEST_BAD, epsilon),
        elm_log_prob_good=elm_log_prob(TEST_GOOD),
        elm_log_prob_bad=elm_log_prob(TEST_BAD),
        elm_log_z=log_z,
        weights=model.weights.copy(),
    )
