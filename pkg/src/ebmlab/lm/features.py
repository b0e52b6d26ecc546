"""Discrete n-gram feature machinery for sentence-level log-linear potentials.

Templates instantiate position-independent indicator features over word (and
optional word-class) contexts; only instantiations observed in the training
corpus receive an index.  Extraction returns non-negative integer counts and
is a pure function of the sentence.

Template forms (offsets are positions behind the current token):
  ("w", k)          word k-gram  (w_{-k+1} .. w_0)
  ("c", k)          class k-gram
  ("ws", d)         skip bigram (w_{-d}, w_0), d >= 2
  ("cs", d)         class skip bigram
  ("wsh", d)        higher-order word skip bigram, d >= 4
  ("csh", d)        higher-order class skip bigram
  ("cpw", k)        class (k-1)-gram predicting current word
  ("tied", lo, hi)  word skip bigrams with distances lo..hi sharing one
                    parameter per word pair
"""

import numpy as np

_TEMPLATE_KINDS = ("w", "c", "ws", "cs", "wsh", "csh", "cpw", "tied")


class NgramFeatureSet:
    def __init__(self, templates, class_map=None, include_eos=False):
        for tpl in templates:
            if tpl[0] not in _TEMPLATE_KINDS:
                raise ValueError(f"unknown template kind {tpl[0]!r}")
        self.templates = list(templates)
        self.class_map = dict(class_map) if class_map else None
        self.include_eos = bool(include_eos)
        self.index = {}

    @property
    def dim(self) -> int:
        return len(self.index)

    def _symbols(self, sentence, bos, eos):
        # left boundary padding; EOS appended only for globally-normalized use
        seq = (bos,) + tuple(sentence) + ((eos,) if self.include_eos else ())
        return seq

    def _cls(self, token):
        return self.class_map.get(token, -1) if self.class_map else -1

    def _instances(self, sentence, bos=-1, eos=-2):
        """Yield (key, position) for every template instantiation."""
        seq = self._symbols(sentence, bos, eos)
        classes = tuple(self._cls(t) for t in seq)
        n = len(seq)
        for tpl in self.templates:
            kind = tpl[0]
            if kind in ("w", "c"):
                k = tpl[1]
                src = seq if kind == "w" else classes
                for i in range(k - 1, n):
                    yield (kind, k, src[i - k + 1:i + 1]), i
            elif kind in ("ws", "cs", "wsh", "csh"):
                d = tpl[1]
                src = seq if kind in ("ws", "wsh") else classes
                for i in range(d, n):
                    yield (kind, d, (src[i - d], src[i])), i
            elif kind == "cpw":
                k = tpl[1]
                for i in range(k - 1, n):
                    yield (kind, k, classes[i - k + 1:i] + (seq[i],)), i
            elif kind == "tied":
                lo, hi = tpl[1], tpl[2]
                for d in range(lo, hi + 1):
                    for i in range(d, n):
                        yield (kind, lo, hi, (seq[i - d], seq[i])), i

    def fit(self, corpus):
        """Index every instantiation observed in the corpus, in scan order."""
        for sentence in corpus:
            for key, _ in self._instances(sentence):
                if key not in self.index:
                    self.index[key] = len(self.index)
        return self

    def extract(self, sentence) -> dict:
        """Sparse feature counts {index: count} for the indexed templates."""
        counts = {}
        for key, _ in self._instances(sentence):
            idx = self.index.get(key)
            if idx is not None:
                counts[idx] = counts.get(idx, 0) + 1
        return counts

    def extract_dense(self, sentence) -> np.ndarray:
        out = np.zeros(self.dim)
        for idx, c in self.extract(sentence).items():
            out[idx] = c
        return out


def exchange_cluster(corpus, vocab_size, n_classes, sweeps=10):
    """Greedy exchange clustering of words on the bigram class likelihood
    sum_c(g,g') log c(g,g') - 2 sum_c(g) log c(g).

    Words start in frequency-ordered round-robin classes; each sweep tries to
    move every word to its best class until no move helps.
    """
    unigram = np.zeros(vocab_size)
    bigrams = {}
    for sent in corpus:
        for t in sent:
            unigram[t] += 1
        for a, b in zip(sent, sent[1:]):
            bigrams[(a, b)] = bigrams.get((a, b), 0) + 1
    order = np.argsort(-unigram, kind="stable")
    assign = np.zeros(vocab_size, dtype=np.int64)
    for rank, w in enumerate(order):
        assign[w] = rank % n_classes

    by_left = [[] for _ in range(vocab_size)]
    by_right = [[] for _ in range(vocab_size)]
    for (a, b), c in bigrams.items():
        by_left[a].append((b, c))
        by_right[b].append((a, c))

    def xlogx(v):
        return v * np.log(v) if v > 0 else 0.0

    cls_big = np.zeros((n_classes, n_classes))
    cls_uni = np.zeros(n_classes)
    for (a, b), c in bigrams.items():
        cls_big[assign[a], assign[b]] += c
    for w in range(vocab_size):
        cls_uni[assign[w]] += unigram[w]

    def objective():
        return (sum(xlogx(v) for v in cls_big.ravel())
                - 2.0 * sum(xlogx(v) for v in cls_uni))

    def move(w, target):
        old = assign[w]
        if old == target:
            return
        for b, c in by_left[w]:
            if b == w:
                cls_big[old, old] -= c
                cls_big[target, target] += c
            else:
                cls_big[old, assign[b]] -= c
                cls_big[target, assign[b]] += c
        for a, c in by_right[w]:
            if a == w:
                continue  # self-bigram handled above
            cls_big[assign[a], old] -= c
            cls_big[assign[a], target] += c
        cls_uni[old] -= unigram[w]
        cls_uni[target] += unigram[w]
        assign[w] = target

    current = objective()
    for _ in range(sweeps):
        moved = False
        for w in order:
            home = assign[w]
            best_cls, best_val = home, current
            for g in range(n_classes):
                if g == home:
                    continue
                move(w, g)
                val = objective()
                move(w, home)
                if val > best_val + 1e-12:
                    best_cls, best_val = g, val
            if best_cls != home:
                move(w, best_cls)
                current = best_val
                moved = True
        if not moved:
            break
    return {w: int(assign[w]) for w in range(vocab_size)}
