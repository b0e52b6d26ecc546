"""Token/id bijection with stable sentinel ids.

Content tokens get ids 0..V-1 (so sentence configurations enumerate
cleanly); the sentence-boundary sentinels live just above the content
range: BOS = V, EOS = V + 1.  They never occur inside a sentence.
"""

UNK = "<unk>"
BOS = "<s>"
EOS = "</s>"


class Vocab:
    def __init__(self, tokens, unk_token=None):
        self._tokens = list(tokens)
        if len(set(self._tokens)) != len(self._tokens):
            raise ValueError("duplicate tokens")
        for reserved in (BOS, EOS):
            if reserved in self._tokens:
                raise ValueError(f"{reserved!r} is reserved and cannot be a content token")
        self._ids = {tok: i for i, tok in enumerate(self._tokens)}
        self.unk_token = unk_token
        if unk_token is not None and unk_token not in self._ids:
            raise ValueError(f"unk token {unk_token!r} not in vocabulary")

    def __len__(self):
        return len(self._tokens)

    @property
    def bos_id(self) -> int:
        return len(self._tokens)

    @property
    def eos_id(self) -> int:
        return len(self._tokens) + 1

    def id_of(self, token) -> int:
        if token in self._ids:
            return self._ids[token]
        if self.unk_token is not None:
            return self._ids[self.unk_token]
        raise KeyError(f"token {token!r} not in vocabulary and no unk configured")

    def token_of(self, idx) -> str:
        if idx == self.bos_id:
            return BOS
        if idx == self.eos_id:
            return EOS
        return self._tokens[idx]

    def encode(self, tokens) -> tuple:
        return tuple(self.id_of(t) for t in tokens)

    def decode(self, ids) -> list:
        return [self.token_of(i) for i in ids]

    @classmethod
    def from_corpus(cls, sentences, unk_token=UNK):
        seen = []
        seen_set = set()
        for sent in sentences:
            for tok in sent:
                if tok not in seen_set:
                    seen.append(tok)
                    seen_set.add(tok)
        tokens = ([unk_token] if unk_token not in seen_set else []) + seen
        return cls(tokens, unk_token=unk_token)

    # one token per line, rank = id
    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for tok in self._tokens:
                fh.write(tok + "\n")

    @classmethod
    def load(cls, path, unk_token=None):
        with open(path, encoding="utf-8") as fh:
            tokens = [line.rstrip("\n") for line in fh if line.rstrip("\n")]
        if unk_token is None and UNK in tokens:
            unk_token = UNK
        return cls(tokens, unk_token=unk_token)


def read_corpus(path) -> list:
    """UTF-8, one tokenized sentence per line, whitespace-separated."""
    with open(path, encoding="utf-8") as fh:
        return [line.split() for line in fh if line.strip()]


def write_corpus(path, sentences) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for sent in sentences:
            fh.write(" ".join(sent) + "\n")
