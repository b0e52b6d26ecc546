"""N-best list rescoring by interpolating reference and energy-model scores."""

from dataclasses import dataclass


@dataclass
class NbestEntry:
    utt_id: str
    alm_score: float
    sentence: tuple


def rescore_nbest(entries, model_scores, weight):
    """Stable ranking by (1 - weight) * reference score + weight * model score.

    Ties keep the original order; weight 0 reproduces the incoming ranking,
    weight 1 ranks purely by the model.
    """
    entries = list(entries)
    model_scores = list(model_scores)
    if len(entries) != len(model_scores):
        raise ValueError("one model score per entry required")
    combined = [(1.0 - weight) * e.alm_score + weight * s
                for e, s in zip(entries, model_scores)]
    order = sorted(range(len(entries)), key=lambda i: (-combined[i], i))
    return [entries[i] for i in order]


def read_nbest_tsv(path, vocab=None):
    """TSV rows: utterance-id, reference score, sentence."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            utt_id, score, text = line.rstrip("\n").split("\t")
            tokens = text.split()
            sentence = vocab.encode(tokens) if vocab is not None else tuple(tokens)
            out.append(NbestEntry(utt_id, float(score), sentence))
    return out


def write_nbest_tsv(path, entries, vocab=None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for e in entries:
            text = " ".join(vocab.decode(e.sentence) if vocab is not None
                            else [str(t) for t in e.sentence])
            fh.write(f"{e.utt_id}\t{e.alm_score!r}\t{text}\n")
