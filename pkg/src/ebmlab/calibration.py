"""Expected calibration error with equal-width confidence bins.

Predictions are (confidence, correct) pairs, optionally tagged with the
class label they score; with labels present the binning is done per class
and averaged, which is the multi-class form of the metric.
"""

import numpy as np


class CalibrationBins:
    def __init__(self, n_bins=20):
        if n_bins < 1:
            raise ValueError("need at least one bin")
        self.n_bins = int(n_bins)
        self._by_class = {}

    def add(self, confidence, correct, label=0) -> None:
        confidence = float(confidence)
        if not 0.0 <= confidence <= 1.0:
            raise ValueError(f"confidence {confidence} outside [0, 1]")
        b = min(int(confidence * self.n_bins), self.n_bins - 1)
        bins = self._by_class.setdefault(
            int(label),
            {"count": np.zeros(self.n_bins), "conf": np.zeros(self.n_bins),
             "acc": np.zeros(self.n_bins)},
        )
        bins["count"][b] += 1.0
        bins["conf"][b] += confidence
        bins["acc"][b] += 1.0 if correct else 0.0

    @property
    def total_count(self) -> float:
        return sum(b["count"].sum() for b in self._by_class.values())

    def ece(self) -> float:
        if not self._by_class:
            raise ValueError("no predictions recorded")
        n_classes = len(self._by_class)
        n = self.total_count / n_classes
        total = 0.0
        for bins in self._by_class.values():
            mask = bins["count"] > 0
            gap = np.abs(bins["acc"][mask] / bins["count"][mask]
                         - bins["conf"][mask] / bins["count"][mask])
            total += float(((bins["count"][mask] / n) * gap).sum())
        return total / n_classes


def ece(predictions, n_bins=20) -> float:
    """ECE of (confidence, correct[, label]) tuples."""
    bins = CalibrationBins(n_bins)
    count = 0
    for entry in predictions:
        bins.add(*entry)
        count += 1
    if count == 0:
        raise ValueError("empty prediction set")
    return bins.ece()


def ece_from_posteriors(probs, true_labels, n_bins=20) -> float:
    """ECE of a (n, K) posterior matrix against integer labels."""
    probs = np.asarray(probs, dtype=np.float64)
    true_labels = np.asarray(true_labels, dtype=np.int64)
    bins = CalibrationBins(n_bins)
    for i in range(probs.shape[0]):
        for y in range(probs.shape[1]):
            bins.add(probs[i, y], true_labels[i] == y, label=y)
    return bins.ece()
