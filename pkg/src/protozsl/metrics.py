"""Per-class evaluation metrics.

Accuracies are always averaged over classes, not samples, so a class with
three samples counts exactly as much as one with three thousand.  Classes
that contribute no test samples are excluded from the average.
"""

from dataclasses import dataclass, field

import numpy as np

from .datasets import _check_labels
from .exceptions import ValidationError


@dataclass
class EvalReport:
    """Evaluation summary; acc_seen and harmonic_mean are present together (gzsl)."""

    acc_unseen: float
    acc_seen: float = None
    harmonic_mean: float = None
    per_class: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "acc_unseen": self.acc_unseen,
            "acc_seen": self.acc_seen,
            "harmonic_mean": self.harmonic_mean,
            "per_class": {
                str(c): {"correct": int(v[0]), "total": int(v[1]), "accuracy": v[2]}
                for c, v in sorted(self.per_class.items())
            },
        }


def _per_class_table(hits, truth):
    table = {}
    for c in np.unique(truth):
        mask = truth == c
        total = int(mask.sum())
        correct = int(hits[mask].sum())
        table[int(c)] = (correct, total, correct / total)
    return table


def per_class_topk_accuracy(predictions, truth, k=1):
    """Mean per-class top-k accuracy.

    ``predictions`` is either a classes x N score matrix (higher is better)
    or a 1-d sequence of hard labels, in which case k must be 1.  Returns
    (accuracy, per_class) where per_class maps each class id to
    (correct, total, accuracy).  Ties in the scores resolve toward smaller
    class indices, so the result is deterministic.
    """
    truth = _check_labels(truth, "truth")
    if truth.size == 0:
        raise ValidationError("truth is empty; nothing to evaluate")
    arr = np.asarray(predictions)
    if arr.ndim == 1:
        if k != 1:
            raise ValidationError("hard labels support only k = 1, got k = %d" % k)
        pred = _check_labels(arr, "predictions")
        if pred.size != truth.size:
            raise ValidationError("got %d predictions for %d truth labels" % (pred.size, truth.size))
        hits = pred == truth
    elif arr.ndim == 2:
        n_classes, n_samples = arr.shape
        if n_samples != truth.size:
            raise ValidationError("got scores for %d samples but %d truth labels" % (n_samples, truth.size))
        if not 1 <= k <= n_classes:
            raise ValidationError("k must lie in [1, %d], got %d" % (n_classes, k))
        if truth.max() > n_classes:
            raise ValidationError(
                "truth class %d is absent from the %d score rows" % (truth.max(), n_classes)
            )
        # stable argsort keeps equal scores in class order
        order = np.argsort(-arr, axis=0, kind="stable")[:k] + 1
        hits = (order == truth[None, :]).any(axis=0)
    else:
        raise ValidationError("predictions must be a label sequence or a score matrix")
    table = _per_class_table(hits, truth)
    acc = float(np.mean([v[2] for v in table.values()]))
    return acc, table


def harmonic_mean(acc_seen, acc_unseen):
    """Harmonic mean of two accuracies; zero when both are zero."""
    for name, v in (("acc_seen", acc_seen), ("acc_unseen", acc_unseen)):
        if not 0.0 <= v <= 1.0:
            raise ValidationError("%s must lie in [0, 1], got %g" % (name, v))
    if acc_seen == 0.0 and acc_unseen == 0.0:
        return 0.0
    return 2.0 * acc_seen * acc_unseen / (acc_seen + acc_unseen)


def evaluate_standard(predictions, truth, k=1):
    """EvalReport for a standard split where only candidate classes are scored."""
    acc, table = per_class_topk_accuracy(predictions, truth, k)
    return EvalReport(acc_unseen=acc, per_class=table)


def evaluate_gzsl(predictions, truth, m, n):
    """EvalReport for a mixed pool labeled over the joint 1..m+n vocabulary.

    Classes 1..m are seen, m+1..m+n unseen.  Seen and unseen accuracies are
    averaged separately over their own classes and combined by harmonic
    mean.  The pool must contain at least one sample from each side.
    """
    truth = _check_labels(truth, "truth")
    pred = _check_labels(np.asarray(predictions), "predictions")
    if pred.size != truth.size:
        raise ValidationError("got %d predictions for %d truth labels" % (pred.size, truth.size))
    if truth.size == 0:
        raise ValidationError("truth is empty; nothing to evaluate")
    if truth.max() > m + n:
        raise ValidationError("truth class %d exceeds the %d joint classes" % (truth.max(), m + n))
    seen_mask = truth <= m
    if not seen_mask.any() or seen_mask.all():
        raise ValidationError("gzsl evaluation needs both seen and unseen samples in the pool")
    hits = pred == truth
    table = _per_class_table(hits, truth)
    acc_seen = float(np.mean([v[2] for c, v in table.items() if c <= m]))
    acc_unseen = float(np.mean([v[2] for c, v in table.items() if c > m]))
    return EvalReport(
        acc_unseen=acc_unseen,
        acc_seen=acc_seen,
        harmonic_mean=harmonic_mean(acc_seen, acc_unseen),
        per_class=table,
    )
