import math

import numpy as np


def accuracy(preds, gold):
    preds = np.asarray(preds)
    gold = np.asarray(gold)
    if preds.shape != gold.shape:
        raise ValueError(f"accuracy: {preds.shape} predictions vs {gold.shape} labels")
    if preds.size == 0:
        raise ValueError("accuracy of an empty prediction set is undefined")
    return float(np.count_nonzero(preds == gold)) / preds.size


def confusion_matrix(preds, gold, n_classes):
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    for p, g in zip(preds, gold):
        cm[g, p] += 1
    return cm


def summarize(values):
    """mean, sample std (ddof=1; 0 for a single value) and stderr = std / sqrt(n)."""
    v = [float(x) for x in values]
    n = len(v)
    if n == 0:
        raise ValueError("summarize needs at least one value")
    mean = math.fsum(v) / n
    std = math.sqrt(math.fsum((x - mean) ** 2 for x in v) / (n - 1)) if n > 1 else 0.0
    return {"mean": mean, "std": std, "stderr": std / math.sqrt(n), "n": n}
