"""Classification metrics: accuracy, macro-F1, one-vs-rest macro AUC."""

from __future__ import annotations

import numpy as np


def accuracy(pred: np.ndarray, labels: np.ndarray) -> float:
    pred, labels = np.asarray(pred), np.asarray(labels)
    if pred.shape != labels.shape or pred.size == 0:
        raise ValueError("predictions and labels must be same-length nonempty vectors")
    return float((pred == labels).mean())


def macro_f1(pred: np.ndarray, labels: np.ndarray, num_classes: int) -> float:
    """Unweighted mean of per-class F1 over classes with any support or
    predictions; empty classes (no true, no predicted) are skipped."""
    pred, labels = np.asarray(pred), np.asarray(labels)
    scores = []
    for k in range(num_classes):
        tp = int(((pred == k) & (labels == k)).sum())
        fp = int(((pred == k) & (labels != k)).sum())
        fn = int(((pred != k) & (labels == k)).sum())
        if tp + fp + fn == 0:
            continue
        scores.append(2 * tp / (2 * tp + fp + fn))
    return float(np.mean(scores)) if scores else 0.0


def binary_auc(scores: np.ndarray, positive: np.ndarray) -> float:
    """Trapezoidal ROC area; tied scores form one diagonal segment, which
    matches the pairwise-comparison definition with half credit for ties."""
    scores, positive = np.asarray(scores, dtype=np.float64), np.asarray(positive, dtype=bool)
    n_pos, n_neg = int(positive.sum()), int((~positive).sum())
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC needs both classes present")
    order = np.argsort(-scores, kind="stable")
    s, y = scores[order], positive[order]
    tp = fp = 0.0
    tpr_prev = fpr_prev = 0.0
    area = 0.0
    i = 0
    n = len(s)
    while i < n:
        j = i
        while j < n and s[j] == s[i]:
            j += 1
        tp += y[i:j].sum()
        fp += (j - i) - y[i:j].sum()
        tpr, fpr = tp / n_pos, fp / n_neg
        area += (fpr - fpr_prev) * (tpr + tpr_prev) / 2.0
        tpr_prev, fpr_prev = tpr, fpr
        i = j
    return float(area)


def ovr_auc(scores: np.ndarray, labels: np.ndarray, num_classes: int) -> float | None:
    """One-vs-rest macro average; None when no class has both sides present."""
    scores, labels = np.asarray(scores), np.asarray(labels)
    per_class = []
    for k in range(num_classes):
        pos = labels == k
        if pos.all() or not pos.any():
            continue
        per_class.append(binary_auc(scores[:, k], pos))
    return float(np.mean(per_class)) if per_class else None


def classification_metrics(scores: np.ndarray, labels: np.ndarray, num_classes: int) -> dict:
    """accuracy / macro_f1 / auc dict from an (N, K) score matrix."""
    pred = np.argmax(scores, axis=1)
    return {
        "accuracy": accuracy(pred, labels),
        "macro_f1": macro_f1(pred, labels, num_classes),
        "auc": ovr_auc(scores, labels, num_classes),
    }
