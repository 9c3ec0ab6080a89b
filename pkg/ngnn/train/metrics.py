"""
Evaluation metrics: accuracy, rank-based ROC-AUC, hits@K and a paired sign test.
"""
from typing import Sequence

import numpy as np
from scipy.stats import binomtest, rankdata

__all__ = ['accuracy', 'roc_auc', 'hits_at_k', 'paired_sign_test']


def accuracy(preds: Sequence[int], labels: Sequence[int]) -> float:
    preds = np.asarray(preds).reshape(-1)
    labels = np.asarray(labels).reshape(-1)
    if preds.size == 0:
        raise ValueError("accuracy is undefined on an empty set")
    if preds.shape != labels.shape:
        raise ValueError(f"{preds.shape[0]} predictions for {labels.shape[0]} labels")
    return float(np.mean(preds == labels))


def roc_auc(scores: Sequence[float], labels: Sequence[int]) -> float:
    """
    Probability that a random positive outranks a random negative, ties counted one half.
    Computed from average ranks, so it is invariant under strictly monotone score transforms.
    """
    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    labels = np.asarray(labels).reshape(-1)
    if scores.shape != labels.shape:
        raise ValueError(f"{scores.shape[0]} scores for {labels.shape[0]} labels")
    pos = labels == 1
    n_pos = int(pos.sum())
    n_neg = labels.shape[0] - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("roc_auc needs both positive and negative labels")
    ranks = rankdata(scores)
    return float((ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def hits_at_k(pos_scores: Sequence[float], neg_scores: Sequence[float], k: int) -> float:
    """
    Fraction of positives scoring strictly above the K-th largest negative score.
    """
    pos_scores = np.asarray(pos_scores, dtype=np.float64).reshape(-1)
    neg_scores = np.asarray(neg_scores, dtype=np.float64).reshape(-1)
    if k < 1 or k > neg_scores.shape[0]:
        raise ValueError(f"hits@{k} needs at least {k} negatives, got {neg_scores.shape[0]}")
    if pos_scores.size == 0:
        raise ValueError("hits@K is undefined without positives")
    threshold = np.partition(neg_scores, -k)[-k]
    return float(np.mean(pos_scores > threshold))


def paired_sign_test(a: Sequence[float], b: Sequence[float]) -> float:
    """
    One-sided sign test on paired samples: the p-value of "a tends to be smaller than b".
    Ties are dropped; no informative pairs gives 1.0.
    """
    a = np.asarray(a, dtype=np.float64).reshape(-1)
    b = np.asarray(b, dtype=np.float64).reshape(-1)
    if a.shape != b.shape:
        raise ValueError("paired samples must have equal length")
    diff = a - b
    n = int(np.count_nonzero(diff))
    if n == 0:
        return 1.0
    return float(binomtest(int(np.sum(diff < 0)), n, 0.5, alternative='greater').pvalue)
