import numpy as np
import pytest

from ngnn.train import accuracy, hits_at_k, paired_sign_test, roc_auc


def test_accuracy():
    assert accuracy([0, 1, 2], [0, 1, 2]) == 1.0
    assert accuracy(np.array([[1], [0]]), [1, 1]) == 0.5
    gen = np.random.default_rng(0)
    preds, labels = gen.integers(0, 4, 500), gen.integers(0, 4, 500)
    assert accuracy(preds, labels) == sum(int(p == y) for p, y in zip(preds, labels)) / 500
    with pytest.raises(ValueError):
        accuracy([], [])
    with pytest.raises(ValueError):
        accuracy([1, 2], [1])


def _pairwise_auc(scores, labels):
    pos = [s for s, y in zip(scores, labels) if y == 1]
    neg = [s for s, y in zip(scores, labels) if y == 0]
    wins = sum(1.0 if p > n else 0.5 if p == n else 0.0 for p in pos for n in neg)
    return wins / (len(pos) * len(neg))


def test_roc_auc_examples():
    assert roc_auc([0.9, 0.1], [1, 0]) == 1.0
    assert roc_auc([0.1, 0.9], [1, 0]) == 0.0
    assert roc_auc([0.3] * 6, [1, 0, 1, 0, 0, 1]) == 0.5


@pytest.mark.parametrize('seed', range(3))
def test_roc_auc_matches_the_pairwise_oracle(seed):
    gen = np.random.default_rng(seed)
    # rounded scores so that ties occur
    scores = np.round(gen.random(200), 2)
    labels = (gen.random(200) < 0.4).astype(int)
    assert abs(roc_auc(scores, labels) - _pairwise_auc(scores, labels)) < 1e-12


def test_roc_auc_is_invariant_under_monotone_transforms():
    gen = np.random.default_rng(1)
    scores = gen.standard_normal(100)
    labels = (gen.random(100) < 0.5).astype(int)
    base = roc_auc(scores, labels)
    assert roc_auc(np.exp(scores), labels) == pytest.approx(base, abs=1e-12)
    assert roc_auc(3 * scores - 7, labels) == pytest.approx(base, abs=1e-12)


def test_roc_auc_needs_both_classes():
    with pytest.raises(ValueError):
        roc_auc([0.2, 0.4], [1, 1])
    with pytest.raises(ValueError):
        roc_auc([0.2, 0.4], [0, 0])


def _hits_oracle(pos, neg, k):
    threshold = sorted(neg, reverse=True)[k - 1]
    return sum(p > threshold for p in pos) / len(pos)


def test_hits_at_k_examples():
    assert hits_at_k([0.9, 0.4], [0.8, 0.5, 0.3], 2) == 0.5
    assert hits_at_k([2.0, 3.0], [0.1, 0.5, 1.0], 1) == 1.0
    assert hits_at_k([0.0, -1.0], [0.1, 0.5, 1.0], 3) == 0.0
    # equal to the threshold is not a hit
    assert hits_at_k([0.5], [0.8, 0.5, 0.3], 2) == 0.0


def test_hits_at_k_matches_oracle_and_is_monotone_in_k():
    gen = np.random.default_rng(2)
    pos, neg = np.round(gen.random(50), 2), np.round(gen.random(80), 2)
    values = [hits_at_k(pos, neg, k) for k in range(1, 81)]
    assert values == [_hits_oracle(pos, neg, k) for k in range(1, 81)]
    assert all(a <= b for a, b in zip(values, values[1:]))


def test_hits_at_k_errors():
    with pytest.raises(ValueError):
        hits_at_k([0.5], [0.1, 0.2], 3)
    with pytest.raises(ValueError):
        hits_at_k([], [0.1, 0.2], 1)
    with pytest.raises(ValueError):
        hits_at_k([0.5], [0.1], 0)


def test_paired_sign_test():
    # ten of ten pairs favour b: p = 0.5 ** 10
    a, b = np.arange(10), np.arange(10) + 1.0
    assert paired_sign_test(a, b) == pytest.approx(0.5 ** 10)
    assert paired_sign_test(b, a) == pytest.approx(1.0)
    assert paired_sign_test([1.0, 2.0], [1.0, 2.0]) == 1.0
    # ties are dropped: 3 informative pairs, all favouring b
    assert paired_sign_test([0, 0, 0, 1, 1], [1, 1, 1, 1, 1]) == pytest.approx(0.125)
    with pytest.raises(ValueError):
        paired_sign_test([1.0], [1.0, 2.0])
