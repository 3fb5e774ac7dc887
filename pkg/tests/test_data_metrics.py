"""Synthetic data generator and metric implementations."""

import numpy as np
import pytest

from hypca.data import DatasetSpec, SyntheticDataset
from hypca.metrics import (accuracy, binary_auc, classification_metrics,
                           macro_f1, ovr_auc)

import oracles


class TestSyntheticDataset:
    def test_noise_free_same_class_identical(self):
        ds = SyntheticDataset(DatasetSpec(seed=3, n=40, noise=0.0))
        labels = ds.labels
        for m in range(2):
            same = np.flatnonzero(labels == 1)
            a, b = ds.images[m][same[0]], ds.images[m][same[1]]
            assert np.array_equal(a, b)

    def test_seed_reproducibility_bytewise(self):
        spec = DatasetSpec(seed=9, n=24)
        d1, d2 = SyntheticDataset(spec), SyntheticDataset(spec)
        for m in range(2):
            assert d1.images[m].tobytes() == d2.images[m].tobytes()
        assert np.array_equal(d1.labels, d2.labels)

    def test_splits_disjoint_80_10_10(self):
        ds = SyntheticDataset(DatasetSpec(seed=0, n=100))
        tr, va, te = ds.splits()
        assert (len(tr), len(va), len(te)) == (80, 10, 10)
        assert not (set(tr) & set(va) or set(tr) & set(te) or set(va) & set(te))

    def test_linear_probe_oracle(self):
        # multinomial logistic regression on raw pixels must separate the
        # default spec before the network is ever blamed
        from sklearn.linear_model import LogisticRegression
        ds = SyntheticDataset(DatasetSpec())
        tr, _, te = ds.splits()
        xtr = ds.images[0][tr].reshape(len(tr), -1)
        xte = ds.images[0][te].reshape(len(te), -1)
        clf = LogisticRegression(max_iter=200).fit(xtr, ds.labels[tr])
        assert clf.score(xte, ds.labels[te]) >= 0.90

    def test_per_modality_noise(self):
        ds = SyntheticDataset(DatasetSpec(seed=2, n=20, noise=[0.0, 0.4]))
        labels = ds.labels
        same = np.flatnonzero(labels == 0)
        # modality 0 noise-free: identical same-class samples; modality 1 not
        assert np.array_equal(ds.images[0][same[0]], ds.images[0][same[1]])
        assert not np.array_equal(ds.images[1][same[0]], ds.images[1][same[1]])

    def test_invalid_specs(self):
        with pytest.raises(ValueError):
            DatasetSpec(classes=1)
        with pytest.raises(ValueError):
            DatasetSpec(modalities=1)
        with pytest.raises(ValueError):
            DatasetSpec(noise=-0.1)
        with pytest.raises(ValueError):
            DatasetSpec(noise=[0.1])

    def test_task_labels_validation(self):
        ds = SyntheticDataset(DatasetSpec(seed=0, n=20))
        with pytest.raises(ValueError):
            ds.task_labels(np.arange(4), (5,))


class TestMetrics:
    def test_perfect_predictions(self):
        scores = np.eye(4)[np.array([0, 1, 2, 3])] * 5.0
        labels = np.array([0, 1, 2, 3])
        m = classification_metrics(scores, labels, 4)
        assert m["accuracy"] == 1.0
        assert m["macro_f1"] == 1.0
        assert m["auc"] == 1.0

    def test_binary_perfect_ranking(self):
        assert binary_auc(np.array([0.9, 0.8, 0.3, 0.1]),
                          np.array([True, True, False, False])) == 1.0

    def test_auc_matches_pairwise_oracle(self):
        rng = np.random.default_rng(0)
        for trial in range(20):
            scores = np.round(rng.random((30, 4)), 2)   # rounding forces ties
            labels = rng.integers(0, 4, 30)
            got = ovr_auc(scores, labels, 4)
            refs = []
            for k in range(4):
                pos = labels == k
                if pos.all() or not pos.any():
                    continue
                refs.append(oracles.pairwise_auc(scores[:, k], pos))
            assert abs(got - np.mean(refs)) < 1e-12

    def test_single_class_auc_absent(self):
        scores = np.array([[0.2, 0.8], [0.4, 0.6]])
        assert ovr_auc(scores, np.array([1, 1]), 2) is None

    def test_macro_f1_unweighted_mean(self):
        pred = np.array([0, 0, 1, 1, 2])
        labels = np.array([0, 1, 1, 1, 2])
        # class 0: tp1 fp1 fn0 -> 2/3; class 1: tp2 fp0 fn1 -> 0.8; class 2: 1.0
        assert abs(macro_f1(pred, labels, 3) - np.mean([2 / 3, 0.8, 1.0])) < 1e-12

    def test_metrics_in_unit_interval(self):
        rng = np.random.default_rng(1)
        scores = rng.random((50, 3))
        labels = rng.integers(0, 3, 50)
        m = classification_metrics(scores, labels, 3)
        for v in m.values():
            assert v is None or 0.0 <= v <= 1.0

    def test_accuracy_validation(self):
        with pytest.raises(ValueError):
            accuracy(np.array([]), np.array([]))
