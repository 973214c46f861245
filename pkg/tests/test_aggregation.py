import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fedprompt import client, numerics, partition
from fedprompt.aggregation import aggregate
from fedprompt.client import ClassKnowledge
from fedprompt.errors import InvalidInputError, MissingClassError


def knowledge(soft, counts, rnd=1):
    soft = np.asarray(soft, dtype=float)
    counts = np.asarray(counts, dtype=np.int64)
    soft = soft.copy()
    soft[counts == 0] = np.nan
    return ClassKnowledge(soft, counts, round_index=rnd)


class TestAggregate:
    def test_single_client_identity(self):
        k = knowledge([[0.8, 0.2], [0.3, 0.7]], [3, 5])
        agg = aggregate([k])
        assert np.allclose(agg.soft_labels, [[0.8, 0.2], [0.3, 0.7]])
        assert list(agg.counts) == [3, 5]

    def test_hand_weighted_mean(self):
        k1 = knowledge([[0.8, 0.2], [0.5, 0.5]], [3, 1])
        k2 = knowledge([[0.4, 0.6], [0.5, 0.5]], [1, 1])
        agg = aggregate([k1, k2])
        assert np.allclose(agg.soft_labels[0], [0.7, 0.3], atol=1e-12)

    def test_identical_labels_unchanged_by_counts(self):
        l = np.array([[0.6, 0.4], [0.1, 0.9]])
        agg = aggregate([knowledge(l, [10, 1]), knowledge(l, [2, 50])])
        assert np.allclose(agg.soft_labels, l, atol=1e-12)

    def test_absent_classes_contribute_nothing(self):
        k1 = knowledge([[0.9, 0.1], [np.nan, np.nan]], [4, 0])
        k2 = knowledge([[0.5, 0.5], [0.2, 0.8]], [4, 2])
        agg = aggregate([k1, k2])
        assert np.allclose(agg.soft_labels[0], [0.7, 0.3], atol=1e-12)
        assert np.allclose(agg.soft_labels[1], [0.2, 0.8], atol=1e-12)

    def test_missing_class_is_named(self):
        k = knowledge([[1.0, 0.0], [np.nan, np.nan]], [4, 0])
        with pytest.raises(MissingClassError, match="class 1"):
            aggregate([k])

    def test_round_mismatch_rejected(self):
        k1 = knowledge([[1.0, 0.0], [0.0, 1.0]], [1, 1], rnd=1)
        k2 = knowledge([[1.0, 0.0], [0.0, 1.0]], [1, 1], rnd=2)
        with pytest.raises(InvalidInputError, match="round"):
            aggregate([k1, k2])

    def test_permutation_invariant(self):
        rng = np.random.default_rng(3)
        ks = [
            knowledge(rng.dirichlet(np.ones(3), size=3), rng.integers(1, 20, size=3))
            for _ in range(5)
        ]
        a = aggregate(ks).soft_labels
        b = aggregate(ks[::-1]).soft_labels
        assert np.allclose(a, b, atol=1e-14)

    @given(st.integers(0, 10_000))
    @settings(max_examples=60, deadline=None)
    def test_convexity(self, seed):
        rng = np.random.default_rng(seed)
        n, c = rng.integers(2, 5), rng.integers(2, 5)
        ks = [
            knowledge(rng.dirichlet(np.ones(c), size=c), rng.integers(0, 9, size=c))
            for _ in range(n)
        ]
        if not all(sum(k.counts[cls] for k in ks) > 0 for cls in range(c)):
            return
        agg = aggregate(ks)
        for cls in range(c):
            contributors = np.array([k.soft_labels[cls] for k in ks if k.counts[cls] > 0])
            assert np.all(agg.soft_labels[cls] >= contributors.min(axis=0) - 1e-12)
            assert np.all(agg.soft_labels[cls] <= contributors.max(axis=0) + 1e-12)


class TestPerSampleOracle:
    """Aggregation must equal brute-force averaging over every sample."""

    @staticmethod
    def run_case(seed, n_clients=5, n_classes=6):
        rng = np.random.default_rng(seed)
        tau1 = float(rng.uniform(0.5, 12.0))
        shards, models, knowledges = [], [], []
        for n in range(n_clients):
            size = int(rng.integers(5, 40))
            shard = partition.Dataset(
                rng.normal(size=(size, 4)), rng.integers(0, n_classes, size=size), n_classes
            )
            model = client.init_local_model(4, 8, 2, n_classes, seed=seed * 31 + n)
            k = client.class_knowledge(model, shard, tau1)
            k.round_index = 1
            shards.append(shard)
            models.append(model)
            knowledges.append(k)
        totals = np.zeros(n_classes, dtype=int)
        for k in knowledges:
            totals += k.counts
        if np.any(totals == 0):
            return None
        agg = aggregate(knowledges)
        for cls in range(n_classes):
            rows = []
            for shard, model in zip(shards, models):
                mask = shard.labels == cls
                if mask.any():
                    rows.append(numerics.softmax_tau(client.logits(model, shard.features[mask]), tau1))
            oracle = np.concatenate(rows).mean(axis=0)
            assert np.max(np.abs(agg.soft_labels[cls] - oracle)) < 1e-12
        return agg

    def test_matches_brute_force(self):
        checked = 0
        seed = 0
        while checked < 25:
            if self.run_case(seed) is not None:
                checked += 1
            seed += 1
