import numpy as np
import pytest

from fedprompt import partition
from fedprompt.errors import InfeasiblePartitionError, InvalidInputError


class TestSynthDataset:
    def test_balanced_by_construction(self):
        ds = partition.synth_dataset(2, 6, 10, 0.3, seed=0)
        assert len(ds) == 20
        assert list(ds.class_counts()) == [10, 10]

    def test_deterministic(self):
        a = partition.synth_dataset(3, 5, 7, 0.2, seed=42)
        b = partition.synth_dataset(3, 5, 7, 0.2, seed=42)
        assert np.array_equal(a.features, b.features)
        assert np.array_equal(a.labels, b.labels)

    def test_zero_spread_collapses_to_means(self):
        ds = partition.synth_dataset(3, 4, 5, 0.0, seed=1)
        means = partition.class_means(3, 4, seed=1)
        for c in range(3):
            rows = ds.features[ds.labels == c]
            assert np.array_equal(rows, np.tile(means[c], (5, 1)))

    def test_train_test_share_geometry(self):
        train = partition.synth_dataset(4, 6, 50, 0.0, seed=9, noise_key=0)
        test = partition.synth_dataset(4, 6, 10, 0.0, seed=9, noise_key=1)
        assert np.array_equal(train.features[0], test.features[0])

    def test_distinct_noise_keys_differ(self):
        a = partition.synth_dataset(2, 4, 10, 0.5, seed=3, noise_key=0)
        b = partition.synth_dataset(2, 4, 10, 0.5, seed=3, noise_key=1)
        assert not np.array_equal(a.features, b.features)

    def test_validates_inputs(self):
        with pytest.raises(InvalidInputError):
            partition.synth_dataset(1, 4, 5, 0.1, seed=0)
        with pytest.raises(InvalidInputError):
            partition.synth_dataset(2, 4, 0, 0.1, seed=0)


class TestDirichletPartition:
    def test_single_client_gets_everything(self):
        labels = np.repeat(np.arange(3), 10)
        plan = partition.dirichlet_partition(labels, 1, 0.5, seed=0)
        assert len(plan.assignments) == 1
        assert np.array_equal(np.sort(plan.assignments[0]), np.arange(30))

    def test_deterministic(self):
        labels = np.repeat(np.arange(5), 40)
        a = partition.dirichlet_partition(labels, 4, 0.3, seed=11)
        b = partition.dirichlet_partition(labels, 4, 0.3, seed=11)
        for x, y in zip(a.assignments, b.assignments):
            assert np.array_equal(x, y)

    def test_exact_partition_per_class(self):
        rng = np.random.default_rng(0)
        labels = rng.integers(0, 6, size=500)
        plan = partition.dirichlet_partition(labels, 7, 0.2, seed=5)
        merged = np.concatenate(plan.assignments)
        assert len(merged) == len(labels)
        assert len(np.unique(merged)) == len(labels)
        for c in range(6):
            total = sum(int((labels[idx] == c).sum()) for idx in plan.assignments)
            assert total == int((labels == c).sum())

    def test_no_empty_clients_even_when_skewed(self):
        labels = np.repeat(np.arange(4), 25)
        for seed in range(30):
            plan = partition.dirichlet_partition(labels, 10, 0.05, seed=seed)
            assert all(len(idx) > 0 for idx in plan.assignments)

    def test_infeasible_when_clients_outnumber_samples(self):
        with pytest.raises(InfeasiblePartitionError):
            partition.dirichlet_partition(np.array([0, 1, 1]), 4, 1.0, seed=0)

    def test_huge_alpha_approaches_even_split(self):
        labels = np.repeat(np.arange(3), 200)
        worst = 0.0
        for seed in range(100):
            plan = partition.dirichlet_partition(labels, 2, 1e6, seed=seed)
            for idx in plan.assignments:
                for c in range(3):
                    share = (labels[idx] == c).sum() / 200
                    worst = max(worst, abs(share - 0.5))
        assert worst <= 0.02

    def test_skew_decreases_label_entropy(self):
        labels = np.repeat(np.arange(10), 100)
        means = {}
        for alpha in (0.1, 10.0):
            entropies = []
            for seed in range(50):
                plan = partition.dirichlet_partition(labels, 10, alpha, seed=seed)
                entropies += [partition.label_entropy(labels[idx], 10) for idx in plan.assignments]
            means[alpha] = float(np.mean(entropies))
        assert means[0.1] < means[10.0]

    def test_rejects_bad_arguments(self):
        labels = np.zeros(10, dtype=int)
        with pytest.raises(InvalidInputError):
            partition.dirichlet_partition(labels, 0, 1.0, seed=0)
        with pytest.raises(InvalidInputError):
            partition.dirichlet_partition(labels, 2, 0.0, seed=0)


class TestCapPlan:
    def test_caps_and_is_deterministic(self):
        labels = np.repeat(np.arange(4), 50)
        plan = partition.dirichlet_partition(labels, 2, 10.0, seed=1)
        a = partition.cap_plan(plan, 30, seed=2)
        b = partition.cap_plan(plan, 30, seed=2)
        for x, y in zip(a.assignments, b.assignments):
            assert len(x) <= 30
            assert np.array_equal(x, y)

    def test_small_shards_untouched(self):
        labels = np.repeat(np.arange(2), 10)
        plan = partition.dirichlet_partition(labels, 2, 10.0, seed=1)
        capped = partition.cap_plan(plan, 1000, seed=0)
        for x, y in zip(plan.assignments, capped.assignments):
            assert np.array_equal(x, y)


class TestDatasetFromMeans:
    def test_builds_around_given_centers(self):
        means = np.eye(3)
        ds = partition.dataset_from_means(means, per_class=4, spread=0.0, seed=0)
        assert len(ds) == 12
        assert np.array_equal(ds.features[ds.labels == 2], np.tile(means[2], (4, 1)))
