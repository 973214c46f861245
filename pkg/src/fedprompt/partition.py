"""Synthetic labeled datasets and Dirichlet label-skew partitioning.

Features are class-conditional Gaussians over a feature space: client models
in this simulator consume feature vectors directly, which keeps all protocol
math intact without a vision stack. ``alpha`` controls label skew: large
alpha -> near-uniform shards, small alpha -> heavily skewed shards.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InfeasiblePartitionError, InvalidInputError
from .seeding import child_seed, rng_for


@dataclass
class Dataset:
    """Labeled feature vectors: features (M, d_in) float64, labels (M,) ints in [0, C)."""

    features: np.ndarray
    labels: np.ndarray
    n_classes: int

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.features.ndim != 2 or self.labels.ndim != 1:
            raise InvalidInputError("features must be (M, d_in) and labels (M,)")
        if len(self.features) != len(self.labels):
            raise InvalidInputError("features and labels disagree on sample count")
        if len(self.labels) and (self.labels.min() < 0 or self.labels.max() >= self.n_classes):
            raise InvalidInputError(f"labels must lie in [0, {self.n_classes})")

    def __len__(self) -> int:
        return len(self.labels)

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.n_classes)

    def subset(self, indices: np.ndarray) -> "Dataset":
        idx = np.asarray(indices, dtype=np.int64)
        return Dataset(self.features[idx], self.labels[idx], self.n_classes)


@dataclass
class PartitionPlan:
    """Disjoint per-client sample indices plus the parameters that produced them."""

    assignments: list[np.ndarray]
    alpha: float
    seed: int
    fallback_used: bool = field(default=False)

    @property
    def n_clients(self) -> int:
        return len(self.assignments)


def class_means(n_classes: int, input_dim: int, seed: int) -> np.ndarray:
    """Unit-norm class centers, a pure function of (n_classes, input_dim, seed)."""
    rng = rng_for(seed, "class-means")
    means = rng.normal(size=(n_classes, input_dim))
    means /= np.linalg.norm(means, axis=1, keepdims=True)
    return means


def synth_dataset(
    n_classes: int,
    input_dim: int,
    per_class: int,
    spread: float,
    seed: int,
    noise_key: int = 0,
) -> Dataset:
    """Balanced class-conditional Gaussian dataset.

    Class c is drawn around a unit-norm mean (derived from ``seed`` only, so
    train/test splits built with different ``noise_key`` share the same
    geometry) with isotropic standard deviation ``spread``.
    """
    if n_classes < 2:
        raise InvalidInputError(f"need at least 2 classes, got {n_classes}")
    if per_class < 1:
        raise InvalidInputError(f"need at least 1 sample per class, got {per_class}")
    if spread < 0:
        raise InvalidInputError(f"spread must be nonnegative, got {spread}")
    means = class_means(n_classes, input_dim, seed)
    rng = rng_for(seed, "noise", noise_key)
    feats = np.repeat(means, per_class, axis=0)
    if spread > 0:
        feats = feats + spread * rng.normal(size=feats.shape)
    labels = np.repeat(np.arange(n_classes), per_class)
    return Dataset(feats, labels, n_classes)


def dataset_from_means(means: np.ndarray, per_class: int, spread: float, seed: int, noise_key: int = 0) -> Dataset:
    """Gaussian dataset around externally supplied class centers.

    Lets ingested real class embeddings (see the embedding file format) stand
    in for the synthetic geometry while everything downstream stays identical.
    """
    means = np.asarray(means, dtype=np.float64)
    n_classes, input_dim = means.shape
    if n_classes < 2:
        raise InvalidInputError("need at least 2 class centers")
    rng = rng_for(seed, "noise", noise_key)
    feats = np.repeat(means, per_class, axis=0)
    if spread > 0:
        feats = feats + spread * rng.normal(size=feats.shape)
    labels = np.repeat(np.arange(n_classes), per_class)
    return Dataset(feats, labels, n_classes)


def _largest_remainder(quotas: np.ndarray, total: int) -> np.ndarray:
    """Integerize real-valued quotas so they sum exactly to ``total``."""
    base = np.floor(quotas).astype(np.int64)
    short = total - int(base.sum())
    frac = quotas - np.floor(quotas)
    # ties broken toward lower client index (stable sort on -frac)
    order = np.argsort(-frac, kind="stable")
    base[order[:short]] += 1
    return base


def dirichlet_partition(
    labels: np.ndarray,
    n_clients: int,
    alpha: float,
    seed: int,
    max_retries: int = 100,
) -> PartitionPlan:
    """Split sample indices across clients with per-class Dirichlet proportions.

    For each class, proportions p ~ Dir(alpha * 1_N) decide contiguous block
    sizes (largest-remainder rounding, so each class is exhausted exactly).
    If any client ends up empty the whole draw is retried; after
    ``max_retries`` draws the deficit is fixed round-robin by moving single
    samples from the largest shards.
    """
    labels = np.asarray(labels, dtype=np.int64)
    if n_clients < 1:
        raise InvalidInputError(f"need at least 1 client, got {n_clients}")
    if alpha <= 0:
        raise InvalidInputError(f"alpha must be positive, got {alpha}")
    if n_clients > len(labels):
        raise InfeasiblePartitionError(
            f"cannot give {n_clients} clients at least one of {len(labels)} samples"
        )
    n_classes = int(labels.max()) + 1 if len(labels) else 0
    by_class = [np.flatnonzero(labels == c) for c in range(n_classes)]
    rng = rng_for(seed, "partition")

    assignments: list[list[np.ndarray]] = []
    fallback = False
    for _ in range(max_retries):
        assignments = [[] for _ in range(n_clients)]
        for idx in by_class:
            if len(idx) == 0:
                continue
            p = rng.dirichlet(np.full(n_clients, alpha))
            sizes = _largest_remainder(p * len(idx), len(idx))
            stops = np.cumsum(sizes)
            start = 0
            for n, stop in enumerate(stops):
                if stop > start:
                    assignments[n].append(idx[start:stop])
                start = int(stop)
        if all(sum(len(b) for b in blocks) > 0 for blocks in assignments):
            break
    else:
        fallback = True

    shards = [np.concatenate(blocks) if blocks else np.empty(0, dtype=np.int64) for blocks in assignments]
    if fallback:
        # move one sample at a time from the currently largest shard
        for n in range(n_clients):
            while len(shards[n]) == 0:
                donor = int(np.argmax([len(s) for s in shards]))
                shards[n] = shards[donor][-1:]
                shards[donor] = shards[donor][:-1]
    return PartitionPlan([np.sort(s) for s in shards], float(alpha), int(seed), fallback)


def cap_plan(plan: PartitionPlan, cap: int, seed: int) -> PartitionPlan:
    """Subsample each client's shard to at most ``cap`` samples (seeded, no replacement)."""
    if cap < 1:
        raise InvalidInputError(f"cap must be >= 1, got {cap}")
    capped = []
    for n, idx in enumerate(plan.assignments):
        if len(idx) > cap:
            rng = rng_for(seed, "shard-cap", n)
            keep = rng.choice(len(idx), size=cap, replace=False)
            idx = np.sort(idx[keep])
        capped.append(idx)
    return PartitionPlan(capped, plan.alpha, plan.seed, plan.fallback_used)


def label_entropy(labels: np.ndarray, n_classes: int) -> float:
    """Entropy (nats) of the empirical label distribution of one shard."""
    counts = np.bincount(np.asarray(labels, dtype=np.int64), minlength=n_classes)
    p = counts / counts.sum()
    nz = p[p > 0]
    return float(-(nz * np.log(nz)).sum())
