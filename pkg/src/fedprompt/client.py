"""One simulated device: a depth-heterogeneous MLP classifier over feature
vectors, with supervised local training, per-class soft-label extraction, and
local knowledge distillation against server-provided global soft labels.

Gradients are hand-derived; :func:`distill_loss_and_grad` is the single
implementation used by both the training loop and the finite-difference
checks.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError
from .numerics import LOG_EPS, check_simplex, sgd_step, softmax_tau
from .partition import Dataset
from .seeding import child_seed

ALLOWED_DEPTHS = (2, 3, 4)

# global-norm gradient clip for the local SGD loop; keeps extreme
# temperature/weight combinations finite without touching typical steps
MAX_GRAD_NORM = 10.0


@dataclass
class LocalModelParams:
    """MLP weights/biases: d_in -> hidden^depth -> C with ReLU activations."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def __post_init__(self):
        if len(self.weights) != len(self.biases):
            raise InvalidInputError("weights and biases must pair up")
        depth = len(self.weights) - 1
        if depth not in ALLOWED_DEPTHS:
            raise InvalidInputError(f"hidden depth must be one of {ALLOWED_DEPTHS}, got {depth}")
        for w, b in zip(self.weights, self.biases):
            if w.shape[1] != b.shape[0]:
                raise InvalidInputError("bias length must match layer width")
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise InvalidInputError("non-finite parameters")

    @property
    def depth(self) -> int:
        return len(self.weights) - 1

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[0]

    @property
    def n_classes(self) -> int:
        return self.weights[-1].shape[1]

    def copy(self) -> "LocalModelParams":
        return LocalModelParams([w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def to_vec(self) -> np.ndarray:
        return np.concatenate([a.ravel() for a in self.weights + self.biases])

    def with_vec(self, vec: np.ndarray) -> "LocalModelParams":
        out = self.copy()
        pos = 0
        for arrs in (out.weights, out.biases):
            for i, a in enumerate(arrs):
                arrs[i] = vec[pos : pos + a.size].reshape(a.shape).copy()
                pos += a.size
        return out


@dataclass
class ClassKnowledge:
    """Per-class average soft labels and sample counts for one client.

    Rows of ``soft_labels`` for classes with count 0 are NaN: they are never
    transmitted, and accidental use fails loudly.
    """

    soft_labels: np.ndarray     # (C, C); NaN rows mark absent classes
    counts: np.ndarray          # (C,) nonnegative ints
    round_index: int = field(default=-1)

    @property
    def n_classes(self) -> int:
        return len(self.counts)

    def present(self) -> np.ndarray:
        return self.counts > 0

    def transmitted_numbers(self) -> int:
        # each present class ships its C-entry soft label plus its count
        return int(self.present().sum()) * (self.n_classes + 1)


def init_local_model(input_dim: int, hidden: int, depth: int, n_classes: int, seed: int) -> LocalModelParams:
    """Seeded uniform init in +-1/sqrt(fan_in) for weights and biases."""
    rng = np.random.default_rng(child_seed(seed, "model-init"))
    dims = [input_dim] + [hidden] * depth + [n_classes]
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(rng.uniform(-bound, bound, size=fan_out))
    return LocalModelParams(weights, biases)


def logits(model: LocalModelParams, x: np.ndarray) -> np.ndarray:
    """Forward pass; x is (B, d_in) or a single (d_in,) vector."""
    a = np.atleast_2d(np.asarray(x, dtype=np.float64))
    for w, b in zip(model.weights[:-1], model.biases[:-1]):
        a = np.maximum(a @ w + b, 0.0)
    out = a @ model.weights[-1] + model.biases[-1]
    return out[0] if np.ndim(x) == 1 else out


def _forward_cache(model: LocalModelParams, x: np.ndarray):
    acts = [x]
    pre = []
    a = x
    for w, b in zip(model.weights[:-1], model.biases[:-1]):
        z = a @ w + b
        pre.append(z)
        a = np.maximum(z, 0.0)
        acts.append(a)
    out = a @ model.weights[-1] + model.biases[-1]
    return out, pre, acts


def _backward(model: LocalModelParams, pre, acts, dlogits):
    grad_w = [None] * len(model.weights)
    grad_b = [None] * len(model.biases)
    delta = dlogits
    for layer in range(len(model.weights) - 1, -1, -1):
        grad_w[layer] = acts[layer].T @ delta
        grad_b[layer] = delta.sum(axis=0)
        if layer > 0:
            delta = (delta @ model.weights[layer].T) * (pre[layer - 1] > 0.0)
    return grad_w, grad_b


def distill_loss_and_grad(
    model: LocalModelParams,
    x: np.ndarray,
    y: np.ndarray,
    global_soft: np.ndarray | None,
    tau1: float,
    lambda_kd: float,
):
    """Batch-mean loss CE(softmax(f), one_hot(y)) + lambda * KL(g_y || softmax(f/tau1))
    and its exact gradient w.r.t. every parameter.

    ``global_soft`` is the (C, C) matrix of global soft labels; row y teaches
    the samples whose ground truth is y. Pass None (or lambda 0) for plain
    supervised training.
    """
    batch = len(y)
    out, pre, acts = _forward_cache(model, x)
    rows = np.arange(batch)
    p = softmax_tau(out, 1.0)
    loss = float(-np.log(np.maximum(p[rows, y], LOG_EPS)).mean())
    dlogits = p.copy()
    dlogits[rows, y] -= 1.0
    dlogits /= batch
    if lambda_kd != 0.0 and global_soft is not None:
        g = global_soft[y]
        s = softmax_tau(out, tau1)
        ref_terms = np.where(g > 0.0, g * np.log(np.maximum(g, LOG_EPS)), 0.0)
        kl = (ref_terms - g * np.log(np.maximum(s, LOG_EPS))).sum(axis=1)
        loss += lambda_kd * float(kl.mean())
        dlogits += (lambda_kd / (tau1 * batch)) * (s - g)
    gw, gb = _backward(model, pre, acts, dlogits)
    return loss, gw, gb


def _sgd_epochs(
    model: LocalModelParams,
    shard: Dataset,
    global_soft: np.ndarray | None,
    tau1: float,
    lambda_kd: float,
    epochs: int,
    batch: int,
    lr: float,
    seed: int,
):
    if len(shard) == 0:
        raise InvalidInputError("cannot train on an empty shard")
    if epochs < 1:
        raise InvalidInputError(f"need at least 1 epoch, got {epochs}")
    if batch < 1:
        raise InvalidInputError(f"batch size must be >= 1, got {batch}")
    if lr < 0:
        raise InvalidInputError(f"learning rate must be nonnegative, got {lr}")
    model = model.copy()
    rng = np.random.default_rng(child_seed(seed, "batching"))
    last_epoch_loss = float("nan")
    for _ in range(epochs):
        perm = rng.permutation(len(shard))
        losses = []
        for start in range(0, len(shard), batch):
            sel = perm[start : start + batch]
            loss, gw, gb = distill_loss_and_grad(
                model, shard.features[sel], shard.labels[sel], global_soft, tau1, lambda_kd
            )
            losses.append(loss)
            if lr > 0:
                norm = np.sqrt(sum(float((g * g).sum()) for g in gw + gb))
                if norm > MAX_GRAD_NORM:
                    scale = MAX_GRAD_NORM / norm
                    gw = [g * scale for g in gw]
                    gb = [g * scale for g in gb]
                model.weights = [sgd_step(w, g, lr) for w, g in zip(model.weights, gw)]
                model.biases = [sgd_step(b, g, lr) for b, g in zip(model.biases, gb)]
        last_epoch_loss = float(np.mean(losses))
    return model, last_epoch_loss


def local_train(
    model: LocalModelParams,
    shard: Dataset,
    epochs: int,
    batch: int,
    lr: float,
    seed: int,
):
    """Mini-batch SGD on cross-entropy against one-hot labels.

    Returns (updated params, mean training loss over the final epoch).
    """
    return _sgd_epochs(model, shard, None, 1.0, 0.0, epochs, batch, lr, seed)


def local_distill(
    model: LocalModelParams,
    shard: Dataset,
    global_soft: np.ndarray,
    tau1: float,
    lambda_kd: float,
    epochs: int,
    batch: int,
    lr: float,
    seed: int,
):
    """Mini-batch SGD on the combined supervised + distillation objective.

    Same batching discipline as :func:`local_train`: with lambda_kd = 0 the
    trajectory is identical under the same seed.
    """
    global_soft = np.asarray(global_soft, dtype=np.float64)
    if global_soft.shape != (shard.n_classes, shard.n_classes):
        raise InvalidInputError(
            f"global knowledge must be ({shard.n_classes}, {shard.n_classes}), got {global_soft.shape}"
        )
    present = np.unique(shard.labels)
    bad = present[~np.all(np.isfinite(global_soft[present]), axis=1)]
    if len(bad):
        raise InvalidInputError(f"global knowledge missing for class {int(bad[0])} present in shard")
    check_simplex(global_soft[present], what="global knowledge")
    return _sgd_epochs(model, shard, global_soft, tau1, lambda_kd, epochs, batch, lr, seed)


def class_knowledge(model: LocalModelParams, shard: Dataset, tau1: float) -> ClassKnowledge:
    """Average tempered soft label per class over the client's own samples.

    Classes without samples are marked absent (NaN row, count 0) and are never
    part of the transmitted payload.
    """
    c = shard.n_classes
    soft = softmax_tau(logits(model, shard.features), tau1)
    labels_mat = np.full((c, c), np.nan)
    counts = np.zeros(c, dtype=np.int64)
    for cls in range(c):
        mask = shard.labels == cls
        cnt = int(mask.sum())
        counts[cls] = cnt
        if cnt:
            labels_mat[cls] = soft[mask].mean(axis=0)
    check_simplex(labels_mat[counts > 0], what="per-class local knowledge")
    return ClassKnowledge(labels_mat, counts)


def evaluate(model: LocalModelParams, test: Dataset) -> float:
    """Top-1 accuracy; argmax ties break toward the lowest class index."""
    if len(test) == 0:
        raise InvalidInputError("cannot evaluate on an empty dataset")
    preds = np.argmax(logits(model, test.features), axis=1)
    return float((preds == test.labels).mean())
