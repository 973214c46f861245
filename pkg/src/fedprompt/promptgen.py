"""Prompt generator: multi-head self-attention over class text embeddings
(with an MLP variant for ablation), the global-knowledge forward pass through
the frozen image encoder, the generator loss, and its exact hand-derived
reverse-mode gradient.

Shapes follow the row convention: E is (C, d) with one class embedding per
row, each head projects to d/H columns, heads are concatenated and merged by
a d x d output matrix.

Backward chain, outermost to innermost (dZ denotes dLoss/dZ):

  loss rows      dZ[c] = w_ce * (G[c] - onehot(c)) + w_kd * (G[c] - A[c])
  temperature    dCos = dZ / tau2
  cosine         dM[c] = (dU[c] - (dU[c] . u_hat[c]) u_hat[c]) / |m_c|,
                 with dU = dCos @ E_hat (text side frozen, no gradient)
  frozen linear  dH = dM @ P            (no gradient to P)
  attention      standard scaled-dot-product backward per head, softmax
                 Jacobian applied row-wise
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .aggregation import AggregatedKnowledge
from .encoder import EmbeddingMatrix, FrozenImageEncoder, check_nonzero_prompts
from .errors import DivergenceError, InvalidInputError, ShapeError
from .numerics import LOG_EPS, check_simplex, sgd_step, softmax_tau
from .seeding import child_seed

GENERATOR_KINDS = ("attention", "mlp")


@dataclass
class PromptGenParams:
    """Trainable generator weights; exactly one of the two layouts is populated.

    attention: per head i, w_q[i]/w_k[i]/w_v[i] of shape (d, d/H), plus the
    head-merge w_h of shape (d, d). mlp: two dense layers d -> d_hid -> d with
    ReLU in between.
    """

    kind: str
    w_q: list[np.ndarray] = field(default_factory=list)
    w_k: list[np.ndarray] = field(default_factory=list)
    w_v: list[np.ndarray] = field(default_factory=list)
    w_h: np.ndarray | None = None
    w1: np.ndarray | None = None
    b1: np.ndarray | None = None
    w2: np.ndarray | None = None
    b2: np.ndarray | None = None

    def blocks(self) -> list[tuple[str, np.ndarray]]:
        """Named parameter blocks, in a fixed flattening order."""
        if self.kind == "attention":
            out = []
            for i in range(len(self.w_q)):
                out += [(f"w_q[{i}]", self.w_q[i]), (f"w_k[{i}]", self.w_k[i]), (f"w_v[{i}]", self.w_v[i])]
            return out + [("w_h", self.w_h)]
        return [("w1", self.w1), ("b1", self.b1), ("w2", self.w2), ("b2", self.b2)]

    def to_vec(self) -> np.ndarray:
        return np.concatenate([a.ravel() for _, a in self.blocks()])

    def with_vec(self, vec: np.ndarray) -> "PromptGenParams":
        out = self.copy()
        pos = 0
        arrays = []
        for _, a in out.blocks():
            arrays.append(vec[pos : pos + a.size].reshape(a.shape).copy())
            pos += a.size
        if out.kind == "attention":
            heads = len(out.w_q)
            out.w_q = arrays[0 : 3 * heads : 3]
            out.w_k = arrays[1 : 3 * heads : 3]
            out.w_v = arrays[2 : 3 * heads : 3]
            out.w_h = arrays[-1]
        else:
            out.w1, out.b1, out.w2, out.b2 = arrays
        return out

    def copy(self) -> "PromptGenParams":
        return PromptGenParams(
            self.kind,
            [a.copy() for a in self.w_q],
            [a.copy() for a in self.w_k],
            [a.copy() for a in self.w_v],
            None if self.w_h is None else self.w_h.copy(),
            None if self.w1 is None else self.w1.copy(),
            None if self.b1 is None else self.b1.copy(),
            None if self.w2 is None else self.w2.copy(),
            None if self.b2 is None else self.b2.copy(),
        )


@dataclass
class GlobalKnowledge:
    """Distribution over all classes assigned to each class-specific prompt."""

    soft_labels: np.ndarray   # (C, C), rows on the simplex
    round_index: int = field(default=-1)

    @property
    def n_classes(self) -> int:
        return len(self.soft_labels)


def init_prompt_generator(dim: int, heads: int, kind: str, seed: int, hidden: int | None = None) -> PromptGenParams:
    """Seeded uniform init in +-1/sqrt(d). For the mlp kind, hidden defaults to d."""
    if kind not in GENERATOR_KINDS:
        raise InvalidInputError(f"generator kind must be one of {GENERATOR_KINDS}, got {kind!r}")
    rng = np.random.default_rng(child_seed(seed, "prompt-gen-init"))
    bound = 1.0 / np.sqrt(dim)
    if kind == "attention":
        if dim % heads != 0:
            raise InvalidInputError(f"head count {heads} must divide embedding dim {dim}")
        p = dim // heads
        w_q = [rng.uniform(-bound, bound, size=(dim, p)) for _ in range(heads)]
        w_k = [rng.uniform(-bound, bound, size=(dim, p)) for _ in range(heads)]
        w_v = [rng.uniform(-bound, bound, size=(dim, p)) for _ in range(heads)]
        w_h = rng.uniform(-bound, bound, size=(dim, dim))
        return PromptGenParams("attention", w_q, w_k, w_v, w_h)
    hid = hidden if hidden is not None else dim
    return PromptGenParams(
        "mlp",
        w1=rng.uniform(-bound, bound, size=(dim, hid)),
        b1=rng.uniform(-bound, bound, size=hid),
        w2=rng.uniform(-bound, bound, size=(hid, dim)),
        b2=rng.uniform(-bound, bound, size=dim),
    )


def _attention_forward(omega: PromptGenParams, e_rows: np.ndarray):
    heads = len(omega.w_q)
    p = omega.w_q[0].shape[1]
    scale = 1.0 / np.sqrt(p)
    cache = {"q": [], "k": [], "v": [], "attn": []}
    outs = []
    for i in range(heads):
        q = e_rows @ omega.w_q[i]
        k = e_rows @ omega.w_k[i]
        v = e_rows @ omega.w_v[i]
        attn = softmax_tau(q @ k.T * scale, 1.0)
        outs.append(attn @ v)
        cache["q"].append(q)
        cache["k"].append(k)
        cache["v"].append(v)
        cache["attn"].append(attn)
    concat = np.concatenate(outs, axis=1)
    cache["concat"] = concat
    return concat @ omega.w_h, cache


def _mlp_forward(omega: PromptGenParams, e_rows: np.ndarray):
    z1 = e_rows @ omega.w1 + omega.b1
    r = np.maximum(z1, 0.0)
    cache = {"z1": z1, "r": r}
    return r @ omega.w2 + omega.b2, cache


def _gen_forward_cached(omega: PromptGenParams, embeddings: EmbeddingMatrix):
    e_rows = embeddings.rows
    if omega.kind == "attention":
        if omega.w_q[0].shape[0] != embeddings.dim:
            raise ShapeError(
                f"generator built for dim {omega.w_q[0].shape[0]}, embeddings have dim {embeddings.dim}"
            )
        return _attention_forward(omega, e_rows)
    if omega.w1.shape[0] != embeddings.dim:
        raise ShapeError(f"generator built for dim {omega.w1.shape[0]}, embeddings have dim {embeddings.dim}")
    return _mlp_forward(omega, e_rows)


def gen_forward(omega: PromptGenParams, embeddings: EmbeddingMatrix) -> np.ndarray:
    """Generate the (C, d) matrix of class-specific prompt vectors."""
    h, _ = _gen_forward_cached(omega, embeddings)
    return h


def _global_forward(h_matrix: np.ndarray, embeddings: EmbeddingMatrix, enc: FrozenImageEncoder, tau2: float):
    m = enc.encode(h_matrix)
    check_nonzero_prompts(m)
    m_norms = np.linalg.norm(m, axis=1, keepdims=True)
    m_hat = m / m_norms
    e_hat = embeddings.rows / np.linalg.norm(embeddings.rows, axis=1, keepdims=True)
    cos = m_hat @ e_hat.T
    g = softmax_tau(cos, tau2)
    cache = {"m_norms": m_norms, "m_hat": m_hat, "e_hat": e_hat, "cos": cos, "g": g}
    return g, cache


def global_knowledge(
    h_matrix: np.ndarray,
    embeddings: EmbeddingMatrix,
    enc: FrozenImageEncoder,
    tau2: float,
) -> GlobalKnowledge:
    """Score each encoded class prompt against every class text embedding.

    Row c is softmax_j(cos(image_encode(h_c), e_j) / tau2): the full
    distribution the frozen encoder assigns to class c's prompt.
    """
    h_matrix = np.asarray(h_matrix, dtype=np.float64)
    if h_matrix.shape != (embeddings.n_classes, embeddings.dim):
        raise ShapeError(f"prompt matrix must be ({embeddings.n_classes}, {embeddings.dim}), got {h_matrix.shape}")
    g, _ = _global_forward(h_matrix, embeddings, enc, tau2)
    return GlobalKnowledge(check_simplex(g, what="global knowledge"))


def gen_loss(
    knowledge: GlobalKnowledge,
    agg: AggregatedKnowledge,
    loss_weights: tuple[float, float] = (1.0, 1.0),
) -> float:
    """sum_c [ w_ce * CE(g_c, onehot(c)) + w_kd * KL(a_c || g_c) ]."""
    g = knowledge.soft_labels
    a = agg.soft_labels
    if g.shape != a.shape:
        raise ShapeError(f"shape mismatch: global {g.shape} vs aggregated {a.shape}")
    w_ce, w_kd = loss_weights
    c = len(g)
    log_g = np.log(np.maximum(g, LOG_EPS))
    ce = -log_g[np.arange(c), np.arange(c)].sum()
    ref_terms = np.where(a > 0.0, a * np.log(np.maximum(a, LOG_EPS)), 0.0)
    kl = (ref_terms - a * log_g).sum()
    return float(w_ce * ce + w_kd * kl)


def _forward_pass(
    omega: PromptGenParams,
    embeddings: EmbeddingMatrix,
    enc: FrozenImageEncoder,
    agg: AggregatedKnowledge,
    tau2: float,
    loss_weights: tuple[float, float],
):
    h_matrix, fcache = _gen_forward_cached(omega, embeddings)
    g, gcache = _global_forward(h_matrix, embeddings, enc, tau2)
    loss = gen_loss(GlobalKnowledge(g), agg, loss_weights)
    return loss, fcache, g, gcache


def _backward_pass(
    omega: PromptGenParams,
    embeddings: EmbeddingMatrix,
    enc: FrozenImageEncoder,
    agg: AggregatedKnowledge,
    tau2: float,
    loss_weights: tuple[float, float],
    fcache,
    g,
    gcache,
) -> PromptGenParams:
    e_rows = embeddings.rows
    c = embeddings.n_classes
    w_ce, w_kd = loss_weights

    # softmax rows: d/dscore of CE-against-onehot and KL-with-fixed-reference
    # share the (g - target) form
    d_score = w_ce * (g - np.eye(c)) + w_kd * (g - agg.soft_labels)
    d_cos = d_score / tau2
    # cosine wrt the image-side vectors only; text embeddings are frozen
    d_mhat = d_cos @ gcache["e_hat"]
    m_hat = gcache["m_hat"]
    d_m = (d_mhat - (d_mhat * m_hat).sum(axis=1, keepdims=True) * m_hat) / gcache["m_norms"]
    d_h = d_m @ enc.projection  # frozen: no gradient to the projection itself

    grad = omega.copy()
    if omega.kind == "attention":
        heads = len(omega.w_q)
        p = omega.w_q[0].shape[1]
        scale = 1.0 / np.sqrt(p)
        d_concat = d_h @ omega.w_h.T
        grad.w_h = fcache["concat"].T @ d_h
        for i in range(heads):
            d_out = d_concat[:, i * p : (i + 1) * p]
            attn, q, k, v = fcache["attn"][i], fcache["q"][i], fcache["k"][i], fcache["v"][i]
            d_attn = d_out @ v.T
            d_v = attn.T @ d_out
            d_s = attn * (d_attn - (d_attn * attn).sum(axis=1, keepdims=True))
            d_q = d_s @ k * scale
            d_k = d_s.T @ q * scale
            grad.w_q[i] = e_rows.T @ d_q
            grad.w_k[i] = e_rows.T @ d_k
            grad.w_v[i] = e_rows.T @ d_v
    else:
        grad.w2 = fcache["r"].T @ d_h
        grad.b2 = d_h.sum(axis=0)
        d_r = (d_h @ omega.w2.T) * (fcache["z1"] > 0.0)
        grad.w1 = e_rows.T @ d_r
        grad.b1 = d_r.sum(axis=0)
    return grad


def _loss_and_grad(
    omega: PromptGenParams,
    embeddings: EmbeddingMatrix,
    enc: FrozenImageEncoder,
    agg: AggregatedKnowledge,
    tau2: float,
    loss_weights: tuple[float, float],
):
    loss, fcache, g, gcache = _forward_pass(omega, embeddings, enc, agg, tau2, loss_weights)
    grad = _backward_pass(omega, embeddings, enc, agg, tau2, loss_weights, fcache, g, gcache)
    return loss, grad


def gen_backward(
    omega: PromptGenParams,
    embeddings: EmbeddingMatrix,
    enc: FrozenImageEncoder,
    agg: AggregatedKnowledge,
    tau2: float,
    loss_weights: tuple[float, float] = (1.0, 1.0),
) -> PromptGenParams:
    """Exact gradient of gen_loss(global_knowledge(gen_forward(omega))) w.r.t. omega."""
    _, grad = _loss_and_grad(omega, embeddings, enc, agg, tau2, loss_weights)
    return grad


def train_generator(
    omega: PromptGenParams,
    embeddings: EmbeddingMatrix,
    enc: FrozenImageEncoder,
    agg: AggregatedKnowledge,
    steps: int,
    lr: float,
    tau2: float,
    loss_weights: tuple[float, float] = (1.0, 1.0),
    seed: int = 0,
):
    """Full-batch gradient descent over all classes for ``steps`` iterations.

    Returns (updated omega, per-step loss sequence); loss_curve[t] is the loss
    at the start of step t. ``seed`` is accepted for interface stability; the
    full-batch path has no stochasticity. The frozen state (text embeddings
    and image projection) is fingerprinted before and after as a guard.
    """
    if steps < 1:
        raise InvalidInputError(f"need at least 1 step, got {steps}")
    if lr < 0:
        raise InvalidInputError(f"learning rate must be nonnegative, got {lr}")
    frozen_before = (embeddings.fingerprint(), enc.fingerprint())
    curve = []
    for step in range(steps):
        loss, fcache, g, gcache = _forward_pass(omega, embeddings, enc, agg, tau2, loss_weights)
        if not np.isfinite(loss):
            raise DivergenceError(step, loss)
        curve.append(loss)
        if lr > 0:
            grad = _backward_pass(omega, embeddings, enc, agg, tau2, loss_weights, fcache, g, gcache)
            vec = sgd_step(omega.to_vec(), grad.to_vec(), lr)
            omega = omega.with_vec(vec)
    if (embeddings.fingerprint(), enc.fingerprint()) != frozen_before:
        raise InvalidInputError("frozen encoder state changed during generator training")
    return omega, curve
