"""Scalar/vector numeric kernels shared by every module.

All arithmetic is float64. Probability vectors ("soft labels") live on the
probability simplex; producers call :func:`check_simplex` so an off-simplex
vector surfaces immediately instead of corrupting a downstream loss.
"""

from __future__ import annotations

from collections.abc import Callable

import numpy as np

from .errors import DomainError, InvalidInputError, ShapeError

LOG_EPS = 1e-12        # clamp applied to probabilities before log
SIMPLEX_ATOL = 1e-9    # max deviation of sum(p) from 1


def check_simplex(p: np.ndarray, *, what: str = "probability vector") -> np.ndarray:
    """Validate that ``p`` (rows along the last axis) lies on the simplex."""
    p = np.asarray(p, dtype=np.float64)
    if not np.all(np.isfinite(p)):
        raise InvalidInputError(f"{what}: non-finite entries")
    if np.any(p < 0.0):
        raise InvalidInputError(f"{what}: negative entries")
    dev = np.abs(p.sum(axis=-1) - 1.0)
    if np.any(dev > SIMPLEX_ATOL):
        raise InvalidInputError(f"{what}: sums deviate from 1 by up to {float(np.max(dev)):.3e}")
    return p


def softmax_tau(z: np.ndarray, tau: float) -> np.ndarray:
    """Temperature softmax along the last axis.

    Computes exp(z_i/tau) / sum_j exp(z_j/tau) with max-subtraction, so adding
    a constant to every logit leaves the output unchanged and large logits
    cannot overflow.
    """
    if not np.isfinite(tau) or tau <= 0.0:
        raise DomainError(f"temperature must be a positive finite real, got {tau!r}")
    z = np.asarray(z, dtype=np.float64)
    if not np.all(np.isfinite(z)):
        raise InvalidInputError("logits contain non-finite entries")
    t = z / tau
    t -= t.max(axis=-1, keepdims=True)
    e = np.exp(t)
    out = e / e.sum(axis=-1, keepdims=True)
    return check_simplex(out, what="softmax output")


def _clipped_log(p: np.ndarray) -> np.ndarray:
    return np.log(np.maximum(p, LOG_EPS))


def cross_entropy(p: np.ndarray, target: np.ndarray) -> float:
    """-sum_i target_i * log(p_i), with p clamped to >= 1e-12 before the log."""
    p = np.asarray(p, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if p.shape != target.shape:
        raise ShapeError(f"shape mismatch: p {p.shape} vs target {target.shape}")
    return float(-(target * _clipped_log(p)).sum())


def kl_div(ref: np.ndarray, q: np.ndarray) -> float:
    """sum_i ref_i * log(ref_i / q_i) with the 0*log(0) := 0 convention.

    ``ref`` is the reference (teacher) distribution; ``q`` is clamped to
    >= 1e-12 before the log.
    """
    ref = np.asarray(ref, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if ref.shape != q.shape:
        raise ShapeError(f"shape mismatch: ref {ref.shape} vs q {q.shape}")
    terms = np.where(ref > 0.0, ref * (np.log(np.maximum(ref, LOG_EPS)) - _clipped_log(q)), 0.0)
    return float(terms.sum())


def entropy(p: np.ndarray) -> float:
    """Shannon entropy in nats, with 0*log(0) := 0."""
    p = np.asarray(p, dtype=np.float64)
    terms = np.where(p > 0.0, p * np.log(np.maximum(p, LOG_EPS)), 0.0)
    return float(-terms.sum())


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    """Cosine similarity u.v / (|u||v|). Zero-norm operands are a domain error."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise ShapeError(f"shape mismatch: u {u.shape} vs v {v.shape}")
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    if nu == 0.0 or nv == 0.0:
        raise DomainError("cosine of a zero-norm vector is undefined")
    return float(u @ v) / (nu * nv)


def sgd_step(params: np.ndarray, grads: np.ndarray, lr: float) -> np.ndarray:
    """One plain gradient-descent step: params - lr * grads, elementwise."""
    params = np.asarray(params, dtype=np.float64)
    grads = np.asarray(grads, dtype=np.float64)
    if params.shape != grads.shape:
        raise ShapeError(f"shape mismatch: params {params.shape} vs grads {grads.shape}")
    if not np.isfinite(lr) or lr <= 0.0:
        raise DomainError(f"learning rate must be positive, got {lr!r}")
    return params - lr * grads


def finite_diff_grad(f: Callable[[np.ndarray], float], x: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of a scalar function, one coordinate at a time.

    Test oracle only: O(len(x)) evaluations of ``f``.
    """
    if h <= 0.0:
        raise DomainError(f"step must be positive, got {h!r}")
    x = np.asarray(x, dtype=np.float64)
    grad = np.zeros_like(x)
    for i in range(x.size):
        xp = x.copy()
        xm = x.copy()
        xp.flat[i] += h
        xm.flat[i] -= h
        fp = float(f(xp))
        fm = float(f(xm))
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise InvalidInputError(f"function returned a non-finite value near coordinate {i}")
        grad.flat[i] = (fp - fm) / (2.0 * h)
    return grad


def relative_error(a: np.ndarray, b: np.ndarray) -> float:
    """L2 relative error used by the gradient-check suites."""
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    denom = max(np.linalg.norm(a), np.linalg.norm(b), 1e-12)
    return float(np.linalg.norm(a - b) / denom)
