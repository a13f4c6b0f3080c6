"""Exact (dense) t-SNE for embedding-space visualization.

Gaussian input affinities with per-point bandwidth matched to a target
perplexity by bisection, Student-t output kernel, momentum gradient
descent with early exaggeration, deterministic PCA initialization.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from .embeddings import Embedding
from .errors import PerplexityTooLargeError, TooFewSamplesError

_EXAGGERATION = 12.0
_EXAGGERATION_ITERS = 250
_LEARNING_RATE = 200.0
_MOMENTUM_EARLY = 0.5
_MOMENTUM_LATE = 0.8
_ENTROPY_TOL = 1e-5
_SEARCH_STEPS = 50
_P_MIN = 1e-12
_INIT_STD = 1e-4


@dataclass(frozen=True)
class TsneLayout:
    coords: np.ndarray
    final_kl: float
    kl_after_exaggeration: float
    seed: int
    perplexity: float
    iterations: int

    def __post_init__(self):
        arr = np.asarray(self.coords, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[1] != 2 or not np.all(np.isfinite(arr)):
            raise ValueError("coords must be a finite N x 2 array")
        if self.final_kl < 0:
            raise ValueError("final KL divergence must be >= 0")
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "coords", arr)


def _pairwise_sq_distances(x: np.ndarray) -> np.ndarray:
    sq = np.einsum("nd,nd->n", x, x)
    d2 = sq[:, None] + sq[None, :] - 2.0 * np.einsum("nd,md->nm", x, x)
    np.maximum(d2, 0.0, out=d2)
    np.fill_diagonal(d2, 0.0)
    return d2


def _row_affinities(d_row: np.ndarray, perplexity: float) -> np.ndarray:
    """Bisection on the Gaussian bandwidth until entropy matches ln(perplexity)."""
    target = np.log(perplexity)
    beta, beta_min, beta_max = 1.0, -np.inf, np.inf
    p = np.exp(-d_row)
    for _ in range(_SEARCH_STEPS):
        p = np.exp(-d_row * beta)
        total = p.sum()
        if total <= 0:
            total = np.finfo(float).tiny
        entropy = np.log(total) + beta * (d_row * p).sum() / total
        diff = entropy - target
        if abs(diff) <= _ENTROPY_TOL:
            break
        if diff > 0:
            beta_min = beta
            beta = beta * 2.0 if np.isinf(beta_max) else (beta + beta_max) / 2.0
        else:
            beta_max = beta
            beta = beta / 2.0 if np.isinf(beta_min) else (beta + beta_min) / 2.0
    total = p.sum()
    return p / (total if total > 0 else np.finfo(float).tiny)


def _joint_affinities(d2: np.ndarray, perplexity: float) -> np.ndarray:
    n = d2.shape[0]
    cond = np.zeros((n, n))
    idx = np.arange(n)
    for i in range(n):
        others = idx != i
        cond[i, others] = _row_affinities(d2[i, others], perplexity)
    joint = cond + cond.T
    joint /= joint.sum()
    return np.maximum(joint, _P_MIN)


def _pca_init(x: np.ndarray) -> np.ndarray:
    centered = x - x.mean(axis=0)
    cov = np.einsum("na,nb->ab", centered, centered)
    eigvals, eigvecs = np.linalg.eigh(cov)
    components = eigvecs[:, [-1, -2]]
    # Fix eigenvector sign so layouts are reproducible across runs.
    for j in range(2):
        lead = np.argmax(np.abs(components[:, j]))
        if components[lead, j] < 0:
            components[:, j] = -components[:, j]
    y = centered @ components
    std = y.std(axis=0)
    std[std == 0] = 1.0
    return y / std * _INIT_STD


def _student_t(y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    num = 1.0 / (1.0 + _pairwise_sq_distances(y))
    np.fill_diagonal(num, 0.0)
    q = num / num.sum()
    return np.maximum(q, _P_MIN), num


def _kl(p: np.ndarray, q: np.ndarray) -> float:
    mask = ~np.eye(p.shape[0], dtype=bool)
    return float((p[mask] * np.log(p[mask] / q[mask])).sum())


def tsne(
    embeddings: Sequence[Embedding] | np.ndarray,
    perplexity: float = 30.0,
    seed: int = 0,
    iterations: int = 1000,
) -> TsneLayout:
    """Project embeddings to 2-D; deterministic for fixed inputs and seed.

    Affinities and the PCA initialization are permutation-equivariant up to
    float reduction order; the descent amplifies those last-bit differences,
    so reordering inputs yields an equivalent layout, not a bitwise
    permutation of the same one.
    """
    if isinstance(embeddings, np.ndarray):
        x = np.asarray(embeddings, dtype=np.float64)
    else:
        x = np.stack([e.values for e in embeddings])
    n = x.shape[0]
    if n < 4:
        raise TooFewSamplesError(f"need at least 4 points, got {n}")
    if perplexity >= (n - 1) / 3:
        raise PerplexityTooLargeError(
            f"perplexity {perplexity} must be < (N-1)/3 = {(n - 1) / 3}"
        )
    if iterations < 1:
        raise ValueError("iterations must be >= 1")

    p = _joint_affinities(_pairwise_sq_distances(x), perplexity)
    y = _pca_init(x)
    velocity = np.zeros_like(y)
    exaggeration_end = min(_EXAGGERATION_ITERS, iterations)
    kl_after_exaggeration = np.inf
    for it in range(1, iterations + 1):
        p_eff = p * _EXAGGERATION if it <= exaggeration_end else p
        q, num = _student_t(y)
        w = (p_eff - q) * num
        grad = 4.0 * (w.sum(axis=1)[:, None] * y - w @ y)
        momentum = _MOMENTUM_EARLY if it <= _EXAGGERATION_ITERS else _MOMENTUM_LATE
        velocity = momentum * velocity - _LEARNING_RATE * grad
        y = y + velocity
        y = y - y.mean(axis=0)
        if it == exaggeration_end:
            q_now, _ = _student_t(y)
            kl_after_exaggeration = _kl(p, q_now)
    q_final, _ = _student_t(y)
    return TsneLayout(
        coords=y,
        final_kl=_kl(p, q_final),
        kl_after_exaggeration=float(kl_after_exaggeration),
        seed=seed,
        perplexity=perplexity,
        iterations=iterations,
    )
