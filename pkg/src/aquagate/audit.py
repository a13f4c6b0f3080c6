"""Dataset bias quantification over embedding space.

Entropy of a k-means occupancy histogram measures how concentrated a
dataset is across environmental conditions; inverse-frequency weights
rebalance it; per-dataset prompt-similarity means expose alignment bias.
"""

from __future__ import annotations

from collections.abc import Mapping, Sequence
from dataclasses import dataclass

import numpy as np

from .embeddings import CONDITIONS, Embedding, SimilarityProfile
from .errors import (
    DimMismatchError,
    EmptyAssignmentError,
    EmptyInputError,
    LengthMismatchError,
    MissingProfileError,
    TooFewSamplesError,
)
from .images import DatasetManifest

DEFAULT_CLUSTERS = 8


@dataclass(frozen=True)
class ClusterModel:
    k: int
    centroids: np.ndarray
    seed: int
    iterations_run: int
    sse_history: tuple[float, ...] = ()

    def __post_init__(self):
        arr = np.asarray(self.centroids, dtype=np.float64)
        if arr.shape[0] != self.k or not np.all(np.isfinite(arr)):
            raise ValueError("centroids must be a finite k x D array")
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "centroids", arr)


@dataclass(frozen=True)
class Assignment:
    labels: np.ndarray
    k: int

    def __post_init__(self):
        arr = np.asarray(self.labels, dtype=np.int64)
        if arr.ndim != 1:
            raise ValueError("labels must be 1-D")
        if arr.size and (arr.min() < 0 or arr.max() >= self.k):
            raise ValueError("labels must lie in [0, k)")
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "labels", arr)

    def counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.k)


@dataclass(frozen=True)
class Weights:
    w: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.w, dtype=np.float64)
        if arr.size == 0 or arr.min() <= 0:
            raise ValueError("weights must be non-empty and positive")
        if abs(float(arr.mean()) - 1.0) > 1e-12:
            raise ValueError(f"weights mean {arr.mean()} not 1 within 1e-12")
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "w", arr)


@dataclass(frozen=True)
class BiasReport:
    entropy_nats: float
    normalized_entropy: float
    cluster_counts: tuple[int, ...]
    prompt_means: dict[str, tuple[float, ...]]
    weights: Weights


def _stack(embeddings: Sequence[Embedding]) -> np.ndarray:
    dims = {e.dim for e in embeddings}
    if len(dims) > 1:
        raise DimMismatchError(f"mixed dimensions {sorted(dims)}")
    return np.stack([e.values for e in embeddings])


def _sq_distances(x: np.ndarray, centers: np.ndarray) -> np.ndarray:
    diff = x[:, None, :] - centers[None, :, :]
    return np.einsum("nkd,nkd->nk", diff, diff)


def _kmeans_pp_init(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = x.shape[0]
    centers = np.empty((k, x.shape[1]))
    centers[0] = x[rng.integers(n)]
    d2 = ((x - centers[0]) ** 2).sum(axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total > 0:
            idx = rng.choice(n, p=d2 / total)
        else:
            idx = rng.integers(n)
        centers[j] = x[idx]
        d2 = np.minimum(d2, ((x - centers[j]) ** 2).sum(axis=1))
    return centers


def kmeans(
    embeddings: Sequence[Embedding],
    k: int,
    seed: int = 0,
    max_iter: int = 100,
    tol: float = 1e-6,
) -> tuple[ClusterModel, Assignment]:
    """Seeded k-means++ plus Lloyd iterations on Euclidean distance.

    Stops when the largest centroid shift drops below tol or after
    max_iter rounds; empty clusters are re-seeded to the farthest point.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if len(embeddings) < k:
        raise TooFewSamplesError(f"{len(embeddings)} samples < k={k}")
    x = _stack(embeddings)
    rng = np.random.Generator(np.random.PCG64(seed))
    centers = _kmeans_pp_init(x, k, rng)

    labels = np.zeros(x.shape[0], dtype=np.int64)
    sse_history: list[float] = []
    iterations = 0
    for iterations in range(1, max_iter + 1):
        d2 = _sq_distances(x, centers)
        labels = d2.argmin(axis=1)
        sse_history.append(float(d2[np.arange(x.shape[0]), labels].sum()))

        new_centers = centers.copy()
        for j in range(k):
            members = labels == j
            if members.any():
                new_centers[j] = x[members].mean(axis=0)
        empty = [j for j in range(k) if not (labels == j).any()]
        if empty:
            dist_to_own = d2[np.arange(x.shape[0]), labels]
            order = np.argsort(-dist_to_own, kind="stable")
            for rank, j in enumerate(empty):
                new_centers[j] = x[order[rank]]
        shift = float(np.sqrt(((new_centers - centers) ** 2).sum(axis=1)).max())
        centers = new_centers
        if shift < tol:
            break
    d2 = _sq_distances(x, centers)
    labels = d2.argmin(axis=1)
    model = ClusterModel(
        k=k,
        centroids=centers,
        seed=seed,
        iterations_run=iterations,
        sse_history=tuple(sse_history),
    )
    return model, Assignment(labels=labels, k=k)


def dataset_entropy(assignment: Assignment, k: int | None = None) -> float:
    """Shannon entropy (nats) of the cluster occupancy histogram."""
    if assignment.labels.size == 0:
        raise EmptyAssignmentError("no samples assigned")
    counts = np.bincount(assignment.labels, minlength=k or assignment.k)
    p = counts[counts > 0] / assignment.labels.size
    return float(-(p * np.log(p)).sum())


def normalized_entropy(assignment: Assignment) -> float:
    """Entropy divided by ln(occupied clusters); 0 when only one is occupied."""
    h = dataset_entropy(assignment)
    k_occ = int((assignment.counts() > 0).sum())
    if k_occ <= 1:
        return 0.0
    return min(1.0, h / float(np.log(k_occ)))


def reweight(assignment: Assignment) -> Weights:
    """Inverse cluster-frequency weights: w_i = N / (k_occ * n_cluster(i))."""
    if assignment.labels.size == 0:
        raise EmptyAssignmentError("no samples assigned")
    counts = assignment.counts()
    k_occ = int((counts > 0).sum())
    n = assignment.labels.size
    w = n / (k_occ * counts[assignment.labels].astype(np.float64))
    return Weights(w)


def weighted_aggregate(values: Sequence[float], weights: Weights) -> float:
    """Weighted mean: sum(w*v) / sum(w)."""
    vals = np.asarray(values, dtype=np.float64)
    if vals.size == 0:
        raise EmptyInputError("no values to aggregate")
    if vals.size != weights.w.size:
        raise LengthMismatchError(f"{vals.size} values vs {weights.w.size} weights")
    return float((weights.w * vals).sum() / weights.w.sum())


def prompt_bias_table(
    profiles: Mapping[str, SimilarityProfile], manifest: DatasetManifest
) -> dict[str, tuple[float, ...]]:
    """Per-dataset-label mean similarity to each of the five conditions."""
    by_label: dict[str, list[SimilarityProfile]] = {}
    for entry in manifest.entries:
        if entry.id not in profiles:
            raise MissingProfileError(f"no similarity profile for id {entry.id!r}")
        by_label.setdefault(entry.dataset_label, []).append(profiles[entry.id])
    return {
        label: tuple(
            float(np.mean([p.scores[i] for p in rows])) for i in range(len(CONDITIONS))
        )
        for label, rows in by_label.items()
    }


def render_prompt_table(prompt_means: Mapping[str, tuple[float, ...]]) -> str:
    """Fixed-width text table, one dataset row, five condition columns, 3 decimals."""
    header_cells = ["Dataset"] + [c.title() for c in CONDITIONS]
    widths = [max(len(header_cells[0]), *(len(l) for l in prompt_means))if prompt_means else len(header_cells[0])]
    widths += [max(len(c), 6) for c in header_cells[1:]]
    lines = ["  ".join(c.ljust(w) for c, w in zip(header_cells, widths))]
    for label in sorted(prompt_means):
        cells = [label.ljust(widths[0])]
        cells += [
            f"{v:.3f}".ljust(w) for v, w in zip(prompt_means[label], widths[1:])
        ]
        lines.append("  ".join(cells).rstrip())
    lines[0] = lines[0].rstrip()
    return "\n".join(lines) + "\n"


def build_bias_report(
    embeddings_by_id: Mapping[str, Embedding],
    profiles: Mapping[str, SimilarityProfile],
    manifest: DatasetManifest,
    clusters: int = DEFAULT_CLUSTERS,
    seed: int = 0,
) -> tuple[BiasReport, ClusterModel, Assignment]:
    """Cluster manifest embeddings and assemble the full bias report."""
    ordered = [embeddings_by_id[e.id] for e in manifest.entries]
    model, assignment = kmeans(ordered, clusters, seed=seed)
    report = BiasReport(
        entropy_nats=dataset_entropy(assignment),
        normalized_entropy=normalized_entropy(assignment),
        cluster_counts=tuple(int(c) for c in assignment.counts()),
        prompt_means=prompt_bias_table(profiles, manifest),
        weights=reweight(assignment),
    )
    return report, model, assignment
