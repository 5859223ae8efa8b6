"""Lloyd's K-means over embedding rows, seeded with k-means++.

The fitted model keeps, for every record, the index of and distance to its
nearest centroid; the objective is the sum of squared distances. Ties in
the nearest-centroid choice always go to the lowest cluster index, and an
empty cluster is repaired by reseeding its centroid onto the point that is
currently farthest from its own centroid, so the final model never has an
empty cluster.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from ._chunks import run_chunked
from .embedding import EmbeddingMatrix
from .errors import ConfigError, DataError

__all__ = ["ClusterModel", "kmeans_fit", "compute_centroids"]


@dataclass(frozen=True)
class ClusterModel:
    centroids: np.ndarray  # (k, dim) float32
    assignment: np.ndarray  # (n,) uint32
    distance: np.ndarray  # (n,) float32
    objective: float
    iterations_run: int
    seed: int
    objective_trajectory: tuple[float, ...] = field(default=(), repr=False)

    @property
    def k(self) -> int:
        return self.centroids.shape[0]

    def cluster_sizes(self) -> list[int]:
        return np.bincount(self.assignment, minlength=self.k).tolist()

    def to_report(self) -> dict:
        return {
            "k": self.k,
            "dim": int(self.centroids.shape[1]),
            "seed": self.seed,
            "iterations_run": self.iterations_run,
            "objective": self.objective,
            "cluster_sizes": self.cluster_sizes(),
        }


def _as_array(embeddings) -> np.ndarray:
    if isinstance(embeddings, EmbeddingMatrix):
        return embeddings.data
    return np.asarray(embeddings, dtype=np.float32)


def _sq_dists(rows: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    """Squared Euclidean distances, float64, via the dot-product expansion."""
    prod = rows @ centroids.T
    row_sq = np.einsum("ij,ij->i", rows, rows)
    cen_sq = np.einsum("ij,ij->i", centroids, centroids)
    d2 = row_sq[:, None] + cen_sq[None, :] - 2.0 * prod
    np.maximum(d2, 0.0, out=d2)
    return d2


def _assign(data64: np.ndarray, centroids64: np.ndarray, threads: int = 1):
    """Nearest centroid per row (ties -> lowest index) and the distance to it."""
    n = data64.shape[0]
    assignment = np.empty(n, dtype=np.int64)
    distance = np.empty(n, dtype=np.float64)

    def work(start: int, stop: int) -> None:
        d2 = _sq_dists(data64[start:stop], centroids64)
        idx = np.argmin(d2, axis=1)  # argmin takes the first minimum: lowest k
        assignment[start:stop] = idx
        distance[start:stop] = np.sqrt(d2[np.arange(stop - start), idx])

    run_chunked(work, n, threads)
    return assignment, distance


def _kmeanspp_init(data64: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++ seeding: first centroid uniform, the rest D^2-weighted."""
    n = data64.shape[0]
    chosen = np.empty(k, dtype=np.int64)
    chosen[0] = rng.integers(n)
    min_d2 = _sq_dists(data64, data64[chosen[0]][None, :])[:, 0]
    for j in range(1, k):
        total = float(min_d2.sum())
        if total <= 0.0:
            # All remaining mass at distance zero (duplicate points): take the
            # first index not yet chosen to stay deterministic.
            taken = set(chosen[:j].tolist())
            chosen[j] = next(i for i in range(n) if i not in taken)
        else:
            r = rng.random() * total
            chosen[j] = int(np.searchsorted(np.cumsum(min_d2), r, side="right").clip(0, n - 1))
        d2_new = _sq_dists(data64, data64[chosen[j]][None, :])[:, 0]
        np.minimum(min_d2, d2_new, out=min_d2)
    return data64[chosen].copy()


def _repair_empty(data64, centroids64, assignment, distance, k):
    """Reseed each empty cluster onto the farthest point, pinning that point."""
    sizes = np.bincount(assignment, minlength=k)
    pinned: list[int] = []
    for empty_k in np.flatnonzero(sizes == 0):
        order = np.argsort(-distance, kind="stable")
        candidate = next(int(i) for i in order if int(i) not in pinned)
        centroids64[empty_k] = data64[candidate]
        assignment[candidate] = empty_k
        distance[candidate] = 0.0
        pinned.append(candidate)
    return bool(pinned)


def kmeans_fit(
    embeddings,
    k: int,
    seed: int,
    max_iter: int = 100,
    tol: float = 1e-6,
    threads: int = 1,
) -> ClusterModel:
    """Partition rows into k clusters, minimizing the sum of squared distances.

    Iterates assignment and mean-update from a k-means++ start until the
    relative objective decrease falls below tol or max_iter is reached.
    Deterministic for a fixed (embeddings, k, seed) regardless of threads.
    """
    data = _as_array(embeddings)
    n = data.shape[0]
    if k < 1:
        raise ConfigError(f"k must be >= 1, got {k}")
    if k > n:
        raise ConfigError(f"k={k} exceeds the number of records n={n}")
    if max_iter < 1:
        raise ConfigError(f"max_iter must be >= 1, got {max_iter}")
    if tol < 0:
        raise ConfigError(f"tol must be non-negative, got {tol}")

    data64 = data.astype(np.float64)
    rng = np.random.default_rng(seed)
    centroids64 = _kmeanspp_init(data64, k, rng)

    trajectory: list[float] = []
    prev_obj: float | None = None
    assignment = np.zeros(n, dtype=np.int64)
    distance = np.zeros(n, dtype=np.float64)
    iterations = 0

    for _ in range(max_iter):
        iterations += 1
        assignment, distance = _assign(data64, centroids64, threads)
        _repair_empty(data64, centroids64, assignment, distance, k)
        obj = float(np.dot(distance, distance))
        trajectory.append(obj)
        if prev_obj is not None:
            rel_decrease = (prev_obj - obj) / prev_obj if prev_obj > 0 else 0.0
            if rel_decrease < tol:
                break
        prev_obj = obj
        centroids64 = compute_centroids(data64, assignment).astype(np.float64)

    return ClusterModel(
        centroids=centroids64.astype(np.float32),
        assignment=assignment.astype(np.uint32),
        distance=distance.astype(np.float32),
        objective=float(np.dot(distance, distance)),
        iterations_run=iterations,
        seed=int(seed),
        objective_trajectory=tuple(trajectory),
    )


def compute_centroids(embeddings, assignment) -> np.ndarray:
    """Arithmetic mean of the rows assigned to each cluster, as float32.

    Raises if any cluster index in 0..max(assignment) has no members; the
    caller owns empty-cluster repair.
    """
    data = _as_array(embeddings).astype(np.float64)
    labels = np.asarray(assignment, dtype=np.int64)
    if labels.shape[0] != data.shape[0]:
        raise DataError(f"assignment length {labels.shape[0]} != row count {data.shape[0]}")
    k = int(labels.max()) + 1 if labels.size else 0
    counts = np.bincount(labels, minlength=k)
    empty = np.flatnonzero(counts == 0)
    if empty.size:
        raise DataError(f"cluster {int(empty[0])} is empty")
    sums = np.zeros((k, data.shape[1]), dtype=np.float64)
    np.add.at(sums, labels, data)
    return (sums / counts[:, None]).astype(np.float32)


def save_cluster_artifacts(model: ClusterModel, json_path: str, assignment_path: str,
                           centroids_path: str, distances_path: str) -> None:
    """Write the JSON report plus the binary arrays downstream stages read."""
    with open(json_path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(model.to_report(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    model.assignment.astype("<u4").tofile(assignment_path)
    model.centroids.astype("<f4").tofile(centroids_path)
    model.distance.astype("<f4").tofile(distances_path)


def load_cluster_artifacts(json_path: str, assignment_path: str,
                           centroids_path: str, distances_path: str) -> ClusterModel:
    with open(json_path, "r", encoding="utf-8") as fh:
        report = json.load(fh)
    k, dim = int(report["k"]), int(report["dim"])
    assignment = np.fromfile(assignment_path, dtype="<u4")
    centroids = np.fromfile(centroids_path, dtype="<f4").reshape(k, dim)
    distance = np.fromfile(distances_path, dtype="<f4")
    if assignment.shape[0] != distance.shape[0]:
        raise DataError("assignment and distance arrays disagree on record count")
    return ClusterModel(
        centroids=centroids,
        assignment=assignment.astype(np.uint32),
        distance=distance.astype(np.float32),
        objective=float(report["objective"]),
        iterations_run=int(report["iterations_run"]),
        seed=int(report["seed"]),
    )
