"""Seeded k-means over cycle vectors and silhouette-based model selection.

The k-means here is deliberately self-contained: the forecaster's outputs
must be bit-for-bit reproducible for a given seed, empty clusters are
re-seeded by a fixed rule, and each candidate cluster count draws from an
independently derived RNG stream so a parallel grid search returns exactly
the sequential result.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .core import CycleMatrix

__all__ = ["Clustering", "kmeans", "silhouette", "optimum_k"]

_MAX_ITER = 300
_SEED_MASK = (1 << 64) - 1


@dataclass(frozen=True)
class Clustering:
    """Cluster labels for the cycle rows plus the cluster centroids."""

    labels: np.ndarray = field(repr=False)
    centroids: np.ndarray = field(repr=False)
    k: int


def _rng_for(seed: int, k: int) -> np.random.Generator:
    # Stream depends on (seed, k) only, so grid members are independent of
    # evaluation order.
    return np.random.default_rng([seed & _SEED_MASK, k])


def _plusplus_init(rows: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = rows.shape[0]
    centers = np.empty((k, rows.shape[1]))
    centers[0] = rows[rng.integers(n)]
    d2 = ((rows - centers[0]) ** 2).sum(axis=1)
    for i in range(1, k):
        total = d2.sum()
        if total > 0:
            idx = rng.choice(n, p=d2 / total)
        else:
            # all points coincide with a chosen center; any point will do
            idx = rng.integers(n)
        centers[i] = rows[idx]
        d2 = np.minimum(d2, ((rows - centers[i]) ** 2).sum(axis=1))
    return centers


def kmeans(matrix: CycleMatrix, k: int, seed: int = 0, on_iteration=None) -> Clustering:
    """Lloyd's k-means with k-means++ initialization and a fixed seed.

    Identical (matrix, k, seed) always produces identical labels and
    centroids.  Iteration stops at an assignment fixpoint or after 300
    rounds.  An empty cluster is re-seeded with the point farthest from
    its centroid (taken from a donor cluster of size >= 2).  Distance
    ties in assignment keep the point's previous cluster, which makes
    the fixpoint well defined even with duplicate rows.

    Parameters
    ----------
    on_iteration : callable, optional
        Debug hook called as ``on_iteration(labels, centers)`` after each
        assignment round (used to assert WCSS monotonicity in tests).
    """
    rows = matrix.rows
    n = rows.shape[0]
    if k < 1:
        raise ValueError("cluster count must be at least 1")
    if k > n:
        raise ValueError("more clusters than cycle blocks")

    rng = _rng_for(seed, k)
    centers = _plusplus_init(rows, k, rng)
    labels = None
    order = np.arange(n)
    for _ in range(_MAX_ITER):
        d2 = ((rows[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        new_labels = d2.argmin(axis=1)
        if labels is not None:
            keep = d2[order, labels] == d2[order, new_labels]
            new_labels[keep] = labels[keep]
        counts = np.bincount(new_labels, minlength=k)
        for empty in np.flatnonzero(counts == 0):
            donors = np.flatnonzero(counts[new_labels] >= 2)
            farthest = donors[np.argmax(d2[donors, empty])]
            counts[new_labels[farthest]] -= 1
            counts[empty] += 1
            new_labels[farthest] = empty
        converged = labels is not None and np.array_equal(new_labels, labels)
        labels = new_labels
        centers = np.empty_like(centers)
        for c in range(k):
            centers[c] = rows[labels == c].mean(axis=0)
        if on_iteration is not None:
            on_iteration(labels.copy(), centers.copy())
        if converged:
            break
    return Clustering(labels=labels, centroids=centers, k=k)


def silhouette(matrix: CycleMatrix, clustering: Clustering) -> float:
    """Mean silhouette score of a clustering, in [-1, 1].

    For each row, s = (b - a) / max(a, b) where a is the mean Euclidean
    distance to the other rows of its own cluster and b the smallest mean
    distance to the rows of any other cluster.  Rows in singleton clusters
    score 0, as does the degenerate a = b = 0 case.
    """
    rows = matrix.rows
    labels = clustering.labels
    present = np.unique(labels)
    if present.size < 2:
        raise ValueError("silhouette undefined for k=1")
    n = rows.shape[0]
    diff = rows[:, None, :] - rows[None, :, :]
    dist = np.sqrt((diff**2).sum(axis=2))

    sums = np.stack([dist[:, labels == c].sum(axis=1) for c in present], axis=1)
    counts = np.array([(labels == c).sum() for c in present])
    own = np.searchsorted(present, labels)

    scores = np.zeros(n)
    for i in range(n):
        if counts[own[i]] == 1:
            continue
        a = sums[i, own[i]] / (counts[own[i]] - 1)
        other = np.ones(present.size, dtype=bool)
        other[own[i]] = False
        b = (sums[i, other] / counts[other]).min()
        denom = max(a, b)
        if denom > 0:
            scores[i] = (b - a) / denom
    return float(scores.mean())


def optimum_k(
    matrix: CycleMatrix, k_grid, seed: int = 0, threads: int = 1
) -> tuple[int, Clustering]:
    """Pick the cluster count with the highest silhouette score.

    Every feasible k in the grid is clustered with the same seed; ties go
    to the smallest k.  Grid values outside [2, n_cycles] are skipped with
    a warning.
    """
    k, clustering, _ = _best_k(matrix, k_grid, seed, threads)
    return k, clustering


def _score_one(matrix: CycleMatrix, k: int, seed: int):
    clustering = kmeans(matrix, k, seed)
    return k, clustering, silhouette(matrix, clustering)


def _best_k(matrix: CycleMatrix, k_grid, seed: int, threads: int = 1):
    feasible, skipped = [], []
    for k in sorted(set(int(k) for k in k_grid)):
        (feasible if 2 <= k <= matrix.n_cycles else skipped).append(k)
    if skipped:
        warnings.warn(
            f"skipping infeasible cluster counts {skipped} "
            f"(need 2 <= k <= {matrix.n_cycles})",
            stacklevel=3,
        )
    if not feasible:
        raise ValueError("no feasible cluster count in grid")

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda k: _score_one(matrix, k, seed), feasible))
    else:
        results = [_score_one(matrix, k, seed) for k in feasible]

    best = None
    for k, clustering, score in results:  # ascending k: ties keep smallest
        if best is None or score > best[2]:
            best = (k, clustering, score)
    return best[0], best[1], {k: s for k, _, s in results}
