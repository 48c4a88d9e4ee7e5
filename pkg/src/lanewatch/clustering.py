"""Two-cluster K-means used to seed the mixture model.

Lloyd iterations with a fixed number of random restarts; the best run by
inertia wins. Initial centroids are two distinct samples drawn uniformly at
random. An empty cluster is repaired by handing it the point farthest from
its current centroid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MAX_ITERATIONS = 100


class DegenerateDataError(ValueError):
    """Fewer than two distinct points; clustering is meaningless."""


@dataclass(frozen=True, eq=False)
class KmeansResult:
    centroids: np.ndarray
    labels: np.ndarray
    inertia: float
    # diagnostics: per-iteration inertia of the winning restart, inertia of
    # every restart, and how many empty-cluster repairs the winner needed
    inertia_history: tuple[float, ...]
    restart_inertias: tuple[float, ...]
    repairs: int


def _assign(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    d2 = ((points[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
    return d2.argmin(axis=1)  # ties go to the lower cluster index


def _inertia(points, centroids, labels) -> float:
    return float(((points - centroids[labels]) ** 2).sum())


def _means_with_repair(points, labels, k, centroids):
    """Per-cluster means; an empty cluster steals the point farthest from
    its assigned centroid (label-level, so means stay consistent)."""
    labels = labels.copy()
    repairs = 0
    while True:
        counts = np.bincount(labels, minlength=k)
        empties = np.flatnonzero(counts == 0)
        if empties.size == 0:
            break
        dist = ((points - centroids[labels]) ** 2).sum(axis=1)
        labels[int(dist.argmax())] = int(empties[0])
        repairs += 1
    means = np.empty((k, points.shape[1]))
    for c in range(k):
        means[c] = points[labels == c].mean(axis=0)
    return means, labels, repairs


def _lloyd(points, k, rng, max_iter):
    n = points.shape[0]
    first = int(rng.integers(n))
    distinct = np.flatnonzero(np.any(points != points[first], axis=1))
    second = int(distinct[rng.integers(distinct.size)])
    centroids = points[[first, second]].copy()

    labels = _assign(points, centroids)
    history = []
    repairs = 0
    converged = False
    for _ in range(max_iter):
        centroids, labels, rep = _means_with_repair(points, labels, k, centroids)
        repairs += rep
        new_labels = _assign(points, centroids)
        history.append(_inertia(points, centroids, new_labels))
        if np.array_equal(new_labels, labels):
            converged = True
            break
        labels = new_labels
    if not converged:
        centroids, labels, rep = _means_with_repair(points, labels, k, centroids)
        repairs += rep
    return centroids, labels, _inertia(points, centroids, labels), tuple(history), repairs


def kmeans(points, k: int = 2, restarts: int = 3, max_iter: int = MAX_ITERATIONS,
           seed=None) -> KmeansResult:
    """Best-of-`restarts` K-means on row vectors; deterministic given `seed`.

    Raises ValueError on empty input and DegenerateDataError when all points
    are identical.
    """
    X = np.asarray(points, dtype=float)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("points must be a non-empty 2-D array")
    if k != 2:
        raise ValueError("only k=2 is supported")
    if restarts < 1:
        raise ValueError("restarts must be at least 1")
    if not np.any(np.any(X != X[0], axis=1)):
        raise DegenerateDataError("all points are identical")

    root = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    best = None
    restart_inertias = []
    for child in root.spawn(restarts):
        rng = np.random.default_rng(child)
        centroids, labels, inertia, history, repairs = _lloyd(X, k, rng, max_iter)
        restart_inertias.append(inertia)
        if best is None or inertia < best[2]:
            best = (centroids, labels, inertia, history, repairs)

    centroids, labels, inertia, history, repairs = best
    return KmeansResult(
        centroids=centroids,
        labels=labels,
        inertia=inertia,
        inertia_history=history,
        restart_inertias=tuple(restart_inertias),
        repairs=repairs,
    )
