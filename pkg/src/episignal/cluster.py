"""K-means partitioning of county profiles, with elbow and silhouette
diagnostics for choosing the number of clusters."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .dataset import CaseSeries, FeatureMatrix
from .errors import EmptyMatrix, KTooLarge, SingleCluster, TooFewPoints

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class KMeansModel:
    """A converged k-means solution (best of several restarts)."""

    k: int
    centroids: np.ndarray
    inertia: float
    iterations: int
    seed: int
    converged: bool
    best_restart: int
    # per-restart objective recorded at each Lloyd iteration
    inertia_paths: tuple[tuple[float, ...], ...]

    def __post_init__(self):
        centroids = np.array(self.centroids, dtype=float)
        centroids.setflags(write=False)
        object.__setattr__(self, "centroids", centroids)


@dataclass(frozen=True)
class Assignment:
    """Cluster label per row, aligned with the matrix the model was fit on."""

    labels: np.ndarray

    def __post_init__(self):
        labels = np.array(self.labels, dtype=np.int64)
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)

    @property
    def k(self) -> int:
        return int(self.labels.max()) + 1


@dataclass(frozen=True)
class ElbowCurve:
    """Best-of-restarts inertia for each candidate k."""

    k_values: tuple[int, ...]
    sse: tuple[float, ...]


def _as_array(m) -> np.ndarray:
    if isinstance(m, FeatureMatrix):
        return m.values
    return np.asarray(m, dtype=float)


def _seed_centroids(X: np.ndarray, k: int, rng) -> np.ndarray:
    """Distance-weighted seeding: after a uniform first pick, each next
    centroid is drawn with probability proportional to the squared
    distance from the nearest centroid chosen so far."""
    n = X.shape[0]
    centers = np.empty((k, X.shape[1]))
    centers[0] = X[rng.integers(n)]
    d2 = ((X - centers[0]) ** 2).sum(axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total > 0.0:
            idx = rng.choice(n, p=d2 / total)
        else:
            # every point coincides with a chosen centroid
            idx = rng.integers(n)
        centers[j] = X[idx]
        d2 = np.minimum(d2, ((X - centers[j]) ** 2).sum(axis=1))
    return centers


def _repair_empty(X: np.ndarray, centers: np.ndarray, labels: np.ndarray,
                  d2: np.ndarray) -> np.ndarray:
    """Reseed each empty cluster at the point farthest from its assigned
    centroid and hand that point over. When every distance is zero the
    fit is already perfect and empties are left alone."""
    n = X.shape[0]
    for c in range(centers.shape[0]):
        if (labels == c).any():
            continue
        own = d2[np.arange(n), labels]
        far = int(own.argmax())
        if own[far] <= 0.0:
            break
        centers[c] = X[far]
        labels[far] = c
        d2[:, c] = ((X - centers[c]) ** 2).sum(axis=1)
    return labels


def _lloyd(X: np.ndarray, centers: np.ndarray, max_iter: int, tol: float):
    """Lloyd iterations from the given starting centroids.

    The loop normally ends when the assignment stops changing, which is
    an exact fixed point of the nearest-centroid rule. If instead the
    centroid shift falls below tol while labels are still settling, the
    labels are recomputed once on the frozen centroids and the run ends
    there. The per-iteration objective is recorded after each
    assignment, so it is nonincreasing along the run.
    """
    n, dim = X.shape
    k = centers.shape[0]
    centers = centers.copy()
    rows = np.arange(n)
    prev = None
    path: list[float] = []
    converged = False
    iterations = 0
    labels = np.zeros(n, dtype=np.int64)

    def assign():
        d2 = cdist(X, centers, "sqeuclidean")
        found = d2.argmin(axis=1)
        counts = np.bincount(found, minlength=k)
        if (counts == 0).any():
            found = _repair_empty(X, centers, found, d2)
            counts = np.bincount(found, minlength=k)
        path.append(float(d2[rows, found].sum()))
        return found, counts

    while iterations < max_iter:
        iterations += 1
        labels, counts = assign()
        if prev is not None and np.array_equal(labels, prev):
            converged = True
            break
        means = centers.copy()
        sums = np.empty((k, dim))
        for j in range(dim):
            sums[:, j] = np.bincount(labels, weights=X[:, j], minlength=k)
        nonzero = counts > 0
        means[nonzero] = sums[nonzero] / counts[nonzero, None]
        shift = float(np.sqrt(((means - centers) ** 2).sum(axis=1)).max())
        centers = means
        prev = labels
        if shift < tol and iterations < max_iter:
            iterations += 1
            labels, counts = assign()
            converged = True
            break
    return labels, centers, path[-1], iterations, tuple(path), converged


def _canonical_order(labels: np.ndarray, centers: np.ndarray):
    """Renumber clusters so centroids appear in lexicographic coordinate
    order. Cluster ids then depend only on centroid positions, not on the
    row order the seeding happened to visit."""
    order = np.lexsort(centers.T[::-1])
    relabel = np.empty(centers.shape[0], dtype=np.int64)
    relabel[order] = np.arange(centers.shape[0])
    return relabel[labels], centers[order]


def kmeans_fit(m, k: int, seed: int, max_iter: int = 300,
               tol: float = 1e-6, restarts: int = 10):
    """Cluster rows into k groups, returning (KMeansModel, Assignment).

    Runs `restarts` seeded initializations and keeps the lowest final
    inertia (first winner on ties), so results are deterministic for a
    given seed.
    """
    X = _as_array(m)
    n = X.shape[0]
    if n == 0:
        raise EmptyMatrix("feature matrix has no rows")
    if k < 1:
        raise ValueError(f"k must be at least 1, got {k}")
    if k > n:
        raise KTooLarge(f"k={k} exceeds {n} rows")
    if restarts < 1:
        raise ValueError("need at least one restart")
    rng = np.random.default_rng(seed)
    best = None
    paths: list[tuple[float, ...]] = []
    best_idx = 0
    for attempt in range(restarts):
        init = _seed_centroids(X, k, rng)
        labels, centers, inertia, iters, path, ok = _lloyd(
            X, init, max_iter, tol)
        paths.append(path)
        if best is None or inertia < best[2]:
            best = (labels, centers, inertia, iters, ok)
            best_idx = attempt
    labels, centers, inertia, iters, ok = best
    labels, centers = _canonical_order(labels, centers)
    model = KMeansModel(
        k=k, centroids=centers, inertia=inertia, iterations=iters,
        seed=seed, converged=ok, best_restart=best_idx,
        inertia_paths=tuple(paths),
    )
    return model, Assignment(labels)


def elbow_scan(m, k_min: int, k_max: int, seed: int,
               restarts: int = 10) -> ElbowCurve:
    """Best-of-restarts inertia for each k in [k_min, k_max]."""
    X = _as_array(m)
    n = X.shape[0]
    if n == 0:
        raise EmptyMatrix("feature matrix has no rows")
    if k_min < 1 or k_min >= k_max:
        raise ValueError(f"need 1 <= k_min < k_max, got [{k_min}, {k_max}]")
    if k_max > n:
        raise KTooLarge(f"k_max={k_max} exceeds {n} rows")
    ks = tuple(range(k_min, k_max + 1))
    sse = []
    for k in ks:
        model, _ = kmeans_fit(X, k, seed=seed, restarts=restarts)
        sse.append(model.inertia)
    return ElbowCurve(k_values=ks, sse=tuple(sse))


def knee_detect(curve: ElbowCurve) -> int:
    """Pick the k at the curve's knee.

    The knee is the interior point with the largest perpendicular
    distance from the chord joining the first and last curve points;
    ties go to the smaller k. Needs at least three points.
    """
    ks = np.asarray(curve.k_values, dtype=float)
    sse = np.asarray(curve.sse, dtype=float)
    if ks.size < 3:
        raise TooFewPoints("knee needs at least three curve points")
    x0, y0 = ks[0], sse[0]
    x1, y1 = ks[-1], sse[-1]
    chord = float(np.hypot(x1 - x0, y1 - y0))
    best_k = int(curve.k_values[1])
    best_dist = -1.0
    for i in range(1, ks.size - 1):
        cross = (x1 - x0) * (sse[i] - y0) - (y1 - y0) * (ks[i] - x0)
        dist = abs(cross) / chord if chord > 0 else 0.0
        if dist > best_dist:
            best_dist = dist
            best_k = int(curve.k_values[i])
    return best_k


def silhouette(m, assignment: Assignment) -> float:
    """Mean silhouette coefficient under Euclidean distance.

    For each point, a is the mean distance to the rest of its cluster
    and b the smallest mean distance to another cluster; the score is
    (b - a) / max(a, b). Singleton clusters score zero.
    """
    X = _as_array(m)
    labels = assignment.labels
    n = X.shape[0]
    if labels.shape != (n,):
        raise ValueError("labels do not align with matrix rows")
    k = int(labels.max()) + 1
    if k < 2:
        raise SingleCluster("silhouette needs at least two clusters")
    counts = np.bincount(labels, minlength=k)
    if (counts == 0).any():
        raise ValueError("every cluster must be nonempty")
    D = cdist(X, X)
    # sums of distances from each point to every cluster
    sums = np.zeros((n, k))
    for c in range(k):
        sums[:, c] = D[:, labels == c].sum(axis=1)
    scores = np.zeros(n)
    for i in range(n):
        c = labels[i]
        if counts[c] == 1:
            continue
        a = sums[i, c] / (counts[c] - 1)
        b = np.inf
        for other in range(k):
            if other == c:
                continue
            b = min(b, sums[i, other] / counts[other])
        denom = max(a, b)
        scores[i] = 0.0 if denom == 0.0 else (b - a) / denom
    return float(scores.mean())


@dataclass(frozen=True)
class ClusterSummary:
    """Aggregates for one cluster, on the original feature scale."""

    cluster: int
    size: int
    counties: tuple[str, ...]
    feature_means: dict[str, float]
    mean_total_cases: float | None
    mean_total_deaths: float | None
    missing_series: tuple[str, ...]


def cluster_summary(profiles: FeatureMatrix, cases: dict,
                    assignment: Assignment) -> list[ClusterSummary]:
    """Per-cluster feature means plus mean total cases and deaths.

    cases maps normalized county key to CaseSeries. Counties without a
    series are reported and excluded from the case averages; a cluster
    with no series at all gets None for both case fields.
    """
    labels = assignment.labels
    if labels.shape != (profiles.n_counties,):
        raise ValueError("assignment does not align with profiles")
    out: list[ClusterSummary] = []
    for c in range(int(labels.max()) + 1):
        idx = np.flatnonzero(labels == c)
        members = [profiles.county_keys[i] for i in idx]
        means = {
            name: float(profiles.values[idx, j].mean())
            for j, name in enumerate(profiles.feature_names)
        }
        totals: list[int] = []
        deaths: list[int] = []
        missing: list[str] = []
        for key in members:
            series = cases.get(key.normalized)
            if series is None:
                missing.append(key.normalized)
                continue
            totals.append(series.total_cases)
            deaths.append(series.total_deaths)
        if missing:
            logger.warning("cluster %d: no case series for %s",
                           c, ", ".join(missing))
        out.append(ClusterSummary(
            cluster=c,
            size=len(members),
            counties=tuple(k.normalized for k in members),
            feature_means=means,
            mean_total_cases=float(np.mean(totals)) if totals else None,
            mean_total_deaths=float(np.mean(deaths)) if deaths else None,
            missing_series=tuple(missing),
        ))
    return out
