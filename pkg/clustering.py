"""
Phenotype clustering for panelspectra
Standardization, k-means with seeded restarts, elbow and silhouette diagnostics
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.spatial.distance import cdist

from errors import (
    EmptyClusterUnrecoverable,
    FeaturesNotStandardized,
    KExceedsUnits,
    SingleCluster,
    ZeroVarianceColumn,
)

logger = logging.getLogger(__name__)

DEFAULT_FEATURES = ("p_low", "p_high", "intensity")
MAX_ITERATIONS = 100


@dataclass(frozen=True, eq=False)
class FeatureMatrix:
    unit_ids: Tuple[str, ...]
    columns: Tuple[str, ...]
    values: np.ndarray
    standardized: bool = False

    def __post_init__(self):
        object.__setattr__(self, 'unit_ids', tuple(self.unit_ids))
        object.__setattr__(self, 'columns', tuple(self.columns))
        values = np.array(self.values, dtype=np.float64, ndmin=2)
        values.setflags(write=False)
        object.__setattr__(self, 'values', values)

        if values.shape != (len(self.unit_ids), len(self.columns)):
            raise ValueError(f"values shape {values.shape} does not match "
                             f"{len(self.unit_ids)} units x {len(self.columns)} columns")
        if not np.all(np.isfinite(values)):
            raise ValueError("Feature matrix contains non-finite entries")

    @classmethod
    def from_frame(cls, frame: pd.DataFrame, columns: Sequence[str] = DEFAULT_FEATURES,
                   id_column: str = "fips") -> 'FeatureMatrix':
        return cls(unit_ids=tuple(frame[id_column].astype(str)), columns=tuple(columns),
                   values=frame[list(columns)].to_numpy(dtype=np.float64))

    @property
    def n_units(self) -> int:
        return len(self.unit_ids)

    def subset(self, order: Sequence[int]) -> 'FeatureMatrix':
        return replace(self, unit_ids=tuple(self.unit_ids[i] for i in order), values=self.values[list(order)])


@dataclass(frozen=True, eq=False)
class ClusterModel:
    k: int
    assignments: Dict[str, int]
    centroids: np.ndarray
    wss: float
    restarts: int
    seed: int
    iterations: int = 0
    wss_trace: Tuple[float, ...] = ()

    def labels_for(self, unit_ids: Sequence[str]) -> np.ndarray:
        """Zero-based label array in the given unit order"""
        return np.array([self.assignments[u] - 1 for u in unit_ids])

    def sizes(self) -> Dict[int, int]:
        counts = {label: 0 for label in range(1, self.k + 1)}
        for label in self.assignments.values():
            counts[label] += 1
        return counts


def standardize(features: FeatureMatrix) -> FeatureMatrix:
    """Column z-scores using the sample standard deviation (n - 1)"""
    values = features.values
    means = values.mean(axis=0)
    sds = values.std(axis=0, ddof=1) if features.n_units > 1 else np.zeros(values.shape[1])
    for column, sd in zip(features.columns, sds):
        if not sd > 0:
            raise ZeroVarianceColumn(column)
    return replace(features, values=(values - means) / sds, standardized=True)


@dataclass
class _Restart:
    labels: np.ndarray
    centroids: np.ndarray
    wss: float
    iterations: int
    trace: List[float]


def _wss(X: np.ndarray, labels: np.ndarray, centroids: np.ndarray) -> float:
    diff = X - centroids[labels]
    return float(np.sum(diff * diff))


def _lloyd(X: np.ndarray, k: int, rng: np.random.Generator) -> _Restart:
    n = len(X)
    centroids = X[rng.choice(n, size=k, replace=False)].copy()
    labels = np.full(n, -1)
    trace: List[float] = []

    for iteration in range(1, MAX_ITERATIONS + 1):
        distances = cdist(X, centroids, 'sqeuclidean')
        new_labels = np.argmin(distances, axis=1)

        empty = np.setdiff1d(np.arange(k), new_labels)
        if empty.size:
            # Reseed each empty centroid at the point farthest from its own centroid
            for cluster in empty:
                own = distances[np.arange(n), new_labels]
                farthest = int(np.argmax(own))
                if own[farthest] <= 0:
                    raise EmptyClusterUnrecoverable(
                        f"Cluster {cluster + 1} is empty and every point sits on its centroid")
                centroids[cluster] = X[farthest]
                distances[farthest] = np.inf
                distances[farthest, cluster] = 0.0
                new_labels[farthest] = cluster
            if np.setdiff1d(np.arange(k), new_labels).size:
                raise EmptyClusterUnrecoverable("Empty cluster persists after reseeding")

        converged = np.array_equal(new_labels, labels)
        labels = new_labels
        for cluster in range(k):
            centroids[cluster] = X[labels == cluster].mean(axis=0)

        wss = _wss(X, labels, centroids)
        assert not trace or wss <= trace[-1] * (1 + 1e-12) + 1e-12, "WSS increased during Lloyd iterations"
        trace.append(wss)
        if converged:
            break

    return _Restart(labels=labels, centroids=centroids, wss=trace[-1], iterations=iteration, trace=trace)


def _canonical_order(centroids: np.ndarray, columns: Sequence[str], order_by: str) -> np.ndarray:
    """Old cluster indices sorted by descending centroid of `order_by` (first column if absent)"""
    col = list(columns).index(order_by) if order_by in columns else 0
    return np.lexsort((np.arange(len(centroids)), -centroids[:, col]))


def kmeans(features: FeatureMatrix, k: int, restarts: int = 50, seed: int = 20031,
           workers: int = 1, order_by: str = "p_low") -> ClusterModel:
    """
    Best-of-restarts Lloyd k-means on standardized features

    Each restart draws its own generator from SeedSequence(seed) so results do
    not depend on `workers`. Labels run 1..k by descending centroid of
    `order_by`.
    """
    if not features.standardized:
        raise FeaturesNotStandardized("kmeans expects standardized features")
    if k < 1:
        raise ValueError(f"k must be at least 1, got {k}")
    if k > features.n_units:
        raise KExceedsUnits(k, features.n_units)
    if restarts < 1:
        raise ValueError(f"restarts must be at least 1, got {restarts}")

    X = features.values
    streams = [np.random.default_rng(child) for child in np.random.SeedSequence(seed).spawn(restarts)]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda rng: _lloyd(X, k, rng), streams))
    else:
        results = [_lloyd(X, k, rng) for rng in streams]

    best = min(range(restarts), key=lambda i: (results[i].wss, i))
    winner = results[best]
    logger.debug("k=%d: best restart %d of %d, wss=%.6g", k, best, restarts, winner.wss)

    order = _canonical_order(winner.centroids, features.columns, order_by)
    relabel = np.empty(k, dtype=int)
    relabel[order] = np.arange(1, k + 1)
    return ClusterModel(
        k=k,
        assignments={unit: int(relabel[label]) for unit, label in zip(features.unit_ids, winner.labels)},
        centroids=winner.centroids[order],
        wss=winner.wss,
        restarts=restarts,
        seed=seed,
        iterations=winner.iterations,
        wss_trace=tuple(winner.trace),
    )


def elbow_curve(features: FeatureMatrix, k_values: Sequence[int], restarts: int = 50,
                seed: int = 20031, workers: int = 1) -> List[Tuple[int, float]]:
    """(k, best wss) for every requested k"""
    if not k_values:
        raise ValueError("k_values must not be empty")
    return [(k, kmeans(features, k, restarts, seed, workers).wss) for k in k_values]


@dataclass(frozen=True, eq=False)
class SilhouetteResult:
    mean: float
    widths: Dict[str, float]


def silhouette(features: FeatureMatrix, model: ClusterModel) -> SilhouetteResult:
    """Mean and per-unit silhouette widths s = (b - a) / max(a, b); singletons score 0"""
    if model.k < 2:
        raise SingleCluster("Silhouette needs at least two clusters")

    X = features.values
    labels = model.labels_for(features.unit_ids)
    distances = cdist(X, X, 'euclidean')
    widths = np.zeros(len(X))

    for i in range(len(X)):
        own = labels == labels[i]
        if own.sum() <= 1:
            continue
        a = distances[i, own].sum() / (own.sum() - 1)
        b = min(distances[i, labels == other].mean()
                for other in range(model.k) if other != labels[i] and np.any(labels == other))
        scale = max(a, b)
        widths[i] = (b - a) / scale if scale > 0 else 0.0

    return SilhouetteResult(mean=float(widths.mean()),
                            widths=dict(zip(features.unit_ids, (float(w) for w in widths))))


def cluster_profiles(raw: FeatureMatrix, model: ClusterModel) -> pd.DataFrame:
    """Size and mean raw feature values per cluster"""
    frame = pd.DataFrame(raw.values, columns=raw.columns)
    frame['cluster'] = [model.assignments[u] for u in raw.unit_ids]
    profiles = frame.groupby('cluster')[list(raw.columns)].mean()
    profiles.insert(0, 'n_units', frame.groupby('cluster').size())
    return profiles.reset_index()


def representatives(features: FeatureMatrix, model: ClusterModel) -> Dict[int, str]:
    """Unit closest to each centroid (ties by unit id)"""
    labels = model.labels_for(features.unit_ids)
    distances = cdist(features.values, model.centroids, 'sqeuclidean')
    chosen = {}
    for cluster in range(model.k):
        members = [i for i in np.flatnonzero(labels == cluster)]
        best = min(members, key=lambda i: (distances[i, cluster], features.unit_ids[i]))
        chosen[cluster + 1] = features.unit_ids[best]
    return chosen
