"""Informed and uninformed clustering quality metrics.

Partitions are given as label vectors (one cluster/class id per sample).
Logarithms are natural throughout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from .dtw import cross_matrix, dtw_distance, pairwise_matrix, stack_dataset

__all__ = [
    "ContingencyTable",
    "contingency",
    "ari",
    "nmi",
    "purity",
    "dtw_intra",
    "dtw_inter",
    "dtw_frac",
    "silhouette_samples_dtw",
    "silhouette_dtw",
    "size_entropy",
    "var_s",
    "var_i",
    "spearman",
    "pearson",
]


@dataclass
class ContingencyTable:
    table: np.ndarray  # rows: clusters X_i, columns: classes Y_j
    row_ids: np.ndarray
    col_ids: np.ndarray

    @property
    def a(self) -> np.ndarray:
        return self.table.sum(axis=1)

    @property
    def b(self) -> np.ndarray:
        return self.table.sum(axis=0)

    @property
    def n(self) -> int:
        return int(self.table.sum())


def contingency(x, y) -> ContingencyTable:
    x = np.asarray(x)
    y = np.asarray(y)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError(f"partitions cover different sample counts: {x.shape} vs {y.shape}")
    rows, xi = np.unique(x, return_inverse=True)
    cols, yi = np.unique(y, return_inverse=True)
    table = np.zeros((rows.size, cols.size), dtype=np.int64)
    np.add.at(table, (xi, yi), 1)
    return ContingencyTable(table, rows, cols)


def _comb2(v):
    v = np.asarray(v, dtype=np.float64)
    return v * (v - 1.0) / 2.0


def ari(x, y) -> float:
    """Adjusted Rand index from pair counts.

    Degenerate inputs with a zero denominator score 1.0 when both
    partitions induce the same pair relation, else 0.0.
    """
    ct = contingency(x, y)
    n = ct.n
    if n < 2:
        return 1.0
    index = _comb2(ct.table).sum()
    sum_a = _comb2(ct.a).sum()
    sum_b = _comb2(ct.b).sum()
    expected = sum_a * sum_b / _comb2(n)
    max_index = 0.5 * (sum_a + sum_b)
    denom = max_index - expected
    if denom == 0.0:
        return 1.0 if sum_a == sum_b == index else 0.0
    return float((index - expected) / denom)


def _entropy(counts) -> float:
    p = np.asarray(counts, dtype=np.float64)
    p = p[p > 0] / p.sum()
    return float(-(p * np.log(p)).sum())


def nmi(x, y) -> float:
    """Normalized mutual information ``2 I / (H(X) + H(Y))``."""
    ct = contingency(x, y)
    hx, hy = _entropy(ct.a), _entropy(ct.b)
    if hx + hy == 0.0:
        return 1.0
    n = ct.n
    # H(Y|X) = sum_i p(x_i) H(Y | X = x_i)
    h_y_given_x = sum(row.sum() / n * _entropy(row) for row in ct.table)
    mutual = hy - h_y_given_x
    return float(min(1.0, max(0.0, 2.0 * mutual / (hx + hy))))


def purity(x, y) -> float:
    """Fraction of samples that belong to their cluster's majority class."""
    ct = contingency(x, y)
    return float(ct.table.max(axis=1).sum() / ct.n)


def dtw_intra(cluster, centroid, band: int | None = None) -> float:
    """Mean DTW distance of the members to their centroid."""
    if len(cluster) == 0:
        raise ValueError("cluster must not be empty")
    return float(cross_matrix(cluster, [centroid], band=band).mean())


def dtw_inter(centroids, j: int, band: int | None = None) -> float:
    """Mean DTW distance from centroid ``j`` to every other centroid."""
    if len(centroids) < 2:
        raise ValueError("dtw_inter is undefined for single cluster")
    others = [c for i, c in enumerate(centroids) if i != j]
    return float(np.mean([dtw_distance(centroids[j], c, band) for c in others]))


def dtw_frac(cluster, centroids, j: int, band: int | None = None) -> float:
    """Intra/inter ratio for cluster ``j``; lower is better."""
    inter = dtw_inter(centroids, j, band)
    intra = dtw_intra(cluster, centroids[j], band)
    if inter == 0.0:
        return float("inf") if intra > 0 else 0.0
    return intra / inter


def silhouette_samples_dtw(data, assignments, distances=None) -> np.ndarray:
    """Per-sample silhouette with DTW dissimilarity; singletons score 0."""
    labels = np.asarray(assignments)
    ids = np.unique(labels)
    if ids.size < 2:
        raise ValueError("silhouette needs at least two clusters")
    d = pairwise_matrix(data) if distances is None else np.asarray(distances)
    if d.shape != (labels.size, labels.size):
        raise ValueError("distance matrix does not match the assignments")
    s = np.zeros(labels.size)
    for i in range(labels.size):
        own = labels == labels[i]
        if own.sum() == 1:
            continue
        a = d[i, own].sum() / (own.sum() - 1)
        b = min(d[i, labels == c].mean() for c in ids if c != labels[i])
        denom = max(a, b)
        s[i] = 0.0 if denom == 0.0 else (b - a) / denom
    return s


def silhouette_dtw(data, assignments, distances=None) -> float:
    return float(silhouette_samples_dtw(data, assignments, distances).mean())


def size_entropy(assignments) -> float:
    """Cluster size entropy normalized by ``log r``; 1.0 when ``r == 1``."""
    _, counts = np.unique(np.asarray(assignments), return_counts=True)
    if counts.size <= 1:
        return 1.0
    return _entropy(counts) / np.log(counts.size)


def var_s(cluster) -> float:
    """Mean squared deviation from the per-timestep cluster mean."""
    data = stack_dataset(cluster)
    return float(((data - data.mean(axis=0)) ** 2).sum(axis=2).mean())


def var_i(cluster, centroid) -> float:
    """Mean squared deviation from the centroid, per timestep."""
    data = stack_dataset(cluster)
    c = np.asarray(centroid, dtype=np.float64)
    if c.ndim == 1:
        c = c[:, None]
    if c.shape != data.shape[1:]:
        raise ValueError(f"centroid shape {c.shape} does not match members {data.shape[1:]}")
    return float(((data - c) ** 2).sum(axis=2).mean())


def _check_pair(xs, ys):
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    if xs.shape != ys.shape or xs.ndim != 1:
        raise ValueError("inputs must be 1-D and of equal length")
    if xs.size < 3:
        raise ValueError("correlation needs at least three pairs")
    return xs, ys


def _t_test(rho, n):
    if abs(rho) >= 1.0:
        return 0.0
    t = rho * np.sqrt((n - 2) / (1.0 - rho * rho))
    return float(2.0 * stats.t.sf(abs(t), df=n - 2))


def pearson(xs, ys) -> tuple[float, float]:
    xs, ys = _check_pair(xs, ys)
    dx, dy = xs - xs.mean(), ys - ys.mean()
    denom = np.sqrt((dx * dx).sum() * (dy * dy).sum())
    if denom == 0.0:
        raise ValueError("correlation undefined for a constant input")
    rho = float(np.clip((dx * dy).sum() / denom, -1.0, 1.0))
    return rho, _t_test(rho, xs.size)


def spearman(xs, ys) -> tuple[float, float]:
    """Rank correlation (mean ranks for ties) with a two-sided t-approximated p-value."""
    xs, ys = _check_pair(xs, ys)
    if np.ptp(xs) == 0.0 or np.ptp(ys) == 0.0:
        raise ValueError("rank correlation undefined for a constant input")
    return pearson(stats.rankdata(xs), stats.rankdata(ys))
