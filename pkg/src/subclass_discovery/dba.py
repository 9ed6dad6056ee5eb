"""DTW barycenter averaging, DBA k-means and elbow-based choice of k."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numba as nb
import numpy as np

from .dtw import _backtrace, _band_value, _cross_sq, _dtw_matrix, stack_dataset
from .ts_core import as_multichannel

__all__ = [
    "Clustering",
    "ElbowCurve",
    "dba_barycenter",
    "dba_kmeans",
    "estimate_k",
    "knee_point",
    "MODES",
]

log = logging.getLogger(__name__)

MODES = ("input", "saliency", "multivariate")


@dataclass
class Clustering:
    assignments: np.ndarray
    centroids: np.ndarray  # (k, length, channels)
    inertia: float
    k: int
    mode: str = "input"
    n_iter: int = 0
    restart: int = 0
    inertia_history: list[float] = field(default_factory=list)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown clustering mode {self.mode!r}")

    def sizes(self) -> list[int]:
        return np.bincount(self.assignments, minlength=self.k).tolist()


@dataclass
class ElbowCurve:
    ks: list[int]
    inertias: list[float]
    chosen_k: int
    # largest increase of inertia between consecutive k (restart noise)
    monotonicity_slack: float = 0.0


@nb.njit(cache=True)
def _accumulate(bary, member, band, sums, counts):
    acc = _dtw_matrix(bary, member, band)
    steps = _backtrace(acc)
    for s in range(steps.shape[0]):
        i, j = steps[s, 0], steps[s, 1]
        for c in range(bary.shape[1]):
            sums[i, c] += member[j, c]
        counts[i] += 1
    return acc[-1, -1]


@nb.njit(cache=True)
def _dba_step_stacked(group, bary, band):
    sums = np.zeros_like(bary)
    counts = np.zeros(bary.shape[0])
    inertia = 0.0
    for m in range(group.shape[0]):
        inertia += _accumulate(bary, group[m], band, sums, counts)
    for i in range(bary.shape[0]):
        for c in range(bary.shape[1]):
            sums[i, c] /= counts[i]
    return sums, inertia


def _dba_step(group, bary, band):
    """Align every member to ``bary``; return (updated barycenter, inertia of ``bary``)."""
    if isinstance(group, np.ndarray):
        return _dba_step_stacked(group, bary, band)
    sums = np.zeros_like(bary)
    counts = np.zeros(bary.shape[0])
    inertia = 0.0
    for member in group:
        inertia += _accumulate(bary, member, band, sums, counts)
    return sums / counts[:, None], inertia


def dba_barycenter(group: Sequence, init, max_iter: int = 300, tol: float = 1e-6,
                   band: int | None = None, return_history: bool = False):
    """Refine ``init`` towards the DTW barycenter of ``group``.

    Inertia is the summed squared DTW distance of the members to the
    barycenter. Iteration stops after ``max_iter`` updates or when the
    relative inertia improvement drops below ``tol``. The best iterate is
    returned, so its inertia never exceeds that of ``init``.

    With ``return_history`` the per-iterate inertias are returned as well.
    """
    if len(group) == 0:
        raise ValueError("cannot average an empty group")
    if isinstance(group, np.ndarray) and group.ndim == 3:
        members = np.ascontiguousarray(group, dtype=np.float64)
    else:
        members = [as_multichannel(s) for s in group]
        if len({m.shape for m in members}) == 1:
            members = np.ascontiguousarray(np.stack(members))
    bary = as_multichannel(init).copy()
    if any(m.shape[1] != bary.shape[1] for m in members):
        raise ValueError("group and init must share one channel count")
    lengths = {m.shape[0] for m in members}
    band_val = _member_band(band, bary.shape[0], lengths)

    history: list[float] = []
    best, best_inertia = bary, np.inf
    for _ in range(max_iter + 1):
        updated, inertia = _dba_step(members, bary, band_val)
        history.append(float(inertia))
        if inertia < best_inertia:
            best, best_inertia = bary, inertia
        if len(history) > max_iter:
            break
        if len(history) >= 2:
            prev = history[-2]
            if prev <= 0.0 or (prev - inertia) < tol * prev:
                break
        if inertia == 0.0:
            break
        bary = updated
    if return_history:
        return best, history
    return best


def _member_band(band, length, member_lengths):
    if band is None:
        return -1
    for m in member_lengths:
        _band_value(band, length, m)
    return int(band)


def _assign(data, centroids, band):
    sq = _cross_sq(data, centroids, band)
    labels = np.argmin(sq, axis=1)
    return labels, sq[np.arange(len(data)), labels]


def _repair_empty(labels, costs, centroids, data, k):
    """Move the worst-fitting samples into empty clusters as singleton centroids."""
    for cluster in range(k):
        if np.any(labels == cluster):
            continue
        sizes = np.bincount(labels, minlength=k)
        movable = sizes[labels] > 1
        candidates = np.where(movable)[0]
        idx = candidates[np.argmax(costs[candidates])]
        labels[idx] = cluster
        costs[idx] = 0.0
        centroids[cluster] = data[idx]
    return labels, costs


def _kmeans_single(data, k, rng, max_iter, dba_iter, tol, band):
    n = data.shape[0]
    init = np.sort(rng.choice(n, size=k, replace=False))
    centroids = data[init].copy()
    labels, costs = _assign(data, centroids, band)
    labels, costs = _repair_empty(labels, costs, centroids, data, k)
    history = [float(costs.sum())]
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        for cluster in range(k):
            members = data[labels == cluster]
            centroids[cluster] = dba_barycenter(
                members, centroids[cluster], max_iter=dba_iter, tol=tol,
                band=None if band < 0 else band,
            )
        new_labels, costs = _assign(data, centroids, band)
        new_labels, costs = _repair_empty(new_labels, costs, centroids, data, k)
        inertia = float(costs.sum())
        history.append(inertia)
        converged = np.array_equal(new_labels, labels)
        labels = new_labels
        if converged or history[-2] - inertia <= tol * history[-2]:
            break
    return labels, centroids, history, n_iter


def dba_kmeans(data: Sequence, k: int, n_init: int = 20, max_iter: int = 500,
               dba_iter: int = 300, seed: int = 0, tol: float = 1e-6,
               band: int | None = None, mode: str = "input") -> Clustering:
    """k-means with DTW assignment and DBA centroid updates.

    Each of the ``n_init`` restarts draws ``k`` distinct samples as initial
    centroids from its own generator seeded with ``(seed, restart)``. The
    restart with the lowest inertia wins; ties go to the earlier restart.
    """
    data = stack_dataset(data)
    n = data.shape[0]
    if k < 1:
        raise ValueError("k must be at least 1")
    if k > n:
        raise ValueError(f"k={k} exceeds the number of samples ({n})")
    if n_init < 1:
        raise ValueError("n_init must be at least 1")
    band_val = _band_value(band, data.shape[1], data.shape[1])

    best = None
    for restart in range(n_init):
        rng = np.random.default_rng([seed, restart])
        labels, centroids, history, n_iter = _kmeans_single(
            data, k, rng, max_iter, dba_iter, tol, band_val
        )
        if best is None or history[-1] < best.inertia:
            best = Clustering(
                assignments=labels.astype(np.int64),
                centroids=centroids,
                inertia=history[-1],
                k=k,
                mode=mode,
                n_iter=n_iter,
                restart=restart,
                inertia_history=history,
            )
    return best


def knee_point(ks: Sequence[int], inertias: Sequence[float]) -> int:
    """Pick the k farthest from the chord joining the curve's endpoints.

    Both axes are rescaled to [0, 1] first. Only interior points are
    candidates; ties go to the smallest k. A flat curve yields the first k.
    """
    ks = np.asarray(ks, dtype=np.float64)
    y = np.asarray(inertias, dtype=np.float64)
    if ks.size == 0:
        raise ValueError("empty k range")
    span = y.max() - y.min()
    if ks.size < 3 or span <= 1e-12 * max(1.0, abs(y.max())):
        return int(ks[0])
    x = (ks - ks[0]) / (ks[-1] - ks[0])
    yn = (y - y.min()) / span
    x0, y0, x1, y1 = x[0], yn[0], x[-1], yn[-1]
    dist = np.abs((y1 - y0) * x - (x1 - x0) * yn + x1 * y0 - y1 * x0)
    dist /= np.hypot(y1 - y0, x1 - x0)
    interior = dist[1:-1]
    # round so that exactly collinear points tie despite float noise
    interior = np.round(interior, 12)
    return int(ks[1 + int(np.argmax(interior))])


def estimate_k(data: Sequence, k_range: tuple[int, int] = (1, 10), seed: int = 0,
               n_init: int = 20, max_iter: int = 500, dba_iter: int = 300,
               band: int | None = None) -> ElbowCurve:
    """Elbow scan: run DBA k-means for every k in the inclusive range."""
    data = stack_dataset(data)
    lo, hi = int(k_range[0]), int(k_range[1])
    if lo < 1 or hi < lo:
        raise ValueError(f"empty or invalid k range {k_range}")
    if hi > len(data):
        raise ValueError(f"k range {k_range} exceeds the number of samples ({len(data)})")
    ks = list(range(lo, hi + 1))
    inertias = []
    for k in ks:
        result = dba_kmeans(data, k, n_init=n_init, max_iter=max_iter,
                            dba_iter=dba_iter, seed=seed, band=band)
        inertias.append(result.inertia)
        log.debug("elbow k=%d inertia=%.6g", k, result.inertia)
    slack = max([0.0] + [b - a for a, b in zip(inertias, inertias[1:])])
    return ElbowCurve(ks=ks, inertias=inertias, chosen_k=knee_point(ks, inertias),
                      monotonicity_slack=float(slack))
