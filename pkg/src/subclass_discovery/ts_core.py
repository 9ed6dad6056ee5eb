"""Time-series data model and preprocessing.

A univariate series is a 1-D float array of length ``n``. A multichannel
series is a ``(n, c)`` array with ``c`` in ``{1, 2}``: channel 0 holds the
signal, channel 1 (when present) the saliency map of that signal.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "LabeledDataset",
    "as_series",
    "as_multichannel",
    "stack_channels",
    "z_normalize",
    "downsample",
    "subsume_labels",
    "medoid",
]


def as_series(values) -> np.ndarray:
    """Validate and return a univariate series as a float64 array."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"expected a 1-D series, got shape {arr.shape}")
    if arr.size == 0:
        raise ValueError("series must contain at least one value")
    if not np.all(np.isfinite(arr)):
        raise ValueError("series contains NaN or infinite values")
    return arr


def as_multichannel(values) -> np.ndarray:
    """Return ``values`` as a C-contiguous ``(n, c)`` float64 array.

    1-D input is treated as a single channel.
    """
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise ValueError(f"expected shape (n,) or (n, c), got {arr.shape}")
    if arr.shape[0] == 0:
        raise ValueError("series must contain at least one time step")
    if arr.shape[1] not in (1, 2):
        raise ValueError(f"channel count must be 1 or 2, got {arr.shape[1]}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("series contains NaN or infinite values")
    return np.ascontiguousarray(arr)


def stack_channels(signal, saliency) -> np.ndarray:
    """Build a two-channel series from a signal and its saliency map."""
    s = as_series(signal)
    h = as_series(saliency)
    if s.shape != h.shape:
        raise ValueError(f"channel lengths differ: {s.size} vs {h.size}")
    return np.ascontiguousarray(np.stack([s, h], axis=1))


@dataclass
class LabeledDataset:
    """Equal-length series with their original class ids.

    ``binary_labels`` is filled by label subsumption (or given directly for
    data that is already binary).
    """

    series: np.ndarray
    original_labels: np.ndarray
    binary_labels: np.ndarray | None = None
    split: str = "train"
    ids: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.series = np.asarray(self.series, dtype=np.float64)
        if self.series.ndim != 2:
            raise ValueError("series must be a 2-D array (n_series, length)")
        self.original_labels = np.asarray(self.original_labels, dtype=np.int64)
        if len(self.series) != len(self.original_labels):
            raise ValueError("series and original_labels differ in length")
        if self.binary_labels is not None:
            self.binary_labels = np.asarray(self.binary_labels, dtype=np.int64)
            if len(self.binary_labels) != len(self.series):
                raise ValueError("binary_labels and series differ in length")
            if not np.isin(self.binary_labels, (0, 1)).all():
                raise ValueError("binary labels must be 0 or 1")
        if self.split not in ("train", "test"):
            raise ValueError(f"unknown split {self.split!r}")
        if not self.ids:
            self.ids = [f"{self.split}-{i}" for i in range(len(self.series))]
        elif len(self.ids) != len(self.series):
            raise ValueError("ids and series differ in length")

    def __len__(self) -> int:
        return len(self.series)

    @property
    def length(self) -> int:
        return self.series.shape[1]

    def classes(self) -> list[int]:
        return sorted(int(c) for c in np.unique(self.original_labels))


def z_normalize(series) -> np.ndarray:
    """Standardize with the population standard deviation.

    Constant series map to all zeros.
    """
    x = as_series(series)
    sd = x.std()
    if sd == 0.0 or not np.isfinite(sd):
        return np.zeros_like(x)
    return (x - x.mean()) / sd


def downsample(series, target_len: int) -> np.ndarray:
    """Linearly interpolate ``series`` at ``target_len`` evenly spaced positions.

    Positions span ``[0, n - 1]`` so both endpoints are kept.
    """
    x = as_series(series)
    if target_len < 2:
        raise ValueError("target_len must be at least 2")
    if target_len > x.size:
        raise ValueError(
            f"upsampling not supported: target_len {target_len} > length {x.size}"
        )
    if target_len == x.size:
        return x.copy()
    pos = np.linspace(0.0, x.size - 1, target_len)
    out = np.interp(pos, np.arange(x.size, dtype=np.float64), x)
    out[0], out[-1] = x[0], x[-1]
    return out


def subsume_labels(original_labels: Sequence[int]) -> np.ndarray:
    """Collapse multiclass ids into binary labels: even -> 0, odd -> 1."""
    labels = np.asarray(original_labels, dtype=np.int64)
    return np.where(labels % 2 == 0, 0, 1).astype(np.int64)


def medoid(group: Sequence, distance: Callable | None = None) -> int:
    """Index of the member with the smallest summed distance to the group.

    ``distance`` defaults to DTW. Ties go to the lowest index.
    """
    if len(group) == 0:
        raise ValueError("medoid of an empty group is undefined")
    if len(group) == 1:
        return 0
    if distance is None:
        from .dtw import pairwise_matrix

        matrix = pairwise_matrix(group)
    else:
        n = len(group)
        matrix = np.zeros((n, n))
        for i in range(n):
            for j in range(i + 1, n):
                matrix[i, j] = matrix[j, i] = distance(group[i], group[j])
    return int(np.argmin(matrix.sum(axis=1)))
