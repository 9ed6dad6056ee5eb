"""Seeded synthetic datasets for demos and end-to-end checks."""

from __future__ import annotations

import numpy as np

from .ts_core import LabeledDataset, subsume_labels, z_normalize

__all__ = [
    "prototype_groups",
    "spike_task",
    "level_task",
    "localized_subclass_dataset",
]


def _prototypes(length: int) -> dict[str, np.ndarray]:
    t = np.linspace(0.0, 1.0, length)
    return {
        "sine": np.sin(2 * np.pi * 2 * t),
        "square": np.sign(np.sin(2 * np.pi * 1.5 * t) + 1e-9),
        "ramp": 2.0 * t - 1.0,
        "bump": np.exp(-((t - 0.5) ** 2) / 0.01) * 2.0 - 0.5,
    }


def prototype_groups(n_groups: int = 3, per_group: int = 60, length: int = 48,
                     noise: float = 0.1, seed: int = 0):
    """Noisy copies of ``n_groups`` distinct prototype shapes.

    Returns ``(series, labels)`` with series of shape ``(n, length)``.
    """
    protos = list(_prototypes(length).values())
    if n_groups > len(protos):
        raise ValueError(f"at most {len(protos)} prototype groups available")
    rng = np.random.default_rng(seed)
    series, labels = [], []
    for g in range(n_groups):
        base = protos[g]
        for _ in range(per_group):
            series.append(base + rng.normal(0.0, noise, length))
            labels.append(g)
    return np.asarray(series), np.asarray(labels)


def level_task(n: int = 80, length: int = 32, seed: int = 0):
    """Binary task separable by the mean level of the series."""
    rng = np.random.default_rng(seed)
    labels = np.arange(n) % 2
    offsets = np.where(labels == 1, 1.0, -1.0)
    series = offsets[:, None] + rng.normal(0.0, 0.3, (n, length))
    return series, labels


def spike_task(n: int = 200, length: int = 64, seed: int = 0, noise: float = 0.2):
    """Single spike placed in the left (label 0) or right (label 1) half.

    Returns ``(series, labels, spike_positions)``.
    """
    rng = np.random.default_rng(seed)
    labels = np.arange(n) % 2
    rng.shuffle(labels)
    margin = max(4, length // 8)
    half = length // 2
    series = rng.normal(0.0, noise, (n, length))
    positions = np.empty(n, dtype=np.int64)
    for i, lab in enumerate(labels):
        if lab == 0:
            pos = rng.integers(margin, half - margin)
        else:
            pos = rng.integers(half + margin, length - margin)
        positions[i] = pos
        series[i, pos - 1: pos + 2] += np.array([1.5, 3.0, 1.5])
    return series, labels, positions


def localized_subclass_dataset(per_class: int = 40, length: int = 64, seed: int = 0,
                               noise: float = 0.15, nuisance: float = 1.0,
                               feature_amp: float = 2.0,
                               split: str = "test") -> LabeledDataset:
    """Six subclasses sharing one base waveform.

    Odd subclasses carry a narrow bump, even ones a narrow dip; the three
    subclasses of each parity differ only in which of three segments holds
    that feature. Every sample also gets a random slow wave (random
    amplitude, frequency and phase) that dominates its shape, so the
    subclass is hard to see in the raw signal. After label subsumption the
    binary task is bump versus dip.
    """
    rng = np.random.default_rng(seed)
    t = np.linspace(0.0, 1.0, length)
    base = np.sin(2 * np.pi * 3 * t)
    centers = (length // 6, length // 2, (5 * length) // 6)
    width = max(1.0, length / 48)
    grid = np.arange(length)
    series, labels = [], []
    for label in range(1, 7):
        sign = 1.0 if label % 2 == 1 else -1.0
        center = centers[(label - 1) // 2]
        feature = sign * feature_amp * np.exp(-0.5 * ((grid - center) / width) ** 2)
        for _ in range(per_class):
            amp = nuisance * rng.uniform(0.5, 1.5)
            freq = rng.uniform(0.5, 1.5)
            wave = amp * np.sin(2 * np.pi * freq * t + rng.uniform(0, 2 * np.pi))
            x = base + wave + feature + rng.normal(0.0, noise, length)
            series.append(z_normalize(x))
            labels.append(label)
    order = rng.permutation(len(series))
    series = np.asarray(series)[order]
    labels = np.asarray(labels)[order]
    return LabeledDataset(series=series, original_labels=labels,
                          binary_labels=subsume_labels(labels), split=split)
