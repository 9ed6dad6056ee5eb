from __future__ import annotations

import numpy as np
import pytest

from subclass_discovery.dtw import dtw_distance
from subclass_discovery.ts_core import (
    LabeledDataset,
    as_multichannel,
    as_series,
    downsample,
    medoid,
    stack_channels,
    subsume_labels,
    z_normalize,
)


def test_z_normalize_uses_population_sigma():
    mu, sigma = 2.0, np.sqrt(2.0 / 3.0)
    expected = (np.array([1.0, 2.0, 3.0]) - mu) / sigma
    np.testing.assert_allclose(z_normalize([1, 2, 3]), expected, atol=1e-12)
    np.testing.assert_allclose(z_normalize([1, 2, 3]), [-1.2247, 0.0, 1.2247], atol=1e-4)


def test_z_normalize_constant_gives_zeros():
    np.testing.assert_array_equal(z_normalize([5, 5, 5]), [0, 0, 0])


def test_z_normalize_is_idempotent(rng):
    for _ in range(20):
        x = rng.normal(size=int(rng.integers(2, 50))) * 10 + 3
        once = z_normalize(x)
        np.testing.assert_allclose(z_normalize(once), once, atol=1e-9)


def test_downsample_interpolates_linearly():
    np.testing.assert_allclose(downsample(np.arange(9.0), 5), [0, 2, 4, 6, 8])
    x = np.array([0.0, 1.0, 4.0, 9.0])
    positions = np.arange(3) * (len(x) - 1) / 2
    np.testing.assert_allclose(downsample(x, 3), np.interp(positions, np.arange(4), x))


def test_downsample_identity_and_endpoints(rng):
    x = rng.normal(size=17)
    np.testing.assert_array_equal(downsample(x, 17), x)
    np.testing.assert_array_equal(downsample([0, 10], 2), [0, 10])


def test_downsample_rejects_bad_targets():
    with pytest.raises(ValueError, match="upsampling not supported"):
        downsample([1, 2, 3], 4)
    with pytest.raises(ValueError):
        downsample([1, 2, 3], 1)


@pytest.mark.parametrize("labels, expected", [
    ([1, 2, 3, 4], [1, 0, 1, 0]),
    ([2, 2, 2], [0, 0, 0]),
    ([11, 1, 7, 5], [1, 1, 1, 1]),
])
def test_subsume_labels(labels, expected):
    assert subsume_labels(labels).tolist() == expected


def test_medoid_under_dtw():
    group = [np.array([0.0, 0.0]), np.array([1.0, 1.0]), np.array([10.0, 10.0])]
    sums = [sum(dtw_distance(a, b) for b in group) for a in group]
    assert medoid(group) == int(np.argmin(sums)) == 1


def test_medoid_trivial_cases():
    assert medoid([np.array([3.0, 1.0])]) == 0
    assert medoid([np.ones(4)] * 3) == 0
    with pytest.raises(ValueError):
        medoid([])


def test_medoid_custom_distance():
    group = [np.array([0.0]), np.array([5.0]), np.array([6.0])]
    assert medoid(group, distance=lambda a, b: float(abs(a - b).sum())) == 1


def test_series_validation():
    with pytest.raises(ValueError):
        as_series([])
    with pytest.raises(ValueError):
        as_series([1.0, np.nan])
    with pytest.raises(ValueError):
        as_multichannel(np.zeros((4, 3)))
    assert as_multichannel([1, 2, 3]).shape == (3, 1)


def test_stack_channels_keeps_alignment():
    s, h = np.arange(5.0), np.linspace(0, 1, 5)
    both = stack_channels(s, h)
    assert both.shape == (5, 2)
    np.testing.assert_array_equal(both[:, 0], s)
    np.testing.assert_array_equal(both[:, 1], h)
    with pytest.raises(ValueError):
        stack_channels(s, h[:4])


def test_labeled_dataset_invariants():
    ds = LabeledDataset(np.zeros((3, 4)), [1, 2, 3], split="test")
    assert len(ds) == 3 and ds.length == 4 and ds.classes() == [1, 2, 3]
    assert ds.ids == ["test-0", "test-1", "test-2"]
    with pytest.raises(ValueError):
        LabeledDataset(np.zeros((3, 4)), [1, 2])
    with pytest.raises(ValueError):
        LabeledDataset(np.zeros((2, 4)), [1, 2], binary_labels=[0, 2])
    with pytest.raises(ValueError):
        LabeledDataset(np.zeros((2, 4)), [1, 2], split="valid")
