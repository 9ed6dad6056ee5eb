from __future__ import annotations

import numpy as np
import pytest

from subclass_discovery.saliency_net import (
    Architecture,
    ConvClassifier,
    ExternalSaliency,
    TrainConfig,
    load_checkpoint,
    predict,
    predict_batch,
    read_saliency_csv,
    saliency,
    save_checkpoint,
    train,
    write_saliency_csv,
)
from subclass_discovery.synthetic import level_task, spike_task


@pytest.fixture(scope="module")
def spike_model():
    x, y, _ = spike_task(n=200, length=64, seed=0)
    return train(x, y, TrainConfig(seed=0), Architecture(64))


def _threshold_oracle(x, y):
    """A constant-level task is separable iff some mean threshold splits it."""
    means = x.mean(axis=1)
    return means[y == 0].max() < means[y == 1].min()


def test_level_task_is_learned_within_twenty_epochs():
    x, y = level_task(n=80, length=32, seed=0)
    assert _threshold_oracle(x, y)
    model = train(x, y, TrainConfig(epochs=20, seed=0))
    assert np.mean(predict_batch(model, x) == y) == 1.0
    proto = -np.ones(32)
    assert predict(model, proto)[0] == 0


def test_zero_epochs_is_chance_level():
    x, y = level_task(n=200, length=32, seed=1)
    accs = []
    for seed in range(5):
        model = train(x, y, TrainConfig(epochs=0, seed=seed))
        accs.append(np.mean(predict_batch(model, x) == y))
    assert abs(np.mean(accs) - 0.5) <= 0.1


def test_zero_epochs_returns_initialization():
    x, y = level_task(n=40, length=16, seed=2)
    model = train(x, y, TrainConfig(epochs=0, seed=3))
    rng = np.random.default_rng(3)
    ref = ConvClassifier.initialize(Architecture(16), seed=int(rng.integers(2**32)))
    for name, value in ref.params.items():
        np.testing.assert_array_equal(model.params[name], value)


def test_training_is_deterministic():
    x, y = level_task(n=40, length=16, seed=2)
    for optimizer in ("sgd", "adam"):
        cfg = TrainConfig(epochs=3, seed=7, optimizer=optimizer)
        a, b = train(x, y, cfg), train(x, y, cfg)
        for name in a.params:
            np.testing.assert_array_equal(a.params[name], b.params[name])


def test_training_errors():
    x = np.zeros((4, 8))
    with pytest.raises(ValueError, match="both classes"):
        train(x, [1, 1, 1, 1])
    with pytest.raises(ValueError):
        train(x, [0, 1, 2, 0])
    with pytest.raises(ValueError):
        TrainConfig(optimizer="rmsprop")


def test_probabilities_sum_to_one(rng):
    model = ConvClassifier.initialize(Architecture(20), seed=1)
    probs = model.predict_proba(rng.normal(size=(10, 20)) * 5)
    np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-9)
    cls, p = predict(model, rng.normal(size=20))
    assert cls == int(np.argmax(p))


def test_zero_head_gives_even_odds_and_no_conv_gradient(rng):
    model = ConvClassifier.initialize(Architecture(16), seed=0)
    model.params["wd"][:] = 0.0
    model.params["bd"][:] = 0.0
    x = rng.normal(size=(4, 16))
    np.testing.assert_allclose(model.predict_proba(x), 0.5)
    logits, cache = model.forward(x)
    grads = model.backward(cache, rng.normal(size=logits.shape))
    for name in ("w1", "b1", "w2", "b2"):
        assert np.all(grads[name] == 0.0)


def test_linear_stub_gradients_scale_with_input(rng):
    model = ConvClassifier.initialize(Architecture(12, filters=(3, 3), kernel=3, activation="linear"),
                                      seed=4)
    x = rng.normal(size=(2, 12))
    up = rng.normal(size=(2, 2))
    g1 = model.backward(model.forward(x)[1], up)
    g2 = model.backward(model.forward(2 * x)[1], up)
    np.testing.assert_allclose(g2["w1"], 2 * g1["w1"], rtol=1e-10, atol=1e-12)


def test_length_mismatch(rng):
    model = ConvClassifier.initialize(Architecture(16))
    with pytest.raises(ValueError, match="length"):
        predict(model, np.zeros(15))
    with pytest.raises(ValueError, match="length"):
        saliency(model, np.zeros(17))


def test_heatmap_contract_on_random_models(rng):
    for seed in range(10):
        length = int(rng.integers(8, 40))
        model = ConvClassifier.initialize(Architecture(length), seed=seed)
        maps = saliency(model, rng.normal(size=(5, length)))
        assert maps.shape == (5, length)
        assert maps.min() >= 0.0 and maps.max() <= 1.0
        for row in maps:
            assert row.max() == 1.0 or np.all(row == 0.0)


def test_degenerate_map_is_all_zero():
    model = ConvClassifier.initialize(Architecture(10), seed=0)
    model.params["wd"][:] = 0.0
    np.testing.assert_array_equal(saliency(model, np.ones(10)), np.zeros(10))


def _occlusion_peak(model, series, target, width):
    """Centre of the window whose zeroing costs the target class the most margin."""
    def margin(x):
        logits = model.forward(x[None, :])[0][0]
        return logits[target] - logits[1 - target]

    base = margin(series)
    drops = []
    for centre in range(len(series)):
        occluded = series.copy()
        occluded[max(0, centre - width // 2): centre + width // 2 + 1] = 0.0
        drops.append(base - margin(occluded))
    return int(np.argmax(drops))


def test_heatmap_peaks_at_the_spike(spike_model):
    x, y, pos = spike_task(n=60, length=64, seed=5)
    pred = predict_batch(spike_model, x)
    width = spike_model.arch.kernel
    maps = saliency(spike_model, x)
    correct = np.flatnonzero(pred == y)
    assert correct.size >= 50
    hits = [abs(int(np.argmax(maps[i])) - pos[i]) <= width for i in correct]
    assert np.mean(hits) >= 0.9
    # Class 1 is read as "no left spike", so occlusion only localizes class-0 evidence.
    left = [i for i in correct if pred[i] == 0]
    agree = [abs(int(np.argmax(maps[i])) - _occlusion_peak(spike_model, x[i], 0, width)) <= width
             for i in left]
    assert np.mean(agree) >= 0.9


def test_class_targets_give_different_maps(spike_model):
    x, _, _ = spike_task(n=10, length=64, seed=6)
    a, b = saliency(spike_model, x, 0), saliency(spike_model, x, 1)
    assert not np.allclose(a, b)


def test_checkpoint_round_trip(tmp_path, rng):
    model = ConvClassifier.initialize(Architecture(24, filters=(4, 3), kernel=5), seed=2)
    path = tmp_path / "model.json"
    save_checkpoint(model, path)
    loaded = load_checkpoint(path)
    assert loaded.arch == model.arch
    x = rng.normal(size=(3, 24))
    np.testing.assert_array_equal(loaded.predict_proba(x), model.predict_proba(x))


def test_checkpoint_rejects_other_files(tmp_path):
    path = tmp_path / "other.json"
    path.write_text('{"format": "something"}', encoding="utf-8")
    with pytest.raises(ValueError, match="not a classifier checkpoint"):
        load_checkpoint(path)


def test_saliency_csv_round_trip(tmp_path, rng):
    maps = rng.uniform(size=(4, 9))
    path = tmp_path / "saliency.csv"
    write_saliency_csv(maps, path)
    np.testing.assert_array_equal(read_saliency_csv(path), maps)


@pytest.mark.parametrize("content, message", [
    ("0.1,0.2\n0.3\n", "differ in length"),
    ("0.1,abc\n", "non-numeric"),
    ("0.1,1.5\n", r"\[0, 1\]"),
    ("", "no saliency rows"),
])
def test_saliency_csv_errors(tmp_path, content, message):
    path = tmp_path / "bad.csv"
    path.write_text(content, encoding="utf-8")
    with pytest.raises(ValueError, match=message):
        read_saliency_csv(path)


def test_external_saliency_source():
    maps = np.full((2, 5), 0.5)
    source = ExternalSaliency(maps, np.array([1, 0]))
    np.testing.assert_array_equal(predict_batch(source, np.zeros((2, 5))), [1, 0])
    assert source.saliency(np.zeros((2, 5))) is maps
    with pytest.raises(ValueError):
        source.predict_proba(np.zeros((3, 5)))
