from __future__ import annotations

import json

import numpy as np
import pytest

from subclass_discovery import pipeline
from subclass_discovery.dba import MODES
from subclass_discovery.fault_kg import all_fault_descriptions, from_turtle
from subclass_discovery.pipeline import (
    UNINFORMED,
    PipelineConfig,
    RunReport,
    StageError,
    build_knowledge_graph,
    build_mode_series,
    discover,
    emit_report,
    filter_datasets,
    load_ucr,
    prepare,
    run,
    save_ucr,
    stage_seed,
)
from subclass_discovery.matcher import OfflineBackend
from subclass_discovery.saliency_net import write_saliency_csv
from subclass_discovery.ts_core import LabeledDataset

SMALL = dict(synthetic={"per_class": 8, "length": 32}, n_init=1, k_range=(1, 4),
             kmeans_iter=20, dba_iter=10, repetitions=2,
             classifier={"epochs": 40, "learning_rate": 0.01, "optimizer": "adam"})


def small_config(**overrides) -> PipelineConfig:
    return PipelineConfig(**{**SMALL, **overrides})


@pytest.fixture(scope="module")
def full_report():
    return run(small_config(seed=3))


def test_load_ucr_example(tmp_path):
    path = tmp_path / "d.tsv"
    path.write_text("1\t0.0\t1.0\n2\t1.0\t0.0\n", encoding="utf-8")
    ds = load_ucr(path)
    assert ds.series.tolist() == [[0.0, 1.0], [1.0, 0.0]]
    assert ds.original_labels.tolist() == [1, 2]


def test_load_ucr_accepts_commas(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("3,0.5,0.25,1\n", encoding="utf-8")
    assert load_ucr(path).series.shape == (1, 3)


@pytest.mark.parametrize("content, message", [
    ("1\t0\t1\n2\t1\n", "row 1"),
    ("1\t0\tx\n", "row 0: non-numeric"),
    ("", "empty"),
    ("1.5\t0\t1\n", "not an integer"),
])
def test_load_ucr_errors(tmp_path, content, message):
    path = tmp_path / "bad.tsv"
    path.write_text(content, encoding="utf-8")
    with pytest.raises(ValueError, match=message):
        load_ucr(path)


def test_load_ucr_keeps_label_parity(tmp_path):
    path = tmp_path / "d.tsv"
    path.write_text("0\t1\t2\n1\t2\t3\n-1\t0\t0\n", encoding="utf-8")
    labels = load_ucr(path).original_labels
    assert labels.min() >= 1
    assert (labels % 2).tolist() == [0, 1, 1]


def test_ucr_round_trip(tmp_path, rng):
    ds = LabeledDataset(rng.normal(size=(5, 7)), [1, 2, 3, 2, 1])
    path = tmp_path / "rt.tsv"
    save_ucr(ds, path)
    back = load_ucr(path)
    np.testing.assert_array_equal(back.series, ds.series)
    np.testing.assert_array_equal(back.original_labels, ds.original_labels)


def _descriptor(name, n_classes=8, per_class=150, length=256, accuracy=0.8, image=False):
    return {"name": name, "n_classes": n_classes, "class_counts": [per_class] * n_classes,
            "length": length, "accuracy": accuracy, "image_derived": image}


def test_filter_datasets():
    known = [
        _descriptor("InsectWingbeatSound", 11, 200, 256, 0.65),
        _descriptor("Mallat", 8, 300, 1024, 0.95),
        _descriptor("UWaveGestureLibraryAll", 8, 450, 945, 0.97),
    ]
    assert all(v.accepted for v in filter_datasets(known))
    few = filter_datasets([_descriptor("few", n_classes=4)])[0]
    assert not few.accepted and not few.checks["class_count"]
    short = filter_datasets([_descriptor("short", length=64)])[0]
    assert not short.accepted and not short.checks["length"]
    assert [k for k, ok in short.checks.items() if not ok] == ["length"]
    for bad in (_descriptor("small", per_class=99), _descriptor("weak", accuracy=0.5),
                _descriptor("pics", image=True)):
        assert not filter_datasets([bad])[0].accepted
    with pytest.raises(ValueError, match="misses fields"):
        filter_datasets([{"name": "x"}])


def test_config_validation():
    with pytest.raises(ValueError):
        PipelineConfig(modes=[])
    with pytest.raises(ValueError):
        PipelineConfig(modes=["pixels"])
    with pytest.raises(ValueError):
        PipelineConfig(k_range=(4, 2))
    with pytest.raises(ValueError):
        PipelineConfig(matcher="psychic")
    with pytest.raises(ValueError, match="unknown config keys"):
        PipelineConfig.from_dict({"sead": 1})
    with pytest.raises(ValueError, match="remote"):
        PipelineConfig(matcher="remote").backend()
    cfg = PipelineConfig.from_dict({"seed": 5, "k_range": [2, 3]})
    assert cfg.seed == 5 and tuple(cfg.k_range) == (2, 3)
    assert PipelineConfig(band=0.1).band_for(64) == 6
    assert PipelineConfig(band=4).band_for(64) == 4


def test_stage_seeds_are_stable_and_distinct():
    assert stage_seed(0, "a") == stage_seed(0, "a")
    assert len({stage_seed(s, st) for s in range(3) for st in ("a", "b")}) == 6


def test_prepare_normalizes_and_subsumes():
    train_ds, test = prepare(small_config(max_length=20))
    assert test.length == 20 and train_ds.length == 20
    np.testing.assert_allclose(test.series.mean(axis=1), 0.0, atol=1e-9)
    np.testing.assert_array_equal(test.binary_labels, test.original_labels % 2)


def test_build_mode_series_alignment(rng):
    signals, maps = rng.normal(size=(3, 10)), rng.uniform(size=(3, 10))
    assert build_mode_series(signals, None, "input").shape == (3, 10, 1)
    multi = build_mode_series(signals, maps, "multivariate")
    assert multi.shape == (3, 10, 2)
    np.testing.assert_array_equal(multi[:, :, 0], signals)
    for i in range(3):
        z = (maps[i] - maps[i].mean()) / maps[i].std()
        np.testing.assert_allclose(multi[i, :, 1], z)
    with pytest.raises(ValueError):
        build_mode_series(signals, None, "saliency")


def test_knowledge_graph_has_one_fault_per_class():
    _, test = prepare(small_config())
    kg = build_knowledge_graph(test, OfflineBackend())
    rows = all_fault_descriptions(kg)
    assert [r[0] for r in rows] == [f"class_{c}" for c in test.classes()]


def test_full_run_shape(full_report):
    assert len(full_report.clusterings) == 2 * len(MODES)
    assert {(e["class"], e["mode"]) for e in full_report.clusterings} == \
        {(c, m) for c in (0, 1) for m in MODES}
    assert full_report.error is None
    assert all(e["n"] > 0 and "error" not in e for e in full_report.clusterings)


def test_predicted_classes_partition_the_test_set(full_report):
    for mode in MODES:
        ids = [i for c in (0, 1) for i in full_report.entry(c, mode)["ids"]]
        assert len(ids) == len(set(ids)) == full_report.dataset["n_test"]


def test_matching_only_for_signal_modes(full_report):
    for e in full_report.clusterings:
        assert ("matching" in e) == (e["mode"] in ("input", "multivariate"))
        if "matching" in e:
            assert len(e["outcomes"]) == e["k"]
            assert e["matching"]["identified"] <= e["k"]


def test_report_json_round_trip(full_report):
    text = full_report.to_json()
    again = RunReport.from_json(text)
    assert again.to_json() == text
    assert "out_dir" not in json.loads(text)["config"]


def test_mode_gating(monkeypatch):
    calls = []
    real = pipeline.match_centroids

    def counting(*args, **kwargs):
        calls.append(1)
        return real(*args, **kwargs)

    def no_saliency(*args, **kwargs):
        raise AssertionError("saliency must not be computed in input-only mode")

    monkeypatch.setattr(pipeline, "match_centroids", counting)
    monkeypatch.setattr(pipeline, "saliency", no_saliency)
    report = run(small_config(modes=["input"]))
    assert len(report.clusterings) == 2
    assert len(calls) == 2


def test_emit_report_files(full_report, tmp_path):
    written = emit_report(full_report, tmp_path)
    names = {p.name for p in written}
    assert names == {"report.json", "clustering.csv", "uninformed.csv", "matching.csv",
                     "correlations.csv"}
    assert not list(tmp_path.glob("*.svg"))
    rows = (tmp_path / "clustering.csv").read_text().strip().splitlines()
    assert len(rows) == 1 + len(full_report.clusterings)
    header = (tmp_path / "uninformed.csv").read_text().splitlines()[0].split(",")
    assert header == ["class", "mode", *UNINFORMED]
    matching = (tmp_path / "matching.csv").read_text().strip().splitlines()
    assert matching[0].split(",")[2:4] == ["r_1", "r_2"]
    assert len(matching) == 1 + 4


def test_emit_report_plots(full_report, tmp_path):
    written = emit_report(full_report, tmp_path, plots=True)
    svgs = [p for p in written if p.suffix == ".svg"]
    assert len(svgs) == len(full_report.clusterings)
    assert all(p.read_text().lstrip().startswith("<?xml") for p in svgs)


def test_stage_error_persists_partial_report(tmp_path, monkeypatch):
    def broken(*args, **kwargs):
        raise RuntimeError("matcher exploded")

    monkeypatch.setattr(pipeline, "match_centroids", broken)
    with pytest.raises(StageError) as info:
        run(small_config(modes=["saliency", "input"], out_dir=str(tmp_path)))
    assert info.value.stage == "match[0,input]"
    saved = json.loads((tmp_path / "report.json").read_text())
    assert saved["error"]["stage"] == "match[0,input]"
    assert [e["mode"] for e in saved["clusterings"]] == ["saliency"]
    assert from_turtle((tmp_path / "knowledge_graph.ttl").read_text(encoding="utf-8"))


def test_external_saliency_is_ingested(tmp_path):
    cfg = small_config(modes=["multivariate"])
    _, test = prepare(cfg)
    maps = np.tile(np.linspace(0, 1, test.length), (len(test), 1))
    sal, preds = tmp_path / "s.csv", tmp_path / "p.txt"
    write_saliency_csv(maps, sal)
    flipped = 1 - test.binary_labels
    np.savetxt(preds, flipped, fmt="%d")
    report = run(small_config(modes=["multivariate"], saliency_path=str(sal),
                              predictions_path=str(preds)))
    assert report.dataset["test_accuracy"] is None
    expected = [test.ids[i] for i in np.flatnonzero(flipped == 0)]
    assert report.entry(0, "multivariate")["ids"] == expected


def test_external_saliency_shape_mismatch(tmp_path):
    sal = tmp_path / "s.csv"
    write_saliency_csv(np.zeros((2, 5)), sal)
    with pytest.raises(StageError) as info:
        run(small_config(modes=["saliency"], saliency_path=str(sal)))
    assert info.value.stage == "classify"


def test_discover_adds_matching():
    cfg = small_config(modes=["input"], seed=1)
    clustered = run(small_config(modes=["input"], seed=1, match=False))
    assert all("matching" not in e for e in clustered.clusterings)
    full = run(cfg)
    matched = discover(cfg, RunReport.from_json(clustered.to_json()))
    assert matched.clusterings == json.loads(full.to_json())["clusterings"]
