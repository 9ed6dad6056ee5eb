"""End-to-end orchestration: ingest, classify, cluster, match, evaluate, report."""

from __future__ import annotations

import csv
import hashlib
import json
import logging
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Sequence

import numpy as np

from . import fault_kg
from .dba import MODES, dba_kmeans, estimate_k
from .dtw import pairwise_matrix
from .matcher import (
    ChatClient,
    OfflineBackend,
    RemoteBackend,
    classify_outcome,
    describe_centroid,
    evaluate_matching,
    fault_name,
    majority_vote,
    match_centroids,
)
from .fault_kg import QualityFlags
from .metrics import (
    ari,
    dtw_frac,
    dtw_inter,
    dtw_intra,
    nmi,
    purity,
    silhouette_samples_dtw,
    size_entropy,
    spearman,
    var_i,
    var_s,
)
from .saliency_net import (
    Architecture,
    TrainConfig,
    predict_batch,
    read_saliency_csv,
    saliency,
    train,
)
from .synthetic import localized_subclass_dataset
from .ts_core import LabeledDataset, downsample, medoid, stack_channels, subsume_labels, z_normalize

__all__ = [
    "PipelineConfig",
    "RunReport",
    "StageError",
    "DatasetDescriptor",
    "FilterVerdict",
    "stage_seed",
    "load_ucr",
    "save_ucr",
    "filter_datasets",
    "prepare",
    "build_mode_series",
    "build_knowledge_graph",
    "run",
    "discover",
    "emit_report",
    "correlation_table",
    "UNINFORMED",
    "INFORMED",
]

log = logging.getLogger(__name__)

INFORMED = ("ari", "nmi", "purity")
UNINFORMED = ("dtw_intra", "dtw_inter", "dtw_frac", "silhouette", "size_entropy", "var_s", "var_i")
MATCHED_MODES = ("input", "multivariate")


def stage_seed(base: int, stage: str) -> int:
    """Stable 32-bit seed for a named stage."""
    digest = hashlib.sha256(f"{int(base)}:{stage}".encode()).digest()
    return int.from_bytes(digest[:4], "little")


# --- configuration ---------------------------------------------------------

@dataclass
class PipelineConfig:
    """Everything a run needs. Unset dataset paths select the synthetic demo set."""

    train_path: str | None = None
    test_path: str | None = None
    synthetic: dict = field(default_factory=lambda: {"per_class": 40, "length": 64})
    modes: list[str] = field(default_factory=lambda: list(MODES))
    max_length: int = 256
    classifier: dict = field(default_factory=lambda: {"epochs": 60, "learning_rate": 0.01,
                                                      "optimizer": "adam"})
    saliency_path: str | None = None
    predictions_path: str | None = None
    k_range: tuple[int, int] = (1, 10)
    n_init: int = 20
    kmeans_iter: int = 500
    dba_iter: int = 300
    # Sakoe-Chiba band: an int is absolute, a float below 1 a fraction of the length
    band: int | float | None = 0.1
    matcher: str = "offline"
    repetitions: int = 5
    threshold: float = 0.35
    remote: dict = field(default_factory=dict)
    min_silhouette: float = 0.25
    max_dtw_frac: float = 1.0
    match: bool = True
    seed: int = 0
    out_dir: str | None = None
    plots: bool = False

    def __post_init__(self):
        self.modes = list(self.modes)
        self.k_range = (int(self.k_range[0]), int(self.k_range[1]))
        self.validate()

    def validate(self) -> None:
        if not self.modes:
            raise ValueError("mode set must not be empty")
        bad = [m for m in self.modes if m not in MODES]
        if bad:
            raise ValueError(f"unknown modes {bad}; choose from {MODES}")
        for name in ("n_init", "kmeans_iter", "dba_iter", "repetitions", "max_length"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        lo, hi = self.k_range
        if lo < 1 or hi < lo:
            raise ValueError(f"invalid k range {self.k_range}")
        if self.band is not None and (self.band < 0 or (isinstance(self.band, float) and self.band >= 1)):
            raise ValueError("band must be a non-negative int or a fraction in [0, 1)")
        if self.matcher not in ("offline", "remote"):
            raise ValueError("matcher must be 'offline' or 'remote'")
        if self.saliency_path is None and self.predictions_path is not None:
            raise ValueError("predictions_path requires saliency_path")

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ValueError(f"unknown config keys: {unknown}")
        return cls(**data)

    @classmethod
    def from_json(cls, path) -> "PipelineConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["k_range"] = list(self.k_range)
        return d

    def band_for(self, length: int) -> int | None:
        if self.band is None:
            return None
        if isinstance(self.band, float):
            return int(round(self.band * length))
        return int(self.band)

    def backend(self):
        if self.matcher == "offline":
            return OfflineBackend(threshold=self.threshold)
        opts = dict(self.remote)
        if "base_url" not in opts or "model" not in opts:
            raise ValueError("remote matcher needs 'base_url' and 'model' in the remote section")
        return RemoteBackend(ChatClient(**opts))


class StageError(RuntimeError):
    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage
        self.detail = message


# --- UCR ingestion ----------------------------------------------------------

def load_ucr(path, split: str = "test") -> LabeledDataset:
    """Read a UCR-style file: class label first, then one value per column."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    rows = [line for line in text.splitlines() if line.strip()]
    if not rows:
        raise ValueError(f"{path}: empty file")
    labels, series = [], []
    width = None
    for idx, line in enumerate(rows):
        cells = [c for c in (line.split("\t") if "\t" in line else line.split(","))]
        try:
            values = [float(c) for c in cells]
        except ValueError as exc:
            raise ValueError(f"{path}: row {idx}: non-numeric cell") from exc
        if len(values) < 2:
            raise ValueError(f"{path}: row {idx}: needs a label and at least one value")
        if width is None:
            width = len(values)
        elif len(values) != width:
            raise ValueError(f"{path}: row {idx}: expected {width - 1} values, got {len(values) - 1}")
        if not np.all(np.isfinite(values)):
            raise ValueError(f"{path}: row {idx}: non-finite value")
        label = values[0]
        if label != int(label):
            raise ValueError(f"{path}: row {idx}: class label {label} is not an integer")
        labels.append(int(label))
        series.append(values[1:])
    labels = np.asarray(labels)
    uniq = np.unique(labels)
    if uniq.min() < 1:
        # shift so the smallest class becomes 1, keeping relative parity
        shift = 1 - uniq.min()
        shift += shift % 2
        labels = labels + shift
    return LabeledDataset(series=np.asarray(series), original_labels=labels, split=split)


def save_ucr(dataset: LabeledDataset, path, delimiter: str = "\t") -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for label, row in zip(dataset.original_labels, dataset.series):
            fh.write(delimiter.join([str(int(label))] + [repr(float(v)) for v in row]) + "\n")


# --- dataset selection --------------------------------------------------------

@dataclass
class DatasetDescriptor:
    name: str
    n_classes: int
    class_counts: list[int]
    length: int
    accuracy: float
    image_derived: bool

    @classmethod
    def from_dict(cls, data: dict) -> "DatasetDescriptor":
        missing = [f.name for f in fields(cls) if f.name not in data]
        if missing:
            raise ValueError(f"descriptor {data.get('name', '?')!r} misses fields {missing}")
        return cls(**{f.name: data[f.name] for f in fields(cls)})


@dataclass
class FilterVerdict:
    name: str
    checks: dict[str, bool]

    @property
    def accepted(self) -> bool:
        return all(self.checks.values())


def filter_datasets(metadata: Sequence[dict | DatasetDescriptor],
                    class_range: tuple[int, int] = (6, 16), min_per_class: int = 100,
                    min_length: int = 100, min_accuracy: float = 0.6) -> list[FilterVerdict]:
    """Apply the five selection criteria; every verdict lists each check."""
    out = []
    for item in metadata:
        d = item if isinstance(item, DatasetDescriptor) else DatasetDescriptor.from_dict(item)
        out.append(FilterVerdict(d.name, {
            "class_count": class_range[0] <= d.n_classes <= class_range[1],
            "samples_per_class": bool(d.class_counts) and min(d.class_counts) >= min_per_class,
            "length": d.length >= min_length,
            "accuracy": d.accuracy >= min_accuracy,
            "not_image_derived": not d.image_derived,
        }))
    return out


# --- stages -------------------------------------------------------------------

def _preprocess(ds: LabeledDataset, max_length: int) -> LabeledDataset:
    target = min(ds.length, max_length)
    series = np.stack([z_normalize(downsample(s, target)) for s in ds.series])
    binary = ds.binary_labels if ds.binary_labels is not None else subsume_labels(ds.original_labels)
    return LabeledDataset(series, ds.original_labels, binary, ds.split, list(ds.ids))


def prepare(config: PipelineConfig) -> tuple[LabeledDataset, LabeledDataset]:
    """Load (or synthesize), downsample, z-normalize and subsume labels."""
    if config.test_path:
        test = load_ucr(config.test_path, "test")
        train_ds = load_ucr(config.train_path, "train") if config.train_path else None
    else:
        opts = dict(config.synthetic)
        train_ds = localized_subclass_dataset(seed=stage_seed(config.seed, "data-train"),
                                              split="train", **opts)
        test = localized_subclass_dataset(seed=stage_seed(config.seed, "data-test"),
                                          split="test", **opts)
    test = _preprocess(test, config.max_length)
    if train_ds is not None:
        train_ds = _preprocess(train_ds, config.max_length)
        if train_ds.length != test.length:
            raise ValueError("train and test series have different lengths")
    return train_ds, test


def _classify(config: PipelineConfig, train_ds, test, need_saliency: bool):
    """Predicted classes and (optionally) heatmaps for the test split."""
    if config.saliency_path:
        maps = read_saliency_csv(config.saliency_path)
        if maps.shape != test.series.shape:
            raise ValueError(f"saliency maps {maps.shape} do not match test data {test.series.shape}")
        if config.predictions_path:
            preds = np.loadtxt(config.predictions_path, dtype=np.int64, ndmin=1)
            if preds.shape != (len(test),) or not np.isin(preds, (0, 1)).all():
                raise ValueError("predictions file must hold one 0/1 label per test series")
        else:
            log.warning("no predictions file; grouping by binary ground truth")
            preds = test.binary_labels.copy()
        return preds, maps, None
    if train_ds is None:
        raise ValueError("training split required when no external saliency is given")
    tc = TrainConfig(**{**config.classifier, "seed": stage_seed(config.seed, "classifier")})
    model = train(train_ds.series, train_ds.binary_labels, tc, Architecture(train_ds.length))
    preds = predict_batch(model, test.series)
    maps = saliency(model, test.series) if need_saliency else None
    accuracy = float(np.mean(preds == test.binary_labels))
    return preds, maps, accuracy


def build_mode_series(signals: np.ndarray, maps: np.ndarray | None, mode: str) -> np.ndarray:
    """Clustering input of shape ``(n, T, C)`` for one mode."""
    if mode == "input":
        return np.ascontiguousarray(signals[:, :, None])
    if maps is None:
        raise ValueError(f"mode {mode!r} needs saliency maps")
    z_maps = np.stack([z_normalize(m) for m in maps])
    if mode == "saliency":
        return np.ascontiguousarray(z_maps[:, :, None])
    return np.stack([stack_channels(s, m) for s, m in zip(signals, z_maps)])


def build_knowledge_graph(reference: LabeledDataset, backend, seed: int = 0) -> fault_kg.Graph:
    """One SensorFault per original class, described from its DTW medoid."""
    graph = fault_kg.Graph()
    for label in reference.classes():
        members = reference.series[reference.original_labels == label]
        idx = medoid(list(members), distance=None)
        desc = describe_centroid(backend, members[idx], seed=seed)
        fault_kg.add_fault(graph, fault_kg.SensorFault(
            id=str(label), name=fault_name(label), fault_desc=desc, severity="unknown"))
    return graph


def _uninformed(data, clustering, band) -> dict:
    labels = clustering.assignments
    cents = clustering.centroids
    members = [data[labels == j] for j in range(clustering.k)]
    present = [j for j in range(clustering.k) if len(members[j])]
    out = {
        "dtw_intra": float(np.mean([dtw_intra(members[j], cents[j], band) for j in present])),
        "size_entropy": float(size_entropy(labels)),
        "var_s": float(np.mean([var_s(members[j]) for j in present])),
        "var_i": float(np.mean([var_i(members[j], cents[j]) for j in present])),
        "dtw_inter": None,
        "dtw_frac": None,
        "silhouette": None,
        "cluster_dtw_frac": None,
        "cluster_silhouette": None,
    }
    if clustering.k >= 2:
        fracs = [dtw_frac(members[j], cents, j, band) for j in range(clustering.k)]
        out["dtw_inter"] = float(np.mean([dtw_inter(cents, j, band) for j in range(clustering.k)]))
        out["dtw_frac"] = float(np.mean(fracs))
        out["cluster_dtw_frac"] = [float(f) for f in fracs]
    if len(np.unique(labels)) >= 2:
        dist = pairwise_matrix(data, band)
        s = silhouette_samples_dtw(data, labels, dist)
        out["silhouette"] = float(s.mean())
        out["cluster_silhouette"] = [float(s[labels == j].mean()) if np.any(labels == j) else 0.0
                                     for j in range(clustering.k)]
    return out


def _finite(obj):
    # JSON has no inf/nan; such metric values become null
    if isinstance(obj, float):
        return obj if np.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _finite(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite(v) for v in obj]
    return obj


@dataclass
class RunReport:
    config: dict
    dataset: dict
    clusterings: list[dict] = field(default_factory=list)
    correlations: list[dict] = field(default_factory=list)
    error: dict | None = None

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(_finite(self.to_dict()), indent=2, sort_keys=True, allow_nan=False) + "\n"

    @classmethod
    def from_dict(cls, data: dict) -> "RunReport":
        return cls(**data)

    @classmethod
    def from_json(cls, text: str) -> "RunReport":
        return cls.from_dict(json.loads(text))

    def entry(self, cls_id: int, mode: str) -> dict:
        for e in self.clusterings:
            if e["class"] == cls_id and e["mode"] == mode:
                return e
        raise KeyError((cls_id, mode))


def correlation_table(entries: list[dict]) -> list[dict]:
    """Spearman rho and p of every uninformed metric against every informed one.

    Entries lacking a metric (or holding a non-finite value) are skipped for
    that pair; fewer than three usable entries leave rho and p unset.
    """
    out = []
    for u in UNINFORMED:
        for m in INFORMED:
            pairs = [(e["uninformed"][u], e["informed"][m]) for e in entries
                     if "uninformed" in e and e["uninformed"].get(u) is not None
                     and np.isfinite(e["uninformed"][u])]
            row = {"uninformed": u, "informed": m, "n": len(pairs), "rho": None, "p": None}
            if len(pairs) >= 3:
                try:
                    rho, p = spearman([a for a, _ in pairs], [b for _, b in pairs])
                    row["rho"], row["p"] = rho, p
                except ValueError:
                    pass
            out.append(row)
    return out


def _cluster_group(config, data, truth, mode, cls_id):
    seed = stage_seed(config.seed, f"cluster-{cls_id}-{mode}")
    band = config.band_for(data.shape[1])
    hi = min(config.k_range[1], len(data))
    lo = min(config.k_range[0], hi)
    curve = estimate_k(data, (lo, hi), seed=seed, n_init=config.n_init,
                       max_iter=config.kmeans_iter, dba_iter=config.dba_iter, band=band)
    clustering = dba_kmeans(data, curve.chosen_k, n_init=config.n_init,
                            max_iter=config.kmeans_iter, dba_iter=config.dba_iter,
                            seed=seed, band=band, mode=mode)
    entry = {
        "k": clustering.k,
        "k_true": int(len(np.unique(truth))),
        "sizes": clustering.sizes(),
        "inertia": float(clustering.inertia),
        "elbow": {"ks": curve.ks, "inertias": [float(v) for v in curve.inertias]},
        "assignments": clustering.assignments.tolist(),
        "informed": {"ari": ari(clustering.assignments, truth),
                     "nmi": nmi(clustering.assignments, truth),
                     "purity": purity(clustering.assignments, truth)},
        "uninformed": _uninformed(data, clustering, band),
        "centroids": clustering.centroids.tolist(),
    }
    return clustering, entry


def _match_entry(config, backend, kg, entry, truth, totals) -> None:
    """Match one clustering's centroids against the KG and score the result."""
    cls_id, mode = entry["class"], entry["mode"]
    centroids = np.asarray(entry["centroids"])
    assignments = np.asarray(entry["assignments"])
    k = len(centroids)
    runs = match_centroids(backend, centroids, fault_kg.all_fault_descriptions(kg),
                           repetitions=config.repetitions,
                           seed=stage_seed(config.seed, f"match-{cls_id}-{mode}"))
    final = majority_vote(runs)
    groups = [truth[assignments == j] for j in range(k)]
    nonempty = [j for j in range(k) if len(groups[j])]
    match_report = evaluate_matching([final[j] for j in nonempty],
                                     [groups[j] for j in nonempty], totals, runs)
    entry["matching"] = match_report.to_dict()
    entry["matching_table"] = match_report.table_row()
    u = entry["uninformed"]
    entry["outcomes"] = [asdict(classify_outcome(
        final[j],
        QualityFlags(
            None if u["cluster_silhouette"] is None else u["cluster_silhouette"][j],
            None if u["cluster_dtw_frac"] is None else u["cluster_dtw_frac"][j]),
        config.min_silhouette, config.max_dtw_frac)) for j in range(k)]


def discover(config: PipelineConfig, report: RunReport) -> RunReport:
    """Add matching results to a clustering-only report produced from ``config``."""
    stage = "load"
    try:
        train_ds, test = prepare(config)
        index = {sid: i for i, sid in enumerate(test.ids)}
        totals = {int(c): int(n) for c, n in zip(*np.unique(test.original_labels, return_counts=True))}
        stage = "knowledge_graph"
        backend = config.backend()
        reference = train_ds if train_ds is not None else test
        kg = build_knowledge_graph(reference, backend, stage_seed(config.seed, "kg"))
        for entry in report.clusterings:
            if entry["mode"] not in MATCHED_MODES or "centroids" not in entry:
                continue
            stage = f"match[{entry['class']},{entry['mode']}]"
            truth = test.original_labels[[index[i] for i in entry["ids"]]]
            _match_entry(config, backend, kg, entry, truth, totals)
    except Exception as exc:
        raise StageError(stage, str(exc)) from exc
    return report


def _persist_partial(config, report):
    if config.out_dir:
        out = Path(config.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(report.to_json(), encoding="utf-8")


def run(config: PipelineConfig) -> RunReport:
    """Execute the whole pipeline; stage failures raise :class:`StageError`.

    Results completed before a failure are written to ``out_dir`` (when set)
    with an ``error`` marker naming the stage.
    """
    # output location and plotting do not affect results, so they are not echoed
    params = {k: v for k, v in config.to_dict().items() if k not in ("out_dir", "plots")}
    report = RunReport(config=params, dataset={})
    stage = "load"
    try:
        train_ds, test = prepare(config)
        report.dataset = {"n_test": len(test), "length": test.length, "classes": test.classes(),
                          "n_train": 0 if train_ds is None else len(train_ds)}
        stage = "classify"
        need_maps = any(m != "input" for m in config.modes)
        preds, maps, accuracy = _classify(config, train_ds, test, need_maps)
        report.dataset["test_accuracy"] = accuracy
        stage = "knowledge_graph"
        backend = config.backend()
        kg = None
        if config.match and any(m in MATCHED_MODES for m in config.modes):
            reference = train_ds if train_ds is not None else test
            kg = build_knowledge_graph(reference, backend, stage_seed(config.seed, "kg"))
            if config.out_dir:
                Path(config.out_dir).mkdir(parents=True, exist_ok=True)
                (Path(config.out_dir) / "knowledge_graph.ttl").write_text(
                    fault_kg.to_turtle(kg), encoding="utf-8")
        totals = {int(c): int(n) for c, n in zip(*np.unique(test.original_labels, return_counts=True))}
        for cls_id in (0, 1):
            idx = np.flatnonzero(preds == cls_id)
            for mode in config.modes:
                base = {"class": cls_id, "mode": mode, "n": int(idx.size),
                        "ids": [test.ids[i] for i in idx]}
                if idx.size == 0:
                    report.clusterings.append({**base, "error": "no samples predicted in this class"})
                    continue
                stage = f"cluster[{cls_id},{mode}]"
                data = build_mode_series(test.series[idx], None if maps is None else maps[idx], mode)
                truth = test.original_labels[idx]
                clustering, entry = _cluster_group(config, data, truth, mode, cls_id)
                entry = {**base, **entry}
                if kg is not None and mode in MATCHED_MODES:
                    stage = f"match[{cls_id},{mode}]"
                    _match_entry(config, backend, kg, entry, truth, totals)
                report.clusterings.append(entry)
        stage = "correlation"
        report.correlations = correlation_table(report.clusterings)
    except Exception as exc:
        report.error = {"stage": stage, "message": f"{type(exc).__name__}: {exc}"}
        report.correlations = correlation_table(report.clusterings)
        _persist_partial(config, report)
        raise StageError(stage, str(exc)) from exc
    return report


# --- reporting ------------------------------------------------------------------

def _fmt(v):
    return "" if v is None else (f"{v:.6g}" if isinstance(v, float) else str(v))


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows([[_fmt(v) for v in r] for r in rows])


def _plot(entry: dict, path: Path) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    cents = np.asarray(entry["centroids"])
    fig, axes = plt.subplots(len(cents), 1, figsize=(6, 1.6 * len(cents)), squeeze=False)
    for j, (ax, c) in enumerate(zip(axes[:, 0], cents)):
        t = np.arange(c.shape[0])
        ax.plot(t, c[:, 0], color="black", lw=1.0)
        if c.shape[1] > 1:
            sal = c[:, 1]
            span = np.ptp(sal)
            weight = (sal - sal.min()) / span if span > 0 else np.zeros_like(sal)
            ax.scatter(t, c[:, 0], c=weight, cmap="Reds", s=8, vmin=0, vmax=1)
        ax.set_ylabel(f"c{j} (n={entry['sizes'][j]})", fontsize=7)
        ax.tick_params(labelsize=6)
    fig.suptitle(f"class {entry['class']}, {entry['mode']} mode", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def emit_report(report: RunReport, out_dir, formats: Sequence[str] = ("json", "csv"),
                plots: bool = False) -> list[Path]:
    """Write the report as JSON plus CSV tables; optionally SVG centroid plots."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from exc
    written = []
    if "json" in formats:
        path = out / "report.json"
        path.write_text(report.to_json(), encoding="utf-8")
        written.append(path)
    if "csv" in formats:
        rows = []
        for e in report.clusterings:
            if "error" in e:
                rows.append([e["class"], e["mode"], e["n"], None, None, None, None, None, None, e["error"]])
                continue
            inf = e["informed"]
            rows.append([e["class"], e["mode"], e["n"], e["k"], e["k_true"], inf["ari"], inf["nmi"],
                         inf["purity"], " ".join(map(str, e["sizes"])), ""])
        path = out / "clustering.csv"
        _write_csv(path, ["class", "mode", "n", "k", "k_true", "ari", "nmi", "purity", "sizes", "error"], rows)
        written.append(path)

        rows = [[e["class"], e["mode"]] + [e.get("uninformed", {}).get(u) for u in UNINFORMED]
                for e in report.clusterings]
        path = out / "uninformed.csv"
        _write_csv(path, ["class", "mode", *UNINFORMED], rows)
        written.append(path)

        reps = max([len(e["matching"]["runs"]) for e in report.clusterings if "matching" in e] or [0])
        header = ["class", "mode"] + [f"r_{i}" for i in range(1, reps + 1)] + \
            ["result", "ground_truth", "identified", "mean_coverage"]
        rows = []
        for e in report.clusterings:
            if "matching_table" not in e:
                continue
            t = e["matching_table"]
            rows.append([e["class"], e["mode"]] + [t.get(f"r_{i}", "") for i in range(1, reps + 1)]
                        + [t["result"], t["ground_truth"], t["identified"],
                           e["matching"]["mean_coverage"]])
        path = out / "matching.csv"
        _write_csv(path, header, rows)
        written.append(path)

        path = out / "correlations.csv"
        _write_csv(path, ["uninformed", "informed", "n", "rho", "p"],
                   [[c["uninformed"], c["informed"], c["n"], c["rho"], c["p"]] for c in report.correlations])
        written.append(path)
    if plots:
        for e in report.clusterings:
            if "centroids" in e:
                path = out / f"centroids_class{e['class']}_{e['mode']}.svg"
                _plot(e, path)
                written.append(path)
    return written
