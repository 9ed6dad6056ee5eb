"""Small 1-D CNN binary classifier with Grad-CAM saliency maps.

Architecture: two same-padded convolutions with ReLU, global average
pooling over time and a dense two-logit head. Convolutions plus global
pooling are translation invariant, so by default the input is split into
two position-gated channels, ``x * (1 - c) / 2`` and ``x * (1 + c) / 2`` with
``c`` a ramp from -1 to 1. The channels sum to the signal, and a pattern's
location changes which channel carries it.

Everything is plain numpy with hand-written backpropagation.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

__all__ = [
    "Architecture",
    "ConvClassifier",
    "SaliencySource",
    "ExternalSaliency",
    "TrainConfig",
    "train",
    "predict",
    "predict_batch",
    "saliency",
    "gradient_check",
    "save_checkpoint",
    "load_checkpoint",
    "write_saliency_csv",
    "read_saliency_csv",
]

log = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "subclass-discovery/conv-classifier"
CHECKPOINT_VERSION = 1
PARAM_NAMES = ("w1", "b1", "w2", "b2", "wd", "bd")


@dataclass(frozen=True)
class Architecture:
    length: int
    filters: tuple[int, int] = (8, 8)
    kernel: int = 7
    position_gating: bool = True
    activation: str = "relu"  # "linear" only for testing

    def __post_init__(self):
        if self.kernel % 2 != 1:
            raise ValueError("kernel width must be odd for same padding")
        if self.activation not in ("relu", "linear"):
            raise ValueError(f"unknown activation {self.activation!r}")

    @property
    def in_channels(self) -> int:
        return 2 if self.position_gating else 1


def _act(z, kind):
    return np.maximum(z, 0.0) if kind == "relu" else z


def _act_grad(z, kind):
    return (z > 0).astype(z.dtype) if kind == "relu" else np.ones_like(z)


def _conv(x, w, b):
    """Same-padded 1-D convolution: x (B, C, T), w (F, C, K) -> (B, F, T)."""
    pad = w.shape[2] // 2
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad)))
    windows = sliding_window_view(xp, w.shape[2], axis=2)  # (B, C, T, K)
    return np.einsum("bctk,fck->bft", windows, w, optimize=True) + b[None, :, None], windows


def _conv_backward(dz, windows, w):
    dw = np.einsum("bft,bctk->fck", dz, windows, optimize=True)
    db = dz.sum(axis=(0, 2))
    k = w.shape[2]
    pad = k // 2
    t = dz.shape[2]
    dxp = np.zeros((dz.shape[0], w.shape[1], t + k - 1))
    for i in range(k):
        dxp[:, :, i:i + t] += np.einsum("bft,fc->bct", dz, w[:, :, i], optimize=True)
    return dw, db, dxp[:, :, pad:pad + t]


@dataclass
class ConvClassifier:
    arch: Architecture
    params: dict[str, np.ndarray] = field(default_factory=dict)

    @classmethod
    def initialize(cls, arch: Architecture, seed: int = 0) -> "ConvClassifier":
        rng = np.random.default_rng(seed)
        f1, f2 = arch.filters
        k, c = arch.kernel, arch.in_channels
        params = {
            "w1": rng.normal(0.0, np.sqrt(2.0 / (c * k)), (f1, c, k)),
            "b1": np.zeros(f1),
            "w2": rng.normal(0.0, np.sqrt(2.0 / (f1 * k)), (f2, f1, k)),
            "b2": np.zeros(f2),
            "wd": rng.normal(0.0, np.sqrt(1.0 / f2), (2, f2)),
            "bd": np.zeros(2),
        }
        return cls(arch, params)

    def copy(self) -> "ConvClassifier":
        return ConvClassifier(self.arch, {k: v.copy() for k, v in self.params.items()})

    def n_params(self) -> int:
        return int(sum(v.size for v in self.params.values()))

    def _inputs(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == 1:
            x = x[None, :]
        if x.shape[-1] != self.arch.length:
            raise ValueError(
                f"series length {x.shape[-1]} does not match model input length {self.arch.length}"
            )
        x = x[:, None, :]
        if self.arch.position_gating:
            ramp = np.linspace(-1.0, 1.0, self.arch.length)
            x = np.concatenate([x * (1.0 - ramp) / 2.0, x * (1.0 + ramp) / 2.0], axis=1)
        return x

    def forward(self, x):
        """Logits ``(B, 2)`` and the cache needed by :meth:`backward`."""
        p, kind = self.params, self.arch.activation
        inp = self._inputs(x)
        z1, win1 = _conv(inp, p["w1"], p["b1"])
        a1 = _act(z1, kind)
        z2, win2 = _conv(a1, p["w2"], p["b2"])
        a2 = _act(z2, kind)
        pooled = a2.mean(axis=2)
        logits = pooled @ p["wd"].T + p["bd"]
        cache = dict(inp=inp, z1=z1, win1=win1, z2=z2, win2=win2, a2=a2, pooled=pooled)
        return logits, cache

    def backward(self, cache, dlogits):
        """Parameter gradients for an upstream gradient ``dlogits`` (B, 2).

        Also returns the gradient with respect to the last conv feature map
        (post-activation) under key ``"a2"``.
        """
        p, kind = self.params, self.arch.activation
        grads = {"wd": dlogits.T @ cache["pooled"], "bd": dlogits.sum(axis=0)}
        dpooled = dlogits @ p["wd"]
        t = cache["a2"].shape[2]
        da2 = np.repeat(dpooled[:, :, None] / t, t, axis=2)
        grads["a2"] = da2
        dz2 = da2 * _act_grad(cache["z2"], kind)
        grads["w2"], grads["b2"], da1 = _conv_backward(dz2, cache["win2"], p["w2"])
        dz1 = da1 * _act_grad(cache["z1"], kind)
        grads["w1"], grads["b1"], _ = _conv_backward(dz1, cache["win1"], p["w1"])
        return grads

    def predict_proba(self, x) -> np.ndarray:
        logits, _ = self.forward(x)
        return _softmax(logits)

    def saliency(self, x, target_class=None) -> np.ndarray:
        return saliency(self, x, target_class)


def _softmax(logits):
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _loss_and_grad(model, x, y):
    logits, cache = model.forward(x)
    probs = _softmax(logits)
    n = len(y)
    loss = -np.mean(np.log(probs[np.arange(n), y] + 1e-300))
    dlogits = probs.copy()
    dlogits[np.arange(n), y] -= 1.0
    dlogits /= n
    return loss, model.backward(cache, dlogits)


class SaliencySource(Protocol):
    """What the pipeline needs from a classifier: predictions and heatmaps."""

    def predict_proba(self, x) -> np.ndarray: ...

    def saliency(self, x, target_class=None) -> np.ndarray: ...


@dataclass
class ExternalSaliency:
    """Predictions and heatmaps produced elsewhere, e.g. by a stronger model."""

    maps: np.ndarray
    predictions: np.ndarray

    def predict_proba(self, x) -> np.ndarray:
        x = np.asarray(x)
        n = 1 if x.ndim == 1 else len(x)
        if n != len(self.predictions):
            raise ValueError("external predictions do not cover the given series")
        return np.eye(2)[self.predictions]

    def saliency(self, x, target_class=None) -> np.ndarray:
        return self.maps


@dataclass
class TrainConfig:
    epochs: int = 30
    batch_size: int = 16
    learning_rate: float = 0.05
    validation_fraction: float = 0.2
    seed: int = 0
    optimizer: str = "sgd"  # "sgd" or "adam"

    def __post_init__(self):
        if self.optimizer not in ("sgd", "adam"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")


def _accuracy(model, x, y) -> float:
    if len(y) == 0:
        return 0.0
    return float(np.mean(predict_batch(model, x) == y))


def train(series, labels, config: TrainConfig | None = None,
          arch: Architecture | None = None) -> ConvClassifier:
    """Fit a classifier with mini-batch gradient descent on cross-entropy.

    A stratified validation split is held out (seeded); the parameters with
    the best validation accuracy seen after any epoch are returned.
    """
    config = config or TrainConfig()
    x = np.asarray(series, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    if x.ndim != 2 or len(x) != len(y):
        raise ValueError("series must be (n, length) with one label per series")
    if len(np.unique(y)) < 2:
        raise ValueError("training needs both classes present")
    if not np.isin(y, (0, 1)).all():
        raise ValueError("labels must be 0 or 1")
    arch = arch or Architecture(length=x.shape[1])
    rng = np.random.default_rng(config.seed)
    model = ConvClassifier.initialize(arch, seed=int(rng.integers(2**32)))

    val_idx = []
    for cls in (0, 1):
        idx = np.flatnonzero(y == cls)
        rng.shuffle(idx)
        val_idx.extend(idx[: int(round(config.validation_fraction * len(idx)))])
    val_mask = np.zeros(len(y), dtype=bool)
    val_mask[val_idx] = True
    if val_mask.all() or not val_mask.any():
        val_mask[:] = False
    x_tr, y_tr = x[~val_mask], y[~val_mask]
    x_va, y_va = (x[val_mask], y[val_mask]) if val_mask.any() else (x_tr, y_tr)

    best, best_acc = model.copy(), _accuracy(model, x_va, y_va)
    moments = {name: (np.zeros_like(v), np.zeros_like(v)) for name, v in model.params.items()}
    beta1, beta2, step = 0.9, 0.999, 0
    for epoch in range(config.epochs):
        order = rng.permutation(len(y_tr))
        for start in range(0, len(order), config.batch_size):
            batch = order[start:start + config.batch_size]
            loss, grads = _loss_and_grad(model, x_tr[batch], y_tr[batch])
            step += 1
            for name in PARAM_NAMES:
                g = grads[name]
                if config.optimizer == "adam":
                    m, v = moments[name]
                    m *= beta1
                    m += (1 - beta1) * g
                    v *= beta2
                    v += (1 - beta2) * g * g
                    g = (m / (1 - beta1 ** step)) / (np.sqrt(v / (1 - beta2 ** step)) + 1e-8)
                model.params[name] -= config.learning_rate * g
        acc = _accuracy(model, x_va, y_va)
        log.debug("epoch %d loss %.4f val_acc %.3f", epoch, loss, acc)
        if acc > best_acc:
            best, best_acc = model.copy(), acc
    return best


def predict_batch(model, x) -> np.ndarray:
    return np.argmax(model.predict_proba(x), axis=1)


def predict(model, series) -> tuple[int, np.ndarray]:
    """Class and class probabilities for one z-normalized series."""
    probs = model.predict_proba(np.asarray(series, dtype=np.float64)[None, :])[0]
    return int(np.argmax(probs)), probs


def _minmax(cam):
    lo, hi = cam.min(axis=-1, keepdims=True), cam.max(axis=-1, keepdims=True)
    span = hi - lo
    out = np.zeros_like(cam)
    ok = span[..., 0] > 0
    out[ok] = (cam[ok] - lo[ok]) / span[ok]
    # constant positive map: every step equally relevant
    out[(~ok) & (hi[..., 0] > 0)] = 1.0
    return out


def saliency(model: ConvClassifier, series, target_class=None) -> np.ndarray:
    """Grad-CAM heatmap(s) in [0, 1] with the length of the input.

    Channel weights are the temporal means of the target logit's gradient
    with respect to the last conv feature map; the map is the ReLU of the
    weighted feature-map sum, min-max rescaled. ``target_class`` defaults to
    the predicted class. Accepts one series or a batch.
    """
    x = np.asarray(series, dtype=np.float64)
    single = x.ndim == 1
    logits, cache = model.forward(x)
    n = logits.shape[0]
    if target_class is None:
        target = np.argmax(logits, axis=1)
    else:
        target = np.broadcast_to(np.asarray(target_class, dtype=np.int64), (n,))
    dlogits = np.zeros_like(logits)
    dlogits[np.arange(n), target] = 1.0
    da2 = model.backward(cache, dlogits)["a2"]
    weights = da2.mean(axis=2)  # (B, F)
    cam = np.maximum(np.einsum("bf,bft->bt", weights, cache["a2"]), 0.0)
    if cam.shape[1] != model.arch.length:
        grid = np.linspace(0.0, cam.shape[1] - 1, model.arch.length)
        cam = np.stack([np.interp(grid, np.arange(cam.shape[1]), c) for c in cam])
    cam = _minmax(cam)
    return cam[0] if single else cam


def gradient_check(model: ConvClassifier, series, label: int = 0, step: float = 1e-4) -> float:
    """Max relative error between backprop and central finite differences.

    Relative error per parameter is ``|a - n| / max(|a| + |n|, 1e-8)``.
    """
    x = np.asarray(series, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    y = np.full(len(x), label, dtype=np.int64)
    _, grads = _loss_and_grad(model, x, y)
    worst = 0.0
    for name in PARAM_NAMES:
        param = model.params[name]
        flat = param.reshape(-1)
        numeric = np.empty_like(flat)
        for i in range(flat.size):
            old = flat[i]
            flat[i] = old + step
            plus, _ = _loss_and_grad(model, x, y)
            flat[i] = old - step
            minus, _ = _loss_and_grad(model, x, y)
            flat[i] = old
            numeric[i] = (plus - minus) / (2 * step)
        analytic = grads[name].reshape(-1)
        err = np.abs(analytic - numeric) / np.maximum(np.abs(analytic) + np.abs(numeric), 1e-8)
        worst = max(worst, float(err.max()))
    return worst


def save_checkpoint(model: ConvClassifier, path) -> None:
    doc = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "architecture": {
            "length": model.arch.length,
            "filters": list(model.arch.filters),
            "kernel": model.arch.kernel,
            "position_gating": model.arch.position_gating,
            "activation": model.arch.activation,
        },
        "params": {
            name: {"shape": list(model.params[name].shape),
                   "values": model.params[name].ravel().tolist()}
            for name in PARAM_NAMES
        },
    }
    Path(path).write_text(json.dumps(doc), encoding="utf-8")


def load_checkpoint(path) -> ConvClassifier:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"{path}: not a classifier checkpoint")
    if doc.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {doc.get('version')}")
    a = doc["architecture"]
    arch = Architecture(length=a["length"], filters=tuple(a["filters"]), kernel=a["kernel"],
                        position_gating=a["position_gating"], activation=a["activation"])
    params = {
        name: np.asarray(entry["values"], dtype=np.float64).reshape(entry["shape"])
        for name, entry in doc["params"].items()
    }
    missing = set(PARAM_NAMES) - set(params)
    if missing:
        raise ValueError(f"{path}: checkpoint lacks parameters {sorted(missing)}")
    return ConvClassifier(arch, params)


def write_saliency_csv(maps, path) -> None:
    """One row per series, one column per time step."""
    maps = np.atleast_2d(np.asarray(maps, dtype=np.float64))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        for row in maps:
            writer.writerow([repr(float(v)) for v in row])


def read_saliency_csv(path) -> np.ndarray:
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row:
                continue
            try:
                rows.append([float(v) for v in row])
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: non-numeric saliency value") from exc
    if not rows:
        raise ValueError(f"{path}: no saliency rows")
    if len({len(r) for r in rows}) != 1:
        raise ValueError(f"{path}: saliency rows differ in length")
    maps = np.asarray(rows)
    if maps.min() < 0.0 or maps.max() > 1.0:
        raise ValueError(f"{path}: saliency values must lie in [0, 1]")
    return maps
