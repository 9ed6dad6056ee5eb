"""Symbolic approximation of centroids and fuzzy matching against the KG.

Two backends share one interface:

* :class:`OfflineBackend` extracts shape features (trend per third, peak and
  valley counts and positions, energy distribution, sharp spikes), renders
  them as prose, and matches by cosine similarity of term-frequency vectors
  over the controlled feature vocabulary. It is deterministic.
* :class:`RemoteBackend` sends the same requests to a chat-completion
  endpoint through :class:`ChatClient`.
"""

from __future__ import annotations

import json
import logging
import os
import re
import time
from collections import Counter
from dataclasses import asdict, dataclass, field
from importlib import resources
from typing import Callable, Protocol, Sequence

import httpx
import numpy as np
from scipy.ndimage import median_filter
from scipy.signal import find_peaks

from .fault_kg import DiscoveryOutcome, QualityFlags

__all__ = [
    "OfflineBackend",
    "RemoteBackend",
    "ChatClient",
    "LLMError",
    "DescriptionError",
    "MatchRun",
    "MatchReport",
    "QualityFlags",
    "DiscoveryOutcome",
    "shape_features",
    "describe_centroid",
    "match_centroids",
    "majority_vote",
    "evaluate_matching",
    "classify_outcome",
    "format_assignments",
    "fault_name",
    "VOCABULARY",
]

log = logging.getLogger(__name__)

ABSTAIN = None
POSITIONS = ("start", "middle", "end")
COUNT_WORDS = ("no", "one", "two", "three")
_NUMERIC = re.compile(r"\d")


def fault_name(label) -> str:
    """KG name used for an original class id."""
    return f"class_{label}"


def _build_vocabulary() -> frozenset[str]:
    words = {"flat", "monotonic-increase", "monotonic-decrease"}
    for pos in POSITIONS:
        words |= {f"rising-{pos}", f"falling-{pos}", f"level-{pos}", f"peak-{pos}",
                  f"valley-{pos}", f"energy-{pos}", f"spike-up-{pos}", f"spike-down-{pos}"}
    for count in COUNT_WORDS + ("many",):
        words |= {f"{count}-peaks", f"{count}-valleys"}
    return frozenset(words)


VOCABULARY = _build_vocabulary()


# --- offline shape description ---------------------------------------------

def _smooth(x, width):
    width = max(1, int(width)) | 1
    if width == 1 or x.size < width:
        return x.copy()
    pad = width // 2
    padded = np.pad(x, pad, mode="edge")
    return np.convolve(padded, np.ones(width) / width, mode="valid")


def _position(index, n):
    return POSITIONS[min(2, int(3 * index / max(n, 1)))]


def _count_word(n, noun):
    return f"{COUNT_WORDS[n] if n < len(COUNT_WORDS) else 'many'}-{noun}"


def shape_features(signal) -> list[str]:
    """Controlled-vocabulary shape tags for one univariate signal."""
    x = np.asarray(signal, dtype=np.float64).ravel()
    if x.size == 0 or not np.all(np.isfinite(x)):
        raise ValueError("centroid must be a non-empty finite series")
    span = float(np.ptp(x))
    if span <= 1e-9 * max(1.0, float(np.abs(x).max())):
        return ["flat"]
    n = x.size
    smooth = _smooth(x, max(3, n // 16))
    tags = []

    steps = np.diff(smooth)
    slack = 0.02 * span
    if n >= 2 and smooth[-1] - smooth[0] > 0.5 * span and np.all(steps >= -slack):
        tags.append("monotonic-increase")
    elif n >= 2 and smooth[0] - smooth[-1] > 0.5 * span and np.all(steps <= slack):
        tags.append("monotonic-decrease")

    for pos, part in zip(POSITIONS, np.array_split(smooth, 3)):
        change = part[-1] - part[0] if part.size > 1 else 0.0
        if change > 0.15 * span:
            tags.append(f"rising-{pos}")
        elif change < -0.15 * span:
            tags.append(f"falling-{pos}")
        else:
            tags.append(f"level-{pos}")

    for noun, sign in (("peaks", 1.0), ("valleys", -1.0)):
        idx, props = find_peaks(sign * smooth, prominence=0.25 * span)
        tags.append(_count_word(len(idx), noun))
        if len(idx):
            top = idx[int(np.argmax(props["prominences"]))]
            tags.append(f"{'peak' if sign > 0 else 'valley'}-{_position(top, n)}")

    centered = x - x.mean()
    energy = [float((part ** 2).sum()) for part in np.array_split(centered, 3)]
    tags.append(f"energy-{POSITIONS[int(np.argmax(energy))]}")

    # a median filter removes narrow excursions but keeps broader waves;
    # light smoothing first keeps single-sample glitches from counting
    lightly = _smooth(x, 3)
    residual = lightly - median_filter(lightly, size=max(5, n // 9) | 1, mode="nearest")
    scale = 1.4826 * np.median(np.abs(residual - np.median(residual)))
    top = int(np.argmax(np.abs(residual)))
    if abs(residual[top]) > max(4.0 * scale, 0.1 * span):
        direction = "up" if residual[top] > 0 else "down"
        tags.append(f"spike-{direction}-{_position(top, n)}")
    return tags


_PHRASES = {
    "flat": "The signal is flat throughout.",
    "monotonic-increase": "It increases steadily from beginning to end.",
    "monotonic-decrease": "It decreases steadily from beginning to end.",
}


def _render(tags: Sequence[str]) -> str:
    sentences = [_PHRASES[t] for t in tags if t in _PHRASES]
    trend = [t for t in tags if t.split("-")[0] in ("rising", "falling", "level")]
    if trend:
        words = {"rising": "rises", "falling": "falls", "level": "stays level"}
        parts = [f"{words[t.split('-')[0]]} at the {t.split('-')[1]}" for t in trend]
        sentences.append("The signal " + ", ".join(parts[:-1]) + f" and {parts[-1]}."
                         if len(parts) > 1 else f"The signal {parts[0]}.")
    for noun in ("peaks", "valleys"):
        count = next((t for t in tags if t.endswith(f"-{noun}")), None)
        where = next((t for t in tags if t.startswith(noun[:-1] + "-")), None)
        if count:
            text = f"It shows {count.split('-')[0]} {noun}"
            if where:
                text += f", the most pronounced near the {where.split('-')[1]}"
            sentences.append(text + ".")
    energy = next((t for t in tags if t.startswith("energy-")), None)
    if energy:
        sentences.append(f"Most of its variation sits at the {energy.split('-')[1]}.")
    spike = next((t for t in tags if t.startswith("spike-")), None)
    if spike:
        _, direction, pos = spike.split("-")
        kind = "upward spike" if direction == "up" else "downward dip"
        sentences.append(f"A sharp {kind} stands out at the {pos}.")
    sentences.append("Features: " + ", ".join(tags) + ".")
    return " ".join(sentences)


def feature_terms(text: str) -> Counter:
    """Term frequencies of vocabulary words found in ``text``."""
    tokens = re.findall(r"[a-z]+(?:-[a-z]+)*", text.lower())
    return Counter(t for t in tokens if t in VOCABULARY)


def _idf(documents: Sequence[Counter]) -> dict[str, float]:
    # smoothed inverse document frequency over the catalog
    n = len(documents)
    df = Counter(t for doc in documents for t in doc)
    return {t: float(np.log((1 + n) / (1 + df[t])) + 1.0) for t in VOCABULARY}


def _cosine(a: Counter, b: Counter, weights: dict[str, float] | None = None) -> float:
    if not a or not b:
        return 0.0
    w = weights or {}
    va = {t: c * w.get(t, 1.0) for t, c in a.items()}
    vb = {t: c * w.get(t, 1.0) for t, c in b.items()}
    dot = sum(va[t] * vb[t] for t in va.keys() & vb.keys())
    norm = np.sqrt(sum(v * v for v in va.values()) * sum(v * v for v in vb.values()))
    return float(dot / norm)


# --- backends ----------------------------------------------------------------

class MatchingBackend(Protocol):
    def describe(self, signal, seed: int = 0) -> str: ...

    def match(self, descriptions: Sequence[str], catalog: Sequence[tuple[str, str]],
              seed: int = 0) -> list[str | None]: ...


@dataclass
class OfflineBackend:
    """Deterministic describer and cosine-similarity matcher.

    Term frequencies are weighted by their inverse document frequency over
    the catalog, so features shared by every fault count less than the ones
    that set a fault apart.
    """

    threshold: float = 0.35

    def describe(self, signal, seed: int = 0) -> str:
        return _render(shape_features(signal))

    def match(self, descriptions, catalog, seed: int = 0):
        kg = [(name, feature_terms(desc)) for name, desc in sorted(catalog)]
        weights = _idf([terms for _, terms in kg])
        out = []
        for text in descriptions:
            terms = feature_terms(text)
            best_name, best_sim = ABSTAIN, -1.0
            for name, kg_terms in kg:
                sim = _cosine(terms, kg_terms, weights)
                if sim > best_sim:
                    best_name, best_sim = name, sim
            out.append(best_name if best_sim >= self.threshold else ABSTAIN)
        return out


class LLMError(RuntimeError):
    def __init__(self, message: str, attempts: list[str]):
        super().__init__(f"{message} (attempts: {'; '.join(attempts)})")
        self.attempts = attempts


class DescriptionError(RuntimeError):
    pass


@dataclass
class ChatClient:
    """Minimal chat-completion client with retry and exponential backoff."""

    base_url: str
    model: str
    api_key_env: str = "SUBCLASS_DISCOVERY_API_KEY"
    temperature: float = 1.0
    max_retries: int = 5
    backoff: float = 1.0
    timeout: float = 120.0
    transport: httpx.BaseTransport | None = None
    sleep: Callable[[float], None] = time.sleep

    def complete(self, messages: list[dict]) -> str:
        headers = {"Content-Type": "application/json"}
        token = os.environ.get(self.api_key_env)
        if token:
            headers["Authorization"] = f"Bearer {token}"
        body = {"model": self.model, "messages": messages, "temperature": self.temperature}
        url = self.base_url.rstrip("/") + "/chat/completions"
        attempts: list[str] = []
        with httpx.Client(timeout=self.timeout, transport=self.transport) as client:
            for attempt in range(self.max_retries + 1):
                try:
                    resp = client.post(url, json=body, headers=headers)
                except httpx.TransportError as exc:
                    attempts.append(f"#{attempt}: {type(exc).__name__}")
                else:
                    if resp.status_code == 200:
                        try:
                            return resp.json()["choices"][0]["message"]["content"]
                        except (KeyError, IndexError, ValueError) as exc:
                            raise LLMError("malformed completion response", attempts) from exc
                    attempts.append(f"#{attempt}: HTTP {resp.status_code}")
                    if resp.status_code != 429 and resp.status_code < 500:
                        raise LLMError("request rejected", attempts)
                if attempt < self.max_retries:
                    self.sleep(self.backoff * 2 ** attempt)
        raise LLMError("retries exhausted", attempts)


def load_prompt(name: str, version: int = 1) -> str:
    return resources.files(__package__).joinpath(f"prompts/{name}_v{version}.txt").read_text(
        encoding="utf-8")


@dataclass
class RemoteBackend:
    client: ChatClient
    prompt_version: int = 1

    def describe(self, signal, seed: int = 0) -> str:
        values = ", ".join(f"{v:.3f}" for v in np.asarray(signal, dtype=np.float64).ravel())
        prompt = load_prompt("describe", self.prompt_version).format(
            length=len(np.ravel(signal)), values=f"[{values}]")
        return self.client.complete([{"role": "user", "content": prompt}]).strip()

    def match(self, descriptions, catalog, seed: int = 0):
        names = {name for name, _ in catalog}
        prompt = load_prompt("match", self.prompt_version).format(
            catalog="\n".join(f"{name}: {desc}" for name, desc in catalog),
            signals="\n".join(f"{i}: {d}" for i, d in enumerate(descriptions)),
        )
        reply = self.client.complete([{"role": "user", "content": prompt}])
        found = re.search(r"\[.*\]", reply, re.DOTALL)
        try:
            picks = json.loads(found.group()) if found else []
        except json.JSONDecodeError:
            picks = []
        if len(picks) != len(descriptions):
            log.warning("matcher reply did not cover every signal: %r", reply[:200])
            picks = (list(picks) + [ABSTAIN] * len(descriptions))[: len(descriptions)]
        return [p if isinstance(p, str) and p in names else ABSTAIN for p in picks]


# --- protocol ------------------------------------------------------------------

def describe_centroid(backend: MatchingBackend, centroid, seed: int = 0) -> str:
    """Shape description of a centroid's signal channel.

    Descriptions containing digits are rejected; one retry is allowed.
    """
    c = np.asarray(centroid, dtype=np.float64)
    signal = c[:, 0] if c.ndim == 2 else c
    for attempt in range(2):
        text = backend.describe(signal, seed=seed + attempt)
        if not _NUMERIC.search(text):
            return text
        log.warning("description contained numeric tokens, attempt %d", attempt + 1)
    raise DescriptionError("description kept echoing numeric values")


@dataclass
class MatchRun:
    repetition: int
    assignments: list[str | None]
    descriptions: list[str] = field(default_factory=list)


def match_centroids(backend: MatchingBackend, centroids, kg_descriptions,
                    repetitions: int = 5, seed: int = 0) -> list[MatchRun]:
    """Describe and match every centroid, ``repetitions`` times.

    ``kg_descriptions`` holds ``(name, fault_desc, ...)`` rows as returned by
    :func:`fault_kg.all_fault_descriptions`.
    """
    catalog = [(row[0], row[1]) for row in kg_descriptions]
    if not catalog:
        raise ValueError("knowledge graph holds no fault descriptions")
    if len(centroids) == 0:
        raise ValueError("no centroids to match")
    runs = []
    for r in range(repetitions):
        run_seed = seed + 1000 * r
        descriptions = [describe_centroid(backend, c, seed=run_seed) for c in centroids]
        assignments = backend.match(descriptions, catalog, seed=run_seed)
        runs.append(MatchRun(r + 1, list(assignments), descriptions))
    return runs


def majority_vote(runs: Sequence[MatchRun | Sequence]) -> list[str | None]:
    """Most frequent non-abstaining pick per centroid.

    Abstentions count only when every run abstained. Ties go to the
    lexicographically smallest name.
    """
    rows = [r.assignments if isinstance(r, MatchRun) else list(r) for r in runs]
    if not rows:
        raise ValueError("need at least one run")
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise ValueError("runs cover different numbers of centroids")
    final = []
    for i in range(width):
        votes = Counter(r[i] for r in rows if r[i] is not ABSTAIN)
        if not votes:
            final.append(ABSTAIN)
            continue
        top = max(votes.values())
        final.append(min(name for name, count in votes.items() if count == top))
    return final


def format_assignments(assignments: Sequence[str | None],
                       strip: str = "class_") -> str:
    """Render picks like ``<3,2,_,7>``."""
    cells = ["_" if a is ABSTAIN else str(a).removeprefix(strip) for a in assignments]
    return "<" + ",".join(cells) + ">"


@dataclass
class MatchReport:
    final: list[str | None]
    dominant: list[int]
    dominant_fraction: list[float]
    identified: int
    identified_labels: list[int]
    precision: dict[int, tuple[int, int]]
    mean_coverage: float
    runs: list[MatchRun] = field(default_factory=list)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["precision"] = {str(k): list(v) for k, v in self.precision.items()}
        d["runs"] = [{"repetition": r.repetition, "assignments": r.assignments}
                     for r in self.runs]
        return d

    def table_row(self) -> dict[str, str]:
        """Columns r_1..r_R, result, ground truth and identified."""
        row = {f"r_{run.repetition}": format_assignments(run.assignments) for run in self.runs}
        row["result"] = format_assignments(self.final)
        row["ground_truth"] = "<" + ",".join(str(d) for d in self.dominant) + ">"
        row["identified"] = f"{self.identified}/{len(self.final)}"
        return row


def evaluate_matching(final: Sequence[str | None], cluster_labels: Sequence,
                      class_totals: dict[int, int], runs: Sequence[MatchRun] = (),
                      name_of: Callable[[int], str] = fault_name) -> MatchReport:
    """Score matched centroids against each cluster's dominant ground-truth class.

    A subclass counts as identified when some cluster dominated by it was
    matched to its name. Its precision is the number of its samples inside
    such clusters over its total count in the split; the mean coverage is
    the average precision over identified subclasses (0 when none).
    """
    if len(final) != len(cluster_labels):
        raise ValueError("one assignment per cluster is required")
    dominant, fraction = [], []
    captured: dict[int, int] = {}
    for pick, labels in zip(final, cluster_labels):
        labels = np.asarray(labels)
        if labels.size == 0:
            raise ValueError("cannot evaluate an empty cluster")
        values, counts = np.unique(labels, return_counts=True)
        top = int(values[np.argmax(counts)])
        dominant.append(top)
        fraction.append(float(counts.max() / labels.size))
        if pick is not ABSTAIN and pick == name_of(top):
            captured[top] = captured.get(top, 0) + int(counts.max())
    precision = {}
    for label in sorted(captured):
        total = int(class_totals.get(label, 0))
        if total < captured[label]:
            raise ValueError(f"class total for {label} is smaller than its captured samples")
        precision[label] = (captured[label], total)
    coverage = float(np.mean([c / t for c, t in precision.values()])) if precision else 0.0
    return MatchReport(
        final=list(final),
        dominant=dominant,
        dominant_fraction=fraction,
        identified=len(precision),
        identified_labels=sorted(precision),
        precision=precision,
        mean_coverage=coverage,
        runs=list(runs),
    )


def classify_outcome(assignment: str | None, flags: QualityFlags,
                     min_silhouette: float = 0.25, max_dtw_frac: float = 1.0) -> DiscoveryOutcome:
    """Knowledge discovery if matched; otherwise pattern or no discovery by cluster quality.

    Every quality flag that is present must pass its threshold; with no
    flags at all the cluster cannot be vouched for.
    """
    if assignment is not ABSTAIN:
        return DiscoveryOutcome("knowledge", assignment, flags)
    checks = []
    if flags.silhouette is not None:
        checks.append(flags.silhouette >= min_silhouette)
    if flags.dtw_frac is not None:
        checks.append(flags.dtw_frac <= max_dtw_frac)
    kind = "pattern" if checks and all(checks) else "none"
    return DiscoveryOutcome(kind, None, flags)
