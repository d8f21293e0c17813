"""Two-rater annotation storage, exclusion rules, and weighted Cohen's kappa.

Ratings live in an append-only JSONL log; the latest record per
(item, rater, metric) wins. Items where either rater marked an exclusion
("skip": corrective-guidance-only for specificity, positive-reinforcement-only
for actionability) are dropped before computing agreement.
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import MalformedInput, MissingCounterpartRating
from .jsonio import dumps_record, read_jsonl
from .judge import SCALES, SKIP, check_metric

WEIGHTINGS = ("linear", "quadratic")


@dataclass(frozen=True)
class Annotation:
    item_id: str
    rater_id: str
    metric: str
    value: int | str  # integer in scale or "skip"
    timestamp: float  # unix seconds

    def __post_init__(self):
        check_metric(self.metric)
        if self.value != SKIP:
            lo, hi = SCALES[self.metric]
            if not (isinstance(self.value, int) and lo <= self.value <= hi):
                raise MalformedInput(
                    f"{self.metric} value must be an integer in [{lo}, {hi}] or {SKIP!r}, got {self.value!r}"
                )


def annotation_record(ann: Annotation) -> dict:
    return {
        "item_id": ann.item_id,
        "rater_id": ann.rater_id,
        "metric": ann.metric,
        "value": ann.value,
        "timestamp": ann.timestamp,
    }


def annotation_from_record(rec: Mapping) -> Annotation:
    value = rec["value"]
    if isinstance(value, float) and value.is_integer():
        value = int(value)
    return Annotation(
        item_id=str(rec["item_id"]),
        rater_id=str(rec["rater_id"]),
        metric=str(rec["metric"]),
        value=value,
        timestamp=float(rec.get("timestamp", 0.0)),
    )


class RatingStore:
    """Append-only JSONL ratings log with last-write-wins materialization."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()
        self._latest: dict[tuple[str, str, str], Annotation] = {}
        if self.path.exists():
            for rec in read_jsonl(self.path):
                ann = annotation_from_record(rec)
                self._latest[(ann.item_id, ann.rater_id, ann.metric)] = ann

    def add(self, ann: Annotation) -> None:
        with self._lock:
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(dumps_record(annotation_record(ann)) + "\n")
            self._latest[(ann.item_id, ann.rater_id, ann.metric)] = ann

    def record(self, item_id: str, rater_id: str, metric: str, value) -> Annotation:
        ann = Annotation(item_id, rater_id, metric, value, timestamp=time.time())
        self.add(ann)
        return ann

    def annotations(self) -> list[Annotation]:
        with self._lock:
            return list(self._latest.values())

    def get(self, item_id: str, rater_id: str, metric: str) -> Annotation | None:
        return self._latest.get((item_id, rater_id, metric))

    def rated_items(self, rater_id: str, metric: str) -> set[str]:
        return {k[0] for k in self._latest if k[1] == rater_id and k[2] == metric}

    def raters(self, metric: str | None = None) -> list[str]:
        ids = {k[1] for k in self._latest if metric is None or k[2] == metric}
        return sorted(ids)


@dataclass(frozen=True)
class ItemPair:
    """One item's ratings from the two raters, in sorted rater-id order."""

    item_id: str
    a: int | str
    b: int | str


def collect_pairs(annotations: Iterable[Annotation], metric: str) -> list[ItemPair]:
    """Pair up the two raters' records per item; a missing counterpart is an error."""
    check_metric(metric)
    subset = [a for a in annotations if a.metric == metric]
    raters = sorted({a.rater_id for a in subset})
    if len(raters) != 2:
        raise MissingCounterpartRating(
            f"need exactly two raters for {metric}, found {raters or 'none'}"
        )
    by_item: dict[str, dict[str, Annotation]] = {}
    order: list[str] = []
    for ann in subset:
        if ann.item_id not in by_item:
            by_item[ann.item_id] = {}
            order.append(ann.item_id)
        by_item[ann.item_id][ann.rater_id] = ann
    missing = [item for item in order if len(by_item[item]) < 2]
    if missing:
        raise MissingCounterpartRating(
            f"items missing a counterpart rating for {metric}: {sorted(missing)}"
        )
    return [ItemPair(item, by_item[item][raters[0]].value, by_item[item][raters[1]].value) for item in order]


def filter_applicable(annotations: Iterable[Annotation], metric: str) -> list[ItemPair]:
    """Drop items either rater excluded; keep pairs where both rated numerically."""
    return [p for p in collect_pairs(annotations, metric) if p.a != SKIP and p.b != SKIP]


def _weight(i: int, j: int, k: int, weighting: str) -> float:
    base = abs(i - j) / (k - 1)
    return base * base if weighting == "quadratic" else base


def weighted_kappa_detail(
    a: Sequence[int], b: Sequence[int], k: int, weighting: str = "linear"
) -> tuple[float, bool]:
    """(kappa, degenerate). Degenerate marginals (both raters constant and
    equal) make the expected-disagreement denominator zero; kappa is 1.0 by
    convention then, and flagged."""
    if weighting not in WEIGHTINGS:
        raise ValueError(f"weighting must be one of {WEIGHTINGS}")
    if len(a) != len(b) or len(a) < 2:
        raise ValueError("need two rating vectors of equal length >= 2")
    if any(not 1 <= r <= k for r in list(a) + list(b)):
        raise ValueError(f"ratings must lie in [1, {k}]")
    if k < 2:
        return 1.0, True
    n = len(a)
    observed = [[0.0] * k for _ in range(k)]
    for ra, rb in zip(a, b):
        observed[ra - 1][rb - 1] += 1 / n
    marg_a = [sum(observed[i][j] for j in range(k)) for i in range(k)]
    marg_b = [sum(observed[i][j] for i in range(k)) for j in range(k)]
    num = den = 0.0
    for i in range(k):
        for j in range(k):
            w = _weight(i, j, k, weighting)
            num += w * observed[i][j]
            den += w * marg_a[i] * marg_b[j]
    if den == 0.0:
        return 1.0, True
    return 1.0 - num / den, False


def weighted_kappa(a: Sequence[int], b: Sequence[int], k: int, weighting: str = "linear") -> float:
    return weighted_kappa_detail(a, b, k, weighting)[0]


def disagreement_histogram(pairs: Sequence[ItemPair]) -> dict[int, int]:
    """|rating difference| -> item count over numerically-rated pairs."""
    hist: dict[int, int] = {}
    for p in pairs:
        delta = abs(int(p.a) - int(p.b))
        hist[delta] = hist.get(delta, 0) + 1
    return dict(sorted(hist.items()))


@dataclass(frozen=True)
class AgreementReport:
    metric: str
    weighting: str
    n_annotated: int
    n_retained: int
    kappa_weighted: float
    degenerate: bool
    disagreement_histogram: dict[int, int]

    def as_dict(self) -> dict:
        return {
            "metric": self.metric,
            "weighting": self.weighting,
            "n_annotated": self.n_annotated,
            "n_retained": self.n_retained,
            "kappa_weighted": self.kappa_weighted,
            "degenerate": self.degenerate,
            "disagreement_histogram": {str(k): v for k, v in self.disagreement_histogram.items()},
        }


def agreement_report(
    annotations: Iterable[Annotation], metric: str, weighting: str = "linear"
) -> AgreementReport:
    all_pairs = collect_pairs(annotations, metric)
    retained = [p for p in all_pairs if p.a != SKIP and p.b != SKIP]
    if len(retained) < 2:
        raise MalformedInput(
            f"need at least two retained items to compute kappa for {metric}, have {len(retained)}"
        )
    k = SCALES[metric][1]
    kappa, degenerate = weighted_kappa_detail(
        [int(p.a) for p in retained], [int(p.b) for p in retained], k, weighting
    )
    return AgreementReport(
        metric=metric,
        weighting=weighting,
        n_annotated=len(all_pairs),
        n_retained=len(retained),
        kappa_weighted=kappa,
        degenerate=degenerate,
        disagreement_histogram=disagreement_histogram(retained),
    )
