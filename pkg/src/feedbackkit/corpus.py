"""Unified training manifest over feedback, commentary and text-only sources.

Every supervision record becomes one TrainingExample in a single
autoregressive format; video examples carry a clip window and a frame count,
text-only examples carry neither. A reference next-token-prediction loss is
included for desk-scale checks of downstream training code.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .errors import DuplicateId, EmptyWindow, LengthMismatch, MalformedInput, MissingClip, ZeroProbabilityTarget
from .localize import ClipWindow

IMAGE_TOKEN = "<image>"
DEFAULT_FRAME_COUNT = 16
FEEDBACK_CLIP_STRATEGY = "feedback_pre4"

KINDS = ("feedback", "commentary", "text_only")
DOMAINS = ("basketball", "soccer", "climbing")
SPLITS = ("train", "val", "test")


@dataclass(frozen=True)
class TrainingExample:
    id: str
    kind: str
    domain: str
    clip: ClipWindow | None
    frame_count: int
    text: str
    split: str


@dataclass(frozen=True)
class SplitPlan:
    """Deterministic split assignment by stable hash of the record id."""

    seed: int = 0
    train: float = 0.8
    val: float = 0.1
    test: float = 0.1

    def __post_init__(self):
        total = self.train + self.val + self.test
        if not math.isclose(total, 1.0, abs_tol=1e-9):
            raise ValueError(f"split ratios must sum to 1, got {total}")
        if min(self.train, self.val, self.test) < 0:
            raise ValueError("split ratios must be non-negative")

    def assign(self, example_id: str) -> str:
        digest = hashlib.sha256(f"{self.seed}:{example_id}".encode("utf-8")).hexdigest()
        u = int(digest[:16], 16) / 2**64
        if u < self.train:
            return "train"
        if u < self.train + self.val:
            return "val"
        return "test"


def clip_from_feedback(timestamp_s: float) -> ClipWindow:
    """Window over the 4 seconds preceding a feedback timestamp."""
    if timestamp_s < 0:
        raise ValueError("timestamp_s must be non-negative")
    if timestamp_s == 0:
        raise EmptyWindow("feedback at t=0 has no preceding video")
    return ClipWindow("", max(0.0, timestamp_s - 4.0), timestamp_s, FEEDBACK_CLIP_STRATEGY)


def _require_text(record_id: str, text: str) -> str:
    if not text or not text.strip():
        raise MalformedInput(f"record {record_id!r} has empty text")
    return text


def assemble_manifest(
    feedback_src: Iterable[Mapping],
    commentary_src: Iterable[Mapping],
    text_src: Iterable[Mapping],
    split_plan: SplitPlan,
    frame_count: int = DEFAULT_FRAME_COUNT,
    commentary_domain: str = "climbing",
    text_domain: str = "climbing",
) -> tuple[list[TrainingExample], dict]:
    """Merge the three supervision sources into one manifest plus a counts report.

    Source order is preserved (feedback, then commentary, then text) so the
    manifest is byte-stable for fixed inputs and seed.
    """
    examples: list[TrainingExample] = []
    seen: set[str] = set()

    def check_id(example_id: str) -> str:
        if not example_id:
            raise MalformedInput("record is missing an id")
        if example_id in seen:
            raise DuplicateId(f"duplicate example id {example_id!r}")
        seen.add(example_id)
        return example_id

    for rec in feedback_src:
        example_id = check_id(str(rec.get("id", "")))
        if "timestamp_s" not in rec:
            raise MissingClip(f"feedback record {example_id!r} has no timestamp_s")
        window = clip_from_feedback(float(rec["timestamp_s"]))
        clip = ClipWindow(str(rec.get("video_id", "")), window.w_start, window.w_end, window.strategy)
        examples.append(
            TrainingExample(
                id=example_id,
                kind="feedback",
                domain=str(rec.get("domain", "")),
                clip=clip,
                frame_count=frame_count,
                text=_require_text(example_id, str(rec.get("feedback_text", ""))),
                split=split_plan.assign(example_id),
            )
        )

    for rec in commentary_src:
        example_id = check_id(str(rec.get("id", "")))
        if "w_start" not in rec or "w_end" not in rec:
            raise MissingClip(f"commentary record {example_id!r} has no clip window")
        clip = ClipWindow(
            str(rec.get("video_id", "")),
            float(rec["w_start"]),
            float(rec["w_end"]),
            str(rec.get("strategy", "exact")),
        )
        examples.append(
            TrainingExample(
                id=example_id,
                kind="commentary",
                domain=str(rec.get("domain", commentary_domain)),
                clip=clip,
                frame_count=frame_count,
                text=_require_text(example_id, str(rec.get("commentary", rec.get("text", "")))),
                split=split_plan.assign(example_id),
            )
        )

    for rec in text_src:
        example_id = check_id(str(rec.get("id", "")))
        examples.append(
            TrainingExample(
                id=example_id,
                kind="text_only",
                domain=str(rec.get("domain", text_domain)),
                clip=None,
                frame_count=0,
                text=_require_text(example_id, str(rec.get("text", ""))),
                split=split_plan.assign(example_id),
            )
        )

    return examples, manifest_counts(examples)


def manifest_counts(examples: Sequence[TrainingExample]) -> dict:
    by_split = {s: 0 for s in SPLITS}
    by_kind: dict[str, int] = {}
    detail: dict[str, int] = {}
    for ex in examples:
        by_split[ex.split] = by_split.get(ex.split, 0) + 1
        by_kind[ex.kind] = by_kind.get(ex.kind, 0) + 1
        key = f"{ex.kind}/{ex.domain}/{ex.split}"
        detail[key] = detail.get(key, 0) + 1
    return {
        "total": len(examples),
        "by_split": by_split,
        "by_kind": dict(sorted(by_kind.items())),
        "by_kind_domain_split": dict(sorted(detail.items())),
    }


def example_record(ex: TrainingExample) -> dict:
    rec = {
        "id": ex.id,
        "kind": ex.kind,
        "domain": ex.domain,
        "clip": None
        if ex.clip is None
        else {
            "video_id": ex.clip.video_id,
            "w_start": ex.clip.w_start,
            "w_end": ex.clip.w_end,
            "strategy": ex.clip.strategy,
        },
        "frame_count": ex.frame_count,
        "text": ex.text,
        "split": ex.split,
    }
    return rec


def examples_from_records(records: Iterable[Mapping]) -> list[TrainingExample]:
    out = []
    for r in records:
        clip = r.get("clip")
        window = (
            None
            if clip is None
            else ClipWindow(clip["video_id"], float(clip["w_start"]), float(clip["w_end"]), clip["strategy"])
        )
        out.append(
            TrainingExample(
                r["id"], r["kind"], r["domain"], window, int(r["frame_count"]), r["text"], r["split"]
            )
        )
    return out


def image_token_count(frame_count: int, tokens_per_frame: int = 1) -> int:
    if frame_count < 0 or tokens_per_frame < 1:
        raise ValueError("frame_count must be >= 0 and tokens_per_frame >= 1")
    return frame_count * tokens_per_frame


def render_token_sequence(ex: TrainingExample, tokens_per_frame: int = 1) -> str:
    """Token-level layout: visual placeholders (video kinds only), then text."""
    if ex.kind == "text_only":
        return ex.text
    return IMAGE_TOKEN * image_token_count(ex.frame_count, tokens_per_frame) + ex.text


def ntp_loss(
    predicted_dists: Sequence[Sequence[float]], target_ids: Sequence[int]
) -> float:
    """Mean cross-entropy over next-token positions.

    Each predicted distribution must sum to 1 within 1e-9. A zero-probability
    target signals infinite loss and raises instead of returning inf.
    """
    n = len(predicted_dists)
    if n == 0 or n != len(target_ids):
        raise LengthMismatch(
            f"need equal, non-zero lengths; got {n} distributions and {len(target_ids)} targets"
        )
    total = 0.0
    for pos, (dist, target) in enumerate(zip(predicted_dists, target_ids)):
        mass = math.fsum(dist)
        if abs(mass - 1.0) > 1e-9:
            raise ValueError(f"distribution at position {pos} sums to {mass}, not 1")
        if any(p < 0 for p in dist):
            raise ValueError(f"distribution at position {pos} has negative mass")
        if not 0 <= target < len(dist):
            raise ValueError(f"target id {target} out of vocabulary at position {pos}")
        p = dist[target]
        if p <= 0.0:
            raise ZeroProbabilityTarget(f"target {target} has zero probability at position {pos}")
        total += -math.log(p)
    return total / n
