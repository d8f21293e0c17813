"""LLM refinement of raw ASR narrations into concise, anonymized commentary.

Irrelevant narrations (crowd noise, music, unintelligible chatter) come back
as an explicit skip marker rather than being dropped, so output cardinality
always matches input.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable

from .errors import GatewayError
from .gateway import ChatRequest, Gateway
from .ingest import ASRSegment

SKIP_TOKEN = "[SKIP]"

REFINE_MODEL = "phi-4"

REFINE_PROMPT = """\
You are an ASR refiner for a rock climbing competition. You take ASR inputs \
which may be noisy and not concise and output concise commentary. Replace \
named entities with general terms (e.g., “person”, “competition”). Focus on \
capturing the action, body parts, pose information, and quality of movement. \
If the input is unintelligible or contains only music or applause, return \
only: [SKIP].

Input:

ASR narration: {narration}

Output:

Cleaned narration:"""


@dataclass(frozen=True)
class RefinedCommentary:
    segment_id: str
    status: str  # kept | skipped | error
    text: str  # empty unless kept
    raw_llm_output: str


@dataclass
class RefineStats:
    total: int = 0
    kept: int = 0
    skipped: int = 0
    errors: int = 0
    empty_after_strip: int = 0

    @property
    def kept_fraction(self) -> float:
        return self.kept / self.total if self.total else 0.0

    def as_dict(self) -> dict:
        return {
            "total": self.total,
            "kept": self.kept,
            "skipped": self.skipped,
            "errors": self.errors,
            "empty_after_strip": self.empty_after_strip,
            "kept_fraction": self.kept_fraction,
        }


def build_refine_prompt(narration: str, model: str = REFINE_MODEL) -> ChatRequest:
    """Fill the refinement template; ends with the 'Cleaned narration:' cue."""
    if not narration.strip():
        raise ValueError("narration must be non-empty")
    return ChatRequest(
        model=model,
        system="",
        user=REFINE_PROMPT.format(narration=narration),
        temperature=0.0,
        max_tokens=256,
    )


@dataclass(frozen=True)
class ParsedRefinement:
    status: str  # kept | skipped
    text: str
    empty_after_strip: bool = False


_LABEL_RE = re.compile(r"^\s*cleaned narration:\s*", re.IGNORECASE)
_QUOTES = "\"'“”‘’"


def parse_refinement(raw: str) -> ParsedRefinement:
    """Classify assistant output as a kept commentary or a skip.

    The skip token is matched case-insensitively anywhere in the output;
    hosted models sometimes wrap it in prose. A kept response with no
    residual text after label/quote stripping degrades to a skip and is
    flagged for the warning counter.
    """
    if SKIP_TOKEN.lower() in raw.lower():
        return ParsedRefinement("skipped", "")
    text = _LABEL_RE.sub("", raw.strip()).strip().strip(_QUOTES).strip()
    if not text:
        return ParsedRefinement("skipped", "", empty_after_strip=True)
    return ParsedRefinement("kept", text)


def refine_corpus(
    segments: Iterable[ASRSegment],
    gateway: Gateway,
    parallelism: int = 4,
    model: str = REFINE_MODEL,
) -> tuple[list[RefinedCommentary], RefineStats]:
    """Refine every segment; one output record per input, in input order.

    Gateway failures become status=error records and the run continues.
    Re-running with a warm cache completes only the uncached items.
    """
    segs = list(segments)
    stats = RefineStats(total=len(segs))
    if not segs:
        return [], stats
    requests = [build_refine_prompt(seg.text, model=model) for seg in segs]
    results = gateway.complete_batch(requests, parallelism=parallelism)
    records: list[RefinedCommentary] = []
    for seg, result in zip(segs, results):
        if isinstance(result, GatewayError):
            stats.errors += 1
            records.append(RefinedCommentary(seg.segment_id, "error", "", str(result)))
            continue
        parsed = parse_refinement(result.text)
        if parsed.empty_after_strip:
            stats.empty_after_strip += 1
        if parsed.status == "kept":
            stats.kept += 1
        else:
            stats.skipped += 1
        records.append(RefinedCommentary(seg.segment_id, parsed.status, parsed.text, result.text))
    return records, stats


def refined_record(rec: RefinedCommentary) -> dict:
    return {
        "segment_id": rec.segment_id,
        "status": rec.status,
        "text": rec.text,
        "raw_llm_output": rec.raw_llm_output,
    }


def refined_from_records(records: Iterable[dict]) -> list[RefinedCommentary]:
    return [
        RefinedCommentary(r["segment_id"], r["status"], r["text"], r.get("raw_llm_output", ""))
        for r in records
    ]
