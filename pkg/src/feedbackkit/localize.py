"""Precise localization of refined commentary and clip-window derivation.

Each refined commentary is matched against word-level timestamps to a short
span (nominally 1-4 s, accepted band 0.5-6.0 s). Fixed-length training
windows are derived from spans under several strategies; a sliding-window
baseline skips localization entirely.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .errors import GatewayError, NoValidSpans, UnparseableJSON
from .gateway import ChatRequest, Gateway
from .ingest import ASRSegment, WordTimestamp, parse_segment_id
from .refine import RefinedCommentary

LOCALIZE_MODEL = "phi-4"

MIN_SPAN_S = 0.5
MAX_SPAN_S = 6.0
SEGMENT_SLACK_S = 1.0  # spans may poke this far past either segment edge

WINDOW_STRATEGIES = ("exact", "pre3_post1", "pre4_start", "pre4_end")
SLIDE_STRATEGY = "slide"

LOCALIZE_PROMPT = """\
You are an ASR refiner for rock climbing competition commentary. Your task is \
to match cleaned, anonymized commentary with corresponding timestamps in noisy \
ASR input. The ASR input consists of transcriptions with word-level \
timestamps. Your goal is to determine when each action in the cleaned \
commentary occurs in the ASR by finding the most relevant timestamps. Each \
action should be localized to a 1s–4s time span based on matching words and \
phrases. If an exact match is unavailable, use the closest approximation. Do \
not return timestamps for unintelligible sections (music, applause, \
background noise). Ensure all timestamps are precise and correspond to the \
moment when the action is happening.

Format the output as a structured list where each commentary line is paired \
with its estimated time range (corresponding 1s–4s range) in the ASR. Please \
be concise.

Example output format:

[
  {{"commentary": "The climber hooks the toe on the right and pulls himself up.", "timestamp": (47.8, 49.66)}},
  {{"commentary": "He reaches for the next hold.", "timestamp": (50.5, 52.3)}}
]

Return only the JSON list—no other explanations, markdown, or formatting characters.

ASR with word-level timestamps: {whisper_transcript}
Refined commentary: {refined_commentary}

Output:"""


@dataclass(frozen=True)
class LocalizedSpan:
    segment_id: str
    video_id: str
    commentary: str
    t_start: float  # absolute seconds
    t_end: float


@dataclass(frozen=True)
class ClipWindow:
    video_id: str
    w_start: float
    w_end: float
    strategy: str


@dataclass(frozen=True)
class SpanParse:
    spans: list[LocalizedSpan]
    dropped: int


def render_transcript(words: Sequence[WordTimestamp]) -> str:
    return " ".join(f"{w.word}[{w.start_s:.2f}-{w.end_s:.2f}]" for w in words)


def build_localize_prompt(
    words: Sequence[WordTimestamp], refined: str, model: str = LOCALIZE_MODEL
) -> ChatRequest:
    """Fill the localization template; word times are relative to segment start."""
    if not words:
        raise ValueError("word list must be non-empty")
    if not refined.strip():
        raise ValueError("refined commentary must be non-empty")
    return ChatRequest(
        model=model,
        system="",
        user=LOCALIZE_PROMPT.format(
            whisper_transcript=render_transcript(words), refined_commentary=refined
        ),
        temperature=0.0,
        max_tokens=512,
    )


_FENCE_RE = re.compile(r"^```[a-zA-Z]*\s*|\s*```$")


def _extract_list_text(raw: str) -> str:
    text = _FENCE_RE.sub("", raw.strip()).strip()
    start = text.find("[")
    end = text.rfind("]")
    if start == -1 or end == -1 or end <= start:
        raise UnparseableJSON(f"no JSON list found in output: {text[:80]!r}")
    # the prompt's example shows tuple-style timestamps; normalize to JSON
    return text[start : end + 1].replace("(", "[").replace(")", "]")


def parse_spans(raw: str, segment: ASRSegment) -> SpanParse:
    """Parse assistant output into absolute, clamped spans for one segment.

    Timestamps are treated as offsets from the segment start. Spans are
    clamped into the segment's +/-1 s band and to at most 6 s; spans shorter
    than 0.5 s after clamping, inverted spans, and malformed items are
    dropped and counted.
    """
    normalized = _extract_list_text(raw)
    try:
        items = json.loads(normalized)
    except json.JSONDecodeError as exc:
        raise UnparseableJSON(f"span list is not valid JSON after normalization: {exc}") from exc
    if not isinstance(items, list):
        raise UnparseableJSON("span payload is not a list")

    lo = segment.start_s - SEGMENT_SLACK_S
    hi = segment.end_s + SEGMENT_SLACK_S
    spans: list[LocalizedSpan] = []
    dropped = 0
    for item in items:
        try:
            commentary = str(item["commentary"]).strip()
            a, b = (float(x) for x in item["timestamp"])
        except (TypeError, KeyError, ValueError):
            dropped += 1
            continue
        if not commentary or b <= a:
            dropped += 1
            continue
        t_start = max(segment.start_s + a, lo)
        t_end = min(segment.start_s + b, hi)
        if t_end - t_start < MIN_SPAN_S:
            dropped += 1
            continue
        if t_end - t_start > MAX_SPAN_S:
            t_end = t_start + MAX_SPAN_S
        spans.append(LocalizedSpan(segment.segment_id, segment.video_id, commentary, t_start, t_end))
    if not spans:
        exc = NoValidSpans(f"no spans survived validation ({dropped} dropped)")
        exc.dropped = dropped
        raise exc
    return SpanParse(spans, dropped)


def apply_window(span: LocalizedSpan, strategy: str) -> ClipWindow:
    """Derive a training window from a span; negative starts are clamped to 0
    with the end shifted to preserve length."""
    t0, t1 = span.t_start, span.t_end
    if strategy == "exact":
        w = (t0, t1)
    elif strategy == "pre3_post1":
        w = (t0 - 3.0, t0 + 1.0)
    elif strategy == "pre4_start":
        w = (t0 - 4.0, t0)
    elif strategy == "pre4_end":
        w = (t0 - 4.0, t1)
    else:
        raise ValueError(f"unknown window strategy {strategy!r}")
    start, end = w
    if start < 0:
        end += -start
        start = 0.0
    return ClipWindow(span.video_id, start, end, strategy)


def slide_windows(
    segment: ASRSegment, clip_len_s: float = 4.0, stride_s: float = 1.0
) -> list[ClipWindow]:
    """Fixed-length windows marching through the segment.

    A segment shorter than clip_len_s yields one window covering the whole
    segment so its commentary is never silently dropped.
    """
    if clip_len_s <= 0 or stride_s <= 0:
        raise ValueError("clip_len_s and stride_s must be positive")
    length = segment.end_s - segment.start_s
    if length < clip_len_s:
        return [ClipWindow(segment.video_id, segment.start_s, segment.end_s, SLIDE_STRATEGY)]
    count = math.floor((length - clip_len_s + 1e-9) / stride_s) + 1
    return [
        ClipWindow(
            segment.video_id,
            segment.start_s + i * stride_s,
            segment.start_s + i * stride_s + clip_len_s,
            SLIDE_STRATEGY,
        )
        for i in range(count)
    ]


@dataclass
class LocalizeStats:
    segments_in: int = 0
    localized: int = 0
    spans: int = 0
    dropped_spans: int = 0
    no_valid_spans: int = 0
    unparseable: int = 0
    no_words: int = 0
    gateway_errors: int = 0

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def select_segment_words(
    words: Sequence[WordTimestamp], segment: ASRSegment
) -> list[WordTimestamp]:
    """Words overlapping the segment's slack band, rebased to segment start."""
    lo = segment.start_s - SEGMENT_SLACK_S
    hi = segment.end_s + SEGMENT_SLACK_S
    return [
        WordTimestamp(w.word, round(w.start_s - segment.start_s, 3), round(w.end_s - segment.start_s, 3))
        for w in words
        if w.end_s >= lo and w.start_s <= hi
    ]


def localize_corpus(
    refined: Iterable[RefinedCommentary],
    words_by_video: Mapping[str, Sequence[WordTimestamp]],
    gateway: Gateway,
    parallelism: int = 4,
    model: str = LOCALIZE_MODEL,
) -> tuple[list[LocalizedSpan], LocalizeStats]:
    """Localize every kept commentary; span order follows input order."""
    stats = LocalizeStats()
    jobs: list[tuple[RefinedCommentary, ASRSegment]] = []
    requests: list[ChatRequest] = []
    for rec in refined:
        if rec.status != "kept":
            continue
        stats.segments_in += 1
        video_id, start_s, end_s = parse_segment_id(rec.segment_id)
        segment = ASRSegment(video_id, start_s, end_s, rec.text)
        segment_words = select_segment_words(words_by_video.get(video_id, ()), segment)
        if not segment_words:
            stats.no_words += 1
            continue
        jobs.append((rec, segment))
        requests.append(build_localize_prompt(segment_words, rec.text, model=model))

    spans: list[LocalizedSpan] = []
    if not jobs:
        return spans, stats
    results = gateway.complete_batch(requests, parallelism=parallelism)
    for (rec, segment), result in zip(jobs, results):
        if isinstance(result, GatewayError):
            stats.gateway_errors += 1
            continue
        try:
            parse = parse_spans(result.text, segment)
        except NoValidSpans as exc:
            stats.no_valid_spans += 1
            stats.dropped_spans += getattr(exc, "dropped", 0)
            continue
        except UnparseableJSON:
            stats.unparseable += 1
            continue
        stats.localized += 1
        stats.spans += len(parse.spans)
        stats.dropped_spans += parse.dropped
        spans.extend(parse.spans)
    return spans, stats


def span_record(span: LocalizedSpan) -> dict:
    return {
        "segment_id": span.segment_id,
        "video_id": span.video_id,
        "commentary": span.commentary,
        "t_start": span.t_start,
        "t_end": span.t_end,
    }


def spans_from_records(records: Iterable[dict]) -> list[LocalizedSpan]:
    return [
        LocalizedSpan(
            r["segment_id"], r["video_id"], r["commentary"], float(r["t_start"]), float(r["t_end"])
        )
        for r in records
    ]
