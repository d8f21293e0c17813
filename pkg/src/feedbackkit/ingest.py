"""Caption/transcript ingestion: SRT, WebVTT and word-level JSON exports.

Produces canonical segment and word records, merges overlapping ASR chunks
and filters the video catalog by duration.
"""

from __future__ import annotations

import csv
import json
import re
import string
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .errors import (
    DuplicateId,
    EmptyFile,
    MalformedInput,
    MalformedTimestamp,
    MixedVideoIds,
    UnknownFormat,
)
from .jsonio import read_jsonl

CAPTION_FORMATS = ("srt", "vtt", "words_json")

DEFAULT_MIN_DURATION_S = 1200.0


@dataclass(frozen=True)
class VideoCatalogEntry:
    video_id: str
    duration_s: float
    channel: str = ""
    title: str = ""


@dataclass(frozen=True)
class ASRSegment:
    """One weakly-aligned transcript chunk."""

    video_id: str
    start_s: float
    end_s: float
    text: str

    @property
    def segment_id(self) -> str:
        return f"{self.video_id}:{round(self.start_s * 1000)}-{round(self.end_s * 1000)}"


@dataclass(frozen=True)
class WordTimestamp:
    word: str
    start_s: float
    end_s: float


def parse_segment_id(segment_id: str) -> tuple[str, float, float]:
    """Recover (video_id, start_s, end_s) from an ASRSegment.segment_id."""
    try:
        video_id, span = segment_id.rsplit(":", 1)
        start_ms, end_ms = span.split("-")
        return video_id, int(start_ms) / 1000.0, int(end_ms) / 1000.0
    except ValueError as exc:
        raise MalformedInput(f"bad segment id {segment_id!r}") from exc


_TIMESTAMP_RE = re.compile(r"(?:(\d{1,3}):)?(\d{1,2}):(\d{2})[.,](\d{1,3})")


def _parse_timestamp(token: str) -> float:
    """Convert [HH:]MM:SS(,|.)mmm to fractional seconds."""
    m = _TIMESTAMP_RE.fullmatch(token.strip())
    if not m:
        raise MalformedTimestamp(f"unparseable cue time {token!r}")
    hours = int(m.group(1)) if m.group(1) else 0
    millis = int(m.group(4).ljust(3, "0"))
    return hours * 3600 + int(m.group(2)) * 60 + int(m.group(3)) + millis / 1000.0


def _cue_times(line: str) -> tuple[float, float]:
    left, _, right = line.partition("-->")
    if not right:
        raise MalformedTimestamp(f"missing '-->' in cue line {line!r}")
    # VTT timing lines may carry cue settings after the end time.
    end_token = right.strip().split(" ")[0]
    start = _parse_timestamp(left)
    end = _parse_timestamp(end_token)
    if end <= start:
        raise MalformedTimestamp(f"cue end {end} not after start {start} in {line!r}")
    return start, end


_VTT_TAG_RE = re.compile(r"<[^>]*>")


def _blocks(text: str) -> list[list[str]]:
    blocks: list[list[str]] = []
    current: list[str] = []
    for raw in text.splitlines():
        line = raw.rstrip()
        if line.strip():
            current.append(line)
        elif current:
            blocks.append(current)
            current = []
    if current:
        blocks.append(current)
    return blocks


def _parse_srt(text: str, video_id: str) -> list[ASRSegment]:
    segments = []
    for block in _blocks(text):
        lines = list(block)
        if lines and lines[0].strip().isdigit() and "-->" not in lines[0]:
            lines = lines[1:]
        if not lines:
            continue
        start, end = _cue_times(lines[0])
        body = " ".join(part.strip() for part in lines[1:]).strip()
        if body:
            segments.append(ASRSegment(video_id, start, end, body))
    segments.sort(key=lambda s: (s.start_s, s.end_s))
    return segments


def _parse_vtt(text: str, video_id: str) -> list[ASRSegment]:
    blocks = _blocks(text)
    if blocks and blocks[0][0].startswith("WEBVTT"):
        blocks = blocks[1:]
    segments = []
    for block in blocks:
        head = block[0].strip()
        if head.startswith(("NOTE", "STYLE", "REGION")):
            continue
        lines = list(block)
        if "-->" not in lines[0]:
            lines = lines[1:]  # cue identifier
        if not lines or "-->" not in lines[0]:
            continue
        start, end = _cue_times(lines[0])
        body = " ".join(_VTT_TAG_RE.sub("", part).strip() for part in lines[1:]).strip()
        if body:
            segments.append(ASRSegment(video_id, start, end, body))
    segments.sort(key=lambda s: (s.start_s, s.end_s))
    return segments


def _parse_words_json(text: str) -> list[WordTimestamp]:
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedInput(f"words_json is not valid JSON: {exc}") from exc
    if not isinstance(payload, dict) or "words" not in payload:
        raise MalformedInput("words_json must be an object with a 'words' list")
    words = []
    for entry in payload["words"]:
        try:
            word = str(entry["word"])
            start = float(entry["start"])
            end = float(entry["end"])
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedTimestamp(f"bad word entry {entry!r}") from exc
        if end < start:
            raise MalformedTimestamp(f"word end {end} before start {start} in {entry!r}")
        words.append(WordTimestamp(word, start, end))
    words.sort(key=lambda w: (w.start_s, w.end_s))
    return words


def parse_captions(
    raw: bytes, format: str, video_id: str = ""
) -> list[ASRSegment] | list[WordTimestamp]:
    """Parse a caption/transcript export into canonical records.

    Returns ASRSegments for srt/vtt and WordTimestamps for words_json, sorted
    by start time. A UTF-8 byte-order mark is tolerated and stripped.
    """
    if format not in CAPTION_FORMATS:
        raise UnknownFormat(f"unknown caption format {format!r}")
    text = raw.decode("utf-8-sig")
    if not text.strip():
        raise EmptyFile("caption input is empty")
    if format == "srt":
        return _parse_srt(text, video_id)
    if format == "vtt":
        return _parse_vtt(text, video_id)
    return _parse_words_json(text)


_PUNCT_STRIP = str.maketrans("", "", string.punctuation)


def _norm_token(token: str) -> str:
    return token.translate(_PUNCT_STRIP).lower()


def _longest_token_overlap(words_a: Sequence[str], words_b: Sequence[str]) -> int:
    """Largest k with suffix(A) == prefix(B) under case/punctuation-insensitive match."""
    norm_a = [_norm_token(w) for w in words_a]
    norm_b = [_norm_token(w) for w in words_b]
    for k in range(min(len(norm_a), len(norm_b)), 0, -1):
        if norm_a[len(norm_a) - k :] == norm_b[:k]:
            return k
    return 0


def _merge_pair(a: ASRSegment, b: ASRSegment) -> ASRSegment:
    words_a = a.text.split()
    words_b = b.text.split()
    k = _longest_token_overlap(words_a, words_b)
    tail = words_b[k:]
    text = a.text if not tail else a.text + " " + " ".join(tail)
    return ASRSegment(a.video_id, min(a.start_s, b.start_s), max(a.end_s, b.end_s), text)


def merge_overlaps(segments: Sequence[ASRSegment]) -> list[ASRSegment]:
    """Merge time-overlapping segments, dropping repeated text at the join.

    Output spans never overlap; a merged segment covers the union of its
    inputs and concatenates their texts with the longest case-insensitive
    suffix/prefix token duplication removed.
    """
    if not segments:
        return []
    video_ids = {s.video_id for s in segments}
    if len(video_ids) > 1:
        raise MixedVideoIds(f"segments span videos {sorted(video_ids)}")
    ordered = sorted(segments, key=lambda s: (s.start_s, s.end_s))
    merged = [ordered[0]]
    for seg in ordered[1:]:
        if seg.start_s < merged[-1].end_s:
            merged[-1] = _merge_pair(merged[-1], seg)
        else:
            merged.append(seg)
    return merged


def filter_catalog(
    catalog: Sequence[VideoCatalogEntry], min_duration_s: float = DEFAULT_MIN_DURATION_S
) -> list[VideoCatalogEntry]:
    """Keep entries at least min_duration_s long, preserving order."""
    if min_duration_s < 0:
        raise ValueError("min_duration_s must be non-negative")
    return [entry for entry in catalog if entry.duration_s >= min_duration_s]


def read_catalog(path: str | Path) -> list[VideoCatalogEntry]:
    """Load a video catalog from CSV or JSONL; video ids must be unique."""
    path = Path(path)
    entries: list[VideoCatalogEntry] = []
    if path.suffix.lower() == ".csv":
        with open(path, newline="", encoding="utf-8-sig") as fh:
            for row in csv.DictReader(fh):
                entries.append(
                    VideoCatalogEntry(
                        video_id=row["video_id"],
                        duration_s=float(row["duration_s"]),
                        channel=row.get("channel", ""),
                        title=row.get("title", ""),
                    )
                )
    else:
        for rec in read_jsonl(path):
            entries.append(
                VideoCatalogEntry(
                    video_id=rec["video_id"],
                    duration_s=float(rec["duration_s"]),
                    channel=rec.get("channel", ""),
                    title=rec.get("title", ""),
                )
            )
    seen: set[str] = set()
    for entry in entries:
        if entry.video_id in seen:
            raise DuplicateId(f"duplicate video_id {entry.video_id!r} in catalog")
        seen.add(entry.video_id)
    return entries


def segment_record(segment: ASRSegment) -> dict:
    return asdict(segment)


def word_record(word: WordTimestamp) -> dict:
    return asdict(word)


def segments_from_records(records: Iterable[dict]) -> list[ASRSegment]:
    return [
        ASRSegment(r["video_id"], float(r["start_s"]), float(r["end_s"]), r["text"])
        for r in records
    ]


def words_from_records(records: Iterable[dict]) -> list[WordTimestamp]:
    return [WordTimestamp(r["word"], float(r["start_s"]), float(r["end_s"])) for r in records]
