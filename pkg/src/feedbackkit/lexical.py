"""Classical lexical overlap metrics, implemented from scratch.

BLEU-4, METEOR (exact + stem alignment), ROUGE-L and a greedy-matching
BERTScore over a pluggable token embedder. All scores live in [0, 1];
reports multiply by 100 at the edge.
"""

from __future__ import annotations

import hashlib
import math
import statistics
from collections import Counter
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Sequence

from .errors import EmbedderFailure, MalformedInput
from .stem import porter_stem

LEXICAL_METRICS = ("bleu4", "meteor", "rouge_l", "bertscore")

# METEOR parameters: harmonic-mean weight and fragmentation penalty shape.
_METEOR_ALPHA = 0.9
_METEOR_BETA = 3
_METEOR_GAMMA = 0.5


@dataclass(frozen=True)
class ScorePair:
    id: str
    candidate: str
    reference: str

    def __post_init__(self):
        if not self.candidate.strip() or not self.reference.strip():
            raise MalformedInput(f"pair {self.id!r} has an empty side")


@dataclass(frozen=True)
class CorpusScore:
    metric: str
    mean: float
    std: float
    n_runs: int


def tokenize(text: str) -> list[str]:
    """Lowercase, split punctuation into standalone tokens, split whitespace."""
    out: list[str] = []
    word: list[str] = []
    for ch in text.lower():
        if ch.isalnum() or ch == "_":
            word.append(ch)
        else:
            if word:
                out.append("".join(word))
                word = []
            if not ch.isspace():
                out.append(ch)
    if word:
        out.append("".join(word))
    return out


def make_pairs(predictions: Iterable[Mapping], references: Iterable[Mapping]) -> list[ScorePair]:
    """Join prediction and reference records on id, in prediction order."""
    refs = {}
    for rec in references:
        rid = str(rec["id"])
        if rid in refs:
            raise MalformedInput(f"duplicate reference id {rid!r}")
        refs[rid] = str(rec["text"])
    pairs = []
    for rec in predictions:
        rid = str(rec["id"])
        if rid not in refs:
            raise MalformedInput(f"prediction {rid!r} has no reference")
        pairs.append(ScorePair(rid, str(rec["text"]), refs.pop(rid)))
    if refs:
        raise MalformedInput(f"references without predictions: {sorted(refs)}")
    return pairs


# ---------------------------------------------------------------- BLEU-4


def ngram_counts(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def clipped_overlap(cand_tokens: Sequence[str], ref_tokens: Sequence[str], n: int) -> tuple[int, int]:
    """(clipped matching n-grams, total candidate n-grams)."""
    cand = ngram_counts(cand_tokens, n)
    ref = ngram_counts(ref_tokens, n)
    clipped = sum(min(count, ref[gram]) for gram, count in cand.items())
    return clipped, sum(cand.values())


def _brevity_penalty(cand_len: int, ref_len: int) -> float:
    if cand_len == 0:
        return 0.0
    if cand_len > ref_len:
        return 1.0
    return math.exp(1.0 - ref_len / cand_len)


def bleu4(pairs: Sequence[ScorePair], mode: str = "corpus") -> float:
    """Corpus BLEU with pooled clipped counts, or mean of +1-smoothed sentence BLEU."""
    if not pairs:
        raise MalformedInput("bleu4 needs at least one pair")
    if mode == "corpus":
        clipped = [0] * 4
        totals = [0] * 4
        cand_len = ref_len = 0
        for pair in pairs:
            cand = tokenize(pair.candidate)
            ref = tokenize(pair.reference)
            cand_len += len(cand)
            ref_len += len(ref)
            for n in range(1, 5):
                c, t = clipped_overlap(cand, ref, n)
                clipped[n - 1] += c
                totals[n - 1] += t
        if any(t == 0 or c == 0 for c, t in zip(clipped, totals)):
            return 0.0
        log_prec = sum(math.log(c / t) for c, t in zip(clipped, totals)) / 4
        return _brevity_penalty(cand_len, ref_len) * math.exp(log_prec)
    if mode == "sentence_smoothed":
        return sum(_sentence_bleu(p) for p in pairs) / len(pairs)
    raise ValueError(f"unknown bleu mode {mode!r}")


def _sentence_bleu(pair: ScorePair) -> float:
    cand = tokenize(pair.candidate)
    ref = tokenize(pair.reference)
    logs = []
    for n in range(1, 5):
        c, t = clipped_overlap(cand, ref, n)
        if n == 1:
            if t == 0 or c == 0:
                return 0.0
            logs.append(math.log(c / t))
        else:
            logs.append(math.log((c + 1) / (t + 1)))
    return _brevity_penalty(len(cand), len(ref)) * math.exp(sum(logs) / 4)


# ---------------------------------------------------------------- METEOR


def align_tokens(cand: Sequence[str], ref: Sequence[str]) -> list[tuple[int, int]]:
    """Two-stage greedy in-order unigram alignment: exact, then Porter stems."""
    matches: list[tuple[int, int]] = []
    used_ref: set[int] = set()
    unmatched: list[int] = []
    for ci, tok in enumerate(cand):
        for ri, rtok in enumerate(ref):
            if ri not in used_ref and tok == rtok:
                matches.append((ci, ri))
                used_ref.add(ri)
                break
        else:
            unmatched.append(ci)
    ref_stems = [porter_stem(t) for t in ref]
    for ci in unmatched:
        stem = porter_stem(cand[ci])
        for ri, rstem in enumerate(ref_stems):
            if ri not in used_ref and stem == rstem:
                matches.append((ci, ri))
                used_ref.add(ri)
                break
    matches.sort()
    return matches


def _chunk_count(matches: Sequence[tuple[int, int]]) -> int:
    chunks = 0
    prev = None
    for ci, ri in matches:
        if prev is None or ci != prev[0] + 1 or ri != prev[1] + 1:
            chunks += 1
        prev = (ci, ri)
    return chunks


def meteor(pair: ScorePair) -> float:
    cand = tokenize(pair.candidate)
    ref = tokenize(pair.reference)
    matches = align_tokens(cand, ref)
    m = len(matches)
    if m == 0:
        return 0.0
    precision = m / len(cand)
    recall = m / len(ref)
    f_mean = (precision * recall) / (_METEOR_ALPHA * precision + (1 - _METEOR_ALPHA) * recall)
    penalty = _METEOR_GAMMA * (_chunk_count(matches) / m) ** _METEOR_BETA
    return f_mean * (1.0 - penalty)


# ---------------------------------------------------------------- ROUGE-L


def lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for tok in a:
        cur = [0]
        for j, btok in enumerate(b):
            cur.append(prev[j] + 1 if tok == btok else max(prev[j + 1], cur[j]))
        prev = cur
    return prev[-1]


def rouge_l(pair: ScorePair) -> tuple[float, float, float]:
    cand = tokenize(pair.candidate)
    ref = tokenize(pair.reference)
    lcs = lcs_length(cand, ref)
    if lcs == 0:
        return 0.0, 0.0, 0.0
    precision = lcs / len(cand)
    recall = lcs / len(ref)
    return precision, recall, 2 * precision * recall / (precision + recall)


# ---------------------------------------------------------------- BERTScore

Embedder = Callable[[str], list[list[float]]]


class HashEmbedder:
    """Deterministic stand-in embedder: one unit vector per token from sha256."""

    def __init__(self, dim: int = 8):
        if not 1 <= dim <= 16:
            raise ValueError("dim must be in 1..16")
        self.dim = dim
        self._cache: dict[str, list[float]] = {}

    def _vector(self, token: str) -> list[float]:
        if token not in self._cache:
            digest = hashlib.sha256(token.encode("utf-8")).digest()
            raw = [
                int.from_bytes(digest[2 * k : 2 * k + 2], "big") / 32767.5 - 1.0
                for k in range(self.dim)
            ]
            norm = math.sqrt(sum(v * v for v in raw)) or 1.0
            self._cache[token] = [v / norm for v in raw]
        return self._cache[token]

    def __call__(self, text: str) -> list[list[float]]:
        return [self._vector(tok) for tok in tokenize(text)]


def _cosine(a: Sequence[float], b: Sequence[float]) -> float:
    dot = sum(x * y for x, y in zip(a, b))
    na = math.sqrt(sum(x * x for x in a))
    nb = math.sqrt(sum(y * y for y in b))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return dot / (na * nb)


def greedy_match_scores(sim: Sequence[Sequence[float]]) -> tuple[float, float, float]:
    """P/R/F from a reference x candidate similarity matrix via greedy max matching."""
    if not sim or not sim[0]:
        return 0.0, 0.0, 0.0
    recall = sum(max(row) for row in sim) / len(sim)
    n_cand = len(sim[0])
    precision = sum(max(row[j] for row in sim) for j in range(n_cand)) / n_cand
    if precision + recall == 0.0:
        return precision, recall, 0.0
    return precision, recall, 2 * precision * recall / (precision + recall)


def bertscore(
    pair: ScorePair,
    embedder: Embedder,
    rescale_baseline: float | None = None,
) -> tuple[float, float, float]:
    try:
        ref_vecs = embedder(pair.reference)
        cand_vecs = embedder(pair.candidate)
    except Exception as exc:  # noqa: BLE001 - embedding backends vary
        raise EmbedderFailure(f"embedder failed on pair {pair.id!r}: {exc}") from exc
    if not ref_vecs or not cand_vecs:
        raise EmbedderFailure(f"embedder produced no vectors for pair {pair.id!r}")
    sim = [[_cosine(r, c) for c in cand_vecs] for r in ref_vecs]
    p, r, f = greedy_match_scores(sim)
    if rescale_baseline is not None:
        if not rescale_baseline < 1.0:
            raise ValueError("rescale baseline must be < 1")
        scale = 1.0 - rescale_baseline
        p, r, f = ((v - rescale_baseline) / scale for v in (p, r, f))
    return p, r, f


# ---------------------------------------------------------------- corpus level


def score_corpus(
    pairs: Sequence[ScorePair],
    metrics: Sequence[str] = LEXICAL_METRICS,
    embedder: Embedder | None = None,
    bleu_mode: str = "corpus",
    rescale_baseline: float | None = None,
) -> dict[str, float]:
    """Corpus-level score per metric (BLEU pooled; others mean over pairs)."""
    if not pairs:
        raise MalformedInput("no pairs to score")
    unknown = set(metrics) - set(LEXICAL_METRICS)
    if unknown:
        raise ValueError(f"unknown metrics: {sorted(unknown)}")
    out: dict[str, float] = {}
    for metric in metrics:
        if metric == "bleu4":
            out[metric] = bleu4(pairs, mode=bleu_mode)
        elif metric == "meteor":
            out[metric] = sum(meteor(p) for p in pairs) / len(pairs)
        elif metric == "rouge_l":
            out[metric] = sum(rouge_l(p)[2] for p in pairs) / len(pairs)
        elif metric == "bertscore":
            emb = embedder or HashEmbedder()
            out[metric] = sum(bertscore(p, emb, rescale_baseline)[2] for p in pairs) / len(pairs)
    return out


def aggregate_runs(per_run_means: Sequence[float], metric: str = "") -> CorpusScore:
    """Mean and population standard deviation over per-run corpus means."""
    if not per_run_means:
        raise ValueError("need at least one run")
    mean = statistics.fmean(per_run_means)
    std = statistics.pstdev(per_run_means) if len(per_run_means) > 1 else 0.0
    return CorpusScore(metric=metric, mean=mean, std=std, n_runs=len(per_run_means))
