from __future__ import annotations

import math
from functools import lru_cache

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from feedbackkit.errors import EmbedderFailure, MalformedInput
from feedbackkit.lexical import (
    HashEmbedder,
    ScorePair,
    aggregate_runs,
    align_tokens,
    bertscore,
    bleu4,
    clipped_overlap,
    greedy_match_scores,
    lcs_length,
    make_pairs,
    meteor,
    ngram_counts,
    rouge_l,
    score_corpus,
    tokenize,
)


def pair(cand: str, ref: str, pid: str = "p") -> ScorePair:
    return ScorePair(pid, cand, ref)


# ------------------------------------------------------------- tokenization


def test_tokenize_lowercases_and_splits_punctuation():
    assert tokenize("Keep your Hips close!") == ["keep", "your", "hips", "close", "!"]
    assert tokenize("right-hand pinch") == ["right", "-", "hand", "pinch"]
    assert tokenize("a_b c2") == ["a_b", "c2"]
    assert tokenize("") == []
    assert tokenize("   ") == []


@given(st.text(max_size=80))
def test_tokenize_idempotent_under_rejoin(text):
    tokens = tokenize(text)
    assert tokenize(" ".join(tokens)) == tokens


word_lists = st.lists(
    st.sampled_from("the climber moves up wall left right hand foot hold a".split()),
    min_size=1,
    max_size=12,
)


# ------------------------------------------------------------------- pairing


def test_score_pair_rejects_empty_sides():
    with pytest.raises(MalformedInput):
        ScorePair("x", "", "ref")
    with pytest.raises(MalformedInput):
        ScorePair("x", "cand", "  ")


def test_make_pairs_joins_on_id():
    preds = [{"id": "b", "text": "two"}, {"id": "a", "text": "one"}]
    refs = [{"id": "a", "text": "uno"}, {"id": "b", "text": "dos"}]
    pairs = make_pairs(preds, refs)
    assert [(p.id, p.candidate, p.reference) for p in pairs] == [
        ("b", "two", "dos"),
        ("a", "one", "uno"),
    ]


def test_make_pairs_errors():
    with pytest.raises(MalformedInput, match="duplicate reference"):
        make_pairs([], [{"id": "a", "text": "x"}, {"id": "a", "text": "y"}])
    with pytest.raises(MalformedInput, match="no reference"):
        make_pairs([{"id": "b", "text": "x"}], [{"id": "a", "text": "y"}])
    with pytest.raises(MalformedInput, match="without predictions"):
        make_pairs([{"id": "a", "text": "x"}], [{"id": "a", "text": "y"}, {"id": "b", "text": "z"}])


# --------------------------------------------------------------------- BLEU


def test_ngram_and_clipping():
    assert ngram_counts(["a", "b", "a"], 2) == {("a", "b"): 1, ("b", "a"): 1}
    # "the the the the" vs "the cat": unigram matches clip at the reference count
    clipped, total = clipped_overlap(["the"] * 4, ["the", "cat"], 1)
    assert (clipped, total) == (1, 4)


def test_bleu_identity_is_one():
    text = "the climber grips the crimp with the left hand"
    assert bleu4([pair(text, text)]) == pytest.approx(1.0)
    assert bleu4([pair(text, text)], mode="sentence_smoothed") == pytest.approx(1.0)


def test_bleu_disjoint_is_zero():
    assert bleu4([pair("aa bb cc dd", "ee ff gg hh")]) == 0.0


def test_bleu_no_fourgram_match_is_zero_in_corpus_mode():
    # 3 shared tokens but no shared 4-gram
    p = pair("the climber moves quickly today", "the climber moves slowly now")
    assert bleu4([p]) == 0.0
    assert bleu4([p], mode="sentence_smoothed") > 0.0


def test_bleu_corpus_pools_counts():
    # pooled counts are not the mean of per-sentence scores
    pairs = [
        pair("the climber grips the hold now ok", "the climber grips the hold now ok"),
        pair("x y z w", "a b c d"),
    ]
    pooled = bleu4(pairs)
    assert 0.0 < pooled < 1.0
    per_sentence = (bleu4([pairs[0]]) + 0.0) / 2
    assert pooled != pytest.approx(per_sentence)


def test_bleu_brevity_penalty():
    # candidate shorter than reference: BP = exp(1 - r/c)
    p = pair("the climber grips the hold", "the climber grips the hold again today")
    expected = math.exp(1 - 7 / 5)  # all n-gram precisions are 1
    assert bleu4([p]) == pytest.approx(expected)


def test_bleu_mode_validation():
    with pytest.raises(ValueError):
        bleu4([pair("a b", "a b")], mode="nope")
    with pytest.raises(MalformedInput):
        bleu4([])


@st.composite
def token_pairs(draw):
    return pair(" ".join(draw(word_lists)), " ".join(draw(word_lists)))


@settings(max_examples=60)
@given(st.lists(token_pairs(), min_size=1, max_size=5), st.sampled_from(["corpus", "sentence_smoothed"]))
def test_bleu_bounded(pairs, mode):
    assert 0.0 <= bleu4(pairs, mode=mode) <= 1.0


# ------------------------------------------------------------------- METEOR


def test_align_tokens_exact_then_stem():
    matches = align_tokens(["climbing", "fast"], ["climbs", "fast"])
    # "fast" matches exactly; "climbing"/"climbs" only through the stemmer
    assert sorted(matches) == [(0, 0), (1, 1)]


def test_align_tokens_consumes_each_reference_once():
    matches = align_tokens(["up", "up"], ["up"])
    assert matches == [(0, 0)]


def test_meteor_identity_near_one():
    text = "the climber grips the crimp well"
    score = meteor(pair(text, text))
    # single chunk, m tokens: penalty = 0.5 * (1/m)^3
    m = len(tokenize(text))
    assert score == pytest.approx(1.0 - 0.5 / m**3)


def test_meteor_order_fragmentation_penalty():
    good = meteor(pair("the climber grips the hold", "the climber grips the hold"))
    scrambled = meteor(pair("hold the grips climber the", "the climber grips the hold"))
    assert scrambled < good


def test_meteor_no_match_is_zero():
    assert meteor(pair("aa bb", "cc dd")) == 0.0


def test_meteor_alpha_weighting_favours_recall():
    # alpha=0.9 weights recall 9:1, so covering all of a short reference
    # beats precisely covering a fraction of a long one
    low_recall = meteor(pair("the climber", "the climber grips the hold"))
    high_recall = meteor(pair("the climber grips the hold plus extra words here", "the climber"))
    assert high_recall > low_recall


@settings(max_examples=60)
@given(token_pairs())
def test_meteor_bounded(p):
    assert 0.0 <= meteor(p) <= 1.0


# ------------------------------------------------------------------ ROUGE-L


@lru_cache(maxsize=None)
def _lcs_brute(a: tuple, b: tuple) -> int:
    if not a or not b:
        return 0
    if a[-1] == b[-1]:
        return 1 + _lcs_brute(a[:-1], b[:-1])
    return max(_lcs_brute(a[:-1], b), _lcs_brute(a, b[:-1]))


def test_lcs_known_values():
    assert lcs_length("abcde", "ace") == 3
    assert lcs_length([], ["a"]) == 0
    assert lcs_length(["a", "b"], ["b", "a"]) == 1


@settings(max_examples=120)
@given(word_lists, word_lists)
def test_lcs_matches_bruteforce(a, b):
    assert lcs_length(a, b) == _lcs_brute(tuple(a), tuple(b))


def test_rouge_l_prf():
    # cand "a b c d", ref "a c d e" -> LCS = 3
    p, r, f = rouge_l(pair("a b c d", "a c d e"))
    assert p == pytest.approx(0.75)
    assert r == pytest.approx(0.75)
    assert f == pytest.approx(0.75)


def test_rouge_l_zero_overlap():
    assert rouge_l(pair("aa bb", "cc dd")) == (0.0, 0.0, 0.0)


# ---------------------------------------------------------------- BERTScore


def test_hash_embedder_unit_vectors():
    emb = HashEmbedder(dim=8)
    vecs = emb("hold the hold")
    assert len(vecs) == 3
    assert vecs[0] == vecs[2]  # same token, same vector
    for vec in vecs:
        assert math.sqrt(sum(v * v for v in vec)) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        HashEmbedder(dim=0)


def test_greedy_match_scores_known_matrix():
    p, r, f = greedy_match_scores([[1.0, 0.0], [0.0, 0.5]])
    assert (p, r) == (0.75, 0.75)
    assert f == pytest.approx(0.75)
    assert greedy_match_scores([]) == (0.0, 0.0, 0.0)


def test_bertscore_identity_is_one():
    p, r, f = bertscore(pair("the climber grips", "the climber grips"), HashEmbedder())
    assert (p, r, f) == (pytest.approx(1.0), pytest.approx(1.0), pytest.approx(1.0))


def test_bertscore_rescaling():
    emb = HashEmbedder()
    raw = bertscore(pair("a b", "a b"), emb)
    scaled = bertscore(pair("a b", "a b"), emb, rescale_baseline=0.5)
    assert scaled[2] == pytest.approx((raw[2] - 0.5) / 0.5)
    with pytest.raises(ValueError):
        bertscore(pair("a", "a"), emb, rescale_baseline=1.0)


def test_bertscore_embedder_failure_wrapped():
    def broken(text):
        raise RuntimeError("backend down")

    with pytest.raises(EmbedderFailure, match="backend down"):
        bertscore(pair("a", "b"), broken)

    with pytest.raises(EmbedderFailure, match="no vectors"):
        bertscore(pair("a", "b"), lambda text: [])


@settings(max_examples=60)
@given(token_pairs())
def test_bertscore_symmetric_swap(p):
    emb = HashEmbedder()
    p1, r1, f1 = bertscore(p, emb)
    p2, r2, f2 = bertscore(ScorePair(p.id, p.reference, p.candidate), emb)
    # swapping sides swaps precision and recall, F stays put
    assert p1 == pytest.approx(r2)
    assert r1 == pytest.approx(p2)
    assert f1 == pytest.approx(f2)


# ------------------------------------------------------------- corpus level


def test_score_corpus_all_metrics():
    pairs = [pair("the climber grips the hold", "the climber grips the hold", "1")]
    scores = score_corpus(pairs)
    assert set(scores) == {"bleu4", "meteor", "rouge_l", "bertscore"}
    assert scores["bleu4"] == pytest.approx(1.0)
    assert scores["rouge_l"] == pytest.approx(1.0)
    with pytest.raises(ValueError):
        score_corpus(pairs, metrics=["bleu9"])
    with pytest.raises(MalformedInput):
        score_corpus([])


def test_aggregate_runs_population_std():
    agg = aggregate_runs([0.10, 0.20], metric="bleu4")
    assert agg.mean == pytest.approx(0.15)
    assert agg.std == pytest.approx(0.05)  # population, not sample, std
    assert agg.n_runs == 2
    single = aggregate_runs([0.4])
    assert (single.mean, single.std, single.n_runs) == (0.4, 0.0, 1)
    with pytest.raises(ValueError):
        aggregate_runs([])
