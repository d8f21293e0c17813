from __future__ import annotations

import pytest

from feedbackkit.gateway import prompt_hash
from feedbackkit.ingest import ASRSegment
from feedbackkit.refine import (
    REFINE_PROMPT,
    SKIP_TOKEN,
    build_refine_prompt,
    parse_refinement,
    refine_corpus,
    refined_from_records,
    refined_record,
)

from conftest import make_gateway


def test_prompt_template_contract():
    request = build_refine_prompt("he grabs the hold")
    assert request.system == ""
    assert request.temperature == 0.0
    assert "ASR narration: he grabs the hold" in request.user
    assert request.user.endswith("Cleaned narration:")
    # anonymization and skip instructions ship with every call
    assert "named entities" in request.user
    assert "[SKIP]" in request.user
    with pytest.raises(ValueError):
        build_refine_prompt("   ")


def test_prompt_has_no_unfilled_placeholders():
    request = build_refine_prompt("text")
    assert "{narration}" not in request.user
    assert REFINE_PROMPT.count("{narration}") == 1


@pytest.mark.parametrize(
    "raw,status,text",
    [
        ("The climber reaches up.", "kept", "The climber reaches up."),
        ("Cleaned narration: The climber reaches up.", "kept", "The climber reaches up."),
        ("cleaned narration:   spaced  ", "kept", "spaced"),
        ('"quoted output"', "kept", "quoted output"),
        ("“curly quoted”", "kept", "curly quoted"),
        ("[SKIP]", "skipped", ""),
        ("  [skip]  ", "skipped", ""),
        ("Sure: [SKIP] - just music.", "skipped", ""),
    ],
)
def test_parse_refinement(raw, status, text):
    parsed = parse_refinement(raw)
    assert (parsed.status, parsed.text) == (status, text)
    assert not parsed.empty_after_strip


def test_parse_refinement_empty_degrades_to_skip():
    parsed = parse_refinement("Cleaned narration: \"\"")
    assert parsed.status == "skipped"
    assert parsed.empty_after_strip


def segs():
    return [
        ASRSegment("v", 0.0, 2.0, "he climbs the wall"),
        ASRSegment("v", 3.0, 5.0, "[music]"),
        ASRSegment("v", 6.0, 8.0, "unknown chatter"),
    ]


def table_for(segments, outputs):
    return {
        prompt_hash("", build_refine_prompt(s.text).user): out
        for s, out in zip(segments, outputs)
    }


def test_refine_corpus_one_record_per_segment():
    segments = segs()
    gw = make_gateway(table_for(segments, ["A climber ascends.", "[SKIP]", ""]))
    records, stats = refine_corpus(segments, gw, parallelism=2)
    assert [r.segment_id for r in records] == [s.segment_id for s in segments]
    assert [r.status for r in records] == ["kept", "skipped", "skipped"]
    assert stats.as_dict() == {
        "total": 3,
        "kept": 1,
        "skipped": 2,
        "errors": 0,
        "empty_after_strip": 1,
        "kept_fraction": pytest.approx(1 / 3),
    }


def test_refine_corpus_gateway_error_rows():
    segments = segs()
    table = table_for(segments[:2], ["ok", "[SKIP]"])  # third has no canned reply
    records, stats = refine_corpus(segments, make_gateway(table))
    assert [r.status for r in records] == ["kept", "skipped", "error"]
    assert stats.errors == 1
    assert records[2].text == ""
    assert "no canned response" in records[2].raw_llm_output


def test_refine_corpus_empty_input():
    records, stats = refine_corpus([], make_gateway({}))
    assert records == [] and stats.total == 0
    assert stats.kept_fraction == 0.0


def test_refined_record_roundtrip():
    segments = segs()[:1]
    gw = make_gateway(table_for(segments, ["Fine."]))
    records, _ = refine_corpus(segments, gw)
    assert refined_from_records([refined_record(r) for r in records]) == records


def test_skip_token_constant():
    assert SKIP_TOKEN == "[SKIP]"
