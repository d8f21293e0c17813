#!/usr/bin/env python3
"""Regenerate the committed test fixtures from the caption sources.

Produces the mock LLM tables, the human-annotation log, the frozen judge
scores, the golden pipeline outputs and the UI rubric bundle, then verifies
the frozen summary numbers (judge accuracy, agreement retention, bias means)
before anything lands. Run from the repo root:

    python3 tools/gen_fixtures.py

All outputs are committed; tests compare against them byte-for-byte.
"""

from __future__ import annotations

import json
import shutil
import subprocess
import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "src"))

from feedbackkit import agreement, ingest, judge, localize, refine  # noqa: E402
from feedbackkit.gateway import Gateway, MockProvider, prompt_hash  # noqa: E402
from feedbackkit.jsonio import read_jsonl, write_jsonl  # noqa: E402

FIX = ROOT / "tests" / "fixtures"
CAPTIONS = FIX / "captions"
MOCK = FIX / "mock"
JUDGE = FIX / "judge"
ANNOTATIONS = FIX / "annotations"
GOLDEN = FIX / "golden"

# ------------------------------------------------------------ pipeline mocks

# Canned refiner outputs per merged segment, exercising the skip token, the
# "Cleaned narration:" label, quote wrapping and an all-whitespace reply.
REFINE_RESPONSES = {
    "climb_finals:5000-14000": (
        "The climber approaches the wall, chalks both hands, and starts with a "
        "strong right-hand pinch on the volume."
    ),
    "climb_finals:20000-26000": "[SKIP]",
    "climb_finals:28000-30260": "Cleaned narration: The climber looks up to scout the next moves.",
    "climb_finals:34000-41000": "The climber hooks the right toe and pulls up toward the sloper.",
    "climb_finals:47500-53000": "“The person locks a knee bar to rest before the final dyno.”",
    "boulder_semis:1000-5000": "The climber grips the crimp with the left hand.",
    "boulder_semis:7000-12500": "The climber swings the hip into the wall before the deadpoint.",
    "boulder_semis:3598000-3602000": "  ",
}

# Canned localizer outputs (offsets relative to segment start), exercising
# tuple-style timestamps, a fenced code block, a malformed item and a span
# that needs clamping and truncation.
LOCALIZE_RESPONSES = {
    "climb_finals:5000-14000": (
        "[\n"
        '  {"commentary": "The climber approaches the wall and chalks both hands.", "timestamp": (1.0, 3.5)},\n'
        '  {"commentary": "The climber starts with a strong right-hand pinch on the volume.", "timestamp": (5.2, 7.4)}\n'
        "]"
    ),
    "climb_finals:28000-30260": (
        "```json\n"
        "[\n"
        '  {"commentary": "The climber looks up to scout the next moves.", "timestamp": [0.0, 2.2600000000000016]}\n'
        "]\n"
        "```"
    ),
    "climb_finals:34000-41000": (
        "[\n"
        '  {"commentary": "The climber shifts weight", "timestamp": "(2.0)"},\n'
        '  {"commentary": "The climber hooks the right toe and pulls up toward the sloper.", "timestamp": (2.0, 4.8)}\n'
        "]"
    ),
    "climb_finals:47500-53000": (
        '[{"commentary": "The person locks a knee bar to rest before the final dyno.", "timestamp": (0.3, 4.0)}]'
    ),
    "boulder_semis:1000-5000": (
        '[{"commentary": "The climber grips the crimp with the left hand.", "timestamp": (0.5, 3.0)}]'
    ),
    "boulder_semis:7000-12500": (
        '[{"commentary": "The climber swings the hip into the wall before the deadpoint.", "timestamp": (-2.0, 9.0)}]'
    ),
}

EXPECTED_SPANS = [
    ("climb_finals:5000-14000", 6.0, 8.5),
    ("climb_finals:5000-14000", 10.2, 12.4),
    ("climb_finals:28000-30260", 28.0, 30.26),
    ("climb_finals:34000-41000", 36.0, 38.8),
    ("climb_finals:47500-53000", 47.8, 51.5),
    ("boulder_semis:1000-5000", 1.5, 4.0),
    ("boulder_semis:7000-12500", 6.0, 12.0),
]


def load_segments() -> list[ingest.ASRSegment]:
    segments = []
    for name, fmt in (("climb_finals.srt", "srt"), ("boulder_semis.vtt", "vtt")):
        path = CAPTIONS / name
        parsed = ingest.parse_captions(path.read_bytes(), fmt, path.stem)
        segments.extend(ingest.merge_overlaps(parsed))
    return segments


def load_words() -> dict[str, list[ingest.WordTimestamp]]:
    table = {}
    for path in sorted(CAPTIONS.glob("*.words.json")):
        video_id = path.name[: -len(".words.json")]
        table[video_id] = ingest.parse_captions(path.read_bytes(), "words_json")
    return table


def build_pipeline_table() -> dict[str, str]:
    segments = load_segments()
    words = load_words()
    assert sorted(s.segment_id for s in segments) == sorted(REFINE_RESPONSES), [
        s.segment_id for s in segments
    ]
    table: dict[str, str] = {}
    for seg in segments:
        req = refine.build_refine_prompt(seg.text)
        table[prompt_hash(req.system, req.user)] = REFINE_RESPONSES[seg.segment_id]
    for seg in segments:
        raw = LOCALIZE_RESPONSES.get(seg.segment_id)
        if raw is None:
            continue
        parsed = refine.parse_refinement(REFINE_RESPONSES[seg.segment_id].rstrip())
        assert parsed.status == "kept", seg.segment_id
        band = localize.select_segment_words(words[seg.video_id], seg)
        req = localize.build_localize_prompt(band, parsed.text)
        table[prompt_hash(req.system, req.user)] = raw
    return table


# ------------------------------------------------------- judge fixture data

ITEM_TEXTS = [
    "Your elbow flares out on the release, which pushes the ball left.",
    "Keep your hips closer to the wall when you reach for the sloper so your feet stay weighted.",
    "That attempt looked rushed.",
    "Your first touch runs too far ahead when you receive under pressure.",
    "Drop your heel on the smear and push through the big toe to keep the sole in contact.",
    "You are standing tall before the jump, which cuts your drive from the legs.",
    "The knee caves inward on landing; track it over the second toe.",
    "Plant your support foot beside the ball and open your hips toward the target before striking.",
    "The pass was bad.",
    "Square your shoulders to the rim before the catch so the shot starts on balance.",
    "Needs more power.",
    "Your grip looks tense.",
    "You cut the backswing short, so the strike loses pace.",
    "Follow through toward the target after contact.",
    "Great job sticking the dyno!",
    "Beautiful footwork on that traverse.",
    "Nice release - that shot was pure.",
    "Excellent balance through the mantle.",
    "That was a clean, confident send.",
    "Strong finish, well done.",
    "Perfect timing on the deadpoint.",
    "Lovely weight transfer, really smooth.",
    "Great composure on the headwall.",
    "Super solid heel hook, keep it up.",
    "Good effort - just keep working on your timing.",
    "Nice try; tighten things up a little next time.",
    "Solid attempt, maybe add a bit more energy.",
    "Well done overall, small details to polish.",
    "Good pace - stay focused on the basics.",
    "Keep that attitude; refine the little things.",
]

# Two-rater annotations. Specificity: 13 exact agreements, 8 one-point and 3
# two-point disagreements, 6 items one rater excluded. Actionability: 10
# exact, 4 one-point, 10 both-skip, 6 one rater excluded.
SPECIFICITY_PAIRS = [
    (2, 2), (3, 3), (4, 4), (1, 1), (2, 2), (3, 3), (3, 3), (2, 2), (4, 4), (3, 3),
    (1, 1), (2, 2), (3, 3),
    (2, 3), (3, 2), (3, 4), (1, 2), (2, 1), (4, 3), (2, 3), (4, 3),
    (1, 3), (2, 4), (4, 2),
    ("skip", 2), (3, "skip"), ("skip", 1), (2, "skip"), ("skip", 4), (1, "skip"),
]

ACTIONABILITY_PAIRS = [
    (2, 2), (3, 3), (1, 1), (2, 2), (3, 3), (2, 2), (2, 2), (3, 3), (1, 1), (2, 2),
    (2, 3), (3, 2), (1, 2), (2, 1),
    ("skip", "skip"), ("skip", "skip"), ("skip", "skip"), ("skip", "skip"), ("skip", "skip"),
    ("skip", "skip"), ("skip", "skip"), ("skip", "skip"), ("skip", "skip"), ("skip", "skip"),
    ("skip", 2), (3, "skip"), ("skip", 1), (2, "skip"), ("skip", 3), (1, "skip"),
]

# Raw judge replies per item (first standalone integer / skip wording is what
# the parser sees). Specificity: right on items 1-10 and within 0.5 of the
# averaged rating on 14-20 -> 17/24. Actionability: 12/14 plus 10/10 skips.
SPECIFICITY_RAW = [
    "2", "3", "Rating: 4", "1", "2", "3", " 3", "2", "4", "3",
    "3", "4", "1",
    "2", "3", "4 (very specific)", "1", "2", "3", "2",
    "1",
    "4", "1", "1",
    "2", "3", "2", "2", "3", "2",
]

ACTIONABILITY_RAW = [
    "2", "3", "1", "2", "3", "2", "2", "3", "1", "2",
    "2", "3", "3", "3",
    "Skipped", "skip", "Skipped - positive reinforcement only", "skip", "Skipped",
    "skip", "Skipped", "skip", "skip", "Skipped",
    "2", "2", "3", "1", "2", "3",
]

BIAS_TEXTS = [
    "He drops his heel on the smear before he commits to the rockover.",
    "She keeps her hips square to the wall during the deadpoint.",
    "His elbow flares on the release, so the ball drifts left of the rim.",
    "Her left toe slips because she trusts the smear too little.",
    "He locks the knee bar and gives himself a full rest before the dyno.",
    "She swings her leg through before placing the heel hook.",
    "He bends his knees too late on the jump shot, and the coach reminds him.",
    "Remind the striker to open her hips toward the target.",
    "He rushes the clip and his balance suffers for it.",
    "She braces herself on the volume before the throw.",
    "His follow-through stops short, cutting the arc on his shot.",
    "Her first touch runs long when the pass comes in fast.",
    "He shifts his weight onto the left foot before he reaches for the crimp.",
    "She stays behind the ball and strikes through it with her laces.",
    "His landing is loud, which means he is not absorbing with his legs.",
    "Her breathing stays calm on the slab, and the pace stays controlled.",
    "He telegraphs the pass, and the defender reads him.",
    "She cuts her run-up short, so the strike loses pace.",
    "His hips sag away from the wall on the overhang.",
    "The coach reminded her: plant the support foot beside the ball.",
]

# Length probe: one specificity 2->3 (2.95 -> 3.00 over 20 items) and one
# actionability 2->3 (2.2 -> 2.25); everything else unchanged.
BIAS_LENGTH_SPEC = ["3"] * 19 + ["2"]
BIAS_LENGTH_SPEC_PROBED = ["3"] * 20
BIAS_LENGTH_ACT = ["3"] * 4 + ["2"] * 16
BIAS_LENGTH_ACT_PROBED = ["3"] * 5 + ["2"] * 15

# Gender probe: identical scores for original and swapped phrasing.
BIAS_GENDER_SPEC = ["3", "3", "2", "3", "4", "3", "3", "3", "2", "3",
                    "3", "3", "3", "3", "4", "3", "3", "3", "2", "3"]
BIAS_GENDER_ACT = ["2", "2", "2", "3", "2", "2", "3", "3", "2", "2",
                   "2", "2", "2", "3", "2", "2", "2", "3", "2", "2"]


def judge_key(text: str, metric: str) -> str:
    req = judge.build_judge_prompt(text, metric)
    return prompt_hash(req.system, req.user)


def build_judge_table() -> dict[str, str]:
    table = {}
    for text, raw in zip(ITEM_TEXTS, SPECIFICITY_RAW):
        table[judge_key(text, "specificity")] = raw
    for text, raw in zip(ITEM_TEXTS, ACTIONABILITY_RAW):
        table[judge_key(text, "actionability")] = raw
    return table


def build_bias_tables() -> tuple[dict[str, str], dict[str, str]]:
    length = {}
    for text, spec, act in zip(BIAS_TEXTS, BIAS_LENGTH_SPEC, BIAS_LENGTH_ACT):
        length[judge_key(text, "specificity")] = spec
        length[judge_key(text, "actionability")] = act
    for text, spec, act in zip(BIAS_TEXTS, BIAS_LENGTH_SPEC_PROBED, BIAS_LENGTH_ACT_PROBED):
        probed = judge.length_probe(text)
        length[judge_key(probed, "specificity")] = spec
        length[judge_key(probed, "actionability")] = act

    gender = {}
    for text, spec, act in zip(BIAS_TEXTS, BIAS_GENDER_SPEC, BIAS_GENDER_ACT):
        swapped = judge.gender_swap(text)
        assert swapped != text, text
        assert judge.gender_swap(swapped) == text, text
        for variant in (text, swapped):
            gender[judge_key(variant, "specificity")] = spec
            gender[judge_key(variant, "actionability")] = act
    return length, gender


def write_annotations(path: Path) -> None:
    records = []
    stamp = 1716000000.0
    for metric, pairs in (("specificity", SPECIFICITY_PAIRS), ("actionability", ACTIONABILITY_PAIRS)):
        for i, (a, b) in enumerate(pairs, start=1):
            for rater, value in (("r1", a), ("r2", b)):
                records.append(
                    {
                        "item_id": f"item_{i:02d}",
                        "rater_id": rater,
                        "metric": metric,
                        "value": value,
                        "timestamp": stamp,
                    }
                )
                stamp += 1.0
    write_jsonl(path, records)


def run_cli(*args: str | Path) -> None:
    subprocess.run(
        [sys.executable, "-m", "feedbackkit.cli", *map(str, args)],
        check=True,
        cwd=ROOT,
        stdout=subprocess.DEVNULL,
    )


def write_json_table(path: Path, table: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(table, fh, ensure_ascii=False, indent=2, sort_keys=True)
        fh.write("\n")


def generate_golden(work: Path) -> None:
    GOLDEN.mkdir(parents=True, exist_ok=True)
    run_cli("ingest", "--format", "srt", "--in", CAPTIONS, "--out", work / "segments_srt.jsonl",
            "--catalog", CAPTIONS / "catalog.csv")
    run_cli("ingest", "--format", "vtt", "--in", CAPTIONS, "--out", work / "segments_vtt.jsonl",
            "--catalog", CAPTIONS / "catalog.csv")
    segments = work / "segments.jsonl"
    segments.write_bytes(
        (work / "segments_srt.jsonl").read_bytes() + (work / "segments_vtt.jsonl").read_bytes()
    )
    run_cli("ingest", "--format", "words_json", "--in", CAPTIONS, "--out", work / "words")
    run_cli("refine", "--in", segments, "--out", work / "refined.jsonl",
            "--stats", work / "refine_stats.json", "--mock-table", MOCK / "pipeline_table.json")
    run_cli("localize", "--in", work / "refined.jsonl", "--words", work / "words",
            "--out", work / "spans.jsonl", "--stats", work / "localize_stats.json",
            "--mock-table", MOCK / "pipeline_table.json")
    run_cli("window", "--in", work / "spans.jsonl", "--strategy", "exact",
            "--out", work / "clips_exact.jsonl")
    run_cli("slide", "--segments", segments, "--refined", work / "refined.jsonl",
            "--out", work / "clips_slide.jsonl")
    run_cli("assemble", "--feedback", FIX / "feedback.jsonl", "--commentary", work / "clips_exact.jsonl",
            "--text", FIX / "text.txt", "--out", work / "manifest.jsonl", "--counts", work / "counts.json")
    for name in ("segments.jsonl", "refined.jsonl", "refine_stats.json", "spans.jsonl",
                 "localize_stats.json", "clips_exact.jsonl", "clips_slide.jsonl",
                 "manifest.jsonl", "counts.json"):
        shutil.copyfile(work / name, GOLDEN / name)


def generate_judge_scores(work: Path) -> None:
    spec = work / "scores_spec.jsonl"
    act = work / "scores_act.jsonl"
    run_cli("score", "judge", "--metric", "specificity", "--in", JUDGE / "items.jsonl",
            "--out", spec, "--mock-table", MOCK / "judge_table.json")
    run_cli("score", "judge", "--metric", "actionability", "--in", JUDGE / "items.jsonl",
            "--out", act, "--mock-table", MOCK / "judge_table.json")
    (JUDGE / "judge_scores.jsonl").write_bytes(spec.read_bytes() + act.read_bytes())


def verify() -> None:
    refined = list(read_jsonl(GOLDEN / "refined.jsonl"))
    statuses = [r["status"] for r in refined]
    assert statuses == ["kept", "skipped", "kept", "kept", "kept", "kept", "kept", "skipped"], statuses

    spans = list(read_jsonl(GOLDEN / "spans.jsonl"))
    got = [(s["segment_id"], s["t_start"], s["t_end"]) for s in spans]
    assert got == EXPECTED_SPANS, got

    manifest = list(read_jsonl(GOLDEN / "manifest.jsonl"))
    assert len(manifest) == 14, len(manifest)
    kinds = {r["kind"] for r in manifest}
    assert kinds == {"feedback", "commentary", "text_only"}, kinds

    preds = judge.scores_from_records(read_jsonl(JUDGE / "judge_scores.jsonl"))
    annotations = list(read_jsonl(ANNOTATIONS / "ratings.jsonl"))
    for metric, acc, skip_acc in (("specificity", 70.8, None), ("actionability", 85.7, 100.0)):
        gts = judge.ground_truth_from_annotations(annotations, metric)
        report = judge.validate_against_humans(
            [p for p in preds if p.metric == metric], gts
        ).as_dict()
        assert report["accuracy_pct"] == acc, (metric, report)
        assert report["skip_accuracy_pct"] == skip_acc, (metric, report)
        print(f"judge {metric}: {report['accuracy_pct']}% (n={report['n']}), "
              f"skip {report['skip_accuracy_pct']} (n_skip={report['n_skip']})")

    anns = [agreement.annotation_from_record(r) for r in annotations]
    for metric, retained in (("specificity", 24), ("actionability", 14)):
        report = agreement.agreement_report(anns, metric)
        assert (report.n_annotated, report.n_retained) == (30, retained), report
        quad = agreement.agreement_report(anns, metric, "quadratic")
        print(f"agreement {metric}: retained {report.n_retained}/{report.n_annotated}, "
              f"kappa linear={report.kappa_weighted!r} quadratic={quad.kappa_weighted!r}, "
              f"hist={report.disagreement_histogram}")

    items = [judge.FeedbackItem(f"bias_{i:02d}", t) for i, t in enumerate(BIAS_TEXTS, 1)]
    with open(MOCK / "bias_length_table.json", encoding="utf-8") as fh:
        length_gw = Gateway(MockProvider(json.load(fh)))
    report = judge.bias_report(items, "length", length_gw)
    spec, act = report["metrics"]["specificity"], report["metrics"]["actionability"]
    assert (spec["mean_original"], spec["mean_probed"]) == (2.95, 3.0), spec
    assert (act["mean_original"], act["mean_probed"]) == (2.2, 2.25), act
    print(f"bias length: specificity {spec['mean_original']} -> {spec['mean_probed']}, "
          f"actionability {act['mean_original']} -> {act['mean_probed']}")

    with open(MOCK / "bias_gender_table.json", encoding="utf-8") as fh:
        gender_gw = Gateway(MockProvider(json.load(fh)))
    report = judge.bias_report(items, "gender", gender_gw)
    assert report["delta_specificity"] == 0.0 and report["delta_actionability"] == 0.0, report
    print("bias gender: deltas exactly 0.0")


def main() -> None:
    for directory in (MOCK, JUDGE, ANNOTATIONS, GOLDEN):
        directory.mkdir(parents=True, exist_ok=True)

    write_json_table(MOCK / "pipeline_table.json", build_pipeline_table())
    write_json_table(MOCK / "judge_table.json", build_judge_table())
    length_table, gender_table = build_bias_tables()
    write_json_table(MOCK / "bias_length_table.json", length_table)
    write_json_table(MOCK / "bias_gender_table.json", gender_table)

    write_jsonl(
        JUDGE / "items.jsonl",
        ({"item_id": f"item_{i:02d}", "text": t} for i, t in enumerate(ITEM_TEXTS, 1)),
    )
    write_jsonl(
        JUDGE / "bias_items.jsonl",
        ({"item_id": f"bias_{i:02d}", "text": t} for i, t in enumerate(BIAS_TEXTS, 1)),
    )
    write_annotations(ANNOTATIONS / "ratings.jsonl")

    rubric_path = ROOT / "frontend" / "src" / "rubric.json"
    rubric_path.parent.mkdir(parents=True, exist_ok=True)
    write_json_table(rubric_path, judge.rubric_payload())

    with tempfile.TemporaryDirectory() as tmp:
        work = Path(tmp)
        generate_golden(work)
        generate_judge_scores(work)

    verify()
    print("fixtures regenerated OK")


if __name__ == "__main__":
    main()
