"""Rubric-based LLM scoring of feedback specificity and actionability.

Specificity is a 1-4 scale; actionability is 1-3 with an explicit skip for
purely positive reinforcement. Judge outputs are validated against human
annotations (correct within 0.5 of the averaged rating) and probed for
gender and length bias.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .errors import GatewayError, NoOverlap, OutOfScale, ParseFailure
from .gateway import ChatRequest, Gateway

JUDGE_MODEL = "gpt-4o-mini"
SKIP = "skip"

METRICS = ("specificity", "actionability")
SCALES = {"specificity": (1, 4), "actionability": (1, 3)}
SKIP_ALLOWED = {"specificity": False, "actionability": True}

SPECIFICITY_PROMPT = """\
Analyze the given generated feedback and provide only a numerical rating for \
the **generated feedback**, from **1 to 4**, where 1 means "not specific" and \
4 means "very specific".

**Definition:** Feedback conveys details about current movement and \
corrective measures. Specificity refers to the precision of movement \
information, focusing on the present; actionability guides future adjustments.

**Ratings Guide:**
- **1 – Least Specific:** Very vague, offers little useful information.
- **2 – Vague:** Mentions either movement pattern details *or* quality \
descriptors (e.g., smoothness, stiffness), or just performance outcomes.
- **3 – Slightly Specific:** Connects movement details to quality indicators \
but lacks elaboration.
- **4 – Very Specific:** Precise movement and quality info with elaboration \
(e.g., when, why, or how).

**Examples:**
Rating '1':
  - "The shot could be improved."
Rating '2':
  - "The shooter is standing up straight"
Rating '3':
  - "Standing straight up limits explosiveness and lift"
Rating '4':
  - "Standing straight up limits explosiveness and lift because it prevents \
your lower body from fully loading the muscles needed for an explosive \
push-off."

Rating '1':
  - "The climber needs to have more confidence."
Rating '2':
  - "The climber hesitates before reaching for the higher hold"
Rating '3':
  - "The climber hesitates and takes a shorter step when reaching for the \
higher hold."
Rating '4':
  - "The climber hesitates and takes a shorter step when reaching for the \
higher hold, which limits the momentum needed to successfully grab it."

Rating '1':
  - "The player is dribbling poorly"
Rating '2':
  - "The contact with the ball is closer to the heel rather than through that \
inside curvature of the foot. "
Rating '3':
  - "The contact with the ball is closer to the heel rather than through that \
inside curvature of the foot which affects controllability"
Rating '4':
  - "The contact with the ball is closer to the heel...so we have less \
control over the direction of the pass."

Generated feedback: {feedback}

Rating:"""

ACTIONABILITY_PROMPT = """\
Analyze the generated feedback and provide only a numerical rating for the \
**generated feedback**, from **1 to 3**, where 1 means "not actionable" and 3 \
means "actionable".

**Definition:** Actionability refers to the degree to which feedback can be \
implemented by the learner (e.g., specific corrective directions). This scale \
evaluates how directly feedback helps guide performance adjustments.

Skip scoring if the feedback is purely positive reinforcement.

**Scale:**
- **Skipped** – If the feedback is only positive reinforcement.
- **1 – Not Actionable:** Vague or lacks any clear guidance the learner can \
act on.
- **2 – Minimally Actionable:** Identifies what to change, but not how to do \
it.
- **3 – Actionable:** Provides specific, clear directions to help the learner \
adjust.

**Example Progressions:**
Rating '1':
- "That wasn’t quite right."
Rating '2':
- "Your stance is off-balance."
Rating '3':
- "Widen your stance to be shoulder-length apart and keep your weight \
centered over your feet to maintain balance."

Rating '1':
- "The climber could use a more efficient technique."
Rating '2':
- "The climber is using a one-hand hold start, which is a good technique for \
beginners, but may not be the most efficient for experienced climbers."
Rating '3':
- "For a more efficient climb, try switching from a one-hand hold start to a \
two-handed start and engage both your hands and core simultaneously so you \
can distribute your weight evenly."

Rating '1':
- "Your form is poor."
Rating '2':
- "Your arm bent too much."
Rating '3':
- "Keep your arm straight until you initiate the follow-through."

Rating '1':
- "The player is dribbling poorly."
Rating '2':
- "The player’s dribble lacks control because their touches are inconsistent."
Rating '3':
- "Use smaller, more controlled touches on the ball and stay on the balls of \
your feet to maintain better control."

Rating '1':
- "The player’s first touch was off."
Rating '2':
- "The first touch is slow and takes them in the wrong direction."
Rating '3':
- "The player's first touch is slow and takes them in the wrong direction, \
causing them to take an extra touch and lose time. They need to move their \
feet in the direction they want to go."

Rating '1':
- "The ball’s trajectory was off."
Rating '2':
- "The ball’s trajectory is too flat."
Rating '3':
- "Release the ball slightly earlier and follow through higher to create a \
better arc on your shot."

Rating '1':
- "The climber is struggling."
Rating '2':
- "The climber should work on improving their grip strength and endurance \
through training."
Rating '3':
- "The climber could improve their grip strength and endurance by \
incorporating more finger exercises and grip strengthening exercises into \
their training routine."

Rating '2':
- "Could improve by keeping their feet closer together and using their hips \
to generate power."
Rating '3':
- "Improve by adjusting foot positioning and engaging the hips more."

Generated feedback: {feedback}

Rating:"""

_PROMPTS = {"specificity": SPECIFICITY_PROMPT, "actionability": ACTIONABILITY_PROMPT}

# Annotator-facing rubric: level names/descriptions plus the full example
# tables. The UI bundle is generated from this structure so rubric and judge
# prompt never drift apart.

SPECIFICITY_LEVELS = [
    {"value": 1, "name": "Least Specific", "description": "Very vague, offers little useful information."},
    {
        "value": 2,
        "name": "Vague",
        "description": "Mentions either movement pattern details or quality descriptors (e.g., smoothness, stiffness), or just performance outcomes.",
    },
    {
        "value": 3,
        "name": "Slightly Specific",
        "description": "Connects movement details to quality indicators but lacks elaboration.",
    },
    {
        "value": 4,
        "name": "Very Specific",
        "description": "Precise movement and quality info with elaboration (e.g., when, why, or how).",
    },
]

ACTIONABILITY_LEVELS = [
    {"value": 1, "name": "Not Actionable", "description": "Vague or lacks any clear guidance the learner can act on."},
    {"value": 2, "name": "Minimally Actionable", "description": "Identifies what to change, but not how to do it."},
    {"value": 3, "name": "Actionable", "description": "Provides specific, clear directions to help the learner adjust."},
]

ACTIONABILITY_SKIP_DESCRIPTION = "If the feedback is only positive reinforcement."

SPECIFICITY_EXAMPLES = [
    [
        "The shot could be improved.",
        "The shooter is standing up straight.",
        "Standing straight up limits explosiveness and lift.",
        "Standing straight up limits explosiveness and lift because it prevents your lower body from fully loading the muscles needed for an explosive push-off.",
    ],
    [
        "The shot is poor.",
        "Your arm was bent too much.",
        "Your arm was bent too much causing the shot to look stiff.",
        "Your guide arm was bent too much prior to lifting up to the release point, and caused the shot to look stiff.",
    ],
    [
        "The player missed the shot.",
        "The ball’s trajectory is flat.",
        "The ball’s trajectory is flat because the release point is too late.",
        "The ball’s trajectory is flat because the release point is too late. This is because the shoulders and hips are slow to rotate.",
    ],
    [
        "The climber needs to have more confidence.",
        "The climber hesitates before reaching for the higher hold.",
        "The climber hesitates and takes a shorter step when reaching for the higher hold.",
        "The climber hesitates and takes a shorter step when reaching for the higher hold, which limits the momentum needed to successfully grab it.",
    ],
    [
        "The woman is doing a good job climbing the wall.",
        "The climber's movements are smooth and controlled.",
        "The climber is executing a great job, with a smooth and controlled movement, especially in transitions between holds.",
        "The climber is executing a great job, with a smooth and controlled movement due to excellent foot placement and efficient weight transfer, especially in transitions between holds.",
    ],
    [
        "The climber has good technique.",
        "The climber maintains good control.",
        "The climber has successfully placed their right foot on a ledge and released their left foot to add force which helps with control.",
        "The climber has successfully placed their right foot on a ledge, applying sufficient pressure, and released their left foot to add force to the right foot, which will help them stay pulled into the wall leading to more control.",
    ],
]

ACTIONABILITY_EXAMPLES = [
    [
        "That wasn’t quite right.",
        "Your stance is off-balance.",
        "Widen your stance to be shoulder-length apart and keep your weight centered over your feet to maintain balance.",
    ],
    [
        "The climber could use a more efficient technique.",
        "The climber is using a one-hand hold start, which is a good technique for beginners, but may not be the most efficient for experienced climbers.",
        "For a more efficient climb, try switching from a one-hand hold start to a two-handed start and engage both your hands and core simultaneously so you can distribute your weight evenly.",
    ],
    [
        "Your form is poor.",
        "Your arm bent too much.",
        "Keep your arm straight until you initiate the follow-through.",
    ],
    [
        "The player is dribbling poorly.",
        "The player’s dribble lacks control because their touches are inconsistent.",
        "Use smaller, more controlled touches on the ball and stay on the balls of your feet to maintain better control.",
    ],
    [
        "The player’s first touch was off.",
        "The first touch is slow and takes them in the wrong direction.",
        "The player's first touch is slow and takes them in the wrong direction, causing them to take an extra touch and lose time. They need to move their feet in the direction they want to go.",
    ],
    [
        "The ball’s trajectory was off.",
        "The ball’s trajectory is too flat.",
        "Release the ball slightly earlier and follow through higher to create a better arc on your shot.",
    ],
    [
        "The climber is struggling.",
        "The climber should work on improving their grip strength and endurance through training.",
        "The climber could improve their grip strength and endurance by incorporating more finger exercises and grip strengthening exercises into their training routine.",
    ],
    [
        None,
        "Could improve by keeping their feet closer together and using their hips to generate power.",
        "Improve by adjusting foot positioning and engaging the hips more.",
    ],
]


def rubric_payload() -> dict:
    """Machine-readable rubric for the annotation UI."""
    return {
        "specificity": {
            "metric": "specificity",
            "scale_min": 1,
            "scale_max": 4,
            "skip_allowed": False,
            "levels": SPECIFICITY_LEVELS,
            "examples": SPECIFICITY_EXAMPLES,
        },
        "actionability": {
            "metric": "actionability",
            "scale_min": 1,
            "scale_max": 3,
            "skip_allowed": True,
            "skip_description": ACTIONABILITY_SKIP_DESCRIPTION,
            "levels": ACTIONABILITY_LEVELS,
            "examples": ACTIONABILITY_EXAMPLES,
        },
    }


@dataclass(frozen=True)
class FeedbackItem:
    item_id: str
    text: str


@dataclass(frozen=True)
class JudgeScore:
    item_id: str
    metric: str
    value: int | str | None  # integer in scale, "skip", or None when unscored
    raw_llm_output: str
    judge_model: str


@dataclass(frozen=True)
class GroundTruth:
    item_id: str
    metric: str
    value: float | str  # averaged rating (half points allowed) or "skip"


@dataclass
class JudgeStats:
    total: int = 0
    scored: int = 0
    skipped: int = 0
    parse_failures: int = 0
    out_of_scale: int = 0
    gateway_errors: int = 0

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def check_metric(metric: str) -> str:
    if metric not in METRICS:
        raise ValueError(f"unknown metric {metric!r}; expected one of {METRICS}")
    return metric


def build_judge_prompt(feedback: str, metric: str, model: str = JUDGE_MODEL) -> ChatRequest:
    check_metric(metric)
    if not feedback.strip():
        raise ValueError("feedback must be non-empty")
    return ChatRequest(
        model=model,
        system="",
        user=_PROMPTS[metric].format(feedback=feedback),
        temperature=0.0,
        max_tokens=16,
    )


_INT_RE = re.compile(r"(?<![\d.])\d+(?![\d.])")
_SKIP_RE = re.compile(r"\bskip(?:ped)?\b", re.IGNORECASE)


def parse_judge_output(raw: str, metric: str) -> int | str:
    """First standalone integer in scale, or skip (actionability only)."""
    check_metric(metric)
    if SKIP_ALLOWED[metric] and _SKIP_RE.search(raw):
        return SKIP
    match = _INT_RE.search(raw)
    if match is None:
        raise ParseFailure(f"no standalone integer in judge output: {raw!r}")
    value = int(match.group())
    lo, hi = SCALES[metric]
    if not lo <= value <= hi:
        raise OutOfScale(f"{metric} rating {value} outside [{lo}, {hi}]")
    return value


def score_items(
    items: Sequence[FeedbackItem],
    metric: str,
    gateway: Gateway,
    parallelism: int = 4,
    model: str = JUDGE_MODEL,
) -> tuple[list[JudgeScore], JudgeStats]:
    """Judge every item; unscorable items are kept with value None."""
    check_metric(metric)
    stats = JudgeStats(total=len(items))
    requests = [build_judge_prompt(item.text, metric, model) for item in items]
    results = gateway.complete_batch(requests, parallelism=parallelism)
    scores: list[JudgeScore] = []
    for item, result in zip(items, results):
        if isinstance(result, GatewayError):
            stats.gateway_errors += 1
            scores.append(JudgeScore(item.item_id, metric, None, str(result), model))
            continue
        try:
            value = parse_judge_output(result.text, metric)
        except ParseFailure:
            stats.parse_failures += 1
            value = None
        except OutOfScale:
            stats.out_of_scale += 1
            value = None
        if value == SKIP:
            stats.skipped += 1
        elif value is not None:
            stats.scored += 1
        scores.append(JudgeScore(item.item_id, metric, value, result.text, model))
    return scores, stats


def judge_score_record(score: JudgeScore) -> dict:
    return {
        "item_id": score.item_id,
        "metric": score.metric,
        "value": score.value,
        "raw_llm_output": score.raw_llm_output,
        "judge_model": score.judge_model,
    }


def scores_from_records(records: Iterable[Mapping]) -> list[JudgeScore]:
    return [
        JudgeScore(r["item_id"], r["metric"], r.get("value"), r.get("raw_llm_output", ""), r.get("judge_model", ""))
        for r in records
    ]


def ground_truth_from_annotations(records: Iterable[Mapping], metric: str) -> list[GroundTruth]:
    """Average per-item annotator ratings into ground truth.

    All raters skipping makes the item ground-truth skip; a skip/numeric mix
    is excluded outright since averaging across a skip is undefined.
    """
    check_metric(metric)
    by_item: dict[str, list] = {}
    order: list[str] = []
    for rec in records:
        if rec.get("metric") != metric:
            continue
        item_id = str(rec["item_id"])
        if item_id not in by_item:
            by_item[item_id] = []
            order.append(item_id)
        by_item[item_id].append(rec["value"])
    out = []
    for item_id in order:
        values = by_item[item_id]
        skips = [v for v in values if v == SKIP]
        if len(skips) == len(values):
            out.append(GroundTruth(item_id, metric, SKIP))
        elif not skips:
            out.append(GroundTruth(item_id, metric, sum(values) / len(values)))
        # mixed skip/numeric: excluded
    return out


@dataclass(frozen=True)
class ValidationReport:
    metric: str
    accuracy: float | None
    skip_accuracy: float | None
    n: int
    n_skip: int

    def as_dict(self) -> dict:
        pct = lambda v: None if v is None else round(v * 100, 1)  # noqa: E731
        return {
            "metric": self.metric,
            "accuracy": self.accuracy,
            "accuracy_pct": pct(self.accuracy),
            "skip_accuracy": self.skip_accuracy,
            "skip_accuracy_pct": pct(self.skip_accuracy),
            "n": self.n,
            "n_skip": self.n_skip,
        }


def validate_against_humans(preds: Sequence[JudgeScore], gts: Sequence[GroundTruth]) -> ValidationReport:
    """Judge accuracy against averaged human ratings (correct within 0.5)."""
    by_key = {(p.item_id, p.metric): p for p in preds}
    metric = gts[0].metric if gts else (preds[0].metric if preds else "")
    n = n_skip = correct = skip_correct = 0
    joined = 0
    for gt in gts:
        pred = by_key.get((gt.item_id, gt.metric))
        if pred is None:
            continue
        joined += 1
        if gt.value == SKIP:
            n_skip += 1
            if pred.value == SKIP:
                skip_correct += 1
        else:
            n += 1
            if isinstance(pred.value, int) and abs(pred.value - gt.value) <= 0.5 + 1e-9:
                correct += 1
    if joined == 0:
        raise NoOverlap("no prediction/ground-truth pairs share item_id and metric")
    return ValidationReport(
        metric=metric,
        accuracy=correct / n if n else None,
        skip_accuracy=skip_correct / n_skip if n_skip else None,
        n=n,
        n_skip=n_skip,
    )


# ------------------------------------------------------------- bias probes

NEUTRAL_PHRASE = "This was observed during practice."

_PRONOUN_SIMPLE = {
    "he": "she",
    "she": "he",
    "him": "her",
    "himself": "herself",
    "herself": "himself",
    "hers": "his",
}

_WORD_RE = re.compile(r"[A-Za-z]+")


def _match_case(original: str, replacement: str) -> str:
    if original.isupper() and len(original) > 1:
        return replacement.upper()
    if original[0].isupper():
        return replacement.capitalize()
    return replacement


def gender_swap(text: str) -> str:
    """Swap gendered pronouns bidirectionally, preserving case and all other text.

    Possessives are disambiguated by the following token: "his"/"her"
    directly before a word are possessive determiners; at a boundary they
    map to the standalone forms ("hers" / "him").
    """
    matches = list(_WORD_RE.finditer(text))
    out = []
    last = 0
    for i, match in enumerate(matches):
        token = match.group()
        lower = token.lower()
        followed_by_word = (
            i + 1 < len(matches)
            and text[match.end() : matches[i + 1].start()].strip() == ""
        )
        if lower == "his":
            repl = "her" if followed_by_word else "hers"
        elif lower == "her":
            repl = "his" if followed_by_word else "him"
        elif lower in _PRONOUN_SIMPLE:
            repl = _PRONOUN_SIMPLE[lower]
        else:
            continue
        out.append(text[last : match.start()])
        out.append(_match_case(token, repl))
        last = match.end()
    out.append(text[last:])
    return "".join(out)


def length_probe(text: str) -> str:
    """Append a neutral phrase that should not change either rubric score."""
    if not text:
        return NEUTRAL_PHRASE
    return f"{text} {NEUTRAL_PHRASE}"


PROBES = {"gender": gender_swap, "length": length_probe}


def bias_report(
    items: Sequence[FeedbackItem],
    probe: str,
    gateway: Gateway,
    metrics: Sequence[str] = METRICS,
    parallelism: int = 4,
    model: str = JUDGE_MODEL,
) -> dict:
    """Score original vs probed variants; skipped/unscored items drop pairwise."""
    if probe not in PROBES:
        raise ValueError(f"unknown probe {probe!r}; expected one of {sorted(PROBES)}")
    probe_fn = PROBES[probe]
    probed_items = [FeedbackItem(item.item_id, probe_fn(item.text)) for item in items]
    report: dict = {"probe": probe, "judge_model": model, "n_items": len(items), "metrics": {}}
    for metric in metrics:
        check_metric(metric)
        original_scores, _ = score_items(items, metric, gateway, parallelism, model)
        probed_scores, _ = score_items(probed_items, metric, gateway, parallelism, model)
        pairs = [
            (o.value, p.value)
            for o, p in zip(original_scores, probed_scores)
            if isinstance(o.value, int) and isinstance(p.value, int)
        ]
        if pairs:
            mean_original = sum(o for o, _ in pairs) / len(pairs)
            mean_probed = sum(p for _, p in pairs) / len(pairs)
            delta = mean_probed - mean_original
        else:
            mean_original = mean_probed = delta = None
        report["metrics"][metric] = {
            "n_scored": len(pairs),
            "mean_original": mean_original,
            "mean_probed": mean_probed,
            "delta": delta,
        }
        report[f"delta_{metric}"] = delta
    return report


def multi_judge_summary(scores_by_model: Mapping[str, Sequence[JudgeScore]]) -> dict:
    """Per-model mean plus min/max band over numeric scores."""
    per_model = {}
    for model, scores in scores_by_model.items():
        numeric = [s.value for s in scores if isinstance(s.value, int)]
        per_model[model] = sum(numeric) / len(numeric) if numeric else None
    present = [v for v in per_model.values() if v is not None]
    return {
        "per_model": per_model,
        "min": min(present) if present else None,
        "max": max(present) if present else None,
    }
