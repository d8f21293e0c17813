from __future__ import annotations

import math

import pytest
from hypothesis import given
from hypothesis import strategies as st
from sklearn.metrics import cohen_kappa_score

from feedbackkit.agreement import (
    Annotation,
    AgreementReport,
    ItemPair,
    RatingStore,
    agreement_report,
    annotation_from_record,
    annotation_record,
    collect_pairs,
    disagreement_histogram,
    filter_applicable,
    weighted_kappa,
    weighted_kappa_detail,
)
from feedbackkit.errors import MalformedInput, MissingCounterpartRating
from feedbackkit.jsonio import read_jsonl

from conftest import FIXTURES

RATINGS = FIXTURES / "annotations" / "ratings.jsonl"


def load_fixture_annotations():
    return [annotation_from_record(rec) for rec in read_jsonl(RATINGS)]


# -------------------------------------------------------------- annotations


def test_annotation_accepts_scale_and_skip():
    Annotation("i", "r", "specificity", 4, 0.0)
    Annotation("i", "r", "actionability", 1, 0.0)
    # the store takes skip for either metric; agreement drops those rows later
    Annotation("i", "r", "specificity", "skip", 0.0)
    Annotation("i", "r", "actionability", "skip", 0.0)


@pytest.mark.parametrize("metric,value", [("specificity", 5), ("specificity", 0), ("actionability", 4), ("specificity", 2.5), ("specificity", "fine")])
def test_annotation_rejects_out_of_scale(metric, value):
    with pytest.raises(MalformedInput):
        Annotation("i", "r", metric, value, 0.0)


def test_annotation_rejects_unknown_metric():
    with pytest.raises(ValueError):
        Annotation("i", "r", "fluency", 2, 0.0)


def test_record_roundtrip_coerces_float_values():
    ann = Annotation("i", "r", "specificity", 3, 12.5)
    rec = annotation_record(ann)
    assert annotation_from_record(rec) == ann
    rec["value"] = 3.0  # JSON round-trips may widen ints
    assert annotation_from_record(rec).value == 3


# -------------------------------------------------------------------- store


def test_store_appends_and_reloads(tmp_path):
    path = tmp_path / "ratings.jsonl"
    store = RatingStore(path)
    store.record("a", "r1", "specificity", 2)
    store.record("a", "r2", "specificity", 3)
    store.record("a", "r1", "actionability", "skip")
    assert len(path.read_text().splitlines()) == 3
    assert store.get("a", "r1", "specificity").value == 2
    assert store.rated_items("r1", "specificity") == {"a"}
    assert store.raters() == ["r1", "r2"]
    assert store.raters("actionability") == ["r1"]

    reloaded = RatingStore(path)
    assert {annotation_record(a)["value"] for a in reloaded.annotations()} == {2, 3, "skip"}


def test_store_last_write_wins(tmp_path):
    path = tmp_path / "ratings.jsonl"
    store = RatingStore(path)
    store.record("a", "r1", "specificity", 2)
    store.record("a", "r1", "specificity", 4)
    assert store.get("a", "r1", "specificity").value == 4
    # the log keeps both lines; materialization dedups
    assert len(path.read_text().splitlines()) == 2
    assert len(store.annotations()) == 1
    assert RatingStore(path).get("a", "r1", "specificity").value == 4


def test_store_on_fixture_log():
    store = RatingStore(RATINGS)
    assert store.raters() == ["r1", "r2"]
    assert len(store.annotations()) == 120  # 30 items x 2 raters x 2 metrics
    assert store.rated_items("r1", "specificity") == {f"item_{i:02d}" for i in range(1, 31)}


# -------------------------------------------------------------------- pairs


def ann(item, rater, value, metric="specificity"):
    return Annotation(item, rater, metric, value, 0.0)


def test_collect_pairs_orders_raters_by_id():
    pairs = collect_pairs([ann("x", "zed", 4), ann("x", "amy", 1)], "specificity")
    assert pairs == [ItemPair("x", 1, 4)]


def test_collect_pairs_requires_exactly_two_raters():
    with pytest.raises(MissingCounterpartRating):
        collect_pairs([ann("x", "r1", 2)], "specificity")
    with pytest.raises(MissingCounterpartRating):
        collect_pairs([ann("x", "r1", 2), ann("x", "r2", 2), ann("x", "r3", 2)], "specificity")


def test_collect_pairs_flags_missing_counterpart():
    anns = [ann("x", "r1", 2), ann("x", "r2", 3), ann("y", "r1", 2)]
    with pytest.raises(MissingCounterpartRating, match="'y'"):
        collect_pairs(anns, "specificity")


def test_collect_pairs_ignores_other_metric():
    anns = [ann("x", "r1", 2), ann("x", "r2", 3), ann("y", "r1", 2, "actionability")]
    assert len(collect_pairs(anns, "specificity")) == 1


def test_filter_applicable_drops_either_skip():
    anns = [
        ann("x", "r1", 2), ann("x", "r2", 3),
        ann("y", "r1", "skip"), ann("y", "r2", 3),
        ann("z", "r1", 1), ann("z", "r2", "skip"),
        ann("w", "r1", "skip"), ann("w", "r2", "skip"),
    ]
    assert filter_applicable(anns, "specificity") == [ItemPair("x", 2, 3)]


def test_disagreement_histogram_sorted():
    pairs = [ItemPair("a", 1, 3), ItemPair("b", 2, 2), ItemPair("c", 4, 3), ItemPair("d", 2, 3)]
    assert disagreement_histogram(pairs) == {0: 1, 1: 2, 2: 1}
    assert list(disagreement_histogram(pairs)) == [0, 1, 2]


# -------------------------------------------------------------------- kappa


def test_kappa_perfect_agreement():
    kappa, degenerate = weighted_kappa_detail([1, 2, 3, 4], [1, 2, 3, 4], 4)
    assert kappa == 1.0 and not degenerate


def test_kappa_chance_level_is_zero():
    assert weighted_kappa([1, 1, 2, 2], [1, 2, 1, 2], 2) == pytest.approx(0.0, abs=1e-15)


def test_kappa_hand_computed_linear():
    # n=5 over a 3-point scale; exact value worked out by hand: 1 - (1/5)/(11/25)
    a, b = [1, 2, 3, 2, 1], [1, 3, 3, 2, 2]
    assert weighted_kappa(a, b, 3, "linear") == pytest.approx(6 / 11, rel=1e-12)


def test_kappa_hand_computed_quadratic():
    a, b = [1, 2, 3, 2, 1], [1, 3, 3, 2, 2]
    assert weighted_kappa(a, b, 3, "quadratic") == pytest.approx(11 / 16, rel=1e-12)


def test_kappa_symmetry():
    a, b = [1, 4, 2, 3, 3, 1], [2, 3, 2, 4, 1, 1]
    for weighting in ("linear", "quadratic"):
        assert weighted_kappa(a, b, 4, weighting) == pytest.approx(
            weighted_kappa(b, a, 4, weighting), rel=1e-12
        )


def test_kappa_degenerate_constant_and_equal():
    kappa, degenerate = weighted_kappa_detail([2, 2, 2], [2, 2, 2], 4)
    assert (kappa, degenerate) == (1.0, True)


def test_kappa_constant_but_unequal_is_not_degenerate():
    kappa, degenerate = weighted_kappa_detail([1, 1], [2, 2], 3)
    assert not degenerate
    assert kappa == pytest.approx(0.0, abs=1e-15)


def test_kappa_validation():
    with pytest.raises(ValueError):
        weighted_kappa([1, 2], [1], 4)
    with pytest.raises(ValueError):
        weighted_kappa([1], [1], 4)
    with pytest.raises(ValueError):
        weighted_kappa([1, 5], [1, 2], 4)
    with pytest.raises(ValueError):
        weighted_kappa([1, 2], [1, 2], 4, weighting="cubic")


@pytest.mark.filterwarnings("ignore::RuntimeWarning")  # sklearn emits nan on degenerate marginals
@given(
    st.integers(min_value=2, max_value=5).flatmap(
        lambda k: st.tuples(
            st.just(k),
            st.lists(st.tuples(st.integers(1, k), st.integers(1, k)), min_size=2, max_size=40),
        )
    ),
    st.sampled_from(["linear", "quadratic"]),
)
def test_kappa_matches_sklearn(scale_and_pairs, weighting):
    k, pairs = scale_and_pairs
    a = [p[0] for p in pairs]
    b = [p[1] for p in pairs]
    kappa, degenerate = weighted_kappa_detail(a, b, k, weighting)
    reference = cohen_kappa_score(a, b, labels=list(range(1, k + 1)), weights=weighting)
    if degenerate:
        assert kappa == 1.0 and math.isnan(reference)
    else:
        assert kappa == pytest.approx(reference, abs=1e-9)


# ------------------------------------------------------------------ reports


def test_agreement_report_on_fixture_specificity():
    anns = load_fixture_annotations()
    linear = agreement_report(anns, "specificity", "linear")
    assert (linear.n_annotated, linear.n_retained) == (30, 24)
    assert linear.kappa_weighted == pytest.approx(0.4473684210526314, rel=1e-12)
    assert not linear.degenerate
    assert linear.disagreement_histogram == {0: 13, 1: 8, 2: 3}
    quadratic = agreement_report(anns, "specificity", "quadratic")
    assert quadratic.kappa_weighted == pytest.approx(0.5428571428571427, rel=1e-12)


def test_agreement_report_on_fixture_actionability():
    anns = load_fixture_annotations()
    linear = agreement_report(anns, "actionability", "linear")
    assert (linear.n_annotated, linear.n_retained) == (30, 14)
    assert linear.kappa_weighted == pytest.approx(0.6164383561643835, rel=1e-12)
    assert linear.disagreement_histogram == {0: 10, 1: 4}
    quadratic = agreement_report(anns, "actionability", "quadratic")
    assert quadratic.kappa_weighted == pytest.approx(0.7113402061855669, rel=1e-12)


def test_agreement_report_as_dict_stringifies_histogram_keys():
    report = AgreementReport("specificity", "linear", 3, 2, 0.5, False, {0: 1, 2: 1})
    d = report.as_dict()
    assert d["disagreement_histogram"] == {"0": 1, "2": 1}
    assert d["n_retained"] == 2


def test_agreement_report_needs_two_retained_items():
    anns = [
        ann("x", "r1", 2), ann("x", "r2", 3),
        ann("y", "r1", "skip"), ann("y", "r2", 3),
    ]
    with pytest.raises(MalformedInput):
        agreement_report(anns, "specificity")
