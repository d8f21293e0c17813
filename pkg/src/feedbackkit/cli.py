"""Command-line entry point: every pipeline stage and evaluation as a subcommand.

All stages speak JSONL on disk. Exit codes: 0 success, 1 validated-input or
pipeline errors, 2 usage errors. Every subcommand takes --dry-run, which
validates inputs and writes nothing.
"""

from __future__ import annotations

import functools
import glob as globlib
import json
import os
from pathlib import Path

import click

from . import agreement as agreement_mod
from . import corpus as corpus_mod
from . import ingest as ingest_mod
from . import judge as judge_mod
from . import lexical as lexical_mod
from . import localize as localize_mod
from . import refine as refine_mod
from .errors import FeedbackKitError, MalformedInput
from .gateway import ENV_API_KEY, ENV_BASE_URL, ENV_MODEL, Gateway, HttpProvider, MockProvider, load_mock_table
from .jsonio import read_jsonl, write_json, write_jsonl, write_stage_meta

_IN_FILE = click.Path(exists=True, dir_okay=False, path_type=Path)
_IN_PATH = click.Path(exists=True, path_type=Path)
_OUT_PATH = click.Path(path_type=Path)


def friendly_errors(f):
    """Convert toolkit/validation errors into clean exit-1 messages."""

    @functools.wraps(f)
    def wrapper(*args, **kwargs):
        try:
            return f(*args, **kwargs)
        except (FeedbackKitError, ValueError, OSError, json.JSONDecodeError) as exc:
            raise click.ClickException(str(exc))

    return wrapper


def gateway_options(f):
    decorators = [
        click.option("--base-url", default=None, help=f"Chat endpoint base URL (or ${ENV_BASE_URL})."),
        click.option("--api-key", default=None, help=f"Bearer token (or ${ENV_API_KEY})."),
        click.option("--model", default=None, help=f"Model name (or ${ENV_MODEL}; stage default otherwise)."),
        click.option("--cache", type=_OUT_PATH, default=None, help="LLM response cache directory."),
        click.option("--parallel", default=4, show_default=True, help="Concurrent LLM requests."),
        click.option("--mock-table", type=_IN_FILE, default=None, help="Canned-response JSON (offline runs)."),
        click.option("--max-requests", type=int, default=None, help="Abort after this many uncached calls."),
        click.option("--timeout", default=60.0, show_default=True, help="Per-request timeout (seconds)."),
    ]
    for dec in reversed(decorators):
        f = dec(f)
    return f


def make_gateway(base_url, api_key, cache, mock_table, max_requests, timeout) -> Gateway:
    if mock_table is not None:
        provider = MockProvider(load_mock_table(mock_table))
    else:
        base_url = base_url or os.environ.get(ENV_BASE_URL, "")
        if not base_url:
            raise MalformedInput(
                f"no LLM endpoint: pass --base-url / set ${ENV_BASE_URL}, or use --mock-table"
            )
        api_key = api_key if api_key is not None else os.environ.get(ENV_API_KEY, "")
        provider = HttpProvider(base_url, api_key, timeout_s=timeout)
    return Gateway(provider, cache_dir=cache, max_requests=max_requests)


def pick_model(flag: str | None, stage_default: str) -> str:
    return flag or os.environ.get(ENV_MODEL) or stage_default


def echo_config(**fields) -> None:
    """One-line run config with secrets redacted."""
    if fields.get("api_key"):
        fields["api_key"] = "***"
    clean = {k: (str(v) if isinstance(v, Path) else v) for k, v in fields.items() if v is not None}
    click.echo("config " + json.dumps(clean, sort_keys=True))


@click.group()
def main():
    """Sports-feedback corpus and evaluation toolkit."""


# ---------------------------------------------------------------- ingest


def _video_id_from_stem(stem: str) -> str:
    return stem[: -len(".words")] if stem.endswith(".words") else stem


def _collect_inputs(in_path: Path, format: str) -> list[tuple[str, Path]]:
    if in_path.is_file():
        return [(_video_id_from_stem(in_path.stem), in_path)]
    suffix = {"srt": "*.srt", "vtt": "*.vtt", "words_json": "*.json"}[format]
    files = sorted(in_path.glob(suffix))
    if not files:
        raise MalformedInput(f"no {suffix} files under {in_path}")
    return [(_video_id_from_stem(f.stem), f) for f in files]


@main.command()
@click.option("--format", "fmt", type=click.Choice(ingest_mod.CAPTION_FORMATS), required=True)
@click.option("--in", "in_path", type=_IN_PATH, required=True, help="Caption file or directory.")
@click.option("--out", type=_OUT_PATH, required=True, help="segments.jsonl (or a directory for words_json).")
@click.option("--catalog", type=_IN_FILE, default=None, help="Video catalog CSV/JSONL to filter against.")
@click.option("--min-duration", default=ingest_mod.DEFAULT_MIN_DURATION_S, show_default=True)
@click.option("--catalog-out", type=_OUT_PATH, default=None, help="Write the retained catalog here.")
@click.option("--merge/--no-merge", default=True, show_default=True, help="Merge overlapping segments.")
@click.option("--dry-run", is_flag=True)
@friendly_errors
def ingest(fmt, in_path, out, catalog, min_duration, catalog_out, merge, dry_run):
    """Parse caption exports into canonical segment/word JSONL."""
    echo_config(stage="ingest", format=fmt, min_duration=min_duration, merge=merge)
    inputs = _collect_inputs(in_path, fmt)

    kept_entries = None
    if catalog is not None:
        kept_entries = ingest_mod.filter_catalog(ingest_mod.read_catalog(catalog), min_duration)
        allowed = {e.video_id for e in kept_entries}
        inputs = [(vid, path) for vid, path in inputs if vid in allowed]

    if fmt in ("srt", "vtt"):
        segments = []
        for video_id, path in inputs:
            parsed = ingest_mod.parse_captions(path.read_bytes(), fmt, video_id)
            segments.extend(ingest_mod.merge_overlaps(parsed) if merge else parsed)
        if dry_run:
            click.echo(f"dry-run: {len(segments)} segments from {len(inputs)} file(s)")
            return
        write_jsonl(out, (ingest_mod.segment_record(s) for s in segments))
        write_stage_meta(out, "ingest", {path.name: path for _, path in inputs})
        click.echo(f"wrote {len(segments)} segments to {out}")
    else:
        parsed_words = [
            (video_id, ingest_mod.parse_captions(path.read_bytes(), fmt), path)
            for video_id, path in inputs
        ]
        total = sum(len(words) for _, words, _ in parsed_words)
        if dry_run:
            click.echo(f"dry-run: {total} words from {len(inputs)} file(s)")
            return
        if len(parsed_words) == 1 and (not out.exists() or out.is_file()):
            video_id, words, path = parsed_words[0]
            write_jsonl(out, (ingest_mod.word_record(w) for w in words))
            write_stage_meta(out, "ingest", {path.name: path})
        else:
            out.mkdir(parents=True, exist_ok=True)
            for video_id, words, path in parsed_words:
                target = out / f"{video_id}.words.jsonl"
                write_jsonl(target, (ingest_mod.word_record(w) for w in words))
            write_stage_meta(out / "words", "ingest", {p.name: p for _, _, p in parsed_words})
        click.echo(f"wrote {total} words from {len(inputs)} file(s) to {out}")

    if catalog_out is not None and kept_entries is not None and not dry_run:
        write_jsonl(
            catalog_out,
            (
                {"video_id": e.video_id, "duration_s": e.duration_s, "channel": e.channel, "title": e.title}
                for e in kept_entries
            ),
        )
        click.echo(f"retained {len(kept_entries)} catalog entries -> {catalog_out}")


# ---------------------------------------------------------------- refine


@main.command()
@click.option("--in", "in_path", type=_IN_FILE, required=True, help="segments.jsonl")
@click.option("--out", type=_OUT_PATH, required=True, help="refined.jsonl")
@click.option("--stats", type=_OUT_PATH, default=None, help="Write refine stats JSON here.")
@gateway_options
@click.option("--dry-run", is_flag=True)
@friendly_errors
def refine(in_path, out, stats, base_url, api_key, model, cache, parallel, mock_table, max_requests, timeout, dry_run):
    """Rewrite raw ASR segments into concise, anonymized commentary."""
    model = pick_model(model, refine_mod.REFINE_MODEL)
    echo_config(stage="refine", model=model, base_url=base_url, api_key=api_key,
                cache=cache, parallel=parallel, mock_table=mock_table)
    segments = ingest_mod.segments_from_records(read_jsonl(in_path))
    if dry_run:
        click.echo(f"dry-run: would refine {len(segments)} segments")
        return
    gateway = make_gateway(base_url, api_key, cache, mock_table, max_requests, timeout)
    records, run_stats = refine_mod.refine_corpus(segments, gateway, parallelism=parallel, model=model)
    write_jsonl(out, (refine_mod.refined_record(r) for r in records))
    write_stage_meta(out, "refine", {"segments": in_path})
    if stats is not None:
        write_json(stats, run_stats.as_dict())
    click.echo(
        f"refined {run_stats.total}: kept {run_stats.kept}, skipped {run_stats.skipped}, errors {run_stats.errors}"
    )


# ---------------------------------------------------------------- localize


def _load_words(words_path: Path) -> dict[str, list]:
    files = [words_path] if words_path.is_file() else sorted(words_path.glob("*.jsonl"))
    if not files:
        raise MalformedInput(f"no word files under {words_path}")
    table = {}
    for f in files:
        table[_video_id_from_stem(f.stem)] = ingest_mod.words_from_records(read_jsonl(f))
    return table


@main.command()
@click.option("--in", "in_path", type=_IN_FILE, required=True, help="refined.jsonl")
@click.option("--words", type=_IN_PATH, required=True, help="Word-timestamp JSONL file or directory.")
@click.option("--out", type=_OUT_PATH, required=True, help="spans.jsonl")
@click.option("--stats", type=_OUT_PATH, default=None)
@gateway_options
@click.option("--dry-run", is_flag=True)
@friendly_errors
def localize(in_path, words, out, stats, base_url, api_key, model, cache, parallel, mock_table, max_requests, timeout, dry_run):
    """Attach precise time spans to refined commentary via word timestamps."""
    model = pick_model(model, localize_mod.LOCALIZE_MODEL)
    echo_config(stage="localize", model=model, base_url=base_url, api_key=api_key,
                cache=cache, parallel=parallel, mock_table=mock_table)
    refined = refine_mod.refined_from_records(read_jsonl(in_path))
    words_by_video = _load_words(words)
    if dry_run:
        kept = sum(1 for r in refined if r.status == "kept")
        click.echo(f"dry-run: would localize {kept} kept commentaries over {len(words_by_video)} video(s)")
        return
    gateway = make_gateway(base_url, api_key, cache, mock_table, max_requests, timeout)
    spans, run_stats = localize_mod.localize_corpus(
        refined, words_by_video, gateway, parallelism=parallel, model=model
    )
    write_jsonl(out, (localize_mod.span_record(s) for s in spans))
    write_stage_meta(out, "localize", {"refined": in_path, "words": words})
    if stats is not None:
        write_json(stats, run_stats.as_dict())
    click.echo(f"localized {run_stats.localized}/{run_stats.segments_in} segments into {len(spans)} spans")


# ---------------------------------------------------------------- windows


def _clip_record(clip_id: str, segment_id: str, window, commentary: str) -> dict:
    return {
        "id": clip_id,
        "segment_id": segment_id,
        "video_id": window.video_id,
        "w_start": window.w_start,
        "w_end": window.w_end,
        "strategy": window.strategy,
        "commentary": commentary,
    }


@main.command()
@click.option("--in", "in_path", type=_IN_FILE, required=True, help="spans.jsonl")
@click.option("--strategy", type=click.Choice(localize_mod.WINDOW_STRATEGIES), default="exact", show_default=True)
@click.option("--out", type=_OUT_PATH, required=True, help="clips.jsonl")
@click.option("--dry-run", is_flag=True)
@friendly_errors
def window(in_path, strategy, out, dry_run):
    """Turn localized spans into fixed training windows."""
    echo_config(stage="window", strategy=strategy)
    spans = localize_mod.spans_from_records(read_jsonl(in_path))
    if dry_run:
        click.echo(f"dry-run: would window {len(spans)} spans")
        return
    records = []
    per_segment: dict[str, int] = {}
    for span in spans:
        i = per_segment.get(span.segment_id, 0)
        per_segment[span.segment_id] = i + 1
        clip = localize_mod.apply_window(span, strategy)
        records.append(_clip_record(f"{span.segment_id}#{i}", span.segment_id, clip, span.commentary))
    write_jsonl(out, records)
    write_stage_meta(out, "window", {"spans": in_path})
    click.echo(f"wrote {len(records)} {strategy} clips to {out}")


@main.command()
@click.option("--segments", type=_IN_FILE, required=True, help="segments.jsonl")
@click.option("--refined", type=_IN_FILE, required=True, help="refined.jsonl (kept rows give commentary)")
@click.option("--clip-len", default=4.0, show_default=True)
@click.option("--stride", default=1.0, show_default=True)
@click.option("--out", type=_OUT_PATH, required=True, help="clips.jsonl")
@click.option("--dry-run", is_flag=True)
@friendly_errors
def slide(segments, refined, clip_len, stride, out, dry_run):
    """Sliding-window baseline: window every refined segment without localization."""
    echo_config(stage="slide", clip_len=clip_len, stride=stride)
    segs = ingest_mod.segments_from_records(read_jsonl(segments))
    kept = {r.segment_id: r.text for r in refine_mod.refined_from_records(read_jsonl(refined)) if r.status == "kept"}
    jobs = [s for s in segs if s.segment_id in kept]
    if dry_run:
        click.echo(f"dry-run: would window {len(jobs)} refined segments")
        return
    records = []
    for seg in jobs:
        for i, clip in enumerate(localize_mod.slide_windows(seg, clip_len, stride)):
            records.append(_clip_record(f"{seg.segment_id}#slide{i}", seg.segment_id, clip, kept[seg.segment_id]))
    write_jsonl(out, records)
    write_stage_meta(out, "slide", {"segments": segments, "refined": refined})
    click.echo(f"wrote {len(records)} slide clips to {out}")


# ---------------------------------------------------------------- assemble


def _read_text_source(path: Path) -> list[dict]:
    if path.suffix == ".jsonl":
        return list(read_jsonl(path))
    paragraphs = [p.strip() for p in path.read_text(encoding="utf-8").split("\n\n") if p.strip()]
    return [
        {"id": f"text:{path.stem}:{i:04d}", "text": " ".join(p.split())}
        for i, p in enumerate(paragraphs)
    ]


@main.command()
@click.option("--feedback", type=_IN_FILE, default=None, help="Feedback source JSONL.")
@click.option("--commentary", type=_IN_FILE, default=None, help="clips.jsonl from window/slide.")
@click.option("--text", type=_IN_FILE, default=None, help="Text-only source (.jsonl or plain .txt).")
@click.option("--out", type=_OUT_PATH, required=True, help="manifest.jsonl")
@click.option("--counts", type=_OUT_PATH, default=None, help="counts.json report.")
@click.option("--seed", default=0, show_default=True)
@click.option("--train", default=0.8, show_default=True)
@click.option("--val", default=0.1, show_default=True)
@click.option("--test", default=0.1, show_default=True)
@click.option("--frame-count", default=corpus_mod.DEFAULT_FRAME_COUNT, show_default=True)
@click.option("--commentary-domain", default="climbing", show_default=True)
@click.option("--text-domain", default="climbing", show_default=True)
@click.option("--dry-run", is_flag=True)
@friendly_errors
def assemble(feedback, commentary, text, out, counts, seed, train, val, test, frame_count,
             commentary_domain, text_domain, dry_run):
    """Merge supervision sources into one training manifest with splits."""
    echo_config(stage="assemble", seed=seed, train=train, val=val, test=test, frame_count=frame_count)
    if feedback is None and commentary is None and text is None:
        raise MalformedInput("need at least one of --feedback / --commentary / --text")
    plan = corpus_mod.SplitPlan(seed=seed, train=train, val=val, test=test)
    examples, report = corpus_mod.assemble_manifest(
        list(read_jsonl(feedback)) if feedback else [],
        list(read_jsonl(commentary)) if commentary else [],
        _read_text_source(text) if text else [],
        plan,
        frame_count=frame_count,
        commentary_domain=commentary_domain,
        text_domain=text_domain,
    )
    if dry_run:
        click.echo(f"dry-run: manifest of {report['total']} examples {report['by_split']}")
        return
    write_jsonl(out, (corpus_mod.example_record(e) for e in examples))
    inputs = {name: p for name, p in (("feedback", feedback), ("commentary", commentary), ("text", text)) if p}
    write_stage_meta(out, "assemble", inputs)
    if counts is not None:
        write_json(counts, report)
    click.echo(f"assembled {report['total']} examples: {json.dumps(report['by_split'])}")


# ---------------------------------------------------------------- scoring


@main.group()
def score():
    """Evaluate generated feedback."""


_METRIC_ALIASES = {
    "bleu4": "bleu4", "bleu": "bleu4",
    "meteor": "meteor",
    "rougel": "rouge_l", "rouge_l": "rouge_l",
    "bertscore": "bertscore",
}


def _parse_metrics(metrics: str) -> list[str]:
    out = []
    for name in metrics.split(","):
        key = name.strip().lower().replace("-", "_")
        if key not in _METRIC_ALIASES:
            raise MalformedInput(f"unknown metric {name.strip()!r}")
        out.append(_METRIC_ALIASES[key])
    return out


@score.command("lexical")
@click.option("--pred", type=_IN_FILE, required=True, help="Predictions JSONL ({id, text}).")
@click.option("--ref", type=_IN_FILE, required=True, help="References JSONL ({id, text}).")
@click.option("--metrics", default="bleu4,meteor,rougeL,bertscore", show_default=True)
@click.option("--runs-glob", default=None, help="Glob of per-run prediction files (mean±std).")
@click.option("--out", type=_OUT_PATH, default=None, help="lexical_report.json")
@click.option("--bleu-mode", type=click.Choice(["corpus", "sentence_smoothed"]), default="corpus", show_default=True)
@click.option("--rescale-baseline", type=float, default=None, help="BERTScore baseline rescaling.")
@click.option("--dry-run", is_flag=True)
@friendly_errors
def score_lexical(pred, ref, metrics, runs_glob, out, bleu_mode, rescale_baseline, dry_run):
    """BLEU-4 / METEOR / ROUGE-L / BERTScore against references (x100 in reports)."""
    metric_names = _parse_metrics(metrics)
    echo_config(stage="score-lexical", metrics=",".join(metric_names), bleu_mode=bleu_mode)
    refs = list(read_jsonl(ref))
    run_files = [Path(p) for p in sorted(globlib.glob(runs_glob))] if runs_glob else [pred]
    if not run_files:
        raise MalformedInput(f"--runs-glob {runs_glob!r} matched no files")
    per_run = []
    for run in run_files:
        pairs = lexical_mod.make_pairs(read_jsonl(run), refs)
        per_run.append(
            lexical_mod.score_corpus(pairs, metric_names, bleu_mode=bleu_mode, rescale_baseline=rescale_baseline)
        )
    if dry_run:
        click.echo(f"dry-run: {len(per_run)} run(s), {len(refs)} reference pairs")
        return
    report = {"n_pairs": len(refs), "runs": [str(p) for p in run_files], "metrics": {}}
    for name in metric_names:
        agg = lexical_mod.aggregate_runs([scores[name] for scores in per_run], metric=name)
        report["metrics"][name] = {"mean": agg.mean * 100, "std": agg.std * 100, "n_runs": agg.n_runs}
        click.echo(f"{name:10s} {agg.mean * 100:6.2f} ± {agg.std * 100:.2f} (n={agg.n_runs})")
    if out is not None:
        write_json(out, report)
        write_stage_meta(out, "score-lexical", {"ref": ref, **{f"run{i}": p for i, p in enumerate(run_files)}})


def _load_feedback_items(path: Path) -> list[judge_mod.FeedbackItem]:
    items = []
    for rec in read_jsonl(path):
        item_id = str(rec.get("item_id") or rec.get("id") or "")
        text = str(rec.get("text") or rec.get("feedback") or "")
        if not item_id or not text:
            raise MalformedInput(f"feedback record needs id and text: {rec!r}")
        items.append(judge_mod.FeedbackItem(item_id, text))
    if not items:
        raise MalformedInput(f"no feedback items in {path}")
    return items


@score.command("judge")
@click.option("--metric", type=click.Choice(judge_mod.METRICS), required=True)
@click.option("--in", "in_path", type=_IN_FILE, required=True, help="feedback.jsonl ({id, text}).")
@click.option("--out", type=_OUT_PATH, required=True, help="scores.jsonl")
@click.option("--models", default=None, help="Comma-separated judge models (default: one stage model).")
@gateway_options
@click.option("--summary", "summary_path", type=_OUT_PATH, default=None, help="Per-model min/max summary JSON.")
@click.option("--dry-run", is_flag=True)
@friendly_errors
def score_judge(metric, in_path, out, models, base_url, api_key, model, cache, parallel,
                mock_table, max_requests, timeout, summary_path, dry_run):
    """Rubric LLM scoring of specificity (1-4) or actionability (skip|1-3)."""
    model_list = (
        [m.strip() for m in models.split(",") if m.strip()]
        if models
        else [pick_model(model, judge_mod.JUDGE_MODEL)]
    )
    echo_config(stage="score-judge", metric=metric, models=",".join(model_list),
                base_url=base_url, api_key=api_key, cache=cache, mock_table=mock_table)
    items = _load_feedback_items(in_path)
    if dry_run:
        click.echo(f"dry-run: would judge {len(items)} items with {len(model_list)} model(s)")
        return
    gateway = make_gateway(base_url, api_key, cache, mock_table, max_requests, timeout)
    all_records = []
    by_model = {}
    for m in model_list:
        scores, stats = judge_mod.score_items(items, metric, gateway, parallelism=parallel, model=m)
        by_model[m] = scores
        all_records.extend(judge_mod.judge_score_record(s) for s in scores)
        click.echo(
            f"{m}: scored {stats.scored}, skipped {stats.skipped}, "
            f"parse failures {stats.parse_failures}, out of scale {stats.out_of_scale}, "
            f"gateway errors {stats.gateway_errors}"
        )
    write_jsonl(out, all_records)
    write_stage_meta(out, "score-judge", {"feedback": in_path})
    if summary_path is not None or len(model_list) > 1:
        summary = judge_mod.multi_judge_summary(by_model)
        click.echo(f"per-model means: {json.dumps(summary['per_model'], sort_keys=True)}")
        if summary_path is not None:
            write_json(summary_path, summary)


@main.command("judge-validate")
@click.option("--scores", type=_IN_FILE, required=True, help="scores.jsonl from `score judge`.")
@click.option("--annotations", type=_IN_FILE, required=True, help="Human annotations JSONL.")
@click.option("--out", type=_OUT_PATH, default=None, help="Validation report JSON.")
@click.option("--dry-run", is_flag=True)
@friendly_errors
def judge_validate(scores, annotations, out, dry_run):
    """Judge-vs-human accuracy (correct within 0.5 of the averaged rating)."""
    echo_config(stage="judge-validate")
    preds = judge_mod.scores_from_records(read_jsonl(scores))
    ann_records = list(read_jsonl(annotations))
    metrics = sorted({p.metric for p in preds})
    if not metrics:
        raise MalformedInput(f"no judge scores in {scores}")
    if dry_run:
        click.echo(f"dry-run: {len(preds)} predictions over metrics {metrics}")
        return
    report = {}
    for metric in metrics:
        gts = judge_mod.ground_truth_from_annotations(ann_records, metric)
        result = judge_mod.validate_against_humans([p for p in preds if p.metric == metric], gts)
        report[metric] = result.as_dict()
        acc = report[metric]["accuracy_pct"]
        skip_acc = report[metric]["skip_accuracy_pct"]
        line = f"{metric:13s} accuracy {acc}% (n={result.n})"
        if skip_acc is not None:
            line += f", skip accuracy {skip_acc}% (n_skip={result.n_skip})"
        click.echo(line)
    if out is not None:
        write_json(out, report)
        write_stage_meta(out, "judge-validate", {"scores": scores, "annotations": annotations})


@main.command()
@click.option("--store", type=_IN_FILE, required=True, help="ratings.jsonl")
@click.option("--metric", type=click.Choice(judge_mod.METRICS), required=True)
@click.option("--weighting", type=click.Choice(agreement_mod.WEIGHTINGS), default="linear", show_default=True)
@click.option("--out", type=_OUT_PATH, default=None)
@click.option("--dry-run", is_flag=True)
@friendly_errors
def agreement(store, metric, weighting, out, dry_run):
    """Weighted Cohen's kappa between the two raters after exclusions."""
    echo_config(stage="agreement", metric=metric, weighting=weighting)
    rating_store = agreement_mod.RatingStore(store)
    if dry_run:
        click.echo(f"dry-run: {len(rating_store.annotations())} annotations, raters {rating_store.raters(metric)}")
        return
    report = agreement_mod.agreement_report(rating_store.annotations(), metric, weighting)
    click.echo(
        f"{metric}: kappa={report.kappa_weighted:.4f} ({weighting}), "
        f"retained {report.n_retained}/{report.n_annotated}, "
        f"disagreements {json.dumps(report.as_dict()['disagreement_histogram'])}"
    )
    if report.degenerate:
        click.echo("warning: degenerate marginals (both raters constant); kappa = 1.0 by convention")
    if out is not None:
        write_json(out, report.as_dict())
        write_stage_meta(out, "agreement", {"store": store})


@main.command()
@click.option("--probe", type=click.Choice(sorted(judge_mod.PROBES)), required=True)
@click.option("--in", "in_path", type=_IN_FILE, required=True, help="feedback.jsonl ({id, text}).")
@click.option("--out", type=_OUT_PATH, default=None)
@gateway_options
@click.option("--dry-run", is_flag=True)
@friendly_errors
def bias(probe, in_path, out, base_url, api_key, model, cache, parallel, mock_table,
         max_requests, timeout, dry_run):
    """Judge-bias probe: score originals vs gender-swapped/lengthened variants."""
    model = pick_model(model, judge_mod.JUDGE_MODEL)
    echo_config(stage="bias", probe=probe, model=model, base_url=base_url, api_key=api_key,
                cache=cache, mock_table=mock_table)
    items = _load_feedback_items(in_path)
    if dry_run:
        click.echo(f"dry-run: would probe {len(items)} items ({probe})")
        return
    gateway = make_gateway(base_url, api_key, cache, mock_table, max_requests, timeout)
    report = judge_mod.bias_report(items, probe, gateway, parallelism=parallel, model=model)
    for metric, entry in report["metrics"].items():
        click.echo(
            f"{metric:13s} mean {entry['mean_original']} -> {entry['mean_probed']} "
            f"(delta {entry['delta']}, n={entry['n_scored']})"
        )
    if out is not None:
        write_json(out, report)
        write_stage_meta(out, "bias", {"feedback": in_path})


# ---------------------------------------------------------------- annotation


@main.group()
def annotate():
    """Human annotation tooling."""


@annotate.command("serve")
@click.option("--items", type=_IN_FILE, required=True, help="items.jsonl ({item_id, feedback}).")
@click.option("--store", type=_OUT_PATH, required=True, help="ratings.jsonl (created if missing).")
@click.option("--port", default=8080, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--static", "static_dir", type=click.Path(exists=True, file_okay=False, path_type=Path),
              default=None, help="Static UI bundle to serve at /.")
@click.option("--raters", default=None, help="Comma-separated expected rater ids (default: discovered).")
@click.option("--dry-run", is_flag=True)
@friendly_errors
def annotate_serve(items, store, port, host, static_dir, raters, dry_run):
    """Serve the annotation API (and optionally the browser UI)."""
    from .service import build_app, load_items  # deferred: uvicorn import is slow

    echo_config(stage="annotate-serve", host=host, port=port, static=static_dir, raters=raters)
    item_list = load_items(read_jsonl(items))
    expected = [r.strip() for r in raters.split(",") if r.strip()] if raters else None
    if dry_run:
        click.echo(f"dry-run: {len(item_list)} items, store {store}")
        return
    import uvicorn

    app = build_app(item_list, agreement_mod.RatingStore(store), static_dir=static_dir, expected_raters=expected)
    click.echo(f"serving {len(item_list)} items on http://{host}:{port}")
    uvicorn.run(app, host=host, port=port, log_level="warning")


if __name__ == "__main__":
    main()
