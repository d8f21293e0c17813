"""HTTP backend for the two-rater annotation protocol.

Serves items one at a time per (rater, metric), records ratings into a
RatingStore, and exposes the agreement report once both raters have finished.
The browser UI is a static bundle mounted under / when --static is given.
"""

from __future__ import annotations

from pathlib import Path
from typing import Iterable, Mapping

from fastapi import FastAPI, Request, Response
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, ValidationError

from .agreement import Annotation, RatingStore, agreement_report
from .errors import MalformedInput, MissingCounterpartRating
from .judge import METRICS, SKIP


class RatingIn(BaseModel):
    item_id: str
    rater_id: str
    metric: str
    value: int | str
    timestamp: float | None = None


class ItemOut(BaseModel):
    item_id: str
    feedback: str
    clip: dict | None = None
    metric: str
    position: dict


def load_items(records: Iterable[Mapping]) -> list[dict]:
    """Normalize item records; accepts id/item_id and text/feedback aliases."""
    items = []
    seen = set()
    for rec in records:
        item_id = str(rec.get("item_id") or rec.get("id") or "")
        text = str(rec.get("feedback") or rec.get("text") or "")
        if not item_id or not text:
            raise MalformedInput(f"item record needs an id and feedback text: {rec!r}")
        if item_id in seen:
            raise MalformedInput(f"duplicate item id {item_id!r}")
        seen.add(item_id)
        items.append({"item_id": item_id, "feedback": text, "clip": rec.get("clip")})
    if not items:
        raise MalformedInput("no annotation items loaded")
    return items


def _bad_request(detail: str) -> JSONResponse:
    return JSONResponse({"detail": detail}, status_code=400)


def build_app(
    items: list[dict],
    store: RatingStore,
    static_dir: str | Path | None = None,
    expected_raters: list[str] | None = None,
) -> FastAPI:
    app = FastAPI(title="feedbackkit annotation API")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    item_ids = [it["item_id"] for it in items]
    by_id = {it["item_id"]: it for it in items}

    def progress_for(rater: str) -> dict:
        total = len(items)
        metrics = {}
        for metric in METRICS:
            rated = len(store.rated_items(rater, metric) & set(item_ids))
            metrics[metric] = {"rated": rated, "total": total, "done": rated == total}
        return {"rater": rater, "total": total, "metrics": metrics}

    @app.get("/api/next")
    def next_item(rater: str = "", metric: str = "") -> Response:
        if not rater:
            return _bad_request("missing rater id")
        if metric not in METRICS:
            return _bad_request(f"metric must be one of {list(METRICS)}")
        rated = store.rated_items(rater, metric)
        for it in items:
            if it["item_id"] not in rated:
                payload = ItemOut(
                    item_id=it["item_id"],
                    feedback=it["feedback"],
                    clip=it.get("clip"),
                    metric=metric,
                    position={"rated": len(rated & set(item_ids)), "total": len(items)},
                )
                return JSONResponse(payload.model_dump())
        return Response(status_code=204)

    @app.post("/api/rating")
    async def post_rating(request: Request) -> Response:
        try:
            body = await request.json()
        except Exception:
            return _bad_request("body must be JSON")
        try:
            rating = RatingIn(**body) if isinstance(body, dict) else None
        except ValidationError as exc:
            return _bad_request(f"invalid rating body: {exc.errors()[0].get('msg', 'validation error')}")
        if rating is None:
            return _bad_request("body must be a JSON object")
        if rating.item_id not in by_id:
            return JSONResponse({"detail": f"unknown item {rating.item_id!r}"}, status_code=404)
        value = rating.value
        if isinstance(value, str) and value != SKIP:
            return _bad_request(f"string value must be {SKIP!r}")
        try:
            ann = store.record(rating.item_id, rating.rater_id, rating.metric, value)
        except (MalformedInput, ValueError) as exc:
            return _bad_request(str(exc))
        return JSONResponse(
            {
                "status": "recorded",
                "item_id": ann.item_id,
                "metric": ann.metric,
                "value": ann.value,
                "progress": progress_for(ann.rater_id),
            }
        )

    @app.get("/api/progress")
    def progress(rater: str = "") -> Response:
        if not rater:
            return _bad_request("missing rater id")
        return JSONResponse(progress_for(rater))

    @app.get("/api/agreement")
    def agreement(metric: str = "", weighting: str = "linear") -> Response:
        if metric not in METRICS:
            return _bad_request(f"metric must be one of {list(METRICS)}")
        if weighting not in ("linear", "quadratic"):
            return _bad_request("weighting must be linear or quadratic")
        raters = expected_raters or store.raters(metric)
        if len(raters) != 2:
            return JSONResponse(
                {"detail": f"need exactly two raters, have {raters}"}, status_code=409
            )
        incomplete = [
            r for r in raters if not set(item_ids) <= store.rated_items(r, metric)
        ]
        if incomplete:
            return JSONResponse(
                {"detail": f"raters not finished with {metric}: {sorted(incomplete)}"},
                status_code=409,
            )
        relevant = [
            a
            for a in store.annotations()
            if a.item_id in by_id and a.rater_id in raters
        ]
        try:
            report = agreement_report(relevant, metric, weighting)
        except (MalformedInput, MissingCounterpartRating) as exc:
            return JSONResponse({"detail": str(exc)}, status_code=409)
        return JSONResponse(report.as_dict())

    if static_dir is not None:
        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="ui")

    return app
