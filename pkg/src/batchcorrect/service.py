"""HTTP review service: a thin JSON facade over a correction session.

One editor works through the pending clusters; every mutation goes through
the session state machine under a single lock and is appended to a durable
action log before the request is acknowledged. Restarting the service
replays that log, so no acknowledged action is ever lost. Suggestion lists
are computed per request against the live dictionary, which means words
typed into a growing dictionary show up immediately.

Flagged-member counts shown in cluster summaries are frozen at session
start; they describe what the detector saw, not the growing dictionary's
current opinion.
"""

from __future__ import annotations

import os
from contextlib import asynccontextmanager
from pathlib import Path
from typing import Literal

from fastapi import Depends, FastAPI, HTTPException, Query, Request
from fastapi.responses import FileResponse, PlainTextResponse, Response
from pydantic import BaseModel

from batchcorrect import correction, costing, lexicon
from batchcorrect.clustering import load_clustering
from batchcorrect.correction import (
    Action,
    AlreadyResolvedError,
    InvalidActionError,
    SessionState,
    UnknownTargetError,
    action_to_record,
)
from batchcorrect.corpus import corpus_to_text, load_corpus
from batchcorrect.costing import DEFAULT_COST_MODEL, CostModel

import json
import threading


class ActionBody(BaseModel):
    kind: Literal["verify", "select", "type"]
    label: str
    suggestion_rank: int | None = None


class SuggestionView(BaseModel):
    word: str
    distance: int
    rank: int


class CostView(BaseModel):
    absolute_seconds: float
    v_t: int
    v_d: int
    v_v: int
    baseline_typing_seconds: float | None
    relative_to_typing: float | None


class SessionSnapshot(BaseModel):
    clusters_total: int
    clusters_pending: int
    clusters_resolved: int
    members: int
    cost: CostView
    dictionary_mode: str
    dictionary_size: int
    method_tag: str


class ClusterSummary(BaseModel):
    id: int
    size: int
    modal_prediction: str
    flagged_count: int
    status: Literal["pending", "resolved"]


class MemberView(BaseModel):
    id: str
    prediction: str
    image: str | None
    label: str | None
    source: str | None


class ClusterDetail(BaseModel):
    id: int
    size: int
    status: Literal["pending", "resolved"]
    modal_prediction: str
    suggestions: list[SuggestionView]
    members: list[MemberView]


class ActionOutcome(BaseModel):
    cluster_id: int
    resolved: bool
    cost: CostView


def load_session(
    corpus_path: str | Path,
    clustering_path: str | Path,
    dictionary_paths,
    dictionary_mode: str = "growing",
    max_distance: int = lexicon.DEFAULT_MAX_DISTANCE,
    top_k: int = lexicon.DEFAULT_TOP_K,
) -> SessionState:
    """Assemble a session from pipeline artifacts."""
    corpus = load_corpus(corpus_path)
    clustering = load_clustering(clustering_path, corpus)
    counts = correction.prediction_frequencies(corpus)
    base = lexicon.build_dictionary(dictionary_paths, mode=dictionary_mode)
    dictionary = lexicon.Dictionary(
        sorted(base.words),
        mode=dictionary_mode,
        frequencies={w: counts[w] for w in base.words if counts[w]},
    )
    return SessionState(corpus, clustering, dictionary, max_distance, top_k)


def create_app(
    session: SessionState,
    log_path: str | Path | None = None,
    cost_model: CostModel = DEFAULT_COST_MODEL,
    token: str | None = None,
    export_on_shutdown: bool = True,
    static_dir: str | Path | None = None,
) -> FastAPI:
    """Build the service around one session.

    log_path, when given, is replayed if it exists and then appended to —
    with flush and fsync — before any mutation is acknowledged. static_dir,
    when given, is served at the root so the bundled editor UI and the API
    share one origin.
    """
    log_path = Path(log_path) if log_path else None
    lock = threading.Lock()

    # The typing baseline is what the cost meter compares against; freeze it
    # against the pristine dictionary before any replayed action grows it.
    baseline = None
    if session.corpus.fully_annotated:
        categories = lexicon.categorize(session.dictionary, session.corpus)
        baseline = costing.naive_typing_cost(categories, cost_model)

    initial_flagged = {
        cid: sum(
            1
            for idx in members
            if session.corpus.instances[idx].prediction not in session.dictionary
        )
        for cid, members in enumerate(session.clustering.clusters)
    }

    if log_path is not None and log_path.exists():
        session.replay(correction.read_action_log(log_path))

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        yield
        if export_on_shutdown and log_path is not None:
            corrected = correction.result_corpus(session.result(), session.corpus)
            out = log_path.parent / "corrected.jsonl"
            sources = session.result().sources
            out.write_text(
                corpus_to_text(
                    corrected,
                    {pos: {"source": src} for pos, src in enumerate(sources)},
                ),
                encoding="utf-8",
            )

    app = FastAPI(title="review service", lifespan=lifespan)

    def _authorized(request: Request) -> None:
        if token is not None and request.headers.get("x-review-token") != token:
            raise HTTPException(status_code=401, detail="missing or wrong token")

    guard = [Depends(_authorized)]

    def _cost_view() -> CostView:
        report = costing.batch_cost(
            session.log, cost_model, baseline_typing_seconds=baseline
        )
        return CostView(
            absolute_seconds=report.absolute_seconds,
            v_t=report.v_t,
            v_d=report.v_d,
            v_v=report.v_v,
            baseline_typing_seconds=report.baseline_typing_seconds,
            relative_to_typing=report.relative_to_typing,
        )

    def _status(cid: int) -> str:
        return "resolved" if session.is_resolved(cid) else "pending"

    def _suggestion_views(suggestions) -> list[SuggestionView]:
        return [
            SuggestionView(word=s.word, distance=s.distance, rank=s.rank) for s in suggestions
        ]

    def _append_durably(action: Action) -> None:
        if log_path is None:
            return
        record = action_to_record(
            action, (session.log.v_t, session.log.v_d, session.log.v_v)
        )
        with open(log_path, "a", encoding="utf-8", newline="\n") as fh:
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")
            fh.flush()
            os.fsync(fh.fileno())

    def _apply(action: Action) -> ActionOutcome:
        with lock:
            try:
                session.apply(action)
            except UnknownTargetError as exc:
                raise HTTPException(status_code=404, detail=str(exc)) from exc
            except AlreadyResolvedError as exc:
                raise HTTPException(status_code=409, detail=str(exc)) from exc
            except (InvalidActionError, ValueError) as exc:
                raise HTTPException(status_code=422, detail=str(exc)) from exc
            _append_durably(action)
            if action.scope == "cluster":
                cid = action.target
            else:
                cid = session.cluster_of(action.target)
            return ActionOutcome(
                cluster_id=cid, resolved=session.is_resolved(cid), cost=_cost_view()
            )

    @app.get("/api/session", response_model=SessionSnapshot, dependencies=guard)
    def get_session() -> SessionSnapshot:
        resolved = len(session.resolved)
        total = len(session.clustering.clusters)
        return SessionSnapshot(
            clusters_total=total,
            clusters_pending=total - resolved,
            clusters_resolved=resolved,
            members=sum(len(c) for c in session.clustering.clusters),
            cost=_cost_view(),
            dictionary_mode=session.dictionary.mode,
            dictionary_size=len(session.dictionary),
            method_tag=session.clustering.method_tag,
        )

    @app.get("/api/clusters", response_model=list[ClusterSummary], dependencies=guard)
    def list_clusters(
        status: Literal["pending", "resolved"] | None = None,
        sort: Literal["size", "id"] = "size",
    ) -> list[ClusterSummary]:
        summaries = []
        for cid in session.cluster_ids():
            if status is not None and _status(cid) != status:
                continue
            summaries.append(
                ClusterSummary(
                    id=cid,
                    size=len(session.clustering.clusters[cid]),
                    modal_prediction=session.modal(cid),
                    flagged_count=initial_flagged[cid],
                    status=_status(cid),
                )
            )
        if sort == "size":
            summaries.sort(key=lambda s: (-s.size, s.id))
        else:
            summaries.sort(key=lambda s: s.id)
        return summaries

    @app.get("/api/clusters/{cluster_id}", response_model=ClusterDetail, dependencies=guard)
    def get_cluster(cluster_id: int) -> ClusterDetail:
        try:
            modal = session.modal(cluster_id)
            offered = session.offered(cluster_id)
        except UnknownTargetError as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from exc
        members = []
        for idx in session.clustering.clusters[cluster_id]:
            inst = session.corpus.instances[idx]
            members.append(
                MemberView(
                    id=inst.id,
                    prediction=inst.prediction,
                    image=f"/api/images/{inst.id}" if inst.image_ref else None,
                    label=session.labels.get(idx),
                    source=session.sources.get(idx),
                )
            )
        return ClusterDetail(
            id=cluster_id,
            size=len(members),
            status=_status(cluster_id),
            modal_prediction=modal,
            suggestions=_suggestion_views(offered),
            members=members,
        )

    @app.post(
        "/api/clusters/{cluster_id}/action", response_model=ActionOutcome, dependencies=guard
    )
    def post_cluster_action(cluster_id: int, body: ActionBody) -> ActionOutcome:
        try:
            action = Action(
                kind=body.kind,
                scope="cluster",
                target=cluster_id,
                label=body.label,
                suggestion_rank=body.suggestion_rank,
            )
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        return _apply(action)

    @app.post(
        "/api/members/{instance_id}/action", response_model=ActionOutcome, dependencies=guard
    )
    def post_member_action(instance_id: str, body: ActionBody) -> ActionOutcome:
        try:
            action = Action(
                kind=body.kind,
                scope="member",
                target=instance_id,
                label=body.label,
                suggestion_rank=body.suggestion_rank,
            )
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        return _apply(action)

    @app.get("/api/suggest", response_model=list[SuggestionView], dependencies=guard)
    def get_suggest(
        q: str = Query(...), k: int = Query(default=lexicon.DEFAULT_TOP_K, ge=0)
    ) -> list[SuggestionView]:
        return _suggestion_views(session.dictionary.suggest(q, session.max_distance, k))

    @app.get("/api/cost", response_model=CostView, dependencies=guard)
    def get_cost() -> CostView:
        return _cost_view()

    @app.get("/api/export", dependencies=guard)
    def get_export() -> Response:
        result = session.result()
        corrected = correction.result_corpus(result, session.corpus)
        text = corpus_to_text(
            corrected, {pos: {"source": src} for pos, src in enumerate(result.sources)}
        )
        return PlainTextResponse(
            text,
            media_type="application/json",
            headers={"Content-Disposition": 'attachment; filename="corrected.jsonl"'},
        )

    @app.get("/api/images/{instance_id}", dependencies=guard)
    def get_image(instance_id: str):
        try:
            pos = session.corpus.index_of(instance_id)
        except KeyError as exc:
            raise HTTPException(status_code=404, detail=f"no instance {instance_id!r}") from exc
        ref = session.corpus.instances[pos].image_ref
        if not ref or not Path(ref).exists():
            raise HTTPException(status_code=404, detail="no image for this instance")
        return FileResponse(ref)

    if static_dir is not None:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=static_dir, html=True), name="ui")

    app.state.session = session
    return app
