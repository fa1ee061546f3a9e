"""HTTP API over the review queue and campaign state (api_version 1).

The console is a pure client of this surface. Mutations are linearized
behind one lock and land in the event log before the response returns, so
a reader that follows a write always sees it.
"""

from __future__ import annotations

import threading
import time
from dataclasses import replace
from pathlib import Path
from typing import Callable, Optional

from fastapi import Body, FastAPI, HTTPException, Query
from pydantic import BaseModel

from ..analysis import COHORTS, ResponseRecord, campaign_report
from ..bank import GatePolicy
from ..corpus import tokenize
from .campaign import Campaign, replay, response_payload
from .events import EventLog
from .review_queue import (
    GateRejectedError,
    IllegalTransitionError,
    QueueError,
    QueueItem,
    ReviewQueue,
    STATES,
)

API_VERSION = 1
EXCERPT_CHARS = 240


class ApiStore:
    """State the API serves: a queue, its log, deployments, responses."""

    def __init__(
        self,
        queue: ReviewQueue,
        log: EventLog,
        deployed: dict[str, dict],
        responses: list[ResponseRecord],
        policy: Optional[GatePolicy] = None,
        clock: Callable[[], float] = time.time,
    ) -> None:
        self.queue = queue
        self.log = log
        self.deployed = deployed
        self.responses = responses
        self.policy = policy or GatePolicy()
        self.clock = clock
        self.lock = threading.Lock()
        self.queue.bind_emit(self._emit)

    def _emit(self, kind: str, payload: dict, ts: float) -> None:
        self.log.append(kind, payload, ts)

    @classmethod
    def from_log_file(cls, path: str | Path, policy: Optional[GatePolicy] = None) -> "ApiStore":
        log = EventLog(path)
        state = replay(log.records(), policy=policy)
        return cls(
            queue=state.queue,
            log=log,
            deployed=state.deployed,
            responses=state.responses,
            policy=policy,
        )

    @classmethod
    def from_campaign(cls, campaign: Campaign) -> "ApiStore":
        store = cls.__new__(cls)
        store.queue = campaign.queue
        store.log = campaign.log
        store.deployed = {
            pid: {
                "posted_id": d.posted_id,
                "item_id": d.item_id,
                "account": d.account,
                "community": d.community,
                "posted_at": d.posted_at,
                "text_as_posted": d.text_as_posted,
                "has_evidence": d.has_evidence,
                "relevant": d.relevant,
            }
            for pid, d in campaign.deployed.items()
        }
        store.responses = campaign.responses
        store.policy = campaign.config.gate_policy
        store.clock = time.time
        store.lock = threading.Lock()
        return store

    def assign_cohort(self, response_id: str, cohort: str, operator: str) -> ResponseRecord:
        for i, record in enumerate(self.responses):
            if record.response_id == response_id:
                updated = replace(record, cohort=cohort)
                self.responses[i] = updated
                self._emit(
                    "cohort_assigned",
                    {"response_id": response_id, "cohort": cohort, "operator": operator},
                    self.clock(),
                )
                return updated
        raise KeyError(response_id)


class ActionBody(BaseModel):
    operator: str = "operator"


class EditBody(BaseModel):
    text: str
    operator: str = "operator"


class CohortBody(BaseModel):
    cohort: str
    operator: str = "operator"


def item_view(item: QueueItem) -> dict:
    doc = item.match.document
    text = item.current_text() if item.variant is not None or item.edited_text else None
    return {
        "id": item.id,
        "state": item.state,
        "community": item.community,
        "thread_id": item.thread_id,
        "matched_terms": sorted(item.match.matched_terms),
        "relevant": item.match.relevant,
        "reason": item.reason,
        "post_excerpt": doc.text[:EXCERPT_CHARS],
        "post_author": doc.author,
        "proposed_text": text,
        "word_count": len(tokenize(text)) if text else 0,
        "gate": "passed" if item.current_gate_passed() else "rejected",
        "gate_reason": item.current_gate_reason(),
        "edited_text": item.edited_text,
        "history": [list(entry) for entry in item.history],
    }


def create_app(store: ApiStore) -> FastAPI:
    app = FastAPI(title="campaign console API", version=str(API_VERSION))

    def ok(**body) -> dict:
        return {"api_version": API_VERSION, **body}

    def get_item_or_404(item_id: str) -> QueueItem:
        try:
            return store.queue.get(item_id)
        except QueueError:
            raise HTTPException(status_code=404, detail=f"no item {item_id}")

    @app.get("/queue")
    def queue_view(state: Optional[str] = Query(default=None)) -> dict:
        if state is not None and state not in STATES:
            raise HTTPException(status_code=400, detail=f"unknown state {state!r}")
        items = store.queue.items(state)
        return ok(items=[item_view(i) for i in items])

    @app.get("/items/{item_id}")
    def item_detail(item_id: str) -> dict:
        return ok(item=item_view(get_item_or_404(item_id)))

    def _review(item_id: str, action: str, operator: str, text: Optional[str] = None) -> dict:
        get_item_or_404(item_id)
        with store.lock:
            try:
                item = store.queue.review(
                    item_id,
                    action,
                    operator=operator,
                    now=store.clock(),
                    text=text,
                    policy=store.policy,
                )
            except (IllegalTransitionError, GateRejectedError) as exc:
                raise HTTPException(
                    status_code=409,
                    detail={
                        "error": str(exc),
                        "state": store.queue.get(item_id).state,
                    },
                )
            except QueueError as exc:
                raise HTTPException(status_code=400, detail=str(exc))
        return ok(item=item_view(item))

    @app.post("/items/{item_id}/approve")
    def approve(item_id: str, body: ActionBody = Body(default=ActionBody())) -> dict:
        return _review(item_id, "approve", body.operator)

    @app.post("/items/{item_id}/reject")
    def reject(item_id: str, body: ActionBody = Body(default=ActionBody())) -> dict:
        return _review(item_id, "reject", body.operator)

    @app.post("/items/{item_id}/edit")
    def edit(item_id: str, body: EditBody) -> dict:
        return _review(item_id, "edit", body.operator, text=body.text)

    @app.get("/campaign/stats")
    def stats() -> dict:
        return ok(stats=campaign_report(store.log.records()))

    @app.get("/deployed")
    def deployed_list() -> dict:
        entries = [store.deployed[pid] for pid in sorted(store.deployed)]
        return ok(deployed=entries)

    @app.get("/deployed/{posted_id}/responses")
    def deployed_responses(posted_id: str) -> dict:
        if posted_id not in store.deployed:
            raise HTTPException(status_code=404, detail=f"no deployed post {posted_id}")
        records = [
            response_payload(r) for r in store.responses if r.deployed_id == posted_id
        ]
        return ok(responses=records)

    @app.get("/responses")
    def all_responses() -> dict:
        return ok(responses=[response_payload(r) for r in store.responses])

    @app.post("/responses/{response_id}/cohort")
    def set_cohort(response_id: str, body: CohortBody) -> dict:
        if body.cohort not in COHORTS:
            raise HTTPException(status_code=400, detail=f"unknown cohort {body.cohort!r}")
        with store.lock:
            try:
                record = store.assign_cohort(response_id, body.cohort, body.operator)
            except KeyError:
                raise HTTPException(
                    status_code=404, detail=f"no response {response_id}"
                )
        return ok(response=response_payload(record))

    @app.get("/events")
    def events(since: int = Query(default=0)) -> dict:
        records = store.log.records(since=since)
        return ok(
            events=[
                {"seq": r.seq, "ts": r.ts, "kind": r.kind, "payload": r.payload}
                for r in records
            ]
        )

    return app
