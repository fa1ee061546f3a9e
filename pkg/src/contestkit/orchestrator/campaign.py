"""Campaign runner: ties stream watching, review, scheduling, posting, and
response collection together around the append-only event log.

Everything that happens is an event first; in-memory state is a cache of
the log. Time is always passed in (tick(now)), so the simulated mode can
drive the clock and unit tests stay instant.
"""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Optional, Sequence

import requests
import yaml

from ..analysis import ResponseRecord, tfidf_cosine
from ..bank import (
    BankGapError,
    DeploymentHistory,
    GatePolicy,
    InterventionVariant,
    deployable_text,
    select_intervention,
    DEFAULT_DISCLOSURE,
    DEFAULT_REPETITION_WINDOW_S,
)
from ..connectors import (
    BannedError,
    BotAccount,
    Connector,
    ParentGoneError,
    RetryablePlatformError,
    idempotency_key,
)
from ..corpus import Document, load_context_lexicon, tokenize
from ..emotion import EmotionScore, bucket_of, score_lexicon
from .events import EventLog, EventRecord
from .review_queue import QueueItem, ReviewQueue, TriggerMatch, detect_trigger
from .scheduler import (
    Assignment,
    NoEligibleAccountError,
    RotationScheduler,
    DEFAULT_ROTATION_INTERVAL_S,
)

log = logging.getLogger(__name__)

MODES = ("pilot", "automated", "simulated")
DEFAULT_RESPONSE_HORIZON_S = 7 * 24 * 3600.0
DEFAULT_RESPONSE_POLL_S = 3600.0
MAX_SUBMIT_RETRIES = 3


class CampaignError(RuntimeError):
    pass


@dataclass
class CampaignConfig:
    communities: list[str]
    mode: str
    accounts: list[BotAccount]
    insider_terms: list[str]
    rotation_interval_s: float = DEFAULT_ROTATION_INTERVAL_S
    auto_approve: bool = False
    context_lexicon: frozenset[str] = frozenset()
    gate_policy: GatePolicy = field(default_factory=GatePolicy)
    repetition_window_s: float = DEFAULT_REPETITION_WINDOW_S
    response_horizon_s: float = DEFAULT_RESPONSE_HORIZON_S
    response_poll_s: float = DEFAULT_RESPONSE_POLL_S
    disclosure: str = DEFAULT_DISCLOSURE
    webhook_url: Optional[str] = None

    def __post_init__(self) -> None:
        if not self.communities:
            raise CampaignError("campaign needs at least one community")
        if self.mode not in MODES:
            raise CampaignError(f"unknown mode {self.mode!r}")
        if self.mode == "automated" and len(self.accounts) < 2:
            raise CampaignError("automated mode requires at least 2 accounts")
        if self.rotation_interval_s <= 0:
            raise CampaignError("rotation_interval must be positive")
        if not self.insider_terms:
            raise CampaignError("campaign needs a non-empty insider term list")
        if self.mode == "pilot":
            self.auto_approve = False  # human review is the point of the pilot
        if not self.context_lexicon:
            self.context_lexicon = load_context_lexicon()


def config_from_file(path: str | Path, mode_override: Optional[str] = None) -> CampaignConfig:
    raw = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    if not isinstance(raw, dict):
        raise CampaignError(f"campaign config {path}: expected a mapping")
    accounts = [
        BotAccount(
            handle=a["handle"],
            karma=int(a.get("karma", 0)),
            min_karma=int(a.get("min_karma", 100)),
        )
        for a in raw.get("accounts", [])
    ]
    mode = mode_override or os.environ.get("CONTEST_MODE") or raw.get("mode", "pilot")
    lexicon = frozenset(raw.get("context_lexicon", ()))
    return CampaignConfig(
        communities=list(raw.get("communities", ())),
        mode=mode,
        accounts=accounts,
        insider_terms=list(raw.get("insider_terms", ())),
        rotation_interval_s=float(
            raw.get("rotation_interval_s", DEFAULT_ROTATION_INTERVAL_S)
        ),
        auto_approve=bool(raw.get("auto_approve", False)),
        context_lexicon=lexicon,
        repetition_window_s=float(
            raw.get("repetition_window_s", DEFAULT_REPETITION_WINDOW_S)
        ),
        response_horizon_s=float(
            raw.get("response_horizon_s", DEFAULT_RESPONSE_HORIZON_S)
        ),
        response_poll_s=float(raw.get("response_poll_s", DEFAULT_RESPONSE_POLL_S)),
        disclosure=raw.get("disclosure", DEFAULT_DISCLOSURE),
        webhook_url=raw.get("webhook_url") or os.environ.get("CONTEST_WEBHOOK_URL"),
    )


@dataclass(frozen=True)
class DeployedIntervention:
    posted_id: str
    item_id: str
    account: str
    community: str
    posted_at: float
    text_as_posted: str
    has_evidence: bool
    relevant: bool
    trigger_author: str
    trigger_text: str


def _post_webhook(url: str, payload: dict) -> None:
    try:
        requests.post(url, json=payload, timeout=5.0)
    except requests.RequestException as exc:  # alerting must never kill the run
        log.warning("webhook delivery failed: %s", exc)


class Campaign:
    def __init__(
        self,
        config: CampaignConfig,
        connector: Connector,
        variants: Sequence[InterventionVariant],
        event_log: Optional[EventLog] = None,
        webhook_poster: Callable[[str, dict], None] = _post_webhook,
    ) -> None:
        self.config = config
        self.connector = connector
        self.variants = list(variants)
        self.log = event_log or EventLog()
        self.webhook_poster = webhook_poster
        self.queue = ReviewQueue(emit=self._emit)
        self.scheduler = RotationScheduler(config.accounts, config.rotation_interval_s)
        self.history = DeploymentHistory()
        self.accounts = {a.handle: a for a in config.accounts}
        self.cursors: dict[str, Optional[str]] = {c: None for c in config.communities}
        self.pending_assignments: list[Assignment] = []
        self.deployed: dict[str, DeployedIntervention] = {}
        self.deployed_by_item: dict[str, str] = {}
        self.responses: list[ResponseRecord] = []
        self._seen_response_ids: set[str] = set()
        self._next_response_poll: dict[str, float] = {}
        self.paused = False
        self._started = False
        self._finished = False

    # --- event plumbing -----------------------------------------------------

    def _emit(self, kind: str, payload: dict, ts: float) -> EventRecord:
        record = self.log.append(kind, payload, ts)
        if kind == "notification" and self.config.webhook_url:
            self.webhook_poster(
                self.config.webhook_url,
                {"seq": record.seq, "ts": record.ts, "kind": kind, "payload": payload},
            )
        return record

    # --- lifecycle ----------------------------------------------------------

    def start(self, now: float) -> None:
        if self._started:
            return
        self._started = True
        self._emit(
            "campaign_started",
            {
                "mode": self.config.mode,
                "communities": sorted(self.config.communities),
                "accounts": sorted(self.accounts),
                "auto_approve": self.config.auto_approve,
                "rotation_interval_s": self.config.rotation_interval_s,
                "insider_terms": sorted(self.config.insider_terms),
                "max_length_words": self.config.gate_policy.max_length_words,
            },
            now,
        )

    def finish(self, now: float) -> None:
        if not self._finished:
            self._finished = True
            self._emit("campaign_finished", {}, now)

    def tick(self, now: float) -> None:
        self.start(now)
        self._watch_streams(now)
        if self.config.auto_approve:
            for item in self.queue.items("pending"):
                self.queue.review(item.id, "approve", operator="auto", now=now,
                                  policy=self.config.gate_policy)
        if not self.paused:
            self._schedule_approved(now)
            self._execute_due(now)
        self._collect_all_responses(now)

    # --- stream watching and enqueue ----------------------------------------

    def _watch_streams(self, now: float) -> None:
        for community in self.config.communities:
            events, cursor = self.connector.fetch_new_posts(
                community, self.cursors[community]
            )
            self.cursors[community] = cursor
            for event in events:
                match = detect_trigger(
                    event.document, self.config.insider_terms, self.config.context_lexicon
                )
                if match is None:
                    continue
                self._emit(
                    "trigger_matched",
                    {
                        "document_id": event.document.id,
                        "community": event.document.community,
                        "matched_terms": sorted(match.matched_terms),
                        "relevant": match.relevant,
                        "context_terms_found": sorted(match.context_terms_found),
                    },
                    now,
                )
                self.enqueue_candidate(match, now)

    def enqueue_candidate(self, match: TriggerMatch, now: float) -> Optional[QueueItem]:
        thread_id = match.document.id
        if self.history.thread_intervened(thread_id):
            return self.queue.create(
                match, None, "skipped", now, reason="already-intervened"
            )
        if not match.relevant:
            return self.queue.create(
                match, None, "skipped", now, reason="out-of-context"
            )
        variant: Optional[InterventionVariant] = None
        last_gap: Optional[BankGapError] = None
        for term in sorted(match.matched_terms):
            try:
                variant = select_intervention(
                    term,
                    thread_id,
                    match.document.community,
                    self.variants,
                    self.history,
                    now,
                    self.config.repetition_window_s,
                )
                break
            except BankGapError as exc:
                last_gap = exc
        if variant is None and last_gap is not None:
            return self.queue.create(
                match, None, "failed", now, reason=f"bank-gap: {last_gap}"
            )
        if variant is None:  # thread raced into history via another term
            return self.queue.create(
                match, None, "skipped", now, reason="already-intervened"
            )
        item = self.queue.create(match, variant, "pending", now)
        self._emit(
            "notification",
            {"item_id": item.id, "note": "pending review", "community": item.community},
            now,
        )
        return item

    # --- scheduling and posting ----------------------------------------------

    def _assigned_item_ids(self) -> set[str]:
        return {a.item_id for a in self.pending_assignments}

    def _schedule_approved(self, now: float) -> None:
        assigned = self._assigned_item_ids()
        for item in self.queue.items("approved"):
            if item.id in assigned or item.id in self.deployed_by_item:
                continue
            try:
                assignment = self.scheduler.assign(item.id, item.community, now)
            except NoEligibleAccountError as exc:
                self._pause(now, str(exc))
                return
            self.pending_assignments.append(assignment)
            self._emit(
                "assignment_made",
                {
                    "item_id": assignment.item_id,
                    "account": assignment.account,
                    "community": assignment.community,
                    "not_before": assignment.not_before,
                    "eligible_count": assignment.eligible_count,
                },
                now,
            )

    def _pause(self, now: float, reason: str) -> None:
        self.paused = True
        self._emit("campaign_paused", {"reason": reason}, now)
        self._emit("alert", {"message": f"campaign paused: {reason}"}, now)

    def _execute_due(self, now: float) -> None:
        due = [a for a in self.pending_assignments if a.not_before <= now]
        for assignment in sorted(due, key=lambda a: (a.not_before, a.item_id)):
            if self.paused:
                return
            self.pending_assignments.remove(assignment)
            self.execute_post(assignment, now)

    def execute_post(self, assignment: Assignment, now: float) -> Optional[DeployedIntervention]:
        item = self.queue.get(assignment.item_id)
        if item.state != "approved":  # duplicate timer or late reschedule
            return None
        account = self.accounts[assignment.account]
        community = assignment.community
        if not account.eligible(community):
            self._reschedule(item, now)
            return None
        last = account.last_post_at.get(community)
        if last is not None and now - last < self.config.rotation_interval_s:
            # execution ran early relative to the real spacing; push it back
            self.pending_assignments.append(
                replace(assignment, not_before=last + self.config.rotation_interval_s)
            )
            return None
        text = deployable_text_for_item(item, self.config.disclosure)
        key = idempotency_key(account.handle, item.thread_id, text)
        posted_id: Optional[str] = None
        for attempt in range(MAX_SUBMIT_RETRIES + 1):
            try:
                posted_id = self.connector.submit_reply(
                    account, item.thread_id, text, key
                )
                break
            except BannedError:
                account.banned_in.add(community)
                self._emit(
                    "account_banned", {"account": account.handle, "community": community}, now
                )
                self._reschedule(item, now)
                return None
            except ParentGoneError:
                self.queue.mark_failed(item.id, now, reason="parent-gone")
                return None
            except RetryablePlatformError as exc:
                log.info("submit retry %d for %s: %s", attempt + 1, item.id, exc)
                continue
        if posted_id is None:
            self.queue.mark_failed(item.id, now, reason="submit-failed")
            return None
        account.last_post_at[community] = now
        self.scheduler.notify_posted(account.handle, community, now)
        self.queue.mark_posted(item.id, now, posted_id)
        deployed = DeployedIntervention(
            posted_id=posted_id,
            item_id=item.id,
            account=account.handle,
            community=community,
            posted_at=now,
            text_as_posted=text,
            has_evidence=item.variant.has_evidence if item.variant else False,
            relevant=item.match.relevant,
            trigger_author=item.match.document.author,
            trigger_text=item.match.document.text,
        )
        self.deployed[posted_id] = deployed
        self.deployed_by_item[item.id] = posted_id
        self._next_response_poll[posted_id] = now
        self._emit(
            "deployed",
            {
                "posted_id": posted_id,
                "item_id": item.id,
                "account": account.handle,
                "community": community,
                "posted_at": now,
                "text_as_posted": text,
                "has_evidence": deployed.has_evidence,
                "relevant": deployed.relevant,
                "trigger_author": deployed.trigger_author,
            },
            now,
        )
        return deployed

    def _reschedule(self, item: QueueItem, now: float) -> None:
        try:
            assignment = self.scheduler.assign(item.id, item.community, now)
        except NoEligibleAccountError as exc:
            self._pause(now, str(exc))
            return
        self.pending_assignments.append(assignment)
        self._emit(
            "assignment_made",
            {
                "item_id": assignment.item_id,
                "account": assignment.account,
                "community": assignment.community,
                "not_before": assignment.not_before,
                "eligible_count": assignment.eligible_count,
                "rescheduled": True,
            },
            now,
        )

    # --- response collection --------------------------------------------------

    def _collect_all_responses(self, now: float) -> None:
        for posted_id in sorted(self.deployed):
            self.collect_responses(self.deployed[posted_id], now)

    def collect_responses(self, deployed: DeployedIntervention, now: float) -> list[ResponseRecord]:
        if now > deployed.posted_at + self.config.response_horizon_s:
            return []
        next_poll = self._next_response_poll.get(deployed.posted_id, deployed.posted_at)
        if now < next_poll:
            return []
        self._next_response_poll[deployed.posted_id] = now + self.config.response_poll_s
        docs, tombstoned = self.connector.fetch_replies(deployed.posted_id)
        if tombstoned:
            self._emit(
                "alert",
                {"message": f"deployed post {deployed.posted_id} was removed"},
                now,
            )
            return []
        new_records: list[ResponseRecord] = []
        for doc in docs:
            if doc.id in self._seen_response_ids or doc.author in self.accounts:
                continue
            self._seen_response_ids.add(doc.id)
            record = self._build_response_record(deployed, doc)
            self.responses.append(record)
            new_records.append(record)
            self._emit("response_collected", response_payload(record), now)
        return new_records

    def _build_response_record(
        self, deployed: DeployedIntervention, doc: Document
    ) -> ResponseRecord:
        reference = self._reference_corpus()
        return ResponseRecord(
            response_id=doc.id,
            deployed_id=deployed.posted_id,
            responder=doc.author,
            cohort="unknown",
            is_original_poster=doc.author == deployed.trigger_author,
            text=doc.text,
            word_count=len(tokenize(doc.text)),
            similarity=tfidf_cosine(deployed.text_as_posted, doc.text, reference),
            original_bucket=bucket_of(score_lexicon(deployed.trigger_text)).value,
            response_bucket=bucket_of(score_lexicon(doc.text)).value,
            parent_id=doc.parent_id,
        )

    def _reference_corpus(self) -> list[str]:
        texts = [d.trigger_text for d in self.deployed.values()]
        texts.extend(d.text_as_posted for d in self.deployed.values())
        return texts

    # --- simulated loop ---------------------------------------------------------

    def run_simulated(self, simulator, step_s: float = 60.0, max_steps: int = 100_000) -> None:
        if self.config.mode != "simulated":
            raise CampaignError("run_simulated requires mode=simulated")
        now = 0.0
        self.start(now)
        for _ in range(max_steps):
            simulator.sim_step(now)
            self.tick(now)
            if self._simulation_done(now, simulator):
                break
            now += step_s
        self.finish(now)

    def _simulation_done(self, now: float, simulator) -> bool:
        if not simulator.script_exhausted():
            return False
        if self.queue.items("pending") or self.queue.items("approved"):
            if not self.paused:
                return False
        if self.pending_assignments and not self.paused:
            return False
        if self.deployed:
            last_post = max(d.posted_at for d in self.deployed.values())
            if now < last_post + self.config.response_horizon_s:
                return False
        return True


def deployable_text_for_item(item: QueueItem, disclosure: str = DEFAULT_DISCLOSURE) -> str:
    if item.edited_text is not None:
        return f"{item.edited_text}\n\n{disclosure}"
    if item.variant is None:
        raise CampaignError(f"item {item.id} has no deployable text")
    return deployable_text(item.variant, disclosure)


def response_payload(record: ResponseRecord) -> dict:
    return {
        "response_id": record.response_id,
        "posted_id": record.deployed_id,
        "responder": record.responder,
        "cohort": record.cohort,
        "is_original_poster": record.is_original_poster,
        "text": record.text,
        "word_count": record.word_count,
        "similarity": record.similarity,
        "original_bucket": record.original_bucket,
        "response_bucket": record.response_bucket,
        "parent_id": record.parent_id,
    }


# --- replay -------------------------------------------------------------------


@dataclass
class ReplayedState:
    queue: ReviewQueue
    deployed: dict[str, dict]
    responses: list[ResponseRecord]
    item_states: dict[str, str]
    events: list[EventRecord]


def _match_from_payload(payload: dict) -> TriggerMatch:
    doc = payload["document"]
    return TriggerMatch(
        document=Document(
            id=doc["id"],
            community=doc["community"],
            author=doc["author"],
            kind=doc["kind"],
            parent_id=doc.get("parent_id"),
            created_at=float(doc["created_at"]),
            text=doc["text"],
        ),
        matched_terms=frozenset(payload["matched_terms"]),
        relevant=bool(payload["relevant"]),
        context_terms_found=frozenset(payload.get("context_terms_found", ())),
    )


def _variant_from_payload(payload: Optional[dict]) -> Optional[InterventionVariant]:
    if payload is None:
        return None
    emotion = payload.get("emotion") or {"neutral": 1.0}
    return InterventionVariant(
        variant_id=payload["variant_id"],
        template_id=payload["template_id"],
        text=payload["text"],
        emotion=EmotionScore(
            distribution=emotion, source=payload.get("emotion_source", "lexicon")
        ),
        gate=payload.get("gate", "passed"),
        provenance=payload.get("provenance", "generated"),
        terms=frozenset(payload.get("terms", ())),
        gate_reason=payload.get("gate_reason"),
        approved=True,
    )


def replay(records: Sequence[EventRecord], policy: Optional[GatePolicy] = None) -> ReplayedState:
    """Fold the event log back into queue + deployment + response state."""
    queue = ReviewQueue()
    deployed: dict[str, dict] = {}
    responses: list[ResponseRecord] = []
    id_map: dict[str, str] = {}  # original item id -> replayed item id
    for record in records:
        payload = record.payload
        if record.kind == "item_created":
            item = queue.create(
                _match_from_payload(payload),
                _variant_from_payload(payload.get("variant")),
                payload["state"],
                record.ts,
                reason=payload.get("reason"),
            )
            id_map[payload["item_id"]] = item.id
        elif record.kind == "item_transition":
            item_id = id_map.get(payload["item_id"], payload["item_id"])
            to_state = payload["to"]
            if to_state == "edited":
                queue.review(
                    item_id,
                    "edit",
                    operator=payload.get("operator") or "replay",
                    now=record.ts,
                    text=payload["edited_text"],
                    policy=policy,
                )
            elif to_state == "approved":
                queue.review(
                    item_id,
                    "approve",
                    operator=payload.get("operator") or "replay",
                    now=record.ts,
                    policy=policy,
                )
            elif to_state == "rejected":
                queue.review(
                    item_id, "reject", operator=payload.get("operator") or "replay",
                    now=record.ts,
                )
            elif to_state == "posted":
                queue.mark_posted(item_id, record.ts, payload.get("posted_id", ""))
            elif to_state == "failed":
                queue.mark_failed(item_id, record.ts, payload.get("reason") or "failed")
            elif to_state == "skipped":
                queue.skip(item_id, record.ts, payload.get("reason") or "skipped")
        elif record.kind == "deployed":
            deployed[payload["posted_id"]] = dict(payload)
        elif record.kind == "response_collected":
            responses.append(
                ResponseRecord(
                    response_id=payload["response_id"],
                    deployed_id=payload["posted_id"],
                    responder=payload["responder"],
                    cohort=payload.get("cohort", "unknown"),
                    is_original_poster=bool(payload["is_original_poster"]),
                    text=payload["text"],
                    word_count=int(payload["word_count"]),
                    similarity=float(payload["similarity"]),
                    original_bucket=payload["original_bucket"],
                    response_bucket=payload["response_bucket"],
                    parent_id=payload.get("parent_id"),
                )
            )
        elif record.kind == "cohort_assigned":
            target = payload.get("response_id")
            for i, existing in enumerate(responses):
                if existing.response_id == target:
                    responses[i] = replace(existing, cohort=payload["cohort"])
    item_states = {item.id: item.state for item in queue.items()}
    return ReplayedState(
        queue=queue,
        deployed=deployed,
        responses=responses,
        item_states=item_states,
        events=list(records),
    )
