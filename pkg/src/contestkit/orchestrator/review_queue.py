"""Trigger detection and the operator review queue.

Queue items walk a fixed state machine:

    pending -> approved | edited | rejected | skipped
    edited  -> approved | edited | rejected
    approved -> posted | failed

posted, failed, rejected, and skipped are terminal. Items can also be born
skipped (out-of-context match, duplicate thread) or failed (bank gap), which
records the decision without ever making the text deployable. Every creation
and transition emits exactly one event through the queue's emit hook.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

from ..bank import GatePolicy, GateResult, InterventionVariant, gate_by_emotion
from ..corpus import Document, tokenize
from ..emotion import score_lexicon


class QueueError(RuntimeError):
    pass


class IllegalTransitionError(QueueError):
    def __init__(self, item_id: str, current: str, requested: str) -> None:
        super().__init__(
            f"item {item_id}: cannot move from {current!r} to {requested!r}"
        )
        self.item_id = item_id
        self.current = current
        self.requested = requested


class GateRejectedError(QueueError):
    def __init__(self, item_id: str, reason: str) -> None:
        super().__init__(f"item {item_id}: gate rejected: {reason}")
        self.item_id = item_id
        self.reason = reason


STATES = ("pending", "approved", "edited", "rejected", "posted", "failed", "skipped")
TERMINAL_STATES = frozenset({"rejected", "posted", "failed", "skipped"})
LEGAL_TRANSITIONS: dict[str, frozenset[str]] = {
    "pending": frozenset({"approved", "edited", "rejected", "skipped"}),
    "edited": frozenset({"approved", "edited", "rejected"}),
    "approved": frozenset({"posted", "failed"}),
    "rejected": frozenset(),
    "posted": frozenset(),
    "failed": frozenset(),
    "skipped": frozenset(),
}


@dataclass(frozen=True)
class TriggerMatch:
    document: Document
    matched_terms: frozenset[str]
    relevant: bool
    context_terms_found: frozenset[str]

    def __post_init__(self) -> None:
        if not self.matched_terms:
            raise QueueError("a trigger match needs at least one matched term")
        object.__setattr__(self, "matched_terms", frozenset(self.matched_terms))
        object.__setattr__(
            self, "context_terms_found", frozenset(self.context_terms_found)
        )
        if self.relevant != bool(self.context_terms_found):
            raise QueueError("relevant flag must mirror context_terms_found")


def detect_trigger(
    document: Document,
    terms: Sequence[str],
    context_lexicon: frozenset[str] | set[str],
) -> Optional[TriggerMatch]:
    """Scan one document for insider terms plus domain context.

    A term matches when its token sequence occurs contiguously in the
    document's tokens. The context check excludes the trigger terms' own
    tokens, so a term like "mid holocene" cannot vouch for itself.
    """
    tokens = tokenize(document.text)
    if not tokens:
        return None
    matched: set[str] = set()
    for term in terms:
        needle = tokenize(term)
        if not needle:
            continue
        k = len(needle)
        if any(tokens[i:i + k] == needle for i in range(len(tokens) - k + 1)):
            matched.add(term)
    if not matched:
        return None
    excluded: set[str] = set()
    for term in matched:
        excluded.update(tokenize(term))
    context_found = {
        t for t in tokens if t in context_lexicon and t not in excluded
    }
    return TriggerMatch(
        document=document,
        matched_terms=frozenset(matched),
        relevant=bool(context_found),
        context_terms_found=frozenset(context_found),
    )


@dataclass
class QueueItem:
    id: str
    match: TriggerMatch
    variant: Optional[InterventionVariant]
    state: str
    reason: Optional[str] = None
    operator_note: Optional[str] = None
    edited_text: Optional[str] = None
    edited_gate: Optional[GateResult] = None
    history: list[tuple[str, float]] = field(default_factory=list)

    @property
    def community(self) -> str:
        return self.match.document.community

    @property
    def thread_id(self) -> str:
        return self.match.document.id

    def current_text(self) -> str:
        if self.edited_text is not None:
            return self.edited_text
        if self.variant is None:
            raise QueueError(f"item {self.id} has no deployable text")
        return self.variant.text

    def current_gate_passed(self) -> bool:
        if self.edited_gate is not None:
            return self.edited_gate.passed
        return self.variant is not None and self.variant.gate == "passed"

    def current_gate_reason(self) -> Optional[str]:
        if self.edited_gate is not None:
            return self.edited_gate.reason
        return self.variant.gate_reason if self.variant is not None else None


def item_payload(item: QueueItem) -> dict:
    doc = item.match.document
    return {
        "item_id": item.id,
        "state": item.state,
        "reason": item.reason,
        "community": item.community,
        "thread_id": item.thread_id,
        "matched_terms": sorted(item.match.matched_terms),
        "relevant": item.match.relevant,
        "context_terms_found": sorted(item.match.context_terms_found),
        "document": {
            "id": doc.id,
            "community": doc.community,
            "author": doc.author,
            "kind": doc.kind,
            "parent_id": doc.parent_id,
            "created_at": doc.created_at,
            "text": doc.text,
        },
        "variant": None
        if item.variant is None
        else {
            "variant_id": item.variant.variant_id,
            "template_id": item.variant.template_id,
            "text": item.variant.text,
            "has_evidence": item.variant.has_evidence,
            "gate": item.variant.gate,
            "gate_reason": item.variant.gate_reason,
            "provenance": item.variant.provenance,
            "emotion": dict(item.variant.emotion.distribution),
            "emotion_source": item.variant.emotion.source,
            "terms": sorted(item.variant.terms),
        },
        "edited_text": item.edited_text,
    }


EmitFn = Callable[[str, dict, float], None]


class ReviewQueue:
    """Single-writer queue; all mutations funnel through create/transition."""

    def __init__(self, emit: Optional[EmitFn] = None) -> None:
        self._items: dict[str, QueueItem] = {}
        self._order: list[str] = []
        self._counter = 0
        self._emit = emit or (lambda kind, payload, ts: None)

    def bind_emit(self, emit: EmitFn) -> None:
        """Attach the event sink after replaying a log into a fresh queue."""
        self._emit = emit

    def __len__(self) -> int:
        return len(self._items)

    def get(self, item_id: str) -> QueueItem:
        try:
            return self._items[item_id]
        except KeyError:
            raise QueueError(f"no queue item {item_id!r}") from None

    def items(self, state: Optional[str] = None) -> list[QueueItem]:
        selected = [self._items[i] for i in self._order]
        if state is not None:
            if state not in STATES:
                raise QueueError(f"unknown state filter {state!r}")
            selected = [item for item in selected if item.state == state]
        return selected

    def create(
        self,
        match: TriggerMatch,
        variant: Optional[InterventionVariant],
        state: str,
        now: float,
        reason: Optional[str] = None,
    ) -> QueueItem:
        if state not in ("pending", "skipped", "failed"):
            raise QueueError(f"items cannot be created in state {state!r}")
        if state == "pending" and variant is None:
            raise QueueError("a pending item needs a variant")
        self._counter += 1
        item = QueueItem(
            id=f"q{self._counter:04d}",
            match=match,
            variant=variant,
            state=state,
            reason=reason,
            history=[(state, now)],
        )
        self._items[item.id] = item
        self._order.append(item.id)
        self._emit("item_created", item_payload(item), now)
        return item

    def _transition(
        self,
        item: QueueItem,
        to_state: str,
        now: float,
        operator: Optional[str] = None,
        reason: Optional[str] = None,
        extra: Optional[dict] = None,
    ) -> QueueItem:
        if to_state not in LEGAL_TRANSITIONS.get(item.state, frozenset()):
            raise IllegalTransitionError(item.id, item.state, to_state)
        payload = {
            "item_id": item.id,
            "from": item.state,
            "to": to_state,
            "operator": operator,
            "reason": reason,
        }
        if extra:
            payload.update(extra)
        item.state = to_state
        if reason is not None:
            item.reason = reason
        item.history.append((to_state, now))
        self._emit("item_transition", payload, now)
        return item

    def review(
        self,
        item_id: str,
        action: str,
        operator: str,
        now: float,
        text: Optional[str] = None,
        policy: Optional[GatePolicy] = None,
        scorer=score_lexicon,
    ) -> QueueItem:
        """Operator actions: approve, reject, or edit (with replacement text)."""
        item = self.get(item_id)
        if action == "approve":
            if item.state not in ("pending", "edited"):
                raise IllegalTransitionError(item.id, item.state, "approved")
            if not item.current_gate_passed():
                raise GateRejectedError(
                    item.id, item.current_gate_reason() or "gate rejected"
                )
            return self._transition(item, "approved", now, operator=operator)
        if action == "reject":
            return self._transition(item, "rejected", now, operator=operator)
        if action == "edit":
            if text is None or not text.strip():
                raise QueueError("edit requires replacement text")
            if item.state not in ("pending", "edited"):
                raise IllegalTransitionError(item.id, item.state, "edited")
            result = gate_by_emotion(text, scorer=scorer, policy=policy)
            item.edited_text = text
            item.edited_gate = result
            return self._transition(
                item,
                "edited",
                now,
                operator=operator,
                extra={
                    "edited_text": text,
                    "gate": result.verdict,
                    "gate_reason": result.reason,
                    "word_count": len(tokenize(text)),
                },
            )
        raise QueueError(f"unknown review action {action!r}")

    def skip(self, item_id: str, now: float, reason: str) -> QueueItem:
        return self._transition(self.get(item_id), "skipped", now, reason=reason)

    def mark_posted(self, item_id: str, now: float, posted_id: str) -> QueueItem:
        return self._transition(
            self.get(item_id), "posted", now, extra={"posted_id": posted_id}
        )

    def mark_failed(self, item_id: str, now: float, reason: str) -> QueueItem:
        return self._transition(self.get(item_id), "failed", now, reason=reason)
