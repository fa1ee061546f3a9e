import pytest

from contestkit.orchestrator.review_queue import (
    GateRejectedError,
    IllegalTransitionError,
    QueueError,
    ReviewQueue,
    TriggerMatch,
    detect_trigger,
    item_payload,
)

from conftest import make_doc
from test_bank import make_variant

CONTEXT = frozenset({"climate", "warming", "temperature", "co2"})


def make_match(doc_id="d1", terms=("albedo",), context=("climate",)):
    return TriggerMatch(
        document=make_doc(doc_id, "placeholder text"),
        matched_terms=frozenset(terms),
        relevant=bool(context),
        context_terms_found=frozenset(context),
    )


def make_queue():
    events = []
    queue = ReviewQueue(emit=lambda kind, payload, ts: events.append((kind, payload, ts)))
    return queue, events


# ---------------------------------------------------------------- detection


def test_detect_trigger_requires_term_and_context():
    doc = make_doc("d", "the albedo feedback is driving climate change")
    match = detect_trigger(doc, ["albedo"], CONTEXT)
    assert match is not None
    assert match.matched_terms == {"albedo"}
    assert match.relevant
    assert "climate" in match.context_terms_found


def test_detect_trigger_no_term_is_none():
    doc = make_doc("d", "pleasant weather for a bike ride")
    assert detect_trigger(doc, ["albedo"], CONTEXT) is None


def test_detect_trigger_without_context_is_irrelevant():
    doc = make_doc("d", "albedo is my favorite word")
    match = detect_trigger(doc, ["albedo"], CONTEXT)
    assert match is not None
    assert not match.relevant
    assert match.context_terms_found == frozenset()


def test_detect_trigger_bigram_needs_contiguous_tokens():
    present = make_doc("d1", "the mid holocene was warm, a climate note")
    split = make_doc("d2", "mid and late holocene climate evidence")
    assert detect_trigger(present, ["mid holocene"], CONTEXT) is not None
    assert detect_trigger(split, ["mid holocene"], CONTEXT) is None


def test_detect_trigger_term_cannot_vouch_for_itself():
    # "climate" is both inside the matched term and in the context lexicon;
    # the term's own tokens must not count as context
    doc = make_doc("d", "climate alarmism is everywhere")
    match = detect_trigger(doc, ["climate alarmism"], CONTEXT)
    assert match is not None
    assert not match.relevant
    # independent context restores relevance
    doc2 = make_doc("d2", "climate alarmism about co2 is everywhere")
    assert detect_trigger(doc2, ["climate alarmism"], CONTEXT).relevant


def test_detect_trigger_empty_text():
    assert detect_trigger(make_doc("d", ""), ["albedo"], CONTEXT) is None


def test_trigger_match_invariants():
    with pytest.raises(QueueError):
        TriggerMatch(
            document=make_doc("d", "x"),
            matched_terms=frozenset(),
            relevant=False,
            context_terms_found=frozenset(),
        )
    with pytest.raises(QueueError, match="mirror"):
        TriggerMatch(
            document=make_doc("d", "x"),
            matched_terms=frozenset({"t"}),
            relevant=True,
            context_terms_found=frozenset(),
        )


# ---------------------------------------------------------------- creation


def test_create_assigns_sequential_ids_and_emits():
    queue, events = make_queue()
    a = queue.create(make_match("d1"), make_variant(), "pending", now=1.0)
    b = queue.create(
        make_match("d2", context=()), None, "skipped", now=2.0, reason="out-of-context"
    )
    assert (a.id, b.id) == ("q0001", "q0002")
    assert [k for k, _, _ in events] == ["item_created", "item_created"]
    assert events[1][1]["reason"] == "out-of-context"
    assert len(queue) == 2
    assert [i.id for i in queue.items("skipped")] == ["q0002"]


def test_create_rejects_bad_birth_states():
    queue, _ = make_queue()
    with pytest.raises(QueueError):
        queue.create(make_match(), make_variant(), "approved", now=0.0)
    with pytest.raises(QueueError, match="needs a variant"):
        queue.create(make_match(), None, "pending", now=0.0)


def test_get_unknown_item():
    queue, _ = make_queue()
    with pytest.raises(QueueError, match="q9999"):
        queue.get("q9999")


# ---------------------------------------------------------------- reviews


def test_approve_pending_item():
    queue, events = make_queue()
    item = queue.create(make_match(), make_variant(), "pending", now=1.0)
    queue.review(item.id, "approve", operator="op1", now=2.0)
    assert item.state == "approved"
    assert item.history == [("pending", 1.0), ("approved", 2.0)]
    kind, payload, ts = events[-1]
    assert kind == "item_transition"
    assert payload["from"] == "pending" and payload["to"] == "approved"
    assert payload["operator"] == "op1"


def test_approve_blocked_by_failed_gate():
    queue, _ = make_queue()
    bad = make_variant(gate="rejected", approved=False)
    bad.gate_reason = "negative mass 0.900 exceeds 0.2"
    item = queue.create(make_match(), bad, "pending", now=1.0)
    with pytest.raises(GateRejectedError, match="negative mass"):
        queue.review(item.id, "approve", operator="op1", now=2.0)
    assert item.state == "pending"


def test_edit_re_gates_text():
    queue, _ = make_queue()
    item = queue.create(make_match(), make_variant(), "pending", now=1.0)
    queue.review(
        item.id, "edit", operator="op1", now=2.0, text="This is nonsense and a lie"
    )
    assert item.state == "edited"
    assert not item.current_gate_passed()
    with pytest.raises(GateRejectedError):
        queue.review(item.id, "approve", operator="op1", now=3.0)
    # a second edit with calm text reopens the path to approval
    queue.review(
        item.id, "edit", operator="op1", now=4.0, text="Thanks, the data says otherwise."
    )
    assert item.current_gate_passed()
    queue.review(item.id, "approve", operator="op1", now=5.0)
    assert item.state == "approved"
    assert item.current_text() == "Thanks, the data says otherwise."


def test_edit_requires_text():
    queue, _ = make_queue()
    item = queue.create(make_match(), make_variant(), "pending", now=1.0)
    with pytest.raises(QueueError, match="replacement text"):
        queue.review(item.id, "edit", operator="op1", now=2.0)
    with pytest.raises(QueueError, match="replacement text"):
        queue.review(item.id, "edit", operator="op1", now=2.0, text="   ")


def test_edit_event_carries_gate_verdict():
    queue, events = make_queue()
    item = queue.create(make_match(), make_variant(), "pending", now=1.0)
    queue.review(item.id, "edit", operator="op1", now=2.0, text="Good point, thanks.")
    payload = events[-1][1]
    assert payload["to"] == "edited"
    assert payload["gate"] == "passed"
    assert payload["edited_text"] == "Good point, thanks."
    assert payload["word_count"] == 3


def test_reject_from_pending_and_edited():
    queue, _ = make_queue()
    a = queue.create(make_match("d1"), make_variant(), "pending", now=1.0)
    queue.review(a.id, "reject", operator="op1", now=2.0)
    assert a.state == "rejected"
    b = queue.create(make_match("d2"), make_variant(), "pending", now=1.0)
    queue.review(b.id, "edit", operator="op1", now=2.0, text="Thanks anyway.")
    queue.review(b.id, "reject", operator="op1", now=3.0)
    assert b.state == "rejected"


def test_unknown_action():
    queue, _ = make_queue()
    item = queue.create(make_match(), make_variant(), "pending", now=1.0)
    with pytest.raises(QueueError, match="unknown review action"):
        queue.review(item.id, "promote", operator="op1", now=2.0)


# ---------------------------------------------------------------- lifecycle


def test_posted_and_failed_require_approval_first():
    queue, _ = make_queue()
    item = queue.create(make_match(), make_variant(), "pending", now=1.0)
    with pytest.raises(IllegalTransitionError):
        queue.mark_posted(item.id, now=2.0, posted_id="p1")
    queue.review(item.id, "approve", operator="op1", now=2.0)
    queue.mark_posted(item.id, now=3.0, posted_id="p1")
    assert item.state == "posted"


def test_mark_failed_from_approved():
    queue, _ = make_queue()
    item = queue.create(make_match(), make_variant(), "pending", now=1.0)
    queue.review(item.id, "approve", operator="op1", now=2.0)
    queue.mark_failed(item.id, now=3.0, reason="parent-gone")
    assert item.state == "failed"
    assert item.reason == "parent-gone"


def test_terminal_states_are_frozen():
    queue, _ = make_queue()
    for action_state in ("rejected", "posted"):
        item = queue.create(make_match(f"d-{action_state}"), make_variant(), "pending", now=1.0)
        if action_state == "rejected":
            queue.review(item.id, "reject", operator="op", now=2.0)
        else:
            queue.review(item.id, "approve", operator="op", now=2.0)
            queue.mark_posted(item.id, now=3.0, posted_id="p")
        with pytest.raises(IllegalTransitionError) as info:
            queue.review(item.id, "approve", operator="op", now=4.0)
        assert info.value.current == item.state


def test_skip_transition():
    queue, _ = make_queue()
    item = queue.create(make_match(), make_variant(), "pending", now=1.0)
    queue.skip(item.id, now=2.0, reason="thread already handled")
    assert item.state == "skipped"
    with pytest.raises(IllegalTransitionError):
        queue.review(item.id, "approve", operator="op", now=3.0)


def test_item_payload_shape():
    queue, _ = make_queue()
    item = queue.create(make_match(), make_variant(), "pending", now=1.0)
    payload = item_payload(item)
    assert payload["item_id"] == item.id
    assert payload["state"] == "pending"
    assert payload["variant"]["variant_id"] == "v1"
    assert payload["document"]["id"] == "d1"
    assert payload["matched_terms"] == ["albedo"]
    assert payload["edited_text"] is None
