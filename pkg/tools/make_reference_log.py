"""Builds the bundled reference campaign log (data/reference_log.ndjson).

The log is a hand-shaped two-community campaign with a fixed response
profile, used by the analyzer tests as a known-answer fixture. Run from
the repo root:

    python3 tools/make_reference_log.py
"""

from __future__ import annotations

import json
from pathlib import Path

OUT = Path(__file__).resolve().parent.parent / "src/contestkit/data/reference_log.ndjson"

BASE_TS = 1_700_000_000.0
ACCOUNTS = ("acct_red", "acct_blue")
COMMUNITY_A = "climatedebate"   # 46 deployments, 36 on-topic
COMMUNITY_B = "energytalk"      # 16 deployments, 6 on-topic

FILLER = ("the", "record", "shows", "a", "steady", "trend", "and", "the",
          "sources", "are", "public")


def words(n: int) -> str:
    return " ".join(FILLER[i % len(FILLER)] for i in range(n))


def main() -> None:
    records = []
    seq = 0

    def emit(kind: str, payload: dict, ts: float) -> None:
        nonlocal seq
        seq += 1
        records.append({"seq": seq, "ts": ts, "kind": kind, "payload": payload})

    emit(
        "campaign_started",
        {
            "mode": "automated",
            "communities": [COMMUNITY_A, COMMUNITY_B],
            "accounts": list(ACCOUNTS),
            "auto_approve": False,
            "rotation_interval_s": 1800.0,
        },
        BASE_TS,
    )

    # 62 deployments: ids dep001..dep046 in community A, dep047..dep062 in B.
    # Relevance: first 36 of A, first 6 of B.
    deployed_ids = []
    for i in range(62):
        pid = f"dep{i + 1:03d}"
        deployed_ids.append(pid)
        community = COMMUNITY_A if i < 46 else COMMUNITY_B
        relevant = (i < 36) if i < 46 else (i < 46 + 6)
        posted_at = BASE_TS + (i + 1) * 1800.0
        emit(
            "deployed",
            {
                "posted_id": pid,
                "item_id": f"i-{i + 1:04d}",
                "account": ACCOUNTS[i % 2],
                "community": community,
                "posted_at": posted_at,
                "text_as_posted": (
                    "Thanks for raising this. The measurements behind that point "
                    "are public and worth a direct look. What is your take?"
                    "\n\n^(I am a research bot)"
                ),
                "has_evidence": i % 3 == 0,
                "relevant": relevant,
                "trigger_author": f"op_{pid}",
            },
            posted_at,
        )

    # Responses land on the 42 on-topic deployments: every one of them gets a
    # reply, and the first 20 get a second one. Denier profile: 15 posts read
    # neutral at trigger time (4 responses warm up, 11 stay flat), the other
    # 35 read negative and stay there. Supporter originals read positive.
    responded = [deployed_ids[i] for i in range(36)] + [
        deployed_ids[i] for i in range(46, 52)
    ]
    denier_wc = [3, 177, 57] + [50] * 47
    supporter_wc = [4, 142, 25] + [21] * 9

    rows = []
    for j in range(50):
        if j < 4:
            buckets = ("neutral", "positive")
        elif j < 15:
            buckets = ("neutral", "neutral")
        else:
            buckets = ("negative", "negative")
        rows.append(("denier", denier_wc[j], buckets, j < 20, 0.54))
    for j in range(12):
        if j < 9:
            buckets = ("positive", "positive")
        elif j < 11:
            buckets = ("positive", "neutral")
        else:
            buckets = ("positive", "negative")
        rows.append(("supporter", supporter_wc[j], buckets, j < 9, 0.52))

    response_ts = BASE_TS + 63 * 1800.0
    cohort_events = []
    for r, (cohort, wc, (orig, resp), is_op, sim) in enumerate(rows):
        pid = responded[r] if r < 42 else responded[r - 42]
        rid = f"resp{r + 1:03d}"
        ts = response_ts + r * 60.0
        emit(
            "response_collected",
            {
                "response_id": rid,
                "posted_id": pid,
                "responder": f"op_{pid}" if is_op else f"user_{r + 1:03d}",
                "cohort": "unknown",
                "is_original_poster": is_op,
                "text": words(wc),
                "word_count": wc,
                "similarity": sim,
                "original_bucket": orig,
                "response_bucket": resp,
                "parent_id": None,
            },
            ts,
        )
        cohort_events.append((rid, cohort))

    tag_ts = response_ts + 62 * 60.0
    for k, (rid, cohort) in enumerate(cohort_events):
        emit(
            "cohort_assigned",
            {"response_id": rid, "cohort": cohort, "operator": "analyst"},
            tag_ts + k * 5.0,
        )

    emit("campaign_finished", {}, tag_ts + 62 * 5.0 + 60.0)

    with OUT.open("w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record, sort_keys=True, separators=(",", ":")) + "\n")
    print(f"{len(records)} records -> {OUT}")


if __name__ == "__main__":
    main()
