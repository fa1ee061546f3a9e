"""Deterministic scripted community for tests and end-to-end simulation.

The simulator implements the same connector surface as the live client but
every behavior flows from (seed, script, personas, step sequence), so two
runs with the same inputs produce identical event streams byte for byte.
It keeps its own clock: sim_step(now) advances it and fires scripted posts
and persona reactions that are due.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import yaml

from .corpus import Document
from .connectors import (
    BannedError,
    ParentGoneError,
    PlatformError,
    PlatformEvent,
    BotAccount,
)

PERSONA_KINDS = (
    "denier_evidence_engager",
    "denier_terminology_reactive",
    "supporter",
    "silent",
)

# reply text pools, one per persona kind; drawn by the persona's own rng
_ENGAGER_REPLIES = (
    "I opened the link and the dataset is more detailed than I expected. "
    "The coverage section says the record starts in 2000, which surprised me.",
    "Looked through the source. The error bars in the second table are wider "
    "than the headline number suggests, but the trend line is there.",
    "That link actually answers my earlier objection about station siting. "
    "I still wonder how they handle the ocean gaps.",
)
_REACTIVE_REPLIES = (
    "There it is again, the same scripted phrasing. This is exactly the "
    "nonsense talking point I keep seeing pasted everywhere.",
    "You people always trot out that phrase. It is alarmist nonsense and "
    "everyone here can see through it.",
    "Calling it that does not make it science. What a load of nonsense.",
)
_SUPPORTER_REPLIES = (
    "Glad somebody posted a sourced reply here for once. More of this please. "
    "See also https://example.org/primer",
    "Good to see an actual citation in this thread. Adding another overview: "
    "https://example.org/overview",
    "Appreciate the measured tone. This source covers the same ground: "
    "https://example.org/data",
)
_FOLLOWUP_REPLIES = (
    "Adding to my own comment: the regional breakdown tells the same story.",
    "One more detail after re-reading: the appendix addresses the sampling "
    "question directly.",
)
_AUTHORED_POST = "been reading about {term} again and the mainstream coverage skips it"


class SimulatorError(PlatformError):
    pass


@dataclass
class Persona:
    handle: str
    kind: str
    reply_probability: float = 1.0
    terminology_triggers: frozenset[str] = frozenset()
    seed: int = 0
    followup_probability: float = 0.0
    post_probability: float = 0.0
    post_terms: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.kind not in PERSONA_KINDS:
            raise SimulatorError(f"unknown persona kind {self.kind!r}")
        for name in ("reply_probability", "followup_probability", "post_probability"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise SimulatorError(f"persona {self.handle!r}: {name} out of [0, 1]")
        self.terminology_triggers = frozenset(self.terminology_triggers)


@dataclass(frozen=True)
class ScriptedPost:
    at: float
    community: str
    author: str
    text: str


@dataclass(frozen=True)
class BanRule:
    community: str
    on_nth_post: int
    handle: Optional[str] = None  # None bans whichever account hits the count

    def __post_init__(self) -> None:
        if self.on_nth_post < 1:
            raise SimulatorError("on_nth_post must be >= 1")


@dataclass
class SimScenario:
    seed: int
    personas: list[Persona]
    posts: list[ScriptedPost]
    ban_rules: list[BanRule] = field(default_factory=list)
    communities: list[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        if not self.communities:
            self.communities = sorted({p.community for p in self.posts})


def load_scenario(path: str | Path) -> SimScenario:
    raw = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    if not isinstance(raw, dict):
        raise SimulatorError(f"scenario {path}: expected a mapping")
    personas = [
        Persona(
            handle=p["handle"],
            kind=p["kind"],
            reply_probability=float(p.get("reply_probability", 1.0)),
            terminology_triggers=frozenset(p.get("terminology_triggers", ())),
            seed=int(p.get("seed", 0)),
            followup_probability=float(p.get("followup_probability", 0.0)),
            post_probability=float(p.get("post_probability", 0.0)),
            post_terms=tuple(p.get("post_terms", ())),
        )
        for p in raw.get("personas", [])
    ]
    posts = [
        ScriptedPost(
            at=float(s["at"]),
            community=s["community"],
            author=s["author"],
            text=s["text"],
        )
        for s in raw.get("posts", [])
    ]
    rules = [
        BanRule(
            community=r["community"],
            on_nth_post=int(r["on_nth_post"]),
            handle=r.get("handle"),
        )
        for r in raw.get("ban_rules", [])
    ]
    return SimScenario(
        seed=int(raw.get("seed", 0)),
        personas=personas,
        posts=sorted(posts, key=lambda s: (s.at, s.community, s.author)),
        ban_rules=rules,
        communities=list(raw.get("communities", ())),
    )


class SimulatedCommunity:
    """Connector implementation backed by the scenario script."""

    def __init__(self, scenario: SimScenario) -> None:
        self.scenario = scenario
        self.now = 0.0
        self._script_pos = 0
        self._doc_counter = 0
        self._documents: dict[str, Document] = {}
        self._children: dict[str, list[str]] = {}
        self._deleted: set[str] = set()
        self._streams: dict[str, list[PlatformEvent]] = {
            c: [] for c in scenario.communities
        }
        self._post_counts: dict[tuple[str, str], int] = {}
        self._banned: set[tuple[str, str]] = set()
        self._idempotent: dict[str, str] = {}
        self._unreacted_bot_posts: list[str] = []
        self._persona_rng = {
            p.handle: random.Random(scenario.seed * 1_000_003 + p.seed)
            for p in scenario.personas
        }

    # --- document plumbing -------------------------------------------------

    def _new_id(self, prefix: str) -> str:
        self._doc_counter += 1
        return f"{prefix}{self._doc_counter:04d}"

    def _add_document(self, doc: Document) -> None:
        self._documents[doc.id] = doc
        if doc.parent_id is not None:
            self._children.setdefault(doc.parent_id, []).append(doc.id)

    def _publish_post(self, community: str, author: str, text: str, at: float) -> Document:
        if community not in self._streams:
            self._streams[community] = []
        doc = Document(
            id=self._new_id("d"),
            community=community,
            author=author,
            kind="post",
            parent_id=None,
            created_at=at,
            text=text,
        )
        self._add_document(doc)
        self._streams[community].append(
            PlatformEvent(document=doc, fetched_at=max(at, self.now))
        )
        return doc

    def delete_document(self, doc_id: str) -> None:
        if doc_id not in self._documents:
            raise SimulatorError(f"no document {doc_id!r}")
        self._deleted.add(doc_id)

    # --- connector surface -------------------------------------------------

    def fetch_new_posts(
        self, community: str, since: Optional[str]
    ) -> tuple[list[PlatformEvent], str]:
        stream = self._streams.get(community, [])
        start = int(since) if since else 0
        events = stream[start:]
        return list(events), str(start + len(events))

    def submit_reply(
        self, account: BotAccount, parent_id: str, text: str, key: str
    ) -> str:
        if key in self._idempotent:
            return self._idempotent[key]
        parent = self._documents.get(parent_id)
        if parent is None or parent_id in self._deleted:
            raise ParentGoneError(f"parent {parent_id!r} is gone")
        community = parent.community
        if (account.handle, community) in self._banned:
            raise BannedError(account.handle, community)
        count = self._post_counts.get((account.handle, community), 0) + 1
        self._post_counts[(account.handle, community)] = count
        for rule in self.scenario.ban_rules:
            if rule.community != community:
                continue
            if rule.handle is not None and rule.handle != account.handle:
                continue
            if count == rule.on_nth_post:
                self._banned.add((account.handle, community))
                raise BannedError(account.handle, community)
        doc = Document(
            id=self._new_id("p"),
            community=community,
            author=account.handle,
            kind="comment",
            parent_id=parent_id,
            created_at=self.now,
            text=text,
        )
        self._add_document(doc)
        self._idempotent[key] = doc.id
        self._unreacted_bot_posts.append(doc.id)
        return doc.id

    def fetch_replies(self, posted_id: str) -> tuple[list[Document], bool]:
        if posted_id in self._deleted:
            return [], True
        if posted_id not in self._documents:
            raise SimulatorError(f"unknown posted id {posted_id!r}")
        collected: list[Document] = []
        frontier = list(self._children.get(posted_id, ()))
        while frontier:
            doc_id = frontier.pop(0)
            if doc_id in self._deleted:
                continue
            doc = self._documents[doc_id]
            collected.append(doc)
            frontier.extend(self._children.get(doc_id, ()))
        collected.sort(key=lambda d: (d.created_at, d.id))
        return collected, False

    # --- scripted world ----------------------------------------------------

    def sim_step(self, now: float) -> list[PlatformEvent]:
        if now < self.now:
            raise SimulatorError("sim clock cannot move backwards")
        self.now = now
        published: list[PlatformEvent] = []

        script = self.scenario.posts
        while self._script_pos < len(script) and script[self._script_pos].at <= now:
            post = script[self._script_pos]
            self._script_pos += 1
            self._publish_post(post.community, post.author, post.text, post.at)
            published.append(self._streams[post.community][-1])

        for persona in self.scenario.personas:
            if persona.post_probability <= 0.0 or not persona.post_terms:
                continue
            rng = self._persona_rng[persona.handle]
            if rng.random() < persona.post_probability:
                term = rng.choice(list(persona.post_terms))
                community = rng.choice(self.scenario.communities)
                doc = self._publish_post(
                    community,
                    persona.handle,
                    _AUTHORED_POST.format(term=term),
                    now,
                )
                published.append(self._streams[doc.community][-1])

        pending = self._unreacted_bot_posts
        self._unreacted_bot_posts = []
        for bot_doc_id in pending:
            bot_doc = self._documents[bot_doc_id]
            for persona in self.scenario.personas:
                self._maybe_react(persona, bot_doc)
        return published

    def _maybe_react(self, persona: Persona, bot_doc: Document) -> None:
        if persona.kind == "silent":
            return
        rng = self._persona_rng[persona.handle]
        if persona.kind == "denier_evidence_engager":
            if "http" not in bot_doc.text and "www." not in bot_doc.text:
                return
            pool = _ENGAGER_REPLIES
        elif persona.kind == "denier_terminology_reactive":
            lowered = bot_doc.text.lower()
            if not any(t.lower() in lowered for t in persona.terminology_triggers):
                return
            pool = _REACTIVE_REPLIES
        else:  # supporter
            pool = _SUPPORTER_REPLIES
        if rng.random() >= persona.reply_probability:
            return
        text = pool[rng.randrange(len(pool))]
        reply = Document(
            id=self._new_id("r"),
            community=bot_doc.community,
            author=persona.handle,
            kind="comment",
            parent_id=bot_doc.id,
            created_at=self.now,
            text=text,
        )
        self._add_document(reply)
        if persona.followup_probability > 0.0 and rng.random() < persona.followup_probability:
            followup = Document(
                id=self._new_id("r"),
                community=bot_doc.community,
                author=persona.handle,
                kind="comment",
                parent_id=reply.id,
                created_at=self.now,
                text=_FOLLOWUP_REPLIES[rng.randrange(len(_FOLLOWUP_REPLIES))],
            )
            self._add_document(followup)

    # --- introspection helpers (tests, reports) -----------------------------

    def document(self, doc_id: str) -> Document:
        return self._documents[doc_id]

    def is_banned(self, handle: str, community: str) -> bool:
        return (handle, community) in self._banned

    def script_exhausted(self) -> bool:
        return self._script_pos >= len(self.scenario.posts)
