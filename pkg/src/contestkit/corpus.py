"""Corpus ingestion, tokenization, vocabulary and count-vector construction.

Everything here is a pure transformation: dumps go in, aligned term counts
come out. Network access lives in the connector layer, not here.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Optional, Sequence

DUMP_HEADER = "contestkit-dump v1"
URL_TOKEN = "<url>"

_URL_RE = re.compile(r"(?:https?://|www\.)\S+", re.IGNORECASE)
# Numeric tokens keep internal dots ("1.3"); everything else is \w runs.
_TOKEN_RE = re.compile(r"<url>|\d+(?:\.\d+)+|\w+", re.UNICODE)

_SECONDS_PER_DAY = 86400


class CorpusError(ValueError):
    """Raised for unusable inputs (missing files, empty corpora, bad headers)."""


@dataclass(frozen=True)
class Document:
    id: str
    community: str
    author: str
    kind: str  # "post" | "comment"
    parent_id: Optional[str]
    created_at: float
    text: str

    def __post_init__(self) -> None:
        if self.kind not in ("post", "comment"):
            raise CorpusError(f"unknown document kind {self.kind!r}")
        if (self.kind == "comment") != (self.parent_id is not None):
            raise CorpusError("parent_id present iff kind == comment")
        if self.created_at <= 0:
            raise CorpusError("created_at must be positive")


@dataclass
class Corpus:
    community: str
    documents: list[Document]
    window: tuple[float, float]

    def __post_init__(self) -> None:
        if not self.community:
            raise CorpusError("corpus needs a community label")
        lo, hi = self.window
        for doc in self.documents:
            if not (lo <= doc.created_at <= hi):
                raise CorpusError(f"document {doc.id} outside corpus window")

    def __len__(self) -> int:
        return len(self.documents)


@dataclass
class Vocabulary:
    terms: list[str]
    index: dict[str, int] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.index:
            self.index = {t: i for i, t in enumerate(self.terms)}
        if len(self.index) != len(self.terms):
            raise CorpusError("vocabulary terms must be unique")
        for term, i in self.index.items():
            if self.terms[i] != term:
                raise CorpusError("vocabulary index must invert the term order")

    def __len__(self) -> int:
        return len(self.terms)

    def __contains__(self, term: str) -> bool:
        return term in self.index


@dataclass
class CountVector:
    vocab_size: int
    counts: list[int]
    total: int = -1

    def __post_init__(self) -> None:
        if len(self.counts) != self.vocab_size:
            raise CorpusError("counts length must equal vocab_size")
        if any(c < 0 for c in self.counts):
            raise CorpusError("counts must be nonnegative")
        if self.total < 0:
            self.total = sum(self.counts)
        elif self.total != sum(self.counts):
            raise CorpusError("total must equal sum(counts)")


@dataclass
class IngestSummary:
    """Per-run ingest accounting; malformed lines are skipped, never fatal."""

    lines_read: int = 0
    kept: int = 0
    skipped_window: int = 0
    skipped_duplicate: int = 0
    malformed: list[tuple[int, str]] = field(default_factory=list)


def tokenize(text: str) -> list[str]:
    """Lowercased unicode word tokens; URLs collapse to a single "<url>" token.

    Idempotent on its own output joined by spaces.
    """
    if not text:
        return []
    masked = _URL_RE.sub(f" {URL_TOKEN} ", text)
    return _TOKEN_RE.findall(masked.lower())


def _parse_record(raw: str) -> Document:
    obj = json.loads(raw)
    if not isinstance(obj, dict):
        raise ValueError("record is not an object")
    kind = obj["kind"]
    return Document(
        id=str(obj["id"]),
        community=str(obj["community"]),
        author=str(obj["author"]),
        kind=kind,
        parent_id=(str(obj["parent_id"]) if obj.get("parent_id") is not None else None),
        created_at=float(obj["created_at"]),
        text=str(obj["text"]),
    )


def ingest_dump(
    source: str | Path,
    community: str,
    window: tuple[float, float],
) -> tuple[Corpus, IngestSummary]:
    """Read a newline-delimited dump, keeping in-window records.

    First occurrence wins on duplicate ids; malformed lines are counted with
    their line number in the summary and skipped.
    """
    path = Path(source)
    if not path.is_file():
        raise CorpusError(f"dump not readable: {path}")
    summary = IngestSummary()
    seen: set[str] = set()
    documents: list[Document] = []
    lo, hi = window
    with path.open("r", encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        if header != DUMP_HEADER:
            raise CorpusError(f"bad dump header {header!r} (expected {DUMP_HEADER!r})")
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            summary.lines_read += 1
            try:
                doc = _parse_record(line)
            except (ValueError, KeyError, TypeError) as exc:
                summary.malformed.append((lineno, str(exc)))
                continue
            if doc.id in seen:
                summary.skipped_duplicate += 1
                continue
            if not (lo <= doc.created_at <= hi):
                summary.skipped_window += 1
                continue
            seen.add(doc.id)
            documents.append(doc)
            summary.kept += 1
    return Corpus(community=community, documents=documents, window=window), summary


def write_dump(path: str | Path, documents: Iterable[Document]) -> None:
    """Inverse of ingest_dump, used by fixtures and the simulator exporter."""
    with Path(path).open("w", encoding="utf-8") as fh:
        fh.write(DUMP_HEADER + "\n")
        for doc in documents:
            fh.write(
                json.dumps(
                    {
                        "id": doc.id,
                        "community": doc.community,
                        "author": doc.author,
                        "kind": doc.kind,
                        "parent_id": doc.parent_id,
                        "created_at": doc.created_at,
                        "text": doc.text,
                    },
                    sort_keys=True,
                )
                + "\n"
            )


def load_stoplist(extra_path: str | Path | None = None) -> frozenset[str]:
    """Bundled function-word stop list, optionally extended per campaign."""
    words = set(
        resources.files("contestkit.data").joinpath("stoplist.txt").read_text("utf-8").split()
    )
    if extra_path is not None:
        words.update(Path(extra_path).read_text(encoding="utf-8").split())
    return frozenset(w.lower() for w in words)


def load_context_lexicon(path: str | Path | None = None) -> frozenset[str]:
    """Domain words whose presence marks a discussion as on-topic."""
    if path is None:
        text = resources.files("contestkit.data").joinpath("climate_context.txt").read_text("utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    words = frozenset(w.lower() for w in text.split())
    if not words:
        raise CorpusError("context lexicon is empty")
    return words


def _ngram_counts(
    docs: Sequence[Document], stops: frozenset[str]
) -> dict[str, int]:
    counts: dict[str, int] = {}
    for doc in docs:
        tokens = tokenize(doc.text)
        for tok in tokens:
            if tok in stops or tok == URL_TOKEN:
                continue
            counts[tok] = counts.get(tok, 0) + 1
        for a, b in zip(tokens, tokens[1:]):
            if a in stops or b in stops or URL_TOKEN in (a, b):
                continue
            bigram = f"{a} {b}"
            counts[bigram] = counts.get(bigram, 0) + 1
    return counts


def build_vocab(
    target: Corpus,
    backgrounds: Sequence[Corpus] = (),
    min_count: int = 1,
    recency_days: int = 90,
    stoplist: frozenset[str] | None = None,
) -> Vocabulary:
    """Unigrams and bigrams used at least min_count times in the recent target window.

    "Recent" means the trailing recency_days of the target corpus window;
    terms that fell out of use before that are dropped. The backgrounds
    argument keeps call sites aligned when the same vocabulary is counted
    over several corpora; it does not restrict the selection.
    """
    if min_count < 1:
        raise CorpusError("min_count must be >= 1")
    if recency_days < 1:
        raise CorpusError("recency_days must be >= 1")
    if not target.documents:
        raise CorpusError("cannot build a vocabulary from an empty target corpus")
    del backgrounds  # alignment-only parameter, see docstring
    stops = stoplist if stoplist is not None else load_stoplist()
    cutoff = target.window[1] - recency_days * _SECONDS_PER_DAY
    recent_docs = [d for d in target.documents if d.created_at >= cutoff]
    counts = _ngram_counts(recent_docs, stops)
    selected = [(term, n) for term, n in counts.items() if n >= min_count]
    selected.sort(key=lambda item: (-item[1], item[0]))
    return Vocabulary(terms=[term for term, _ in selected])


def count_tokens(tokens: Sequence[str], vocab: Vocabulary) -> list[int]:
    """Greedy left-to-right matching; a bigram match consumes both tokens."""
    counts = [0] * len(vocab)
    index = vocab.index
    i = 0
    n = len(tokens)
    while i < n:
        if i + 1 < n:
            bigram = f"{tokens[i]} {tokens[i + 1]}"
            pos = index.get(bigram)
            if pos is not None:
                counts[pos] += 1
                i += 2
                continue
        pos = index.get(tokens[i])
        if pos is not None:
            counts[pos] += 1
        i += 1
    return counts


def count_vector(corpus: Corpus, vocab: Vocabulary) -> CountVector:
    if len(vocab) == 0:
        raise CorpusError("count_vector needs a non-empty vocabulary")
    totals = [0] * len(vocab)
    for doc in corpus.documents:
        for pos, c in enumerate(count_tokens(tokenize(doc.text), vocab)):
            totals[pos] += c
    return CountVector(vocab_size=len(vocab), counts=totals)


def recent_count_vector(
    corpus: Corpus, vocab: Vocabulary, recency_days: int = 90
) -> CountVector:
    """Counts restricted to the trailing recency window of the corpus."""
    cutoff = corpus.window[1] - recency_days * _SECONDS_PER_DAY
    recent = Corpus(
        community=corpus.community,
        documents=[d for d in corpus.documents if d.created_at >= cutoff],
        window=corpus.window,
    )
    return count_vector(recent, vocab)
