"""Response analytics: similarity, cohort summaries, transitions, t-test,
and the campaign report fold.

Everything here is a pure function over immutable inputs, so reports can be
computed against a log snapshot while a campaign is still running.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, replace
from typing import TYPE_CHECKING, Optional, Sequence, Union

import numpy as np
from scipy import stats

from .corpus import Corpus, Document, tokenize

if TYPE_CHECKING:  # event records are consumed duck-typed (kind, payload)
    from .orchestrator.events import EventRecord

BUCKET_ORDER = ("positive", "neutral", "negative")
COHORTS = ("denier", "supporter", "unknown")
REPORT_VERSION = 1
# documented so report numbers stay reproducible across releases
IDF_VARIANT = "idf = ln((1+D)/(1+df)) + 1 with raw-count tf"


class AnalysisError(ValueError):
    pass


class DegenerateSamplesError(AnalysisError):
    """Both samples constant and equal; the t statistic is undefined."""


@dataclass(frozen=True)
class ResponseRecord:
    response_id: str
    deployed_id: str
    responder: str
    cohort: str
    is_original_poster: bool
    text: str
    word_count: int
    similarity: float
    original_bucket: str
    response_bucket: str
    parent_id: Optional[str] = None

    def __post_init__(self) -> None:
        if self.cohort not in COHORTS:
            raise AnalysisError(f"unknown cohort {self.cohort!r}")
        for name in ("original_bucket", "response_bucket"):
            if getattr(self, name) not in BUCKET_ORDER:
                raise AnalysisError(f"bad {name} {getattr(self, name)!r}")
        if self.word_count != len(tokenize(self.text)):
            raise AnalysisError(
                f"response {self.response_id}: word_count {self.word_count} "
                f"disagrees with its text"
            )
        if not 0.0 <= self.similarity <= 1.0:
            raise AnalysisError(f"similarity {self.similarity} out of [0, 1]")


@dataclass(frozen=True)
class CohortStats:
    cohort: str
    n_interventions: int
    n_responded: int
    response_rate: float
    n_responses: int
    mean_word_count: Optional[float]
    min_word_count: Optional[int]
    max_word_count: Optional[int]
    mean_similarity: Optional[float]

    def as_dict(self) -> dict:
        return {
            "cohort": self.cohort,
            "n_interventions": self.n_interventions,
            "n_responded": self.n_responded,
            "response_rate": self.response_rate,
            "n_responses": self.n_responses,
            "mean_word_count": self.mean_word_count,
            "min_word_count": self.min_word_count,
            "max_word_count": self.max_word_count,
            "mean_similarity": self.mean_similarity,
        }


@dataclass(frozen=True)
class EmotionTransitionMatrix:
    counts: tuple[tuple[int, ...], ...]  # rows: original bucket, cols: response

    def __post_init__(self) -> None:
        if len(self.counts) != 3 or any(len(row) != 3 for row in self.counts):
            raise AnalysisError("transition matrix must be 3x3")
        if any(c < 0 for row in self.counts for c in row):
            raise AnalysisError("transition counts must be nonnegative")

    @property
    def total(self) -> int:
        return sum(sum(row) for row in self.counts)

    def rates(self) -> tuple[tuple[float, ...], ...]:
        out = []
        for row in self.counts:
            row_total = sum(row)
            if row_total == 0:
                out.append((0.0, 0.0, 0.0))
            else:
                out.append(tuple(c / row_total for c in row))
        return tuple(out)

    def row(self, original_bucket: str) -> dict[str, int]:
        i = BUCKET_ORDER.index(original_bucket)
        return dict(zip(BUCKET_ORDER, self.counts[i]))

    def as_dict(self) -> dict:
        return {
            "order": list(BUCKET_ORDER),
            "counts": [list(row) for row in self.counts],
            "rates": [list(row) for row in self.rates()],
            "total": self.total,
        }


@dataclass(frozen=True)
class TTestResult:
    t: float
    df: int
    p: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.p <= 1.0:
            raise AnalysisError(f"p value {self.p} out of [0, 1]")

    def as_dict(self) -> dict:
        return {"t": self.t, "df": self.df, "p": self.p}


ReferenceInput = Union[Corpus, Sequence[str], Sequence[Document]]


def _reference_token_sets(reference: ReferenceInput) -> list[set[str]]:
    if isinstance(reference, Corpus):
        docs: Sequence = reference.documents
    else:
        docs = reference
    token_sets = []
    for doc in docs:
        text = doc.text if isinstance(doc, Document) else str(doc)
        token_sets.append(set(tokenize(text)))
    return token_sets


def tfidf_cosine(a: str, b: str, reference: ReferenceInput) -> float:
    """Cosine similarity of tf-idf vectors; document frequencies come from
    the reference corpus. Returns 0 when either text has no tokens."""
    token_sets = _reference_token_sets(reference)
    if not token_sets:
        raise AnalysisError("reference corpus must be non-empty")
    tf_a = Counter(tokenize(a))
    tf_b = Counter(tokenize(b))
    if not tf_a or not tf_b:
        return 0.0
    if tf_a == tf_b:
        return 1.0
    n_docs = len(token_sets)
    vocab = sorted(set(tf_a) | set(tf_b))
    df = {t: sum(1 for s in token_sets if t in s) for t in vocab}
    idf = np.array(
        [math.log((1 + n_docs) / (1 + df[t])) + 1.0 for t in vocab]
    )
    va = np.array([tf_a.get(t, 0) for t in vocab], dtype=float) * idf
    vb = np.array([tf_b.get(t, 0) for t in vocab], dtype=float) * idf
    denom = float(np.linalg.norm(va) * np.linalg.norm(vb))
    if denom == 0.0:
        return 0.0
    value = float(va @ vb) / denom
    return min(1.0, max(0.0, value))


def cohort_stats(
    records: Sequence[ResponseRecord], n_interventions: int, cohort: str = "unknown"
) -> CohortStats:
    if n_interventions < 0:
        raise AnalysisError("n_interventions must be nonnegative")
    n_responded = len({r.deployed_id for r in records})
    if n_responded > n_interventions:
        raise AnalysisError(
            f"{n_responded} responded interventions exceed the {n_interventions} deployed"
        )
    rate = n_responded / n_interventions if n_interventions else 0.0
    if records:
        lengths = [r.word_count for r in records]
        mean_wc: Optional[float] = sum(lengths) / len(lengths)
        min_wc: Optional[int] = min(lengths)
        max_wc: Optional[int] = max(lengths)
        mean_sim: Optional[float] = sum(r.similarity for r in records) / len(records)
    else:
        mean_wc = min_wc = max_wc = mean_sim = None
    return CohortStats(
        cohort=cohort,
        n_interventions=n_interventions,
        n_responded=n_responded,
        response_rate=rate,
        n_responses=len(records),
        mean_word_count=mean_wc,
        min_word_count=min_wc,
        max_word_count=max_wc,
        mean_similarity=mean_sim,
    )


def emotion_transition(
    pairs: Sequence[tuple[str, str]]
) -> EmotionTransitionMatrix:
    counts = [[0, 0, 0], [0, 0, 0], [0, 0, 0]]
    for original, response in pairs:
        try:
            i = BUCKET_ORDER.index(original)
            j = BUCKET_ORDER.index(response)
        except ValueError:
            raise AnalysisError(f"bad bucket pair ({original!r}, {response!r})") from None
        counts[i][j] += 1
    return EmotionTransitionMatrix(counts=tuple(tuple(row) for row in counts))


def cohort_ttest(sample_a: Sequence[float], sample_b: Sequence[float]) -> TTestResult:
    """Pooled-variance two-sample Student t, two-sided p."""
    a = np.asarray(sample_a, dtype=float)
    b = np.asarray(sample_b, dtype=float)
    if a.size < 2 or b.size < 2:
        raise AnalysisError("each sample needs at least 2 observations")
    df = int(a.size + b.size - 2)
    var_a = float(a.var(ddof=1))
    var_b = float(b.var(ddof=1))
    pooled = ((a.size - 1) * var_a + (b.size - 1) * var_b) / df
    if pooled == 0.0:
        raise DegenerateSamplesError("both samples are constant; t is undefined")
    se = math.sqrt(pooled * (1.0 / a.size + 1.0 / b.size))
    t = (float(a.mean()) - float(b.mean())) / se
    p = 2.0 * float(stats.t.sf(abs(t), df))
    return TTestResult(t=t, df=df, p=min(1.0, p))


def bucket_valence(bucket: str) -> float:
    return {"positive": 1.0, "neutral": 0.0, "negative": -1.0}[bucket]


# --- report fold ---------------------------------------------------------------


def campaign_report(events: Sequence[EventRecord]) -> dict:
    """Fold an event log into the campaign report document.

    The output is plain data with deterministic ordering, ready for JSON
    serialization or the table renderer.
    """
    deployed: dict[str, dict] = {}
    responses: list[ResponseRecord] = []
    item_states: dict[str, str] = {}
    for record in events:
        payload = record.payload
        if record.kind == "deployed":
            deployed[payload["posted_id"]] = payload
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
        elif record.kind == "item_created":
            item_states[payload["item_id"]] = payload["state"]
        elif record.kind == "item_transition":
            item_states[payload["item_id"]] = payload["to"]

    responded_ids = {r.deployed_id for r in responses}
    communities = sorted({d["community"] for d in deployed.values()})
    per_community = {}
    for community in communities:
        local = [d for d in deployed.values() if d["community"] == community]
        relevant = sum(1 for d in local if d.get("relevant", True))
        per_community[community] = {
            "deployed": len(local),
            "relevant": relevant,
            "out_of_context": len(local) - relevant,
        }

    cohorts = {}
    for cohort in COHORTS:
        cohort_records = [r for r in responses if r.cohort == cohort]
        n_cohort_interventions = len({r.deployed_id for r in cohort_records})
        cohorts[cohort] = cohort_stats(
            cohort_records, n_cohort_interventions, cohort
        ).as_dict()

    evidence = {}
    for label, flag in (("with_evidence", True), ("without_evidence", False)):
        ids = {pid for pid, d in deployed.items() if bool(d.get("has_evidence")) == flag}
        evidence[label] = {
            "deployed": len(ids),
            "responded": len(ids & responded_ids),
            "responses": sum(1 for r in responses if r.deployed_id in ids),
        }

    transitions = {
        "all": emotion_transition(
            [(r.original_bucket, r.response_bucket) for r in responses]
        ).as_dict()
    }
    for cohort in ("denier", "supporter"):
        transitions[cohort] = emotion_transition(
            [
                (r.original_bucket, r.response_bucket)
                for r in responses
                if r.cohort == cohort
            ]
        ).as_dict()

    similarity: dict[str, Optional[float]] = {
        "macro_over_responses": None,
        "macro_over_interventions": None,
    }
    if responses:
        similarity["macro_over_responses"] = sum(r.similarity for r in responses) / len(
            responses
        )
        per_deployed: dict[str, list[float]] = {}
        for r in responses:
            per_deployed.setdefault(r.deployed_id, []).append(r.similarity)
        means = [sum(v) / len(v) for _, v in sorted(per_deployed.items())]
        similarity["macro_over_interventions"] = sum(means) / len(means)

    denier_valences = [
        bucket_valence(r.response_bucket) for r in responses if r.cohort == "denier"
    ]
    supporter_valences = [
        bucket_valence(r.response_bucket) for r in responses if r.cohort == "supporter"
    ]
    t_test: dict
    try:
        t_test = cohort_ttest(denier_valences, supporter_valences).as_dict()
    except AnalysisError as exc:
        t_test = {"skipped": str(exc)}

    state_counts = dict(sorted(Counter(item_states.values()).items()))
    return {
        "report_version": REPORT_VERSION,
        "idf_variant": IDF_VARIANT,
        "counts": {
            "deployed": len(deployed),
            "responded": len(responded_ids),
            "responses": len(responses),
            "responses_by_original_poster": sum(
                1 for r in responses if r.is_original_poster
            ),
            "per_community": per_community,
        },
        "items": state_counts,
        "cohorts": cohorts,
        "evidence": evidence,
        "transitions": transitions,
        "similarity": similarity,
        "t_test": t_test,
    }


def render_report_table(report: dict) -> str:
    """Human-readable rendering of a campaign report."""
    lines: list[str] = []
    counts = report["counts"]
    lines.append("campaign report")
    lines.append(f"  deployed: {counts['deployed']}")
    lines.append(f"  responded: {counts['responded']}")
    lines.append(f"  responses: {counts['responses']}")
    lines.append(
        f"  responses by original poster: {counts['responses_by_original_poster']}"
    )
    for community, c in sorted(counts["per_community"].items()):
        lines.append(
            f"  {community}: deployed {c['deployed']}, relevant {c['relevant']}, "
            f"out of context {c['out_of_context']}"
        )
    if report["items"]:
        states = ", ".join(f"{k}={v}" for k, v in report["items"].items())
        lines.append(f"  queue items: {states}")
    lines.append("")
    lines.append("cohorts")
    header = (
        f"  {'cohort':<10}{'interv':>8}{'resp':>6}{'mean_wc':>9}"
        f"{'min':>5}{'max':>5}{'mean_sim':>10}"
    )
    lines.append(header)
    for cohort in COHORTS:
        c = report["cohorts"][cohort]
        mean_wc = f"{c['mean_word_count']:.2f}" if c["mean_word_count"] is not None else "-"
        mean_sim = f"{c['mean_similarity']:.4f}" if c["mean_similarity"] is not None else "-"
        min_wc = c["min_word_count"] if c["min_word_count"] is not None else "-"
        max_wc = c["max_word_count"] if c["max_word_count"] is not None else "-"
        lines.append(
            f"  {cohort:<10}{c['n_interventions']:>8}{c['n_responses']:>6}"
            f"{mean_wc:>9}{min_wc:>5}{max_wc:>5}{mean_sim:>10}"
        )
    lines.append("")
    lines.append("evidence")
    for label in ("with_evidence", "without_evidence"):
        e = report["evidence"][label]
        lines.append(
            f"  {label}: deployed {e['deployed']}, responded {e['responded']}, "
            f"responses {e['responses']}"
        )
    lines.append("")
    lines.append("transitions (rows original, cols response; order positive/neutral/negative)")
    for scope in ("all", "denier", "supporter"):
        matrix = report["transitions"][scope]
        lines.append(f"  {scope}: total {matrix['total']}")
        for bucket, row in zip(BUCKET_ORDER, matrix["counts"]):
            lines.append(f"    {bucket:<9} {row[0]:>4} {row[1]:>4} {row[2]:>4}")
    lines.append("")
    sim = report["similarity"]
    over_resp = (
        f"{sim['macro_over_responses']:.4f}"
        if sim["macro_over_responses"] is not None
        else "-"
    )
    over_int = (
        f"{sim['macro_over_interventions']:.4f}"
        if sim["macro_over_interventions"] is not None
        else "-"
    )
    lines.append(f"similarity: over responses {over_resp}, over interventions {over_int}")
    t_test = report["t_test"]
    if "skipped" in t_test:
        lines.append(f"t-test: skipped ({t_test['skipped']})")
    else:
        lines.append(
            f"t-test: t({t_test['df']}) = {t_test['t']:.4f}, p = {t_test['p']:.4f}"
        )
    return "\n".join(lines) + "\n"
