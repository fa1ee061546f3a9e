"""Intervention bank: term-keyed reply templates, variant expansion, gating.

Templates are human-authored. Variants are rendered texts derived from a
template, either marked manual (pre-validated) or generated (need operator
approval before first use). Every variant carries its emotion score and a
gate verdict so downstream selection never has to re-score.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Protocol, Sequence

import requests
import yaml

from .corpus import _URL_RE, tokenize
from .emotion import EmotionScore, bucket_of, score_lexicon, signed_valence

log = logging.getLogger(__name__)

BANK_VERSION = 1
PLACEHOLDERS = ("{TERM}", "{EVIDENCE_URL}")
DEFAULT_DISCLOSURE = "^(I am a research bot)"
DEFAULT_REPETITION_WINDOW_S = 24 * 3600
MAX_BUILTIN_VARIANTS = 20

# frame banks for the offline expander; all tokens chosen to score
# non-negative under the bundled valence lexicon
OPENERS = (
    "Thanks for sharing.",
    "I appreciate the perspective.",
    "Interesting point.",
    "Good topic to dig into.",
    "Glad this came up.",
)
CLOSERS = (
    "What is your take?",
    "Curious what you think.",
    "Happy to share more sources.",
    "Would love to hear your view.",
)


class BankError(ValueError):
    pass


class BankGapError(BankError):
    """No eligible variant remains for a term."""


class GeneratorError(RuntimeError):
    """The pluggable variant generator failed; callers fall back to builtin."""


@dataclass(frozen=True)
class InterventionTemplate:
    id: str
    trigger_terms: frozenset[str]
    body: str
    evidence_url: Optional[str] = None
    annotation: Optional[str] = None

    def __post_init__(self) -> None:
        if not self.id:
            raise BankError("template id must be non-empty")
        if not self.trigger_terms:
            raise BankError(f"template {self.id!r}: trigger_terms must be non-empty")
        object.__setattr__(self, "trigger_terms", frozenset(self.trigger_terms))
        if not self.body.strip():
            raise BankError(f"template {self.id!r}: body must be non-empty")
        if "{EVIDENCE_URL}" in self.body and not self.evidence_url:
            raise BankError(
                f"template {self.id!r}: body uses {{EVIDENCE_URL}} but no evidence_url set"
            )
        leftovers = _unknown_placeholders(self.body)
        if leftovers:
            raise BankError(f"template {self.id!r}: unknown placeholders {leftovers}")

    def validate_terms(self, vocabulary: set[str]) -> None:
        unknown = self.trigger_terms - vocabulary
        if unknown:
            raise BankError(
                f"template {self.id!r}: trigger terms not in vocabulary: {sorted(unknown)}"
            )


def _unknown_placeholders(text: str) -> list[str]:
    found = re.findall(r"\{[A-Z_]+\}", text)
    return sorted(set(found) - set(PLACEHOLDERS))


@dataclass(frozen=True)
class GatePolicy:
    min_positive_minus_negative: float = 0.0
    max_negative_mass: float = 0.2
    max_length_words: int = 120

    def __post_init__(self) -> None:
        if not 0.0 <= self.max_negative_mass <= 1.0:
            raise BankError("max_negative_mass must be in [0, 1]")
        if self.max_length_words < 1:
            raise BankError("max_length_words must be >= 1")


@dataclass(frozen=True)
class GateResult:
    verdict: str  # "passed" or "rejected"
    score: EmotionScore
    reason: Optional[str] = None

    @property
    def passed(self) -> bool:
        return self.verdict == "passed"


@dataclass
class InterventionVariant:
    variant_id: str
    template_id: str
    text: str
    emotion: EmotionScore
    gate: str  # "passed" or "rejected"
    provenance: str  # "manual" or "generated"
    terms: frozenset[str]
    has_evidence: bool = field(default=False)
    gate_reason: Optional[str] = None
    approved: bool = False

    def __post_init__(self) -> None:
        if self.provenance not in ("manual", "generated"):
            raise BankError(f"bad provenance {self.provenance!r}")
        if self.gate not in ("passed", "rejected"):
            raise BankError(f"bad gate verdict {self.gate!r}")
        if "{" in self.text:
            raise BankError(f"variant {self.variant_id!r}: unresolved placeholder in text")
        self.terms = frozenset(self.terms)
        self.has_evidence = bool(_URL_RE.search(self.text))

    @property
    def deployable(self) -> bool:
        return self.gate == "passed" and self.approved


def gate_by_emotion(
    text: str,
    scorer=score_lexicon,
    policy: Optional[GatePolicy] = None,
) -> GateResult:
    """Apply the deployability gate: tone and length limits."""
    policy = policy or GatePolicy()
    score = scorer(text)
    words = len(tokenize(text))
    if words > policy.max_length_words:
        return GateResult(
            verdict="rejected", score=score,
            reason=f"length {words} exceeds {policy.max_length_words} words",
        )
    negative = sum(
        w for label, w in score.distribution.items()
        if _bucket_name(score, label) == "negative"
    )
    margin = signed_valence(score)
    if margin < policy.min_positive_minus_negative:
        return GateResult(
            verdict="rejected", score=score,
            reason=f"valence margin {margin:.3f} below {policy.min_positive_minus_negative}",
        )
    if negative > policy.max_negative_mass:
        return GateResult(
            verdict="rejected", score=score,
            reason=f"negative mass {negative:.3f} exceeds {policy.max_negative_mass}",
        )
    return GateResult(verdict="passed", score=score)


def _bucket_name(score: EmotionScore, label: str) -> str:
    # single-label view through the default bucket map
    single = EmotionScore(distribution={label: 1.0}, source=score.source)
    return bucket_of(single).value


def render_body(template: InterventionTemplate, term: Optional[str] = None) -> str:
    """Resolve placeholder slots against the template's own fields."""
    if term is None:
        term = min(template.trigger_terms)
    elif term not in template.trigger_terms:
        raise BankError(f"term {term!r} not among template {template.id!r} triggers")
    text = template.body.replace("{TERM}", term)
    if template.evidence_url:
        text = text.replace("{EVIDENCE_URL}", template.evidence_url)
    return text


class VariantGenerator(Protocol):
    def generate(self, body: str, n: int) -> list[str]: ...


class BuiltinExpander:
    """Offline frame rotation: politeness opener plus question closer.

    Deterministic: variant i pairs opener i mod 5 with closer i mod 4, which
    walks all 20 distinct combinations before any repeat.
    """

    def generate(self, body: str, n: int) -> list[str]:
        if n > MAX_BUILTIN_VARIANTS:
            raise GeneratorError(
                f"builtin expander caps at {MAX_BUILTIN_VARIANTS} distinct variants"
            )
        out = []
        for i in range(n):
            opener = OPENERS[i % len(OPENERS)]
            closer = CLOSERS[i % len(CLOSERS)]
            out.append(f"{opener} {body} {closer}")
        return out


class RemoteGenerator:
    """HTTP paraphrase backend: POST {body, n}, expects {"variants": [...]}."""

    def __init__(self, endpoint: str, timeout_s: float = 30.0,
                 session: Optional[requests.Session] = None) -> None:
        self.endpoint = endpoint
        self.timeout_s = timeout_s
        self.session = session or requests.Session()

    def generate(self, body: str, n: int) -> list[str]:
        try:
            response = self.session.post(
                self.endpoint, json={"body": body, "n": n}, timeout=self.timeout_s
            )
        except requests.RequestException as exc:
            raise GeneratorError(f"generator request failed: {exc}") from exc
        if response.status_code != 200:
            raise GeneratorError(f"generator returned {response.status_code}")
        try:
            payload = response.json()
        except ValueError as exc:
            raise GeneratorError("generator sent non-JSON body") from exc
        variants = payload.get("variants") if isinstance(payload, dict) else None
        if not isinstance(variants, list) or len(variants) != n:
            raise GeneratorError("generator response missing n variants")
        if not all(isinstance(v, str) and v.strip() for v in variants):
            raise GeneratorError("generator produced empty variant text")
        return variants


def manual_variant(
    template: InterventionTemplate,
    term: Optional[str] = None,
    policy: Optional[GatePolicy] = None,
    scorer=score_lexicon,
) -> InterventionVariant:
    """The template's own body as a deployable variant; counts as validated."""
    text = render_body(template, term)
    result = gate_by_emotion(text, scorer=scorer, policy=policy)
    return InterventionVariant(
        variant_id=f"{template.id}-m0",
        template_id=template.id,
        text=text,
        emotion=result.score,
        gate=result.verdict,
        provenance="manual",
        terms=template.trigger_terms,
        gate_reason=result.reason,
        approved=result.passed,
    )


def expand_variants(
    template: InterventionTemplate,
    generator: Optional[VariantGenerator] = None,
    n: int = 1,
    term: Optional[str] = None,
    policy: Optional[GatePolicy] = None,
    scorer=score_lexicon,
) -> list[InterventionVariant]:
    """Produce n generated variants, each rendered, scored, and gated.

    Generated variants start unapproved; the review flow flips them. A
    failing generator falls back to the builtin expander and logs it.
    """
    if n < 1:
        raise BankError("n must be >= 1")
    body = render_body(template, term)
    gen = generator or BuiltinExpander()
    try:
        texts = gen.generate(body, n)
    except GeneratorError as exc:
        if isinstance(gen, BuiltinExpander):
            raise
        log.warning("generator failed (%s); falling back to builtin expander", exc)
        texts = BuiltinExpander().generate(body, n)
    if len(set(texts)) != len(texts):
        raise BankError(f"template {template.id!r}: generator produced duplicate texts")
    variants = []
    for i, text in enumerate(texts):
        result = gate_by_emotion(text, scorer=scorer, policy=policy)
        variants.append(
            InterventionVariant(
                variant_id=f"{template.id}-g{i}",
                template_id=template.id,
                text=text,
                emotion=result.score,
                gate=result.verdict,
                provenance="generated",
                terms=template.trigger_terms,
                gate_reason=result.reason,
            )
        )
    return variants


def deployable_text(variant: InterventionVariant, disclosure: str = DEFAULT_DISCLOSURE) -> str:
    """Final posted form: variant text plus the mandatory self-disclosure line."""
    if not disclosure:
        raise BankError("disclosure line must be non-empty")
    return f"{variant.text}\n\n{disclosure}"


class DeploymentHistory:
    """What went where: per-thread dedup and per-(variant, community) recency."""

    def __init__(self) -> None:
        self._threads: set[str] = set()
        self._last_used: dict[tuple[str, str], float] = {}

    def thread_intervened(self, thread_id: str) -> bool:
        return thread_id in self._threads

    def last_used(self, variant_id: str, community: str) -> Optional[float]:
        return self._last_used.get((variant_id, community))

    def record(self, variant_id: str, community: str, thread_id: str, at: float) -> None:
        self._threads.add(thread_id)
        self._last_used[(variant_id, community)] = at


def select_intervention(
    term: str,
    thread_id: str,
    community: str,
    variants: Sequence[InterventionVariant],
    history: DeploymentHistory,
    now: float,
    repetition_window_s: float = DEFAULT_REPETITION_WINDOW_S,
) -> Optional[InterventionVariant]:
    """Pick a deployable variant for the term, or None if the thread is done.

    One intervention per thread, ever. Among deployable variants for the
    term, prefer never-used in this community, then least recently used;
    variant id breaks ties. A variant used within the repetition window is
    off the table; if that empties the pool, that is a bank gap.
    """
    if history.thread_intervened(thread_id):
        return None
    candidates = [v for v in variants if v.deployable and term in v.terms]
    if not candidates:
        raise BankGapError(f"no approved, gate-passed variant covers term {term!r}")
    fresh: list[tuple[float, str, InterventionVariant]] = []
    for v in candidates:
        used_at = history.last_used(v.variant_id, community)
        if used_at is not None and now - used_at < repetition_window_s:
            continue
        sort_at = used_at if used_at is not None else float("-inf")
        fresh.append((sort_at, v.variant_id, v))
    if not fresh:
        raise BankGapError(
            f"all variants for term {term!r} used in {community!r} "
            f"within the last {repetition_window_s:.0f}s"
        )
    fresh.sort(key=lambda entry: (entry[0], entry[1]))
    chosen = fresh[0][2]
    history.record(chosen.variant_id, community, thread_id, now)
    return chosen


def load_bank(path: str | Path) -> list[InterventionTemplate]:
    """Parse and validate a bank file (see save_bank for the layout)."""
    try:
        payload = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise BankError(f"bank file {path}: parse error: {exc}") from exc
    if not isinstance(payload, dict):
        raise BankError(f"bank file {path}: expected a mapping at top level")
    version = payload.get("bank_version")
    if version != BANK_VERSION:
        raise BankError(f"bank file {path}: unsupported bank_version {version!r}")
    raw_templates = payload.get("templates")
    if not isinstance(raw_templates, list):
        raise BankError(f"bank file {path}: 'templates' must be a list")
    templates: list[InterventionTemplate] = []
    seen: set[str] = set()
    for entry in raw_templates:
        if not isinstance(entry, dict):
            raise BankError(f"bank file {path}: template entries must be mappings")
        tid = entry.get("id", "")
        if tid in seen:
            raise BankError(f"duplicate template id {tid!r}")
        template = InterventionTemplate(
            id=tid,
            trigger_terms=frozenset(entry.get("trigger_terms", ())),
            body=str(entry.get("body", "")).strip(),
            evidence_url=entry.get("evidence_url"),
            annotation=entry.get("annotation"),
        )
        seen.add(tid)
        templates.append(template)
    return templates


def save_bank(
    path: str | Path,
    templates: Sequence[InterventionTemplate],
    variants: Optional[Sequence[InterventionVariant]] = None,
) -> None:
    doc: dict = {
        "bank_version": BANK_VERSION,
        "templates": [
            {
                "id": t.id,
                "trigger_terms": sorted(t.trigger_terms),
                "body": t.body,
                **({"evidence_url": t.evidence_url} if t.evidence_url else {}),
                **({"annotation": t.annotation} if t.annotation else {}),
            }
            for t in templates
        ],
    }
    if variants is not None:
        doc["variants"] = [
            {
                "variant_id": v.variant_id,
                "template_id": v.template_id,
                "text": v.text,
                "emotion": dict(v.emotion.distribution),
                "emotion_source": v.emotion.source,
                "gate": v.gate,
                **({"gate_reason": v.gate_reason} if v.gate_reason else {}),
                "provenance": v.provenance,
                "terms": sorted(v.terms),
                "approved": v.approved,
            }
            for v in variants
        ]
    Path(path).write_text(
        yaml.safe_dump(doc, sort_keys=False, allow_unicode=True), encoding="utf-8"
    )


def load_variants(path: str | Path) -> list[InterventionVariant]:
    payload = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    if not isinstance(payload, dict) or payload.get("bank_version") != BANK_VERSION:
        raise BankError(f"bank file {path}: missing or unsupported bank_version")
    out = []
    for entry in payload.get("variants", []):
        out.append(
            InterventionVariant(
                variant_id=entry["variant_id"],
                template_id=entry["template_id"],
                text=entry["text"],
                emotion=EmotionScore(
                    distribution=entry["emotion"], source=entry.get("emotion_source", "lexicon")
                ),
                gate=entry["gate"],
                provenance=entry["provenance"],
                terms=frozenset(entry.get("terms", ())),
                gate_reason=entry.get("gate_reason"),
                approved=bool(entry.get("approved", False)),
            )
        )
    return out


def default_bank_path() -> Path:
    from importlib import resources

    return Path(str(resources.files("contestkit.data").joinpath("starter_bank.yaml")))
