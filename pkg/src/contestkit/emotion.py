"""Emotion scoring for response texts.

Two scorers share one output shape: a fast lexicon scorer that needs no
network, and a remote scorer that defers to an HTTP classifier. Downstream
code only consumes the label distribution and the coarse bucket.
"""

from __future__ import annotations

import math
import os
import time
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Callable, Mapping, Optional

import requests

from .corpus import tokenize

DEFAULT_TIMEOUT_MS = 10_000
DEFAULT_RETRIES = 3
BACKOFF_BASE_MS = 500

NEGATION_WINDOW = 3
NEGATORS = frozenset(
    {"not", "no", "never", "hardly", "barely", "nobody", "nothing", "dont",
     "doesnt", "didnt", "isnt", "arent", "wasnt", "werent", "cant", "cannot",
     "wont", "wouldnt", "shouldnt", "couldnt", "aint", "nor", "neither"}
)


class Bucket(str, Enum):
    POSITIVE = "positive"
    NEUTRAL = "neutral"
    NEGATIVE = "negative"


_BUCKET_TIEBREAK = {Bucket.POSITIVE: 0, Bucket.NEUTRAL: 1, Bucket.NEGATIVE: 2}


class EmotionError(ValueError):
    pass


class RetryableError(EmotionError):
    """Transient remote failure; the call may be retried."""


class MalformedResponse(EmotionError):
    """The remote endpoint answered but not in the agreed shape."""


@dataclass(frozen=True)
class EmotionScore:
    distribution: Mapping[str, float]
    source: str  # "lexicon" or "remote"

    def __post_init__(self) -> None:
        if not self.distribution:
            raise EmotionError("distribution must be non-empty")
        total = 0.0
        for label, weight in self.distribution.items():
            if not label:
                raise EmotionError("empty label")
            if weight < 0 or not math.isfinite(weight):
                raise EmotionError(f"bad weight for {label!r}: {weight}")
            total += weight
        if abs(total - 1.0) > 1e-6:
            raise EmotionError(f"distribution sums to {total}, not 1")
        object.__setattr__(self, "distribution", dict(self.distribution))

    def top_label(self) -> str:
        return max(self.distribution.items(), key=lambda kv: (kv[1], kv[0]))[0]


@dataclass(frozen=True)
class BucketMap:
    mapping: Mapping[str, Bucket]

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "mapping", {k.lower(): Bucket(v) for k, v in self.mapping.items()}
        )

    def bucket(self, label: str) -> Bucket:
        try:
            return self.mapping[label.lower()]
        except KeyError:
            raise EmotionError(f"label {label!r} has no bucket") from None


DEFAULT_BUCKET_MAP = BucketMap(
    {
        "engaged": Bucket.POSITIVE,
        "joy": Bucket.POSITIVE,
        "optimism": Bucket.POSITIVE,
        "curious": Bucket.NEUTRAL,
        "curiosity": Bucket.NEUTRAL,
        "neutral": Bucket.NEUTRAL,
        "confusion": Bucket.NEUTRAL,
        "annoyance": Bucket.NEGATIVE,
        "anger": Bucket.NEGATIVE,
        "disgust": Bucket.NEGATIVE,
    }
)


def load_valence_lexicon(path: Optional[str | Path] = None) -> dict[str, float]:
    """Token-to-polarity table, tab separated, weights in [-1, 1]."""
    if path is None:
        text = (
            resources.files("contestkit.data")
            .joinpath("valence_lexicon.tsv")
            .read_text(encoding="utf-8")
        )
    else:
        text = Path(path).read_text(encoding="utf-8")
    lexicon: dict[str, float] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            token, raw = line.split("\t")
            weight = float(raw)
        except ValueError as exc:
            raise EmotionError(f"bad lexicon line {lineno}: {line!r}") from exc
        if not -1.0 <= weight <= 1.0:
            raise EmotionError(f"lexicon weight out of range at line {lineno}")
        lexicon[token.lower()] = weight
    if not lexicon:
        raise EmotionError("empty lexicon")
    return lexicon


def lexicon_valence(text: str, lexicon: Mapping[str, float]) -> float:
    """Mean polarity over matched tokens, sign-flipped under nearby negation."""
    tokens = tokenize(text)
    hits: list[float] = []
    for pos, token in enumerate(tokens):
        if token not in lexicon:
            continue
        weight = lexicon[token]
        window = tokens[max(0, pos - NEGATION_WINDOW):pos]
        if any(t in NEGATORS for t in window):
            weight = -weight
        hits.append(weight)
    if not hits:
        return 0.0
    return sum(hits) / len(hits)


def _valence_label(valence: float) -> str:
    if valence >= 0.5:
        return "joy"
    if valence > 0.0:
        return "curiosity"
    if valence == 0.0:
        return "neutral"
    if valence > -0.5:
        return "annoyance"
    return "anger"


def score_lexicon(text: str, lexicon: Optional[Mapping[str, float]] = None) -> EmotionScore:
    if lexicon is None:
        lexicon = load_valence_lexicon()
    valence = lexicon_valence(text, lexicon)
    label = _valence_label(valence)
    if label == "neutral":
        return EmotionScore(distribution={"neutral": 1.0}, source="lexicon")
    weight = min(1.0, abs(valence))
    dist = {label: weight}
    if weight < 1.0:
        dist["neutral"] = 1.0 - weight
    return EmotionScore(distribution=dist, source="lexicon")


def _env_int(name: str, default: int) -> int:
    raw = os.environ.get(name)
    if raw is None:
        return default
    try:
        value = int(raw)
    except ValueError:
        raise EmotionError(f"{name} must be an integer, got {raw!r}") from None
    if value < 0:
        raise EmotionError(f"{name} must be >= 0")
    return value


def score_remote(
    text: str,
    endpoint: str,
    timeout_ms: Optional[int] = None,
    retries: Optional[int] = None,
    session: Optional[requests.Session] = None,
    sleep: Callable[[float], None] = time.sleep,
) -> EmotionScore:
    """POST the text to an external classifier and normalize its label weights.

    Retries transient failures (connection errors, 5xx, 429) with doubling
    backoff starting at 500ms. 4xx other than 429 and shape violations are
    not retried.
    """
    if timeout_ms is None:
        timeout_ms = _env_int("CONTEST_EMO_TIMEOUT_MS", DEFAULT_TIMEOUT_MS)
    if retries is None:
        retries = _env_int("CONTEST_EMO_RETRIES", DEFAULT_RETRIES)
    http = session or requests.Session()
    url = endpoint.rstrip("/") + "/classify"
    last: Optional[Exception] = None
    for attempt in range(retries + 1):
        if attempt:
            sleep(BACKOFF_BASE_MS * (2 ** (attempt - 1)) / 1000.0)
        try:
            response = http.post(url, json={"text": text}, timeout=timeout_ms / 1000.0)
        except requests.RequestException as exc:
            last = RetryableError(f"request failed: {exc}")
            continue
        if response.status_code >= 500 or response.status_code == 429:
            last = RetryableError(f"remote returned {response.status_code}")
            continue
        if response.status_code != 200:
            raise EmotionError(f"remote returned {response.status_code}")
        try:
            payload = response.json()
        except ValueError as exc:
            raise MalformedResponse("remote sent non-JSON body") from exc
        labels = payload.get("labels") if isinstance(payload, dict) else None
        if not isinstance(labels, dict) or not labels:
            raise MalformedResponse("expected a non-empty 'labels' object")
        weights: dict[str, float] = {}
        for label, raw in labels.items():
            if not isinstance(label, str) or not isinstance(raw, (int, float)):
                raise MalformedResponse(f"bad label entry: {label!r}")
            if raw < 0:
                raise MalformedResponse(f"negative weight for {label!r}")
            weights[label.lower()] = float(raw)
        total = sum(weights.values())
        if total <= 0:
            raise MalformedResponse("label weights sum to zero")
        dist = {label: w / total for label, w in weights.items()}
        return EmotionScore(distribution=dist, source="remote")
    raise last if last is not None else RetryableError("remote scoring failed")


def bucket_of(score: EmotionScore, bucket_map: Optional[BucketMap] = None) -> Bucket:
    """Coarse bucket of the highest-weight label.

    Weight ties resolve positive over neutral over negative so borderline
    responses are never silently counted against an intervention.
    """
    bmap = bucket_map or DEFAULT_BUCKET_MAP
    best: Optional[tuple[float, int]] = None
    best_bucket = Bucket.NEUTRAL
    for label, weight in score.distribution.items():
        bucket = bmap.bucket(label)
        key = (-weight, _BUCKET_TIEBREAK[bucket])
        if best is None or key < best:
            best = key
            best_bucket = bucket
    return best_bucket


def signed_valence(score: EmotionScore, bucket_map: Optional[BucketMap] = None) -> float:
    """Positive minus negative bucket mass, in [-1, 1]."""
    bmap = bucket_map or DEFAULT_BUCKET_MAP
    value = 0.0
    for label, weight in score.distribution.items():
        bucket = bmap.bucket(label)
        if bucket is Bucket.POSITIVE:
            value += weight
        elif bucket is Bucket.NEGATIVE:
            value -= weight
    return value
