import json

import pytest
import requests

from contestkit.emotion import (
    DEFAULT_BUCKET_MAP,
    Bucket,
    BucketMap,
    EmotionError,
    EmotionScore,
    MalformedResponse,
    RetryableError,
    bucket_of,
    lexicon_valence,
    load_valence_lexicon,
    score_lexicon,
    score_remote,
    signed_valence,
)


class _Resp:
    def __init__(self, status_code, payload=None, body=None):
        self.status_code = status_code
        self._payload = payload
        self._body = body

    def json(self):
        if self._payload is None:
            raise ValueError(f"not json: {self._body!r}")
        return self._payload


class FakeSession:
    """Scripted stand-in for requests.Session; replays one response per call."""

    def __init__(self, script):
        self.script = list(script)
        self.calls = []

    def post(self, url, json=None, timeout=None):
        self.calls.append({"url": url, "json": json, "timeout": timeout})
        item = self.script.pop(0)
        if isinstance(item, Exception):
            raise item
        return item


# ---------------------------------------------------------------- lexicon


def test_empty_text_is_neutral():
    score = score_lexicon("")
    assert score.distribution == {"neutral": 1.0}
    assert score.source == "lexicon"


def test_unknown_tokens_are_neutral():
    assert score_lexicon("zxqv flurble").distribution == {"neutral": 1.0}


def test_positive_text_buckets_positive():
    score = score_lexicon("Thanks for sharing, great point!")
    assert bucket_of(score) is Bucket.POSITIVE


def test_negative_text_buckets_negative():
    score = score_lexicon("This is bullshit and a lie")
    assert bucket_of(score) is Bucket.NEGATIVE


def test_distribution_sums_to_one():
    for text in ("great", "bullshit", "great nonsense", "", "so good really"):
        total = sum(score_lexicon(text).distribution.values())
        assert total == pytest.approx(1.0, abs=1e-9)


def test_negation_flips_valence():
    lexicon = load_valence_lexicon()
    assert lexicon_valence("great", lexicon) == pytest.approx(0.8)
    assert lexicon_valence("not great", lexicon) == pytest.approx(-0.8)


def test_negation_window_is_three_tokens():
    lexicon = load_valence_lexicon()
    # negator three tokens back still flips
    assert lexicon_valence("not a very great idea", lexicon) < 0
    # four tokens back is out of the window
    assert lexicon_valence("not that it was a great idea", lexicon) > 0


def test_valence_is_mean_over_hits():
    lexicon = {"up": 1.0, "down": -0.5}
    assert lexicon_valence("up down stranger", lexicon) == pytest.approx(0.25)


def test_label_thresholds():
    # weak valence leaves the remainder on neutral, so assert on the label
    # weight rather than the argmax
    assert score_lexicon("great", {"great": 0.8}).distribution["joy"] == pytest.approx(0.8)
    assert score_lexicon("fine", {"fine": 0.2}).distribution["curiosity"] == pytest.approx(0.2)
    assert score_lexicon("meh", {"other": 0.5}).distribution == {"neutral": 1.0}
    assert score_lexicon("iffy", {"iffy": -0.2}).distribution["annoyance"] == pytest.approx(0.2)
    assert score_lexicon("vile", {"vile": -0.9}).distribution["anger"] == pytest.approx(0.9)


def test_strong_valence_caps_at_one():
    score = score_lexicon("great", {"great": 1.0})
    assert score.distribution == {"joy": 1.0}


def test_lexicon_loader_validates(tmp_path):
    bad = tmp_path / "lex.tsv"
    bad.write_text("token\t2.0\n", encoding="utf-8")
    with pytest.raises(EmotionError, match="out of range"):
        load_valence_lexicon(bad)
    bad.write_text("token without weight\n", encoding="utf-8")
    with pytest.raises(EmotionError, match="bad lexicon line"):
        load_valence_lexicon(bad)
    bad.write_text("# only a comment\n", encoding="utf-8")
    with pytest.raises(EmotionError, match="empty"):
        load_valence_lexicon(bad)


# ---------------------------------------------------------------- score shape


def test_score_invariants():
    with pytest.raises(EmotionError):
        EmotionScore(distribution={}, source="lexicon")
    with pytest.raises(EmotionError):
        EmotionScore(distribution={"joy": 0.5}, source="lexicon")
    with pytest.raises(EmotionError):
        EmotionScore(distribution={"joy": -0.2, "neutral": 1.2}, source="lexicon")


# ---------------------------------------------------------------- remote


def test_remote_passthrough():
    session = FakeSession([_Resp(200, {"labels": {"engaged": 0.7, "neutral": 0.3}})])
    score = score_remote("some text", "http://clf.local", session=session)
    assert score.source == "remote"
    assert score.distribution == pytest.approx({"engaged": 0.7, "neutral": 0.3})
    assert session.calls[0]["url"] == "http://clf.local/classify"
    assert session.calls[0]["json"] == {"text": "some text"}


def test_remote_normalizes_weights():
    session = FakeSession([_Resp(200, {"labels": {"a": 2, "b": 2}})])
    score = score_remote("t", "http://clf.local", session=session)
    assert score.distribution == pytest.approx({"a": 0.5, "b": 0.5})


def test_remote_retries_5xx_then_raises():
    session = FakeSession([_Resp(500), _Resp(500), _Resp(500), _Resp(500)])
    sleeps = []
    with pytest.raises(RetryableError, match="500"):
        score_remote(
            "t", "http://clf.local", retries=3, session=session, sleep=sleeps.append
        )
    assert len(session.calls) == 4  # first try plus three retries
    assert sleeps == [0.5, 1.0, 2.0]  # doubling backoff from 500ms


def test_remote_recovers_after_transient_failures():
    session = FakeSession(
        [
            requests.ConnectionError("boom"),
            _Resp(429),
            _Resp(200, {"labels": {"joy": 1.0}}),
        ]
    )
    score = score_remote("t", "http://clf.local", retries=3, session=session, sleep=lambda s: None)
    assert score.distribution == {"joy": 1.0}
    assert len(session.calls) == 3


def test_remote_4xx_is_not_retried():
    session = FakeSession([_Resp(403)])
    with pytest.raises(EmotionError, match="403"):
        score_remote("t", "http://clf.local", retries=3, session=session, sleep=lambda s: None)
    assert len(session.calls) == 1


@pytest.mark.parametrize(
    "resp",
    [
        _Resp(200, body="<html>"),
        _Resp(200, {"nope": 1}),
        _Resp(200, {"labels": {}}),
        _Resp(200, {"labels": {"joy": -1}}),
        _Resp(200, {"labels": {"joy": "high"}}),
        _Resp(200, {"labels": {"joy": 0, "neutral": 0}}),
    ],
)
def test_remote_malformed_shapes_are_fatal(resp):
    session = FakeSession([resp])
    with pytest.raises(MalformedResponse):
        score_remote("t", "http://clf.local", retries=3, session=session, sleep=lambda s: None)
    assert len(session.calls) == 1


def test_remote_env_overrides(monkeypatch):
    monkeypatch.setenv("CONTEST_EMO_TIMEOUT_MS", "2500")
    monkeypatch.setenv("CONTEST_EMO_RETRIES", "0")
    session = FakeSession([_Resp(500)])
    with pytest.raises(RetryableError):
        score_remote("t", "http://clf.local", session=session, sleep=lambda s: None)
    assert len(session.calls) == 1  # zero retries
    assert session.calls[0]["timeout"] == pytest.approx(2.5)


def test_remote_env_validation(monkeypatch):
    monkeypatch.setenv("CONTEST_EMO_RETRIES", "many")
    with pytest.raises(EmotionError, match="CONTEST_EMO_RETRIES"):
        score_remote("t", "http://clf.local", session=FakeSession([]))


# ---------------------------------------------------------------- buckets


def test_bucket_of_label_families():
    anger = EmotionScore({"anger": 0.9, "neutral": 0.1}, source="remote")
    assert bucket_of(anger) is Bucket.NEGATIVE
    curious = EmotionScore({"curious": 0.6, "joy": 0.4}, source="remote")
    assert bucket_of(curious) is Bucket.NEUTRAL


def test_bucket_tie_prefers_positive():
    tied = EmotionScore({"engaged": 0.5, "neutral": 0.5}, source="remote")
    assert bucket_of(tied) is Bucket.POSITIVE
    tied_down = EmotionScore({"neutral": 0.5, "anger": 0.5}, source="remote")
    assert bucket_of(tied_down) is Bucket.NEUTRAL


def test_bucket_unmapped_label_raises():
    score = EmotionScore({"melancholy": 1.0}, source="remote")
    with pytest.raises(EmotionError, match="melancholy"):
        bucket_of(score)


def test_bucket_map_accepts_extensions():
    extended = BucketMap({**DEFAULT_BUCKET_MAP.mapping, "melancholy": "negative"})
    score = EmotionScore({"melancholy": 1.0}, source="remote")
    assert bucket_of(score, extended) is Bucket.NEGATIVE


def test_signed_valence():
    score = EmotionScore({"joy": 0.6, "anger": 0.3, "neutral": 0.1}, source="remote")
    assert signed_valence(score) == pytest.approx(0.3)


def test_bucket_of_is_pure():
    score = EmotionScore({"joy": 0.7, "anger": 0.3}, source="remote")
    assert bucket_of(score) is bucket_of(score)
