import logging

import pytest
import requests

from contestkit.bank import (
    BankError,
    BankGapError,
    BuiltinExpander,
    DeploymentHistory,
    GatePolicy,
    GeneratorError,
    InterventionTemplate,
    InterventionVariant,
    RemoteGenerator,
    default_bank_path,
    deployable_text,
    expand_variants,
    gate_by_emotion,
    load_bank,
    load_variants,
    manual_variant,
    render_body,
    save_bank,
    select_intervention,
)
from contestkit.emotion import EmotionScore

from test_emotion import FakeSession, _Resp


def make_template(**overrides):
    fields = {
        "id": "tmpl-1",
        "trigger_terms": frozenset({"albedo"}),
        "body": "The {TERM} effect is well measured, see {EVIDENCE_URL} for data.",
        "evidence_url": "https://example.org/albedo",
        "annotation": "measurement rebuttal",
    }
    fields.update(overrides)
    return InterventionTemplate(**fields)


def make_variant(vid="v1", term="albedo", text="Good data, thanks.", approved=True, gate="passed"):
    return InterventionVariant(
        variant_id=vid,
        template_id="tmpl-1",
        text=text,
        emotion=EmotionScore({"neutral": 1.0}, source="lexicon"),
        gate=gate,
        provenance="manual",
        terms=frozenset({term}),
        approved=approved,
    )


# ---------------------------------------------------------------- templates


def test_template_invariants():
    with pytest.raises(BankError, match="trigger_terms"):
        make_template(trigger_terms=frozenset())
    with pytest.raises(BankError, match="EVIDENCE_URL"):
        make_template(evidence_url=None)
    with pytest.raises(BankError, match="unknown placeholders"):
        make_template(body="hello {WHO}")
    with pytest.raises(BankError, match="body"):
        make_template(body="   ", evidence_url=None)


def test_template_vocabulary_check():
    t = make_template()
    t.validate_terms({"albedo", "other"})
    with pytest.raises(BankError, match="not in vocabulary"):
        t.validate_terms({"other"})


def test_render_body_substitutes_placeholders():
    t = make_template(trigger_terms=frozenset({"albedo", "zeta"}))
    text = render_body(t, "albedo")
    assert "{TERM}" not in text and "{EVIDENCE_URL}" not in text
    assert "albedo" in text and "https://example.org/albedo" in text
    # default term is the lexicographically first trigger
    assert "albedo" in render_body(t)
    with pytest.raises(BankError, match="not among"):
        render_body(t, "unrelated")


# ---------------------------------------------------------------- gate


def test_gate_passes_positive_text():
    result = gate_by_emotion("Thanks for sharing, interesting perspective!")
    assert result.passed
    assert result.reason is None


def test_gate_rejects_negative_text():
    result = gate_by_emotion("You are wrong and this is nonsense")
    assert not result.passed
    assert result.reason is not None


def test_gate_rejects_overlong_text():
    text = " ".join(["word"] * 200)
    result = gate_by_emotion(text)
    assert not result.passed
    assert "length" in result.reason


def test_gate_policy_thresholds():
    strict = GatePolicy(min_positive_minus_negative=0.9)
    assert not gate_by_emotion("thanks", policy=strict).passed
    with pytest.raises(BankError):
        GatePolicy(max_negative_mass=1.5)
    with pytest.raises(BankError):
        GatePolicy(max_length_words=0)


# ---------------------------------------------------------------- variants


def test_manual_variant_is_preapproved_when_passing():
    v = manual_variant(make_template())
    assert v.variant_id == "tmpl-1-m0"
    assert v.provenance == "manual"
    assert v.gate == "passed"
    assert v.approved
    assert v.has_evidence  # evidence URL survives rendering


def test_manual_variant_failing_gate_is_not_approved():
    hostile = make_template(
        body="The {TERM} claim is nonsense and a lie.", evidence_url=None
    )
    v = manual_variant(hostile)
    assert v.gate == "rejected"
    assert not v.approved
    assert not v.deployable


def test_expand_variants_builtin_frames():
    t = make_template()
    (v,) = expand_variants(t, n=1)
    body = render_body(t)
    assert body in v.text
    assert v.text != body  # frames added
    assert v.provenance == "generated"
    assert not v.approved  # generated variants need review


def test_expand_variants_distinct_texts():
    vs = expand_variants(make_template(), n=3)
    texts = [v.text for v in vs]
    assert len(set(texts)) == 3
    assert [v.variant_id for v in vs] == ["tmpl-1-g0", "tmpl-1-g1", "tmpl-1-g2"]


def test_expand_variants_gates_each_candidate():
    hostile = make_template(
        body="The {TERM} claim is nonsense and a lie and bullshit.", evidence_url=None
    )
    vs = expand_variants(hostile, n=2)
    assert all(v.gate == "rejected" for v in vs)


def test_expand_variants_validates_n():
    with pytest.raises(BankError):
        expand_variants(make_template(), n=0)


def test_builtin_expander_caps_at_twenty():
    assert len(set(BuiltinExpander().generate("core claim", 20))) == 20
    with pytest.raises(GeneratorError, match="caps at 20"):
        BuiltinExpander().generate("core claim", 21)


class _FailingGenerator:
    def generate(self, body, n):
        raise GeneratorError("backend offline")


def test_expand_variants_falls_back_to_builtin(caplog):
    with caplog.at_level(logging.WARNING, logger="contestkit.bank"):
        vs = expand_variants(make_template(), generator=_FailingGenerator(), n=2)
    assert len(vs) == 2
    assert any("falling back" in rec.message for rec in caplog.records)


def test_remote_generator_contract():
    ok = FakeSession([_Resp(200, {"variants": ["alpha text", "beta text"]})])
    gen = RemoteGenerator("http://gen.local", session=ok)
    assert gen.generate("body", 2) == ["alpha text", "beta text"]

    for resp in (
        _Resp(500),
        _Resp(200, body="<html>"),
        _Resp(200, {"variants": ["only one"]}),
        _Resp(200, {"variants": ["ok", ""]}),
        requests.ConnectionError("down"),
    ):
        gen = RemoteGenerator("http://gen.local", session=FakeSession([resp]))
        with pytest.raises(GeneratorError):
            gen.generate("body", 2)


def test_deployable_text_appends_disclosure():
    v = make_variant()
    assert deployable_text(v).endswith("\n\n^(I am a research bot)")
    assert deployable_text(v, "^(bot)").endswith("^(bot)")
    with pytest.raises(BankError):
        deployable_text(v, "")


def test_variant_rejects_unresolved_placeholder():
    with pytest.raises(BankError, match="unresolved placeholder"):
        make_variant(text="oops {TERM}")


# ---------------------------------------------------------------- selection


def test_select_intervention_records_history():
    history = DeploymentHistory()
    v = make_variant()
    chosen = select_intervention("albedo", "t1", "c1", [v], history, now=100.0)
    assert chosen is v
    assert history.thread_intervened("t1")
    assert history.last_used("v1", "c1") == 100.0


def test_select_intervention_one_per_thread():
    history = DeploymentHistory()
    vs = [make_variant("v1"), make_variant("v2")]
    assert select_intervention("albedo", "t1", "c1", vs, history, now=0.0) is not None
    assert select_intervention("albedo", "t1", "c1", vs, history, now=1e9) is None


def test_select_intervention_repetition_window():
    history = DeploymentHistory()
    v = make_variant()
    select_intervention("albedo", "t1", "c1", [v], history, now=0.0)
    # one hour later, same community: the only variant is still cooling down
    with pytest.raises(BankGapError, match="within the last"):
        select_intervention("albedo", "t2", "c1", [v], history, now=3600.0)
    # a day later it is available again
    assert select_intervention("albedo", "t3", "c1", [v], history, now=86_400.0) is v


def test_select_intervention_other_community_not_blocked():
    history = DeploymentHistory()
    v = make_variant()
    select_intervention("albedo", "t1", "c1", [v], history, now=0.0)
    assert select_intervention("albedo", "t2", "c2", [v], history, now=60.0) is v


def test_select_intervention_prefers_least_recently_used():
    history = DeploymentHistory()
    a, b = make_variant("va"), make_variant("vb")
    first = select_intervention("albedo", "t1", "c1", [a, b], history, now=0.0)
    assert first is a  # unused tie resolves by variant id
    second = select_intervention("albedo", "t2", "c1", [a, b], history, now=10.0)
    assert second is b  # never-used beats recently-used
    third = select_intervention(
        "albedo", "t3", "c1", [a, b], history, now=90_000.0
    )
    assert third is a  # both cooled down; a is older


def test_select_intervention_filters_candidates():
    history = DeploymentHistory()
    wrong_term = make_variant("v1", term="ceres")
    unapproved = make_variant("v2", approved=False)
    rejected = make_variant("v3", gate="rejected", approved=False)
    with pytest.raises(BankGapError, match="albedo"):
        select_intervention(
            "albedo", "t1", "c1", [wrong_term, unapproved, rejected], history, now=0.0
        )


# ---------------------------------------------------------------- files


def test_load_bank_valid_and_invalid(tmp_path):
    good = tmp_path / "bank.yaml"
    good.write_text(
        "bank_version: 1\n"
        "templates:\n"
        "  - id: one\n"
        "    trigger_terms: [albedo]\n"
        "    body: measured fact\n",
        encoding="utf-8",
    )
    templates = load_bank(good)
    assert len(templates) == 1
    assert templates[0].id == "one"

    dup = tmp_path / "dup.yaml"
    dup.write_text(
        "bank_version: 1\n"
        "templates:\n"
        "  - {id: one, trigger_terms: [a], body: x}\n"
        "  - {id: one, trigger_terms: [b], body: y}\n",
        encoding="utf-8",
    )
    with pytest.raises(BankError, match="duplicate template id"):
        load_bank(dup)

    missing_url = tmp_path / "nourl.yaml"
    missing_url.write_text(
        "bank_version: 1\n"
        "templates:\n"
        "  - id: needs-url\n"
        "    trigger_terms: [a]\n"
        "    body: \"see {EVIDENCE_URL}\"\n",
        encoding="utf-8",
    )
    with pytest.raises(BankError, match="needs-url"):
        load_bank(missing_url)

    wrong_version = tmp_path / "v9.yaml"
    wrong_version.write_text("bank_version: 9\ntemplates: []\n", encoding="utf-8")
    with pytest.raises(BankError, match="bank_version"):
        load_bank(wrong_version)


def test_save_bank_round_trips_variants(tmp_path):
    t = make_template()
    vs = [manual_variant(t), *expand_variants(t, n=2)]
    out = tmp_path / "bank.yaml"
    save_bank(out, [t], variants=vs)
    assert [x.id for x in load_bank(out)] == [t.id]
    back = load_variants(out)
    assert [v.variant_id for v in back] == [v.variant_id for v in vs]
    assert back[0].approved and not back[1].approved
    assert back[0].emotion.distribution == pytest.approx(vs[0].emotion.distribution)


def test_starter_bank_loads():
    templates = load_bank(default_bank_path())
    assert len(templates) == 14
    assert len({t.id for t in templates}) == 14
