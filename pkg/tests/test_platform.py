"""Connector contract tests: live HTTP client plus the scripted simulator."""

import pytest

from contestkit.connectors import (
    AuthFailure,
    BannedError,
    BotAccount,
    LiveConnector,
    LiveConnectorConfig,
    ParentGoneError,
    PlatformError,
    PlatformEvent,
    RateLimitedError,
    idempotency_key,
)
from contestkit.simulator import (
    BanRule,
    Persona,
    ScriptedPost,
    SimScenario,
    SimulatedCommunity,
    SimulatorError,
    load_scenario,
)

from conftest import make_doc


# ---------------------------------------------------------------- accounts


def test_account_eligibility():
    account = BotAccount(handle="h1", karma=150)
    assert account.eligible("c1")
    account.banned_in.add("c1")
    assert not account.eligible("c1")
    assert account.eligible("c2")
    broke = BotAccount(handle="h2", karma=99)
    assert not broke.eligible("c1")


def test_idempotency_key_is_stable_and_sensitive():
    k = idempotency_key("acct", "parent", "text")
    assert k == idempotency_key("acct", "parent", "text")
    assert len(k) == 32
    assert int(k, 16) >= 0  # hex digest prefix
    assert k != idempotency_key("acct2", "parent", "text")
    assert k != idempotency_key("acct", "parent2", "text")
    assert k != idempotency_key("acct", "parent", "text2")


def test_platform_event_ordering_invariant():
    doc = make_doc("d1", "text", created_at=100.0)
    assert PlatformEvent(document=doc, fetched_at=100.0).fetched_at == 100.0
    with pytest.raises(PlatformError):
        PlatformEvent(document=doc, fetched_at=99.0)


# ---------------------------------------------------------------- live client


class _Resp:
    def __init__(self, status_code, payload=None, headers=None):
        self.status_code = status_code
        self._payload = payload
        self.headers = headers or {}

    def json(self):
        if self._payload is None:
            raise ValueError("no body")
        return self._payload


class FakeHttp:
    def __init__(self, script):
        self.script = list(script)
        self.calls = []

    def request(self, method, url, headers=None, timeout=None, **kwargs):
        self.calls.append({"method": method, "url": url, "headers": headers, **kwargs})
        item = self.script.pop(0)
        if isinstance(item, Exception):
            raise item
        return item


def make_config(**overrides):
    fields = dict(base_url="https://api.example.test", token_env="TEST_PLATFORM_TOKEN")
    fields.update(overrides)
    return LiveConnectorConfig(**fields)


@pytest.fixture
def token_env(monkeypatch):
    monkeypatch.setenv("TEST_PLATFORM_TOKEN", "sekrit")


def test_config_from_file(tmp_path):
    path = tmp_path / "platform.yaml"
    path.write_text(
        "base_url: https://api.example.test/\n"
        "token_env: TEST_PLATFORM_TOKEN\n"
        "poll_interval_s: 5\n"
        "paths:\n"
        "  reply: /custom/{parent_id}/reply\n",
        encoding="utf-8",
    )
    config = LiveConnectorConfig.from_file(path)
    assert config.base_url == "https://api.example.test"  # trailing slash dropped
    assert config.reply_path == "/custom/{parent_id}/reply"
    assert config.poll_interval_s == 5.0
    assert config.new_posts_path == "/communities/{community}/posts"

    path.write_text("base_url: https://x\n", encoding="utf-8")
    with pytest.raises(PlatformError, match="token_env"):
        LiveConnectorConfig.from_file(path)


def test_missing_credential_is_fatal(monkeypatch):
    monkeypatch.delenv("TEST_PLATFORM_TOKEN", raising=False)
    connector = LiveConnector(make_config(), session=FakeHttp([]))
    with pytest.raises(AuthFailure, match="TEST_PLATFORM_TOKEN"):
        connector.fetch_new_posts("c1", None)


def test_submit_reply_posts_and_rate_limits(token_env):
    http = FakeHttp([_Resp(201, {"posted_id": "p42"})])
    clock = iter([100.0, 150.0]).__next__
    connector = LiveConnector(make_config(), session=http, clock=clock)
    account = BotAccount("h1", 500)
    posted = connector.submit_reply(account, "parent1", "hello", key="k1")
    assert posted == "p42"
    call = http.calls[0]
    assert call["method"] == "POST"
    assert call["url"].endswith("/documents/parent1/replies")
    assert call["headers"]["Authorization"] == "Bearer sekrit"
    assert call["json"]["idempotency_key"] == "k1"
    # second post 50s later trips the local 600s per-account floor
    with pytest.raises(RateLimitedError) as info:
        connector.submit_reply(account, "parent2", "again", key="k2")
    assert info.value.retry_after_s == pytest.approx(550.0)


def test_submit_reply_maps_status_codes(token_env):
    account = BotAccount("h1", 500)
    for status, exc in ((403, BannedError), (404, ParentGoneError)):
        connector = LiveConnector(
            make_config(max_retries=0), session=FakeHttp([_Resp(status)])
        )
        with pytest.raises(exc):
            connector.submit_reply(account, "parent", "text", key="k")


def test_rate_limited_carries_backoff_hint(token_env):
    http = FakeHttp([_Resp(429, headers={"Retry-After": "7"})])
    connector = LiveConnector(make_config(max_retries=0), session=http)
    with pytest.raises(RateLimitedError) as info:
        connector.fetch_new_posts("c1", None)
    assert info.value.retry_after_s == 7.0


def test_retries_then_succeeds(token_env, monkeypatch):
    monkeypatch.setattr("time.sleep", lambda s: None)
    http = FakeHttp(
        [_Resp(500), _Resp(200, {"documents": [], "next_cursor": "c9"})]
    )
    connector = LiveConnector(make_config(max_retries=2), session=http)
    events, cursor = connector.fetch_new_posts("c1", "c5")
    assert events == [] and cursor == "c9"
    assert len(http.calls) == 2
    assert http.calls[0]["params"] == {"since": "c5"}


def test_auth_rejection_not_retried(token_env):
    connector = LiveConnector(make_config(), session=FakeHttp([_Resp(401)]))
    with pytest.raises(AuthFailure):
        connector.fetch_new_posts("c1", None)


def test_fetch_replies_tombstone(token_env):
    connector = LiveConnector(make_config(), session=FakeHttp([_Resp(404)]))
    docs, tombstoned = connector.fetch_replies("gone")
    assert docs == [] and tombstoned


# ---------------------------------------------------------------- simulator


def make_scenario(**overrides):
    fields = dict(
        seed=7,
        personas=[
            Persona(handle="engager", kind="denier_evidence_engager", seed=1),
            Persona(
                handle="reactive",
                kind="denier_terminology_reactive",
                terminology_triggers=frozenset({"greenhouse"}),
                seed=2,
            ),
            Persona(handle="fan", kind="supporter", seed=3),
            Persona(handle="lurker", kind="silent", seed=4),
        ],
        posts=[
            ScriptedPost(at=10.0, community="c1", author="op1", text="first post"),
            ScriptedPost(at=20.0, community="c1", author="op2", text="second post"),
            ScriptedPost(at=30.0, community="c1", author="op3", text="third post"),
        ],
        ban_rules=[],
        communities=["c1"],
    )
    fields.update(overrides)
    return SimScenario(**fields)


def test_fetch_new_posts_cursor_semantics():
    sim = SimulatedCommunity(make_scenario())
    sim.sim_step(60.0)
    events, cursor = sim.fetch_new_posts("c1", None)
    assert len(events) == 3
    assert [e.document.text for e in events] == ["first post", "second post", "third post"]
    again, cursor2 = sim.fetch_new_posts("c1", cursor)
    assert again == [] and cursor2 == cursor


def test_scripted_posts_fire_in_time_order():
    sim = SimulatedCommunity(make_scenario())
    assert [e.document.id for e in sim.sim_step(10.0)] == ["d0001"]
    assert [e.document.id for e in sim.sim_step(25.0)] == ["d0002"]
    assert [e.document.id for e in sim.sim_step(99.0)] == ["d0003"]
    assert sim.script_exhausted()


def test_clock_cannot_rewind():
    sim = SimulatedCommunity(make_scenario())
    sim.sim_step(50.0)
    with pytest.raises(SimulatorError):
        sim.sim_step(40.0)


def test_submit_reply_idempotent():
    sim = SimulatedCommunity(make_scenario())
    sim.sim_step(60.0)
    account = BotAccount("bot1", 500)
    first = sim.submit_reply(account, "d0001", "reply text", key="k1")
    second = sim.submit_reply(account, "d0001", "reply text", key="k1")
    assert first == second
    # the duplicate submit created no extra document
    replies, _ = sim.fetch_replies("d0001")
    assert [d.id for d in replies] == [first]


def test_submit_reply_to_missing_parent():
    sim = SimulatedCommunity(make_scenario())
    sim.sim_step(60.0)
    with pytest.raises(ParentGoneError):
        sim.submit_reply(BotAccount("bot1", 500), "nope", "text", key="k")
    sim.delete_document("d0001")
    with pytest.raises(ParentGoneError):
        sim.submit_reply(BotAccount("bot1", 500), "d0001", "text", key="k2")


def test_ban_rule_fires_on_nth_post():
    scenario = make_scenario(ban_rules=[BanRule(community="c1", on_nth_post=3)])
    sim = SimulatedCommunity(scenario)
    sim.sim_step(60.0)
    account = BotAccount("bot1", 500)
    sim.submit_reply(account, "d0001", "one", key="k1")
    sim.submit_reply(account, "d0002", "two", key="k2")
    with pytest.raises(BannedError):
        sim.submit_reply(account, "d0003", "three", key="k3")
    assert sim.is_banned("bot1", "c1")
    # the ban sticks for later submissions
    with pytest.raises(BannedError):
        sim.submit_reply(account, "d0003", "four", key="k4")
    replies, _ = sim.fetch_replies("d0003")
    assert replies == []  # banned submit never landed


def test_ban_rule_targets_specific_handle():
    scenario = make_scenario(
        ban_rules=[BanRule(community="c1", on_nth_post=1, handle="bot2")]
    )
    sim = SimulatedCommunity(scenario)
    sim.sim_step(60.0)
    sim.submit_reply(BotAccount("bot1", 500), "d0001", "fine", key="k1")
    with pytest.raises(BannedError):
        sim.submit_reply(BotAccount("bot2", 500), "d0002", "banned", key="k2")


def test_engager_needs_evidence_link():
    sim = SimulatedCommunity(make_scenario())
    sim.sim_step(60.0)
    bot = BotAccount("bot1", 500)
    plain = sim.submit_reply(bot, "d0001", "no link here, just words", key="k1")
    linked = sim.submit_reply(
        bot, "d0002", "see the record at https://example.org/data", key="k2"
    )
    sim.sim_step(120.0)
    plain_replies, _ = sim.fetch_replies(plain)
    linked_replies, _ = sim.fetch_replies(linked)
    assert all(d.author != "engager" for d in plain_replies)
    assert any(d.author == "engager" for d in linked_replies)


def test_reactive_needs_terminology_trigger():
    sim = SimulatedCommunity(make_scenario())
    sim.sim_step(60.0)
    bot = BotAccount("bot1", 500)
    neutral = sim.submit_reply(bot, "d0001", "a calm reply without the word", key="k1")
    triggering = sim.submit_reply(bot, "d0002", "the greenhouse effect is physics", key="k2")
    sim.sim_step(120.0)
    neutral_replies, _ = sim.fetch_replies(neutral)
    trig_replies, _ = sim.fetch_replies(triggering)
    assert all(d.author != "reactive" for d in neutral_replies)
    reactive = [d for d in trig_replies if d.author == "reactive"]
    assert len(reactive) == 1
    assert "nonsense" in reactive[0].text


def test_supporter_always_replies_with_link():
    sim = SimulatedCommunity(make_scenario())
    sim.sim_step(60.0)
    posted = sim.submit_reply(BotAccount("bot1", 500), "d0001", "plain reply", key="k1")
    sim.sim_step(120.0)
    replies, _ = sim.fetch_replies(posted)
    fan = [d for d in replies if d.author == "fan"]
    assert len(fan) == 1
    assert "https://example.org" in fan[0].text
    assert all(d.author != "lurker" for d in replies)


def test_reply_probability_zero_silences_persona():
    scenario = make_scenario(
        personas=[Persona(handle="fan", kind="supporter", reply_probability=0.0, seed=3)]
    )
    sim = SimulatedCommunity(scenario)
    sim.sim_step(60.0)
    posted = sim.submit_reply(BotAccount("bot1", 500), "d0001", "plain", key="k1")
    sim.sim_step(120.0)
    replies, _ = sim.fetch_replies(posted)
    assert replies == []


def test_followup_builds_a_parent_chain():
    scenario = make_scenario(
        personas=[
            Persona(handle="fan", kind="supporter", seed=3, followup_probability=1.0)
        ]
    )
    sim = SimulatedCommunity(scenario)
    sim.sim_step(60.0)
    posted = sim.submit_reply(BotAccount("bot1", 500), "d0001", "plain", key="k1")
    sim.sim_step(120.0)
    replies, _ = sim.fetch_replies(posted)
    assert len(replies) == 2
    direct = [d for d in replies if d.parent_id == posted]
    followup = [d for d in replies if d.parent_id != posted]
    assert len(direct) == 1 and len(followup) == 1
    assert followup[0].parent_id == direct[0].id


def test_fetch_replies_tombstone_after_delete():
    sim = SimulatedCommunity(make_scenario())
    sim.sim_step(60.0)
    posted = sim.submit_reply(BotAccount("bot1", 500), "d0001", "plain", key="k1")
    sim.delete_document(posted)
    docs, tombstoned = sim.fetch_replies(posted)
    assert docs == [] and tombstoned


def test_simulator_is_deterministic():
    def run():
        sim = SimulatedCommunity(make_scenario())
        sim.sim_step(60.0)
        posted = sim.submit_reply(
            BotAccount("bot1", 500), "d0001", "see https://example.org/x", key="k1"
        )
        sim.sim_step(120.0)
        replies, _ = sim.fetch_replies(posted)
        return [(d.id, d.author, d.text, d.created_at) for d in replies]

    assert run() == run()


def test_persona_validation():
    with pytest.raises(SimulatorError, match="unknown persona kind"):
        Persona(handle="x", kind="troll")
    with pytest.raises(SimulatorError, match="out of"):
        Persona(handle="x", kind="supporter", reply_probability=1.5)
    with pytest.raises(SimulatorError):
        BanRule(community="c", on_nth_post=0)


def test_load_scenario_sorts_posts(tmp_path):
    path = tmp_path / "scenario.yaml"
    path.write_text(
        "seed: 3\n"
        "communities: [c1]\n"
        "personas:\n"
        "  - {handle: fan, kind: supporter, seed: 1}\n"
        "posts:\n"
        "  - {at: 20, community: c1, author: op2, text: later}\n"
        "  - {at: 10, community: c1, author: op1, text: earlier}\n",
        encoding="utf-8",
    )
    scenario = load_scenario(path)
    assert scenario.seed == 3
    assert [p.text for p in scenario.posts] == ["earlier", "later"]
    assert scenario.personas[0].handle == "fan"
