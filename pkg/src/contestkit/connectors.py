"""Platform abstraction: bot accounts, connector protocol, live HTTP client.

A connector hides one discussion platform. Two implementations exist: the
LiveConnector below (generic authenticated JSON API) and the deterministic
SimulatedCommunity in simulator.py. Orchestration code only sees the
protocol.
"""

from __future__ import annotations

import hashlib
import logging
import os
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Protocol

import requests
import yaml

from .corpus import Document

log = logging.getLogger(__name__)

DEFAULT_MIN_KARMA = 100
DEFAULT_POLL_INTERVAL_S = 60.0
# connector-level floor beneath the orchestrator's rotation spacing
MIN_POST_INTERVAL_S = 600.0


class PlatformError(RuntimeError):
    pass


class RetryablePlatformError(PlatformError):
    """Transient failure; safe to retry the same call."""


class RateLimitedError(RetryablePlatformError):
    def __init__(self, message: str, retry_after_s: float = 60.0) -> None:
        super().__init__(message)
        self.retry_after_s = retry_after_s


class AuthFailure(PlatformError):
    """Credentials rejected; fatal for the run."""


class BannedError(PlatformError):
    def __init__(self, account: str, community: str) -> None:
        super().__init__(f"account {account!r} is banned in {community!r}")
        self.account = account
        self.community = community


class ParentGoneError(PlatformError):
    """The post we wanted to reply to no longer exists."""


@dataclass(frozen=True)
class PlatformEvent:
    document: Document
    fetched_at: float

    def __post_init__(self) -> None:
        if self.fetched_at < self.document.created_at:
            raise PlatformError(
                f"event for {self.document.id} fetched before it was created"
            )


@dataclass
class BotAccount:
    handle: str
    karma: int
    min_karma: int = DEFAULT_MIN_KARMA
    banned_in: set[str] = field(default_factory=set)
    last_post_at: dict[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.handle:
            raise ValueError("account handle must be non-empty")

    def eligible(self, community: str) -> bool:
        return self.karma >= self.min_karma and community not in self.banned_in


def idempotency_key(account: str, parent_id: str, text: str) -> str:
    digest = hashlib.sha256(
        f"{account}\n{parent_id}\n{text}".encode("utf-8")
    ).hexdigest()
    return digest[:32]


class Connector(Protocol):
    def fetch_new_posts(
        self, community: str, since: Optional[str]
    ) -> tuple[list[PlatformEvent], str]: ...

    def submit_reply(
        self, account: BotAccount, parent_id: str, text: str, key: str
    ) -> str: ...

    def fetch_replies(self, posted_id: str) -> tuple[list[Document], bool]: ...


@dataclass
class LiveConnectorConfig:
    base_url: str
    token_env: str
    new_posts_path: str = "/communities/{community}/posts"
    reply_path: str = "/documents/{parent_id}/replies"
    replies_of_path: str = "/documents/{posted_id}/thread"
    poll_interval_s: float = DEFAULT_POLL_INTERVAL_S
    max_retries: int = 3

    @classmethod
    def from_file(cls, path: str | Path) -> "LiveConnectorConfig":
        raw = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
        if not isinstance(raw, dict):
            raise PlatformError(f"connector config {path}: expected a mapping")
        try:
            base_url = raw["base_url"]
            token_env = raw["token_env"]
        except KeyError as exc:
            raise PlatformError(f"connector config {path}: missing {exc}") from None
        paths = raw.get("paths", {})
        return cls(
            base_url=base_url.rstrip("/"),
            token_env=token_env,
            new_posts_path=paths.get("new_posts", cls.new_posts_path),
            reply_path=paths.get("reply", cls.reply_path),
            replies_of_path=paths.get("replies_of", cls.replies_of_path),
            poll_interval_s=float(raw.get("poll_interval_s", DEFAULT_POLL_INTERVAL_S)),
            max_retries=int(raw.get("max_retries", 3)),
        )


class LiveConnector:
    """Generic bearer-token JSON API client.

    The credential is read from the environment at call time and never
    stored in config. Submissions are serialized per account and locally
    rate limited to one post per MIN_POST_INTERVAL_S per account.
    """

    def __init__(
        self,
        config: LiveConnectorConfig,
        session: Optional[requests.Session] = None,
        clock=time.monotonic,
    ) -> None:
        self.config = config
        self.session = session or requests.Session()
        self.clock = clock
        self._account_locks: dict[str, threading.Lock] = {}
        self._last_submit: dict[str, float] = {}
        self._lock = threading.Lock()

    def _token(self) -> str:
        token = os.environ.get(self.config.token_env)
        if not token:
            raise AuthFailure(f"credential env var {self.config.token_env} is not set")
        return token

    def _headers(self) -> dict[str, str]:
        return {"Authorization": f"Bearer {self._token()}"}

    def _account_lock(self, handle: str) -> threading.Lock:
        with self._lock:
            return self._account_locks.setdefault(handle, threading.Lock())

    def _request(self, method: str, url: str, **kwargs) -> requests.Response:
        last: Optional[Exception] = None
        for attempt in range(self.config.max_retries + 1):
            if attempt:
                time.sleep(min(2.0 ** attempt, 30.0))
            try:
                response = self.session.request(
                    method, url, headers=self._headers(), timeout=30.0, **kwargs
                )
            except requests.RequestException as exc:
                last = RetryablePlatformError(f"request failed: {exc}")
                continue
            if response.status_code == 401:
                raise AuthFailure("platform rejected the credential")
            if response.status_code == 429:
                retry_after = float(response.headers.get("Retry-After", "60"))
                last = RateLimitedError("platform rate limit", retry_after_s=retry_after)
                continue
            if response.status_code >= 500:
                last = RetryablePlatformError(f"platform returned {response.status_code}")
                continue
            return response
        assert last is not None
        raise last

    def fetch_new_posts(
        self, community: str, since: Optional[str]
    ) -> tuple[list[PlatformEvent], str]:
        url = self.config.base_url + self.config.new_posts_path.format(community=community)
        params = {"since": since} if since else {}
        response = self._request("GET", url, params=params)
        if response.status_code != 200:
            raise PlatformError(f"new-posts fetch returned {response.status_code}")
        payload = response.json()
        events = [
            PlatformEvent(document=_document_from_json(d), fetched_at=float(time.time()))
            for d in payload.get("documents", [])
        ]
        return events, str(payload.get("next_cursor", since or ""))

    def submit_reply(
        self, account: BotAccount, parent_id: str, text: str, key: str
    ) -> str:
        with self._account_lock(account.handle):
            now = self.clock()
            last = self._last_submit.get(account.handle)
            if last is not None and now - last < MIN_POST_INTERVAL_S:
                raise RateLimitedError(
                    "local per-account post floor",
                    retry_after_s=MIN_POST_INTERVAL_S - (now - last),
                )
            url = self.config.base_url + self.config.reply_path.format(parent_id=parent_id)
            response = self._request(
                "POST",
                url,
                json={"account": account.handle, "text": text, "idempotency_key": key},
            )
            if response.status_code == 403:
                raise BannedError(account.handle, "")
            if response.status_code == 404:
                raise ParentGoneError(f"parent {parent_id} is gone")
            if response.status_code not in (200, 201):
                raise PlatformError(f"reply returned {response.status_code}")
            self._last_submit[account.handle] = now
            posted = response.json().get("posted_id")
            if not posted:
                raise PlatformError("platform response missing posted_id")
            return str(posted)

    def fetch_replies(self, posted_id: str) -> tuple[list[Document], bool]:
        url = self.config.base_url + self.config.replies_of_path.format(posted_id=posted_id)
        response = self._request("GET", url)
        if response.status_code == 404:
            return [], True
        if response.status_code != 200:
            raise PlatformError(f"replies fetch returned {response.status_code}")
        payload = response.json()
        docs = [_document_from_json(d) for d in payload.get("documents", [])]
        return docs, bool(payload.get("tombstoned", False))


def _document_from_json(raw: dict) -> Document:
    return Document(
        id=str(raw["id"]),
        community=str(raw["community"]),
        author=str(raw["author"]),
        kind=str(raw.get("kind", "post")),
        parent_id=raw.get("parent_id"),
        created_at=float(raw["created_at"]),
        text=str(raw.get("text", "")),
    )
