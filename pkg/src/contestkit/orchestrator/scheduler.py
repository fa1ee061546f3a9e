"""Account rotation scheduler.

Approved items are spread across eligible accounts community by community:
a round-robin pointer per community alternates accounts, and a per
(account, community) earliest-free time keeps any one account's posts in a
community at least rotation_interval apart. Assignment is greedy: each item
gets the earliest feasible time for the account the rotation hands it.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

from ..connectors import BotAccount

DEFAULT_ROTATION_INTERVAL_S = 30 * 60.0


class SchedulerError(RuntimeError):
    pass


class NoEligibleAccountError(SchedulerError):
    def __init__(self, community: str) -> None:
        super().__init__(f"no eligible account for community {community!r}")
        self.community = community


@dataclass(frozen=True)
class Assignment:
    item_id: str
    account: str
    community: str
    not_before: float
    eligible_count: int  # eligible accounts at assignment time, for audits


class RotationScheduler:
    def __init__(
        self,
        accounts: Sequence[BotAccount],
        rotation_interval_s: float = DEFAULT_ROTATION_INTERVAL_S,
    ) -> None:
        if rotation_interval_s <= 0:
            raise SchedulerError("rotation interval must be positive")
        if not accounts:
            raise SchedulerError("at least one account is required")
        handles = [a.handle for a in accounts]
        if len(set(handles)) != len(handles):
            raise SchedulerError("duplicate account handles")
        self.accounts = {a.handle: a for a in accounts}
        self.rotation_interval_s = rotation_interval_s
        self._ring = sorted(handles)
        self._pointer: dict[str, int] = {}
        self._next_free: dict[tuple[str, str], float] = {}

    def eligible_handles(self, community: str) -> list[str]:
        return [h for h in self._ring if self.accounts[h].eligible(community)]

    def assign(self, item_id: str, community: str, now: float) -> Assignment:
        eligible = self.eligible_handles(community)
        if not eligible:
            raise NoEligibleAccountError(community)
        pointer = self._pointer.get(community, 0)
        # walk the full ring from the pointer; skip ineligible entries
        chosen: Optional[str] = None
        for offset in range(len(self._ring)):
            handle = self._ring[(pointer + offset) % len(self._ring)]
            if handle in eligible:
                chosen = handle
                self._pointer[community] = (pointer + offset + 1) % len(self._ring)
                break
        assert chosen is not None
        key = (chosen, community)
        not_before = max(now, self._next_free.get(key, float("-inf")))
        self._next_free[key] = not_before + self.rotation_interval_s
        return Assignment(
            item_id=item_id,
            account=chosen,
            community=community,
            not_before=not_before,
            eligible_count=len(eligible),
        )

    def schedule(
        self, items: Sequence[tuple[str, str]], now: float
    ) -> list[Assignment]:
        """Assign (item_id, community) pairs in order."""
        return [self.assign(item_id, community, now) for item_id, community in items]

    def notify_posted(self, account: str, community: str, at: float) -> None:
        """Keep the earliest-free floor honest when execution ran late."""
        key = (account, community)
        floor = at + self.rotation_interval_s
        if self._next_free.get(key, float("-inf")) < floor:
            self._next_free[key] = floor


@dataclass(frozen=True)
class PostAuditEntry:
    account: str
    community: str
    at: float
    eligible_count: int


def audit_posts(
    posts: Sequence[PostAuditEntry], rotation_interval_s: float
) -> list[str]:
    """Check the two scheduling invariants over an executed post sequence.

    Returns human-readable violation strings; empty means the audit passed.
    Posts must be supplied in execution order.
    """
    violations: list[str] = []
    last_at: dict[tuple[str, str], float] = {}
    last_account: dict[str, tuple[str, int]] = {}
    for i, post in enumerate(posts):
        key = (post.account, post.community)
        prev = last_at.get(key)
        # 1 microsecond of slack: executed-at times are produced by
        # prev + interval float arithmetic, which can round a hair short
        if prev is not None and post.at - prev < rotation_interval_s - 1e-6:
            violations.append(
                f"post {i}: {post.account} posted in {post.community} after "
                f"{post.at - prev:.0f}s, below {rotation_interval_s:.0f}s"
            )
        last_at[key] = post.at
        previous = last_account.get(post.community)
        if previous is not None:
            prev_account, _ = previous
            if prev_account == post.account and post.eligible_count >= 2:
                violations.append(
                    f"post {i}: {post.account} posted twice in a row in "
                    f"{post.community} with {post.eligible_count} accounts eligible"
                )
        last_account[post.community] = (post.account, i)
    return violations
