"""Campaign orchestration: event log, review queue, scheduler, runner, API."""

from .events import CorruptLogError, EventLog, EventRecord, read_event_log
from .review_queue import (
    GateRejectedError,
    IllegalTransitionError,
    QueueError,
    QueueItem,
    ReviewQueue,
    TriggerMatch,
    detect_trigger,
)
from .scheduler import (
    Assignment,
    NoEligibleAccountError,
    PostAuditEntry,
    RotationScheduler,
    audit_posts,
)
from .campaign import (
    Campaign,
    CampaignConfig,
    CampaignError,
    DeployedIntervention,
    config_from_file,
    replay,
)

__all__ = [
    "Assignment",
    "Campaign",
    "CampaignConfig",
    "CampaignError",
    "CorruptLogError",
    "DeployedIntervention",
    "EventLog",
    "EventRecord",
    "GateRejectedError",
    "IllegalTransitionError",
    "NoEligibleAccountError",
    "PostAuditEntry",
    "QueueError",
    "QueueItem",
    "ReviewQueue",
    "RotationScheduler",
    "TriggerMatch",
    "audit_posts",
    "config_from_file",
    "detect_trigger",
    "read_event_log",
    "replay",
]
