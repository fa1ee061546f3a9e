"""contestkit: contrastive insider-term mining, gated reply banks, and
review-loop campaign orchestration with a deterministic simulator."""

__version__ = "0.1.0"
