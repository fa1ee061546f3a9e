"""Shared fixtures.

The planted-term fixture is the workhorse: a 50-term vocabulary where five
terms are over-represented 10x in the target relative to the background.
Counts are drawn once per session from a seeded generator so every test the
fixture touches sees identical data.
"""

from __future__ import annotations

import numpy as np
import pytest

from contestkit.corpus import CountVector, Document, Vocabulary

PLANTED_SEED = 20260814
PLANTED_POSITIONS = (3, 11, 24, 37, 48)
TARGET_TOKENS = 10_000
BACKGROUND_TOKENS = 50_000


class PlantedFixture:
    def __init__(self) -> None:
        rng = np.random.default_rng(PLANTED_SEED)
        size = 50
        base = rng.uniform(0.5, 1.5, size=size)
        base /= base.sum()
        target_p = base.copy()
        target_p[list(PLANTED_POSITIONS)] *= 10.0
        target_p /= target_p.sum()
        target = rng.multinomial(TARGET_TOKENS, target_p)
        background = rng.multinomial(BACKGROUND_TOKENS, base)
        self.vocab = Vocabulary(terms=[f"term{i:02d}" for i in range(size)])
        self.target = CountVector(size, [int(c) for c in target])
        self.background = CountVector(size, [int(c) for c in background])
        self.planted = [f"term{i:02d}" for i in PLANTED_POSITIONS]
        self.planted_idx = list(PLANTED_POSITIONS)


@pytest.fixture(scope="session")
def planted():
    return PlantedFixture()


def make_doc(
    doc_id: str,
    text: str,
    *,
    community: str = "climatetalk",
    author: str = "op_user",
    kind: str = "post",
    parent_id: str | None = None,
    created_at: float = 1_000.0,
) -> Document:
    return Document(
        id=doc_id,
        community=community,
        author=author,
        kind=kind,
        parent_id=parent_id,
        created_at=created_at,
        text=text,
    )
