import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from covkg.graph_store import EntityKind, EntityRef, Fact, KnowledgeGraph, RelationType


def tweet(i: str) -> EntityRef:
    return EntityRef(EntityKind.TWEET, i)


def user(i: str) -> EntityRef:
    return EntityRef(EntityKind.USER, i)


@pytest.fixture
def reply_thread_graph() -> KnowledgeGraph:
    """1 root, 3 replies, 1 quote of a reply; plus 2 isolated tweets."""
    g = KnowledgeGraph()
    for i in "1234567":
        g.add_entity(tweet(i))
    g.add_entity(user("u1"))
    for head, relation, tail in [
        ("2", RelationType.REPLIES_TO, "1"),
        ("3", RelationType.REPLIES_TO, "1"),
        ("4", RelationType.REPLIES_TO, "2"),
        ("5", RelationType.QUOTES, "4"),
    ]:
        g.add_fact(Fact(tweet(head), tweet(tail), relation))
    return g
