"""Typed, weighted, directed edge-labelled graph with indices and serialization.

Entities come in seven kinds and edges in eleven relation types, each relation
carrying a fixed (head kind, tail kind) signature.  Three relation types carry
a numeric weight in [0, 1]; the rest are unweighted.  Weights are stored at
6-decimal precision so that the triples file format (which prints exactly six
fractional digits) round-trips losslessly.

Construction is single-writer; once built, a graph may be read concurrently.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import date as _date
from enum import Enum
from pathlib import Path
from typing import IO, Iterable, Iterator

from .errors import DataError, GraphError

TRIPLES_HEADER = "#covkg-triples v1"


class EntityKind(Enum):
    """The seven entity kinds a graph may contain."""

    TWEET = "Tweet"
    USER = "User"
    HASHTAG = "Hashtag"
    TOPIC = "Topic"
    KEYWORD = "Keyword"
    EVENT = "Event"
    DATE = "Date"


class RelationType(Enum):
    """The eleven relation types, each with a fixed endpoint signature."""

    AUTHORED_BY = "authored_by"
    REPLIES_TO = "replies_to"
    QUOTES = "quotes"
    MENTIONS = "mentions"
    HAS_HASHTAG = "has_hashtag"
    TWEETED_ON = "tweeted_on"
    OCCURRED_ON = "occurred_on"
    HAS_TOPIC = "has_topic"
    HAS_KEYWORD = "has_keyword"
    ASSOCIATED_WITH = "associated_with"
    HAS_CHANGEPOINT = "has_changepoint"


#: (head kind, tail kind) signature of every relation type.
RELATION_SIGNATURES: dict[RelationType, tuple[EntityKind, EntityKind]] = {
    RelationType.AUTHORED_BY: (EntityKind.TWEET, EntityKind.USER),
    RelationType.REPLIES_TO: (EntityKind.TWEET, EntityKind.TWEET),
    RelationType.QUOTES: (EntityKind.TWEET, EntityKind.TWEET),
    RelationType.MENTIONS: (EntityKind.TWEET, EntityKind.USER),
    RelationType.HAS_HASHTAG: (EntityKind.TWEET, EntityKind.HASHTAG),
    RelationType.TWEETED_ON: (EntityKind.TWEET, EntityKind.DATE),
    RelationType.OCCURRED_ON: (EntityKind.EVENT, EntityKind.DATE),
    RelationType.HAS_TOPIC: (EntityKind.TWEET, EntityKind.TOPIC),
    RelationType.HAS_KEYWORD: (EntityKind.TWEET, EntityKind.KEYWORD),
    RelationType.ASSOCIATED_WITH: (EntityKind.KEYWORD, EntityKind.TOPIC),
    RelationType.HAS_CHANGEPOINT: (EntityKind.TOPIC, EntityKind.DATE),
}

#: Relations that carry a numeric weight; all others must not.
WEIGHTED_RELATIONS = frozenset(
    {RelationType.HAS_TOPIC, RelationType.HAS_KEYWORD, RelationType.ASSOCIATED_WITH}
)

_WEIGHT_DECIMALS = 6


def _validate_entity_id(kind: EntityKind, entity_id: str) -> None:
    if not isinstance(entity_id, str) or entity_id == "":
        raise GraphError(f"entity id must be a nonempty string (kind={kind.value})")
    if kind is EntityKind.DATE:
        try:
            _date.fromisoformat(entity_id)
        except ValueError as exc:
            raise GraphError(f"Date id {entity_id!r} is not a valid ISO date: {exc}") from exc


@dataclass(frozen=True)
class EntityRef:
    """A typed entity identifier; ids are unique within their kind."""

    kind: EntityKind
    id: str

    def __post_init__(self) -> None:
        _validate_entity_id(self.kind, self.id)

    def __str__(self) -> str:
        return f"{self.kind.value}:{self.id}"

    @classmethod
    def parse(cls, text: str) -> "EntityRef":
        """Parse a ``Kind:id`` string, the form used in the triples format."""
        kind_name, sep, entity_id = text.partition(":")
        if not sep:
            raise DataError(f"entity reference {text!r} missing ':' separator")
        try:
            kind = EntityKind(kind_name)
        except ValueError as exc:
            raise DataError(f"unknown entity kind {kind_name!r}") from exc
        return cls(kind, entity_id)


@dataclass(frozen=True)
class Fact:
    """A directed, typed edge (head, tail, relation, weight).

    The weight must be present exactly for the weighted relation types and lie
    in [0, 1]; it is rounded to 6 decimals on construction.  ``attrs`` is an
    optional in-memory annotation map (e.g. aspect sentiment on keyword edges);
    it does not participate in the triples serialization.
    """

    head: EntityRef
    tail: EntityRef
    relation: RelationType
    weight: float | None = None
    attrs: dict | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        expected = RELATION_SIGNATURES[self.relation]
        actual = (self.head.kind, self.tail.kind)
        if actual != expected:
            raise GraphError(
                f"{self.relation.value} requires {expected[0].value}->{expected[1].value}, "
                f"got {actual[0].value}->{actual[1].value}"
            )
        if self.relation in WEIGHTED_RELATIONS:
            if self.weight is None:
                raise GraphError(f"{self.relation.value} requires a weight")
            if not (0.0 <= self.weight <= 1.0):
                raise GraphError(f"weight {self.weight} outside [0, 1]")
            object.__setattr__(self, "weight", round(float(self.weight), _WEIGHT_DECIMALS))
        elif self.weight is not None:
            raise GraphError(f"{self.relation.value} does not carry a weight")

    @property
    def key(self) -> tuple[EntityRef, RelationType, EntityRef]:
        return (self.head, self.relation, self.tail)

    def attr(self, name: str):
        return None if self.attrs is None else self.attrs.get(name)


@dataclass(frozen=True)
class DateAttrs:
    """Cumulative and daily disease statistics attached to a Date entity."""

    case_count: int = 0
    new_cases: int = 0
    death_count: int = 0
    new_deaths: int = 0

    def __post_init__(self) -> None:
        for name in ("case_count", "new_cases", "death_count", "new_deaths"):
            value = getattr(self, name)
            if not isinstance(value, int) or value < 0:
                raise DataError(f"{name} must be a nonnegative integer, got {value!r}")

    def to_attrs(self) -> dict:
        return {
            "case_count": self.case_count,
            "new_cases": self.new_cases,
            "death_count": self.death_count,
            "new_deaths": self.new_deaths,
        }


class _UnionFind:
    def __init__(self) -> None:
        self._parent: dict = {}

    def add(self, x) -> None:
        self._parent.setdefault(x, x)

    def find(self, x):
        root = x
        while self._parent[root] != root:
            root = self._parent[root]
        while self._parent[x] != root:
            self._parent[x], x = root, self._parent[x]
        return root

    def union(self, a, b) -> None:
        self.add(a)
        self.add(b)
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self._parent[rb] = ra


class KnowledgeGraph:
    """Entity table plus fact list with head/tail/relation adjacency indices.

    Duplicate (head, tail, relation) inserts collapse to one fact whose weight
    (and attrs) are overwritten by the latest insert.  Iteration orders are
    insertion orders, which makes exports deterministic.
    """

    def __init__(self) -> None:
        self._entities: dict[EntityKind, dict[str, dict]] = {k: {} for k in EntityKind}
        self._facts: list[Fact] = []
        self._fact_pos: dict[tuple[EntityRef, RelationType, EntityRef], int] = {}
        self._by_head: dict[EntityRef, list[int]] = {}
        self._by_tail: dict[EntityRef, list[int]] = {}
        self._by_relation: dict[RelationType, list[int]] = {r: [] for r in RelationType}

    # -- entities -----------------------------------------------------------

    def add_entity(self, ref: EntityRef, attrs: dict | None = None) -> None:
        """Insert an entity; re-adding merges attrs (last writer wins)."""
        table = self._entities[ref.kind]
        existing = table.get(ref.id)
        if existing is None:
            table[ref.id] = dict(attrs) if attrs else {}
        elif attrs:
            existing.update(attrs)

    def has_entity(self, ref: EntityRef) -> bool:
        return ref.id in self._entities[ref.kind]

    def entity_attrs(self, ref: EntityRef) -> dict:
        try:
            return self._entities[ref.kind][ref.id]
        except KeyError:
            raise GraphError(f"unknown entity {ref}") from None

    def entities(self, kind: EntityKind | None = None) -> Iterator[EntityRef]:
        kinds = [kind] if kind is not None else list(EntityKind)
        for k in kinds:
            for entity_id in self._entities[k]:
                yield EntityRef(k, entity_id)

    def entity_count(self, kind: EntityKind | None = None) -> int:
        if kind is not None:
            return len(self._entities[kind])
        return sum(len(t) for t in self._entities.values())

    # -- facts --------------------------------------------------------------

    def add_fact(self, fact: Fact) -> None:
        """Insert a fact; both endpoints must already exist.

        A duplicate (head, tail, relation) does not grow the fact list; its
        weight and attrs are replaced by the new fact's.
        """
        for ref in (fact.head, fact.tail):
            if not self.has_entity(ref):
                raise GraphError(f"fact endpoint {ref} not in graph")
        pos = self._fact_pos.get(fact.key)
        if pos is not None:
            self._facts[pos] = fact
            return
        pos = len(self._facts)
        self._facts.append(fact)
        self._fact_pos[fact.key] = pos
        self._by_head.setdefault(fact.head, []).append(pos)
        self._by_tail.setdefault(fact.tail, []).append(pos)
        self._by_relation[fact.relation].append(pos)

    @property
    def facts(self) -> tuple[Fact, ...]:
        return tuple(self._facts)

    def fact_count(self) -> int:
        return len(self._facts)

    def has_fact(self, head: EntityRef, relation: RelationType, tail: EntityRef) -> bool:
        return (head, relation, tail) in self._fact_pos

    def get_fact(self, head: EntityRef, relation: RelationType, tail: EntityRef) -> Fact | None:
        pos = self._fact_pos.get((head, relation, tail))
        return None if pos is None else self._facts[pos]

    def facts_from(self, head: EntityRef) -> list[Fact]:
        return [self._facts[i] for i in self._by_head.get(head, ())]

    def facts_to(self, tail: EntityRef) -> list[Fact]:
        return [self._facts[i] for i in self._by_tail.get(tail, ())]

    def facts_with(self, relation: RelationType) -> list[Fact]:
        return [self._facts[i] for i in self._by_relation[relation]]

    # -- statistics and structure -------------------------------------------

    def stats(self) -> dict[str, int]:
        """Counts laid out like the summary table: relations, entities, per kind."""
        out = {
            "Relations": len(self._facts),
            "Entities": self.entity_count(),
            "Tweets": self.entity_count(EntityKind.TWEET),
            "Users": self.entity_count(EntityKind.USER),
            "Hashtags": self.entity_count(EntityKind.HASHTAG),
            "Topics": self.entity_count(EntityKind.TOPIC),
            "Keywords": self.entity_count(EntityKind.KEYWORD),
            "Events": self.entity_count(EntityKind.EVENT),
            "Dates": self.entity_count(EntityKind.DATE),
        }
        return out

    def weakly_connected_components(
        self, kinds: Iterable[EntityKind] | None = None
    ) -> list[set[EntityRef]]:
        """Components of the subgraph induced by ``kinds``, ignoring direction.

        Every filtered entity appears in exactly one component; isolated
        entities form singletons.  Components are returned sorted by their
        smallest member for determinism.
        """
        kind_set = set(kinds) if kinds is not None else set(EntityKind)
        uf = _UnionFind()
        nodes = [ref for ref in self.entities() if ref.kind in kind_set]
        for ref in nodes:
            uf.add(ref)
        for fact in self._facts:
            if fact.head.kind in kind_set and fact.tail.kind in kind_set:
                uf.union(fact.head, fact.tail)
        groups: dict[EntityRef, set[EntityRef]] = {}
        for ref in nodes:
            groups.setdefault(uf.find(ref), set()).add(ref)
        return sorted(groups.values(), key=lambda c: min((r.kind.value, r.id) for r in c))

    def longest_path_length(self, component: set[EntityRef]) -> int:
        """Number of nodes on the longest directed path within a component.

        The component's directed edges must be acyclic; a cycle raises a
        GraphError naming the entities on it.  A single node counts as 1.
        """
        nodes = set(component)
        succ: dict[EntityRef, list[EntityRef]] = {n: [] for n in nodes}
        indeg: dict[EntityRef, int] = {n: 0 for n in nodes}
        for fact in self._facts:
            if fact.head in nodes and fact.tail in nodes:
                succ[fact.head].append(fact.tail)
                indeg[fact.tail] += 1
        # Kahn's algorithm doubles as cycle detection.
        order: list[EntityRef] = [n for n in nodes if indeg[n] == 0]
        seen = 0
        longest: dict[EntityRef, int] = {}
        queue = list(order)
        while queue:
            node = queue.pop()
            seen += 1
            for nxt in succ[node]:
                indeg[nxt] -= 1
                if indeg[nxt] == 0:
                    queue.append(nxt)
                    order.append(nxt)
        if seen != len(nodes):
            cycle = sorted(str(n) for n in nodes if indeg[n] > 0)
            raise GraphError(f"directed cycle among entities: {', '.join(cycle)}")
        best = 1
        for node in reversed(order):
            length = 1 + max((longest[s] for s in succ[node]), default=0)
            longest[node] = length
            best = max(best, length)
        return best if nodes else 0

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, KnowledgeGraph):
            return NotImplemented
        return self._entities == other._entities and self._facts == other._facts

    def __repr__(self) -> str:
        return f"KnowledgeGraph(entities={self.entity_count()}, facts={len(self._facts)})"


# -- serialization ------------------------------------------------------------


def _format_weight(weight: float | None) -> str:
    return "-" if weight is None else f"{weight:.{_WEIGHT_DECIMALS}f}"


def export_triples(graph: KnowledgeGraph, sink: str | Path | IO[str]) -> None:
    """Write facts as tab-separated triples, one per line, in insertion order."""
    own = isinstance(sink, (str, Path))
    fh = open(sink, "w", encoding="utf-8") if own else sink
    try:
        fh.write(TRIPLES_HEADER + "\n")
        for fact in graph.facts:
            fh.write(
                f"{fact.head}\t{fact.relation.value}\t{fact.tail}\t{_format_weight(fact.weight)}\n"
            )
    finally:
        if own:
            fh.close()


def export_entity_attrs(graph: KnowledgeGraph, sink: str | Path | IO[str]) -> None:
    """Write one JSON object per entity: kind, id, attrs (possibly empty)."""
    own = isinstance(sink, (str, Path))
    fh = open(sink, "w", encoding="utf-8") if own else sink
    try:
        for ref in graph.entities():
            record = {"kind": ref.kind.value, "id": ref.id, "attrs": graph.entity_attrs(ref)}
            fh.write(json.dumps(record, sort_keys=True, ensure_ascii=False) + "\n")
    finally:
        if own:
            fh.close()


def _parse_triple_line(line: str) -> Fact:
    parts = line.rstrip("\n").split("\t")
    if len(parts) != 4:
        raise DataError(f"expected 4 tab-separated fields, got {len(parts)}")
    head = EntityRef.parse(parts[0])
    try:
        relation = RelationType(parts[1])
    except ValueError as exc:
        raise DataError(f"unknown relation {parts[1]!r}") from exc
    tail = EntityRef.parse(parts[2])
    weight: float | None
    if parts[3] == "-":
        weight = None
    else:
        try:
            weight = float(parts[3])
        except ValueError as exc:
            raise DataError(f"bad weight {parts[3]!r}") from exc
    return Fact(head, tail, relation, weight)


def import_triples(
    source: str | Path | IO[str], attrs_source: str | Path | IO[str] | None = None
) -> KnowledgeGraph:
    """Read a triples file (and optional attrs sidecar) back into a graph.

    Malformed lines are collected and reported together with their line
    numbers.  Entities referenced only by facts are created with empty attrs.
    """
    graph = KnowledgeGraph()
    problems: list[str] = []

    if attrs_source is not None:
        own = isinstance(attrs_source, (str, Path))
        fh = open(attrs_source, "r", encoding="utf-8") if own else attrs_source
        try:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    record = json.loads(line)
                    ref = EntityRef(EntityKind(record["kind"]), record["id"])
                    graph.add_entity(ref, record.get("attrs") or {})
                except (ValueError, KeyError, TypeError, DataError) as exc:
                    problems.append(f"attrs line {lineno}: {exc}")
        finally:
            if own:
                fh.close()

    own = isinstance(source, (str, Path))
    fh = open(source, "r", encoding="utf-8") if own else source
    try:
        first = fh.readline().rstrip("\n")
        if first != TRIPLES_HEADER:
            raise DataError(f"bad triples header {first!r}, expected {TRIPLES_HEADER!r}")
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            try:
                fact = _parse_triple_line(line)
                graph.add_entity(fact.head)
                graph.add_entity(fact.tail)
                graph.add_fact(fact)
            except DataError as exc:
                problems.append(f"line {lineno}: {exc}")
    finally:
        if own:
            fh.close()

    if problems:
        raise DataError("malformed triples input: " + "; ".join(problems))
    return graph
