"""Link prediction over a trained embedding, and Louvain community detection.

Community detection runs on the undirected, unweighted, untyped simple graph
obtained by collapsing parallel edges and ignoring edge direction.  Local
moves execute only on a strict modularity gain, ties resolve to the lowest
community id, and node visit order is seeded-shuffled, so results are
reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .embedding import TransDModel, project, score_f
from .errors import DataError
from .graph_store import EntityKind, EntityRef, KnowledgeGraph, RelationType


@dataclass(frozen=True)
class PredictedLink:
    """A candidate fact ranked by embedding distance (smaller = more plausible)."""

    head: EntityRef
    tail: EntityRef
    relation: RelationType
    distance: float
    percentile: float


def predict_links(
    model: TransDModel,
    graph: KnowledgeGraph,
    relation: RelationType,
    heads: Sequence[EntityRef],
    tails: Sequence[EntityRef],
    percentile: float = 2.0,
) -> list[PredictedLink]:
    """Per head, the unobserved tails within the lowest ``percentile`` percent
    of embedding distances.

    Exactly max(1, floor(percentile/100 * len(tails))) predictions are
    returned per head, drawn from the candidates not already in the graph.
    """
    if not heads or not tails:
        raise DataError("head and tail sets must be nonempty")
    ri = model.relation_row(relation)
    rel_value = model.rel_value[ri]
    rel_proj = model.rel_proj[ri]

    tail_rows = np.array([model.entity_row(t) for t in tails], dtype=np.int64)
    t_perp = project(model.ent_value[tail_rows], model.ent_proj[tail_rows], rel_proj)

    count = max(1, int(percentile / 100.0 * len(tails)))
    out: list[PredictedLink] = []
    for head in heads:
        hi = model.entity_row(head)
        h_perp = project(model.ent_value[hi], model.ent_proj[hi], rel_proj)
        distances = -score_f(h_perp, rel_value, t_perp)
        candidates = [
            (float(distances[j]), tails[j].id, tails[j])
            for j in range(len(tails))
            if not graph.has_fact(head, relation, tails[j])
        ]
        candidates.sort(key=lambda c: (c[0], c[1]))
        chosen = candidates[:count]
        for rank, (dist, _, tail) in enumerate(chosen):
            out.append(
                PredictedLink(
                    head=head,
                    tail=tail,
                    relation=relation,
                    distance=dist,
                    percentile=100.0 * (rank + 1) / max(len(candidates), 1),
                )
            )
    return out


# -- community detection ---------------------------------------------------------


@dataclass(frozen=True)
class Partition:
    """Total map entity -> community id, ids dense from 0."""

    membership: dict[EntityRef, int]

    @property
    def community_count(self) -> int:
        return len(set(self.membership.values())) if self.membership else 0

    def communities(self) -> dict[int, set[EntityRef]]:
        out: dict[int, set[EntityRef]] = {}
        for ref, cid in self.membership.items():
            out.setdefault(cid, set()).add(ref)
        return out


def _simple_graph(graph: KnowledgeGraph) -> tuple[list[EntityRef], dict[EntityRef, set[EntityRef]]]:
    nodes = list(graph.entities())
    adjacency: dict[EntityRef, set[EntityRef]] = {n: set() for n in nodes}
    for fact in graph.facts:
        if fact.head == fact.tail:
            continue
        adjacency[fact.head].add(fact.tail)
        adjacency[fact.tail].add(fact.head)
    return nodes, adjacency


def modularity(graph: KnowledgeGraph, partition: Partition) -> float:
    """Q = sum_c (e_c / E - (d_c / 2E)^2) on the collapsed undirected graph.

    Edgeless graphs score 0 by convention.
    """
    nodes, adjacency = _simple_graph(graph)
    for node in nodes:
        if node not in partition.membership:
            raise DataError(f"partition does not cover {node}")
    total_edges = sum(len(neigh) for neigh in adjacency.values()) // 2
    if total_edges == 0:
        return 0.0
    intra: dict[int, int] = {}
    degree: dict[int, int] = {}
    for node in nodes:
        cid = partition.membership[node]
        degree[cid] = degree.get(cid, 0) + len(adjacency[node])
        for other in adjacency[node]:
            if partition.membership[other] == cid:
                intra[cid] = intra.get(cid, 0) + 1
    q = 0.0
    for cid in degree:
        e_c = intra.get(cid, 0) / 2  # each intra edge counted from both ends
        q += e_c / total_edges - (degree[cid] / (2.0 * total_edges)) ** 2
    return q


class _Aggregate:
    """Weighted undirected graph over integer nodes used between levels."""

    def __init__(self, weights: dict[tuple[int, int], float], loops: dict[int, float], count: int):
        self.count = count
        self.loops = loops
        self.adj: dict[int, dict[int, float]] = {i: {} for i in range(count)}
        for (a, b), w in weights.items():
            self.adj[a][b] = self.adj[a].get(b, 0.0) + w
            self.adj[b][a] = self.adj[b].get(a, 0.0) + w
        self.degree = {
            i: sum(self.adj[i].values()) + 2.0 * loops.get(i, 0.0) for i in range(count)
        }
        self.total = (sum(self.degree.values())) / 2.0


def _one_level(
    agg: _Aggregate, rng: np.random.Generator, initial: list[int] | None = None
) -> tuple[list[int], bool]:
    """Local-move phase; returns node communities and whether anything moved.

    A node moves only when the best candidate community strictly beats
    staying; equal-gain candidates resolve to the lowest community id.
    """
    community = list(initial) if initial is not None else list(range(agg.count))
    comm_degree: dict[int, float] = {}
    for node in range(agg.count):
        cid = community[node]
        comm_degree[cid] = comm_degree.get(cid, 0.0) + agg.degree[node]
    two_m = 2.0 * agg.total
    moved_any = False
    if two_m == 0:
        return community, False
    improved = True
    while improved:
        improved = False
        order = rng.permutation(agg.count)
        for node in order:
            node = int(node)
            old = community[node]
            k_i = agg.degree[node]
            links: dict[int, float] = {}
            for neigh, w in agg.adj[node].items():
                links[community[neigh]] = links.get(community[neigh], 0.0) + w
            comm_degree[old] -= k_i
            best_comm = old
            best_gain = links.get(old, 0.0) - comm_degree[old] * k_i / two_m
            for cid in sorted(links):
                if cid == old:
                    continue
                gain = links[cid] - comm_degree.get(cid, 0.0) * k_i / two_m
                if gain > best_gain:
                    best_gain = gain
                    best_comm = cid
            comm_degree[best_comm] = comm_degree.get(best_comm, 0.0) + k_i
            if best_comm != old:
                community[node] = best_comm
                improved = True
                moved_any = True
    return community, moved_any


def _renumber(labels: list[int]) -> tuple[list[int], int]:
    mapping: dict[int, int] = {}
    out = []
    for label in labels:
        if label not in mapping:
            mapping[label] = len(mapping)
        out.append(mapping[label])
    return out, len(mapping)


def _aggregate_level(agg: _Aggregate, local: list[int], n_comms: int) -> _Aggregate:
    new_weights: dict[tuple[int, int], float] = {}
    new_loops: dict[int, float] = {}
    for i in range(agg.count):
        ci = local[i]
        new_loops[ci] = new_loops.get(ci, 0.0) + agg.loops.get(i, 0.0)
        for j, w in agg.adj[i].items():
            cj = local[j]
            if ci == cj:
                if i < j:
                    new_loops[ci] = new_loops.get(ci, 0.0) + w
            elif ci < cj:
                key = (ci, cj)
                new_weights[key] = new_weights.get(key, 0.0) + w
    return _Aggregate(new_weights, new_loops, n_comms)


def louvain(graph: KnowledgeGraph, seed: int = 0) -> tuple[Partition, list[float]]:
    """Two-phase modularity maximization; returns the partition over the
    original entities and the modularity after each aggregation level.

    After the aggregation levels converge, one more local-move sweep runs on
    the original graph so that the returned partition is node-level locally
    optimal; the sweep is a no-op when the partition is already stable.
    """
    nodes, adjacency = _simple_graph(graph)
    if not nodes:
        raise DataError("graph is empty")
    index = {node: i for i, node in enumerate(nodes)}
    weights: dict[tuple[int, int], float] = {}
    for node in nodes:
        a = index[node]
        for other in adjacency[node]:
            b = index[other]
            if a < b:
                weights[(a, b)] = 1.0
    base = _Aggregate(weights, {}, len(nodes))
    agg = base
    rng = np.random.default_rng(seed)

    def flat_q(labels: list[int]) -> float:
        return modularity(graph, Partition({node: labels[index[node]] for node in nodes}))

    node_community = list(range(len(nodes)))
    trace: list[float] = []
    while True:
        local, _ = _one_level(agg, rng)
        local, n_comms = _renumber(local)
        node_community = [local[c] for c in node_community]
        trace.append(flat_q(node_community))
        if n_comms == agg.count:
            break
        agg = _aggregate_level(agg, local, n_comms)

    refined, moved = _one_level(base, rng, initial=node_community)
    if moved:
        node_community, _ = _renumber(refined)
        trace.append(flat_q(node_community))

    # Dense ids ordered by first appearance over the entity iteration order.
    final, _ = _renumber(node_community)
    membership = {node: final[i] for i, node in enumerate(nodes)}
    return Partition(membership), trace


@dataclass(frozen=True)
class CommunityRow:
    """Per-community tweet/user tallies and member topic ids."""

    community: int
    tweets: int
    users: int
    topics: tuple[str, ...]


def community_report(partition: Partition, graph: KnowledgeGraph) -> list[CommunityRow]:
    """Table of tweet/user counts and topic members per community."""
    rows: dict[int, dict[str, list]] = {}
    for ref, cid in partition.membership.items():
        entry = rows.setdefault(cid, {"tweets": [], "users": [], "topics": []})
        if ref.kind is EntityKind.TWEET:
            entry["tweets"].append(ref.id)
        elif ref.kind is EntityKind.USER:
            entry["users"].append(ref.id)
        elif ref.kind is EntityKind.TOPIC:
            entry["topics"].append(ref.id)
    return [
        CommunityRow(
            community=cid,
            tweets=len(rows[cid]["tweets"]),
            users=len(rows[cid]["users"]),
            topics=tuple(sorted(rows[cid]["topics"])),
        )
        for cid in sorted(rows)
    ]
