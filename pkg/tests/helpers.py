"""Shared test utilities: random embedding fixtures and the FD gradient oracle."""

from __future__ import annotations

import numpy as np

from covkg.embedding import (
    EmbeddingParams,
    batch_gradients,
    batch_loss,
    focus_alpha,
    init_model,
    score_g,
    _forward,
)
from covkg.graph_store import EntityKind, EntityRef, Fact, KnowledgeGraph, RelationType

# Relations used when synthesizing small graphs; one weighted, two not.
_SYNTH_RELATIONS = (
    RelationType.HAS_CHANGEPOINT,   # Topic -> Date
    RelationType.OCCURRED_ON,       # Event -> Date
    RelationType.ASSOCIATED_WITH,   # Keyword -> Topic (weighted)
)


def synth_graph(n_facts: int, seed: int, n_topics: int = 6, n_dates: int = 8,
                n_keywords: int = 5, n_events: int = 4) -> KnowledgeGraph:
    """Random mixed-relation graph aiming for ``n_facts`` distinct facts.

    Duplicate draws collapse, so the attempt budget is capped; with enough
    possible triples the target count is reached exactly.
    """
    rng = np.random.default_rng(seed)
    g = KnowledgeGraph()
    topics = [EntityRef(EntityKind.TOPIC, str(i)) for i in range(n_topics)]
    dates = [EntityRef(EntityKind.DATE, f"2020-{3 + i // 28:02d}-{i % 28 + 1:02d}")
             for i in range(n_dates)]
    keywords = [EntityRef(EntityKind.KEYWORD, f"kw{i}") for i in range(n_keywords)]
    events = [EntityRef(EntityKind.EVENT, f"ev{i}") for i in range(n_events)]
    for ref in topics + dates + keywords + events:
        g.add_entity(ref)
    # One fact per relation type up front so every synthesized graph carries
    # all three relations regardless of the random draws.
    g.add_fact(Fact(topics[0], dates[0], RelationType.HAS_CHANGEPOINT))
    g.add_fact(Fact(events[0], dates[0], RelationType.OCCURRED_ON))
    g.add_fact(Fact(keywords[0], topics[0], RelationType.ASSOCIATED_WITH, 0.5))
    attempts = 0
    while g.fact_count() < n_facts and attempts < 60 * n_facts:
        attempts += 1
        relation = _SYNTH_RELATIONS[int(rng.integers(len(_SYNTH_RELATIONS)))]
        if relation is RelationType.HAS_CHANGEPOINT:
            head = topics[int(rng.integers(n_topics))]
            tail = dates[int(rng.integers(n_dates))]
            weight = None
        elif relation is RelationType.OCCURRED_ON:
            head = events[int(rng.integers(n_events))]
            tail = dates[int(rng.integers(n_dates))]
            weight = None
        else:
            head = keywords[int(rng.integers(n_keywords))]
            tail = topics[int(rng.integers(n_topics))]
            weight = round(float(rng.random()), 6)
        if not g.has_fact(head, relation, tail):
            g.add_fact(Fact(head, tail, relation, weight))
    return g


def random_pairs(model, graph: KnowledgeGraph, rng: np.random.Generator, count: int):
    """Fixed positive/negative index arrays for loss evaluation (no resampling).

    Facts whose corruptions are exhausted by the graph are skipped and a fresh
    positive is drawn, matching the trainer's skip semantics.
    """
    facts = list(graph.facts)
    kinds = {}
    for ref in graph.entities():
        kinds.setdefault(ref.kind, []).append(ref)

    def arrays(fact_list):
        h = np.array([model.entity_index[str(f.head)] for f in fact_list])
        t = np.array([model.entity_index[str(f.tail)] for f in fact_list])
        r = np.array([model.relation_index[f.relation.value] for f in fact_list])
        w = np.array([1.0 if f.weight is None else f.weight for f in fact_list])
        return h, t, r, w

    positives, negatives = [], []
    budget = 500 * count
    while len(positives) < count and budget > 0:
        budget -= 1
        fact = facts[int(rng.integers(len(facts)))]
        for _ in range(100):
            if rng.random() < 0.5:
                head = kinds[fact.head.kind][int(rng.integers(len(kinds[fact.head.kind])))]
                candidate = (head, fact.relation, fact.tail)
            else:
                tail = kinds[fact.tail.kind][int(rng.integers(len(kinds[fact.tail.kind])))]
                candidate = (fact.head, fact.relation, tail)
            if not graph.has_fact(*candidate):
                positives.append(fact)
                negatives.append(Fact(candidate[0], candidate[2], candidate[1], fact.weight))
                break
    if len(positives) < count:
        raise RuntimeError("could not assemble pairs; graph too dense for this seed")
    return arrays(positives), arrays(negatives)


def activate_margin(model, pos, neg, slack: float = 0.5) -> None:
    """Raise the margin until every hinge term is strictly active.

    Keeps finite differences away from the hinge kink so the FD oracle is
    valid everywhere.
    """
    beta = model.params.beta
    _, f_pos = _forward(model, pos[0], pos[1], pos[2])
    _, f_neg = _forward(model, neg[0], neg[1], neg[2])
    h_pos = focus_alpha(pos[3], beta, True) * score_g(f_pos)
    h_neg = focus_alpha(neg[3], beta, False) * score_g(f_neg)
    needed = float(np.max(h_pos - h_neg)) + slack
    model.params = EmbeddingParams(
        entity_dim=model.params.entity_dim,
        relation_dim=model.params.relation_dim,
        margin=max(model.params.margin, needed),
        beta=beta,
        learning_rate=model.params.learning_rate,
        epochs=model.params.epochs,
        batch_size=model.params.batch_size,
        seed=model.params.seed,
        train_fraction=model.params.train_fraction,
    )


def max_gradient_error(model, pos, neg, eps: float = 1e-5, use_focuse: bool = True) -> float:
    """Max relative disagreement between analytic gradients and central FD.

    The denominator floors at 1e-6: components below that are compared at the
    FD noise floor (~1e-11 absolute) rather than amplified into fake relative
    errors.
    """
    _, grads = batch_gradients(model, pos, neg, use_focuse)
    tables = [model.ent_value, model.ent_proj, model.rel_value, model.rel_proj]
    worst = 0.0
    for table, grad in zip(tables, grads):
        it = np.nditer(table, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            orig = table[idx]
            table[idx] = orig + eps
            up = batch_loss(model, pos, neg, use_focuse)
            table[idx] = orig - eps
            down = batch_loss(model, pos, neg, use_focuse)
            table[idx] = orig
            fd = (up - down) / (2.0 * eps)
            err = abs(fd - grad[idx]) / max(abs(fd), abs(grad[idx]), 1e-6)
            worst = max(worst, err)
    return worst


def random_model_with_pairs(seed: int, entity_dim: int = 4, relation_dim: int = 4,
                            n_pairs: int = 8, n_facts: int = 24,
                            graph_kwargs: dict | None = None):
    """Random small model plus strictly-active positive/negative pairs."""
    rng = np.random.default_rng(seed)
    graph = synth_graph(n_facts, seed + 1000, **(graph_kwargs or {}))
    params = EmbeddingParams(entity_dim=entity_dim, relation_dim=relation_dim,
                             margin=1.0, beta=float(rng.uniform(0.1, 0.9)),
                             seed=seed)
    model = init_model(graph, params)
    pos, neg = random_pairs(model, graph, rng, n_pairs)
    activate_margin(model, pos, neg)
    return model, pos, neg


def optimal_partition_cost(values, penalty):
    """Independent O(n^2) optimal-partitioning DP oracle: no pruning, every
    previous boundary considered.

    It evaluates segment costs through the same prefix-sum primitive as the
    implementation so agreement can be asserted at zero tolerance; the
    primitive itself is checked against the raw definition separately.
    """
    from covkg.timeseries_cpd import _prefix_sums, _segment_cost

    y = np.asarray(values, dtype=np.float64)
    n = len(y)
    s1, s2 = _prefix_sums(y)
    best = [0.0] * (n + 1)
    best[0] = -penalty
    for t in range(1, n + 1):
        best[t] = min(best[s] + _segment_cost(s1, s2, s, t) + penalty for s in range(t))
    return best[n]
