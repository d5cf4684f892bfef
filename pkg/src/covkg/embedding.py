"""Translational graph embedding with an edge-weight modulation layer.

Entities and relations each carry a value vector and a projection vector.  A
triple (h, t, r) is scored by projecting both entities into the relation space
through rank-one-plus-identity mapping matrices,

    M_rh = r_p h_p^T + I,    h_perp = M_rh h,    (t analogous)

then taking f = -||h_perp + r - t_perp||^2, squashing through a softplus
g = ln(1 + e^f) > 0, and scaling by a modulating factor alpha derived from the
edge weight w and the structural-influence parameter beta:

    alpha = beta + (1 - w)(1 - beta)   for observed triples,
    alpha = beta + w(1 - beta)         for corrupted triples.

With beta = 1 the weights are ignored and training reduces exactly to the
plain translational model.  Training minimizes the margin hinge
sum [gamma + h(neg) - h(pos)]_+ by minibatch SGD with analytic gradients; all
randomness flows from one seed, so serial training is bit-reproducible.

The mapping matrices are never materialized: M e = r_p (e_p . e) + pad(e),
where pad truncates or zero-extends e to the relation dimension.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import expit

from .errors import DataError
from .graph_store import (
    EntityRef,
    Fact,
    KnowledgeGraph,
    RelationType,
)

logger = logging.getLogger(__name__)

MODEL_MAGIC = b"covkg-transd v1"

_MAX_CORRUPTION_TRIES = 100


@dataclass(frozen=True)
class EmbeddingParams:
    """Hyperparameters for model shape and training schedule."""

    entity_dim: int = 64
    relation_dim: int = 64
    margin: float = 1.0
    beta: float = 0.5
    learning_rate: float = 0.01
    epochs: int = 15
    batch_size: int = 1024
    seed: int = 0
    train_fraction: float = 0.95

    def __post_init__(self) -> None:
        if self.entity_dim < 1 or self.relation_dim < 1:
            raise DataError("embedding dimensions must be >= 1")
        if self.margin <= 0:
            raise DataError("margin must be positive")
        if not (0.0 <= self.beta <= 1.0):
            raise DataError("beta must lie in [0, 1]")
        if self.learning_rate <= 0:
            raise DataError("learning rate must be positive")
        if not (0.0 < self.train_fraction < 1.0):
            raise DataError("train fraction must lie in (0, 1)")


@dataclass
class TransDModel:
    """Embedding tables plus the id maps tying rows to graph entities."""

    params: EmbeddingParams
    entity_ids: tuple[str, ...]
    relation_ids: tuple[str, ...]
    ent_value: np.ndarray
    ent_proj: np.ndarray
    rel_value: np.ndarray
    rel_proj: np.ndarray
    entity_index: dict[str, int] = field(init=False, repr=False)
    relation_index: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self.entity_index = {e: i for i, e in enumerate(self.entity_ids)}
        self.relation_index = {r: i for i, r in enumerate(self.relation_ids)}

    def entity_row(self, ref: EntityRef) -> int:
        try:
            return self.entity_index[str(ref)]
        except KeyError:
            raise DataError(f"entity {ref} unknown to the model") from None

    def relation_row(self, relation: RelationType) -> int:
        try:
            return self.relation_index[relation.value]
        except KeyError:
            raise DataError(f"relation {relation.value} unknown to the model") from None


def init_model(graph: KnowledgeGraph, params: EmbeddingParams) -> TransDModel:
    """Seeded uniform init; value rows are drawn in [-6/sqrt(d), 6/sqrt(d)]
    and then L2-normalized.

    Projection rows are drawn in [-sqrt(3/d), sqrt(3/d)] so their expected norm
    is 1, the same scale the normalized value rows start at.  A wider
    projection init (norm ~3.5) pushes initial distances deep into the
    saturated tail of the softplus and stalls training.
    """
    entity_ids = tuple(str(ref) for ref in graph.entities())
    relation_ids = tuple(r.value for r in RelationType if graph.facts_with(r))
    if not entity_ids or not relation_ids:
        raise DataError("graph has no entities or no facts to embed")
    rng = np.random.default_rng(params.seed)
    n, m = params.entity_dim, params.relation_dim
    bound_e = 6.0 / np.sqrt(n)
    bound_r = 6.0 / np.sqrt(m)
    ent_value = rng.uniform(-bound_e, bound_e, size=(len(entity_ids), n))
    ent_proj = rng.uniform(-np.sqrt(3.0 / n), np.sqrt(3.0 / n), size=(len(entity_ids), n))
    rel_value = rng.uniform(-bound_r, bound_r, size=(len(relation_ids), m))
    rel_proj = rng.uniform(-np.sqrt(3.0 / m), np.sqrt(3.0 / m), size=(len(relation_ids), m))
    ent_value /= np.linalg.norm(ent_value, axis=1, keepdims=True)
    rel_value /= np.linalg.norm(rel_value, axis=1, keepdims=True)
    return TransDModel(
        params=params,
        entity_ids=entity_ids,
        relation_ids=relation_ids,
        ent_value=ent_value,
        ent_proj=ent_proj,
        rel_value=rel_value,
        rel_proj=rel_proj,
    )


# -- scoring pieces -------------------------------------------------------------


def _pad_columns(vectors: np.ndarray, m: int) -> np.ndarray:
    """Truncate or zero-extend row vectors to m columns (the identity block)."""
    n = vectors.shape[-1]
    if m == n:
        return vectors
    if m < n:
        return vectors[..., :m]
    pad_width = [(0, 0)] * (vectors.ndim - 1) + [(0, m - n)]
    return np.pad(vectors, pad_width)


def project(value: np.ndarray, proj: np.ndarray, rel_proj: np.ndarray) -> np.ndarray:
    """Project entity rows into the relation space without materializing M.

    Accepts single vectors or stacked rows; shapes must agree row-wise.
    """
    dot = np.sum(proj * value, axis=-1, keepdims=True)
    return rel_proj * dot + _pad_columns(value, rel_proj.shape[-1])


def score_f(h_perp: np.ndarray, rel_value: np.ndarray, t_perp: np.ndarray) -> np.ndarray:
    """Negative squared distance; 0 for a perfectly translated fact, else < 0."""
    d = h_perp + rel_value - t_perp
    return -np.sum(d * d, axis=-1)


def score_g(f: np.ndarray) -> np.ndarray:
    """Softplus ln(1 + e^f), overflow-safe for large |f|."""
    return np.logaddexp(0.0, f)


def focus_alpha(w, beta: float, is_positive: bool):
    """Edge-weight modulating factor; unweighted relations pass w = 1."""
    w = np.asarray(w, dtype=np.float64)
    if is_positive:
        return beta + (1.0 - w) * (1.0 - beta)
    return beta + w * (1.0 - beta)


def score_h(
    model: TransDModel,
    head: EntityRef,
    relation: RelationType,
    tail: EntityRef,
    weight: float | None = None,
    is_positive: bool = True,
) -> float:
    """Full modulated score alpha * g for one triple."""
    hi = model.entity_row(head)
    ti = model.entity_row(tail)
    ri = model.relation_row(relation)
    h_perp = project(model.ent_value[hi], model.ent_proj[hi], model.rel_proj[ri])
    t_perp = project(model.ent_value[ti], model.ent_proj[ti], model.rel_proj[ri])
    g = score_g(score_f(h_perp, model.rel_value[ri], t_perp))
    w = 1.0 if weight is None else weight
    return float(focus_alpha(w, model.params.beta, is_positive) * g)


def triple_distance(
    model: TransDModel, head: EntityRef, relation: RelationType, tail: EntityRef
) -> float:
    """||h_perp + r - t_perp||^2, the quantity link prediction ranks by."""
    hi = model.entity_row(head)
    ti = model.entity_row(tail)
    ri = model.relation_row(relation)
    h_perp = project(model.ent_value[hi], model.ent_proj[hi], model.rel_proj[ri])
    t_perp = project(model.ent_value[ti], model.ent_proj[ti], model.rel_proj[ri])
    return float(-score_f(h_perp, model.rel_value[ri], t_perp))


# -- negative sampling ----------------------------------------------------------


@dataclass(frozen=True)
class SamplerStats:
    """Per-relation mean tails-per-head and heads-per-tail."""

    tph: dict[RelationType, float]
    hpt: dict[RelationType, float]

    def head_corruption_probability(self, relation: RelationType) -> float:
        t, h = self.tph[relation], self.hpt[relation]
        return t / (t + h)


def sampler_stats(graph: KnowledgeGraph) -> SamplerStats:
    tph: dict[RelationType, float] = {}
    hpt: dict[RelationType, float] = {}
    for relation in RelationType:
        facts = graph.facts_with(relation)
        if not facts:
            continue
        heads = {f.head for f in facts}
        tails = {f.tail for f in facts}
        tph[relation] = len(facts) / len(heads)
        hpt[relation] = len(facts) / len(tails)
    return SamplerStats(tph, hpt)


def sample_negative(
    fact: Fact,
    graph: KnowledgeGraph,
    stats: SamplerStats,
    rng: np.random.Generator,
    entity_pool: dict | None = None,
) -> Fact | None:
    """Corrupt head or tail into a triple absent from the graph.

    The side is drawn once (head with probability tph / (tph + hpt)); the
    replacement is uniform over entities of the corrupted side's kind,
    redrawn until the triple is unobserved (at most 100 tries, then None).
    The corrupted triple inherits the positive's weight.
    """
    corrupt_head = rng.random() < stats.head_corruption_probability(fact.relation)
    kind = fact.head.kind if corrupt_head else fact.tail.kind
    if entity_pool is not None and kind in entity_pool:
        pool = entity_pool[kind]
    else:
        pool = list(graph.entities(kind))
    if len(pool) < 2:
        raise DataError(f"need >= 2 entities of kind {kind.value} to corrupt")
    for _ in range(_MAX_CORRUPTION_TRIES):
        replacement = pool[int(rng.integers(len(pool)))]
        if corrupt_head:
            head, tail = replacement, fact.tail
        else:
            head, tail = fact.head, replacement
        if not graph.has_fact(head, fact.relation, tail):
            return Fact(head, tail, fact.relation, fact.weight)
    logger.warning("no valid corruption found for %s after %d tries",
                   fact.key, _MAX_CORRUPTION_TRIES)
    return None


# -- loss and gradients ----------------------------------------------------------


def _gather(model: TransDModel, h_idx, t_idx, r_idx):
    return (
        model.ent_value[h_idx],
        model.ent_proj[h_idx],
        model.ent_value[t_idx],
        model.ent_proj[t_idx],
        model.rel_value[r_idx],
        model.rel_proj[r_idx],
    )


def _forward(model: TransDModel, h_idx, t_idx, r_idx):
    hv, hp, tv, tp, rv, rp = _gather(model, h_idx, t_idx, r_idx)
    h_perp = project(hv, hp, rp)
    t_perp = project(tv, tp, rp)
    d = h_perp + rv - t_perp
    f = -np.sum(d * d, axis=-1)
    return d, f


def batch_loss(
    model: TransDModel,
    pos: tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray],
    neg: tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray],
    use_focuse: bool = True,
) -> float:
    """Summed hinge loss over (positive, negative) index/weight arrays."""
    gamma, beta = model.params.margin, model.params.beta
    _, f_pos = _forward(model, pos[0], pos[1], pos[2])
    _, f_neg = _forward(model, neg[0], neg[1], neg[2])
    g_pos, g_neg = score_g(f_pos), score_g(f_neg)
    if use_focuse:
        h_pos = focus_alpha(pos[3], beta, True) * g_pos
        h_neg = focus_alpha(neg[3], beta, False) * g_neg
    else:
        h_pos, h_neg = g_pos, g_neg
    return float(np.sum(np.maximum(gamma + h_neg - h_pos, 0.0)))


def _accumulate(
    model: TransDModel,
    grads: tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray],
    idx: tuple[np.ndarray, np.ndarray, np.ndarray],
    d: np.ndarray,
    coeff: np.ndarray,
) -> None:
    """Scatter-add the gradient of coeff * f(triple) into the parameter grads."""
    g_ev, g_ep, g_rv, g_rp = grads
    h_idx, t_idx, r_idx = idx
    hv, hp, tv, tp, _, rp = _gather(model, h_idx, t_idx, r_idx)
    n = model.params.entity_dim
    m = model.params.relation_dim
    u = coeff[:, None] * (-2.0 * d)  # d(coeff * f)/dd
    rp_dot_u = np.sum(rp * u, axis=-1, keepdims=True)
    u_back = _pad_columns(u, n)  # transpose of the identity block

    np.add.at(g_ev, h_idx, hp * rp_dot_u + u_back)
    np.add.at(g_ep, h_idx, hv * rp_dot_u)
    np.add.at(g_ev, t_idx, -(tp * rp_dot_u + u_back))
    np.add.at(g_ep, t_idx, -(tv * rp_dot_u))
    np.add.at(g_rv, r_idx, u)
    ph = np.sum(hp * hv, axis=-1, keepdims=True)
    pt = np.sum(tp * tv, axis=-1, keepdims=True)
    np.add.at(g_rp, r_idx, u * (ph - pt))


def batch_gradients(
    model: TransDModel,
    pos: tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray],
    neg: tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray],
    use_focuse: bool = True,
) -> tuple[float, tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]]:
    """Summed hinge loss and its analytic gradient w.r.t. every parameter table.

    The sum (not mean) form keeps each entity's gradient magnitude independent
    of the batch size, matching the training objective as stated.
    """
    gamma, beta = model.params.margin, model.params.beta
    d_pos, f_pos = _forward(model, pos[0], pos[1], pos[2])
    d_neg, f_neg = _forward(model, neg[0], neg[1], neg[2])
    g_pos, g_neg = score_g(f_pos), score_g(f_neg)
    if use_focuse:
        a_pos = focus_alpha(pos[3], beta, True)
        a_neg = focus_alpha(neg[3], beta, False)
    else:
        a_pos = np.ones_like(g_pos)
        a_neg = np.ones_like(g_neg)
    activation = gamma + a_neg * g_neg - a_pos * g_pos
    active = activation > 0.0
    loss = float(np.sum(np.maximum(activation, 0.0)))

    sig_pos = expit(f_pos)  # d softplus / d f, overflow-safe
    sig_neg = expit(f_neg)
    coeff_pos = np.where(active, -a_pos * sig_pos, 0.0)
    coeff_neg = np.where(active, a_neg * sig_neg, 0.0)

    grads = (
        np.zeros_like(model.ent_value),
        np.zeros_like(model.ent_proj),
        np.zeros_like(model.rel_value),
        np.zeros_like(model.rel_proj),
    )
    _accumulate(model, grads, (pos[0], pos[1], pos[2]), d_pos, coeff_pos)
    _accumulate(model, grads, (neg[0], neg[1], neg[2]), d_neg, coeff_neg)
    return loss, grads


def _clip_value_norms(table: np.ndarray) -> None:
    norms = np.linalg.norm(table, axis=1)
    over = norms > 1.0
    if over.any():
        table[over] /= norms[over, None]


# -- training ---------------------------------------------------------------------


@dataclass(frozen=True)
class EpochTrace:
    epoch: int
    train_loss: float
    val_loss: float


def _facts_to_arrays(model: TransDModel, facts: Sequence[Fact]):
    h = np.array([model.entity_index[str(f.head)] for f in facts], dtype=np.int64)
    t = np.array([model.entity_index[str(f.tail)] for f in facts], dtype=np.int64)
    r = np.array([model.relation_index[f.relation.value] for f in facts], dtype=np.int64)
    w = np.array([1.0 if f.weight is None else f.weight for f in facts], dtype=np.float64)
    return h, t, r, w


def train(
    graph: KnowledgeGraph,
    params: EmbeddingParams,
    use_focuse: bool = True,
) -> tuple[TransDModel, list[EpochTrace]]:
    """Train on a 95/5 (by default) split of the graph's facts.

    Per epoch the training facts are reshuffled and walked in minibatches; one
    negative is sampled per positive.  The update is SGD on the summed batch
    hinge loss; after each update, value vectors with norm above 1 are rescaled
    to norm 1.  Reported losses are per-pair means so epochs of different batch
    layouts stay comparable; validation loss is reported per epoch (no early
    stopping).  With use_focuse=False the modulating factor is skipped
    entirely, giving the plain translational trainer.
    """
    model = init_model(graph, params)
    facts = list(graph.facts)
    if not facts:
        raise DataError("graph has no facts")
    rng = np.random.default_rng(params.seed + 1)
    order = rng.permutation(len(facts))
    n_train = int(len(facts) * params.train_fraction)
    if n_train < 1:
        raise DataError("training split is empty")
    train_facts = [facts[i] for i in order[:n_train]]
    val_facts = [facts[i] for i in order[n_train:]]

    stats = sampler_stats(graph)
    entity_pool = {
        kind: list(graph.entities(kind))
        for kind in {f.head.kind for f in facts} | {f.tail.kind for f in facts}
    }

    def sample_pairs(fact_list, pair_rng):
        negatives: list[Fact] = []
        positives: list[Fact] = []
        for fact in fact_list:
            neg = sample_negative(fact, graph, stats, pair_rng, entity_pool)
            if neg is not None:
                positives.append(fact)
                negatives.append(neg)
        return positives, negatives

    trace: list[EpochTrace] = []
    for epoch in range(params.epochs):
        perm = rng.permutation(n_train)
        epoch_losses: list[float] = []
        epoch_sizes: list[int] = []
        for start in range(0, n_train, params.batch_size):
            batch_facts = [train_facts[i] for i in perm[start : start + params.batch_size]]
            positives, negatives = sample_pairs(batch_facts, rng)
            if not positives:
                continue
            pos = _facts_to_arrays(model, positives)
            neg = _facts_to_arrays(model, negatives)
            loss, grads = batch_gradients(model, pos, neg, use_focuse)
            lr = params.learning_rate
            model.ent_value -= lr * grads[0]
            model.ent_proj -= lr * grads[1]
            model.rel_value -= lr * grads[2]
            model.rel_proj -= lr * grads[3]
            _clip_value_norms(model.ent_value)
            _clip_value_norms(model.rel_value)
            epoch_losses.append(loss)
            epoch_sizes.append(len(positives))
        train_loss = (
            float(sum(epoch_losses) / sum(epoch_sizes)) if epoch_losses else 0.0
        )
        val_rng = np.random.default_rng([params.seed, epoch, 7])
        val_pos, val_neg = sample_pairs(val_facts, val_rng)
        if val_pos:
            val_loss = batch_loss(
                model, _facts_to_arrays(model, val_pos), _facts_to_arrays(model, val_neg), use_focuse
            ) / len(val_pos)
        else:
            val_loss = 0.0
        trace.append(EpochTrace(epoch=epoch, train_loss=train_loss, val_loss=val_loss))
    return model, trace


# -- persistence -------------------------------------------------------------------


def save_model(model: TransDModel, path) -> None:
    """Magic, JSON header (params, counts, id tables), then the four tables as
    little-endian float64: entities then relations, value then projection."""
    header = {
        "params": {
            "entity_dim": model.params.entity_dim,
            "relation_dim": model.params.relation_dim,
            "margin": model.params.margin,
            "beta": model.params.beta,
            "learning_rate": model.params.learning_rate,
            "epochs": model.params.epochs,
            "batch_size": model.params.batch_size,
            "seed": model.params.seed,
            "train_fraction": model.params.train_fraction,
        },
        "entity_count": len(model.entity_ids),
        "relation_count": len(model.relation_ids),
        "entities": list(model.entity_ids),
        "relations": list(model.relation_ids),
    }
    with open(path, "wb") as fh:
        fh.write(MODEL_MAGIC + b"\n")
        fh.write(json.dumps(header, sort_keys=True).encode("utf-8") + b"\n")
        for table in (model.ent_value, model.ent_proj, model.rel_value, model.rel_proj):
            fh.write(np.ascontiguousarray(table, dtype="<f8").tobytes())


def load_model(path) -> TransDModel:
    with open(path, "rb") as fh:
        magic = fh.readline().rstrip(b"\n")
        if magic != MODEL_MAGIC:
            raise DataError(f"bad model magic {magic!r}")
        try:
            header = json.loads(fh.readline().decode("utf-8"))
            params = EmbeddingParams(**header["params"])
            entity_ids = tuple(header["entities"])
            relation_ids = tuple(header["relations"])
        except (ValueError, KeyError, TypeError) as exc:
            raise DataError(f"bad model header: {exc}") from exc
        n, m = params.entity_dim, params.relation_dim
        shapes = [
            (len(entity_ids), n),
            (len(entity_ids), n),
            (len(relation_ids), m),
            (len(relation_ids), m),
        ]
        tables = []
        for shape in shapes:
            count = shape[0] * shape[1] * 8
            raw = fh.read(count)
            if len(raw) != count:
                raise DataError("truncated model payload")
            tables.append(np.frombuffer(raw, dtype="<f8").reshape(shape).copy())
    return TransDModel(
        params=params,
        entity_ids=entity_ids,
        relation_ids=relation_ids,
        ent_value=tables[0],
        ent_proj=tables[1],
        rel_value=tables[2],
        rel_proj=tables[3],
    )
