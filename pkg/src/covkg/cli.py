"""Pipeline driver: every stage is a subcommand with file-based handoffs.

Each stage reads its inputs (raw files or upstream artifacts), writes versioned
artifacts into the work directory, and records a manifest (inputs with digests,
parameters, seed, artifact digests).  All randomness flows from the single
seed, and every write is deterministic, so a rerun with an identical manifest
reproduces every artifact byte for byte.

Exit codes: 0 ok, 1 usage error, 2 data error (including a missing upstream
artifact, which names the stage to run first), 3 internal error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import sys
from datetime import date
from pathlib import Path

from . import (
    analysis,
    embedding,
    graph_store,
    kg_builder,
    sentiment as sentiment_mod,
    timeseries_cpd,
    topics as topics_mod,
    tweet_ingest,
    wordvec,
)
from .errors import DataError, StageError

logger = logging.getLogger(__name__)


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # exit 1 on usage problems, not argparse's 2
        raise _UsageError(message)


def _read_config(path: str | None) -> dict[str, str]:
    if not path:
        return {}
    config_path = Path(path)
    if not config_path.exists():
        raise DataError(f"config file {path} does not exist")
    out: dict[str, str] = {}
    for lineno, line in enumerate(config_path.read_text(encoding="utf-8").splitlines(), 1):
        text = line.split("#", 1)[0].strip()
        if not text:
            continue
        key, sep, value = text.partition("=")
        if not sep:
            raise DataError(f"config line {lineno}: expected key=value")
        out[key.strip()] = value.strip()
    return out


class Settings:
    """Flag values override config-file values override defaults."""

    def __init__(self, args: argparse.Namespace):
        self._config = _read_config(getattr(args, "config", None))
        self._args = vars(args)

    def get(self, key: str, default=None, cast=str):
        flag = self._args.get(key)
        if flag is not None:
            return flag
        if key in self._config:
            raw = self._config[key]
            if cast is bool:
                return raw.lower() in ("1", "true", "yes", "on")
            return cast(raw)
        return default

    def require(self, key: str, cast=str):
        value = self.get(key, None, cast)
        if value is None:
            raise DataError(f"required setting {key!r} missing (flag or config)")
        return value

    def workdir(self) -> Path:
        path = Path(self.require("workdir"))
        path.mkdir(parents=True, exist_ok=True)
        return path

    def seed(self) -> int:
        return self.get("seed", 0, int)


def _digest(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_manifest(
    workdir: Path, stage: str, inputs: list[Path], params: dict, seed: int, artifacts: list[Path]
) -> None:
    def label(path: Path) -> str:
        # Workdir-internal artifacts are recorded relative to the workdir so a
        # rerun in a different directory produces an identical manifest.
        try:
            return str(Path(path).resolve().relative_to(workdir.resolve()))
        except ValueError:
            return str(path)

    manifest = {
        "stage": stage,
        "seed": seed,
        "inputs": [{"path": label(p), "sha256": _digest(p)} for p in inputs],
        "params": params,
        "artifacts": [{"name": p.name, "sha256": _digest(p)} for p in artifacts],
    }
    out = workdir / f"{stage}.manifest.json"
    out.write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def _require_artifact(workdir: Path, name: str, stage: str) -> Path:
    path = workdir / name
    if not path.exists():
        raise StageError(f"missing artifact {name!r}; run the '{stage}' stage first", stage)
    return path


def _csv_writer(fh):
    return csv.writer(fh, lineterminator="\n")


# -- stages ------------------------------------------------------------------


def _stage_ingest(settings: Settings) -> list[Path]:
    workdir = settings.workdir()
    tweets_path = Path(settings.require("tweets"))
    keywords_path = Path(settings.require("keywords"))
    with open(tweets_path, "r", encoding="utf-8") as fh:
        tweets, parse_errors = tweet_ingest.parse_tweets(fh)
    keywords = tweet_ingest.load_keywords(keywords_path)

    stopword_sets = [tweet_ingest.default_stopwords()]
    extra = settings.get("stopwords")
    input_paths = [tweets_path, keywords_path]
    if extra:
        for item in str(extra).split(","):
            stopword_sets.append(tweet_ingest.load_stopwords(item.strip()))
            input_paths.append(Path(item.strip()))
    stopwords = set().union(*stopword_sets)
    lemma_map = tweet_ingest.default_lemma_exceptions()

    kept = tweet_ingest.filter_corpus(tweets, keywords)
    cleaned_path = workdir / "cleaned.jsonl"
    with open(cleaned_path, "w", encoding="utf-8") as fh:
        for tweet in kept:
            record = {
                "tweet_id": tweet.tweet_id,
                "created_at": tweet.created_at.isoformat(),
                "user_id": tweet.user_id,
                "text": tweet.text,
                "hashtags": list(tweet.hashtags),
                "mentions": list(tweet.mentions),
                "in_reply_to": tweet.in_reply_to,
                "quoted": tweet.quoted,
                "cleaned_text": tweet_ingest.clean_text(tweet.text, stopwords, lemma_map),
            }
            fh.write(json.dumps(record, sort_keys=True, ensure_ascii=False) + "\n")
    errors_path = workdir / "ingest_errors.txt"
    errors_path.write_text("".join(e + "\n" for e in parse_errors), encoding="utf-8")

    artifacts = [cleaned_path, errors_path]
    _write_manifest(
        workdir, "ingest", input_paths,
        {"parsed": len(tweets), "kept": len(kept), "parse_errors": len(parse_errors)},
        settings.seed(), artifacts,
    )
    return artifacts


def _load_cleaned(workdir: Path) -> list[dict]:
    path = _require_artifact(workdir, "cleaned.jsonl", "ingest")
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                records.append(json.loads(line))
    return records


def _stage_topics(settings: Settings) -> list[Path]:
    workdir = settings.workdir()
    records = _load_cleaned(workdir)
    docs = [r["cleaned_text"] for r in records]
    cap = settings.get("vocab_cap", topics_mod.DEFAULT_VOCAB_CAP, int)
    u = settings.get("topics", topics_mod.DEFAULT_TOPIC_COUNT, int)
    u = min(u, max(1, min(len(docs), cap)))
    iters = settings.get("nmf_iters", 200, int)
    tol = settings.get("nmf_tol", 1e-6, float)
    tau = settings.get("dominance", 0.5, float)
    top_k = settings.get("top_k", topics_mod.DEFAULT_KEYWORDS_PER_TOPIC, int)

    vocab = topics_mod.build_vocabulary(docs, cap)
    if len(vocab) == 0:
        raise DataError("empty vocabulary: no cleaned tokens in the corpus")
    matrix = topics_mod.build_tfidf(docs, vocab)
    u = min(u, min(matrix.shape))
    model, _ = topics_mod.nmf_fit(
        matrix, u, max_iters=iters, tol=tol, seed=settings.seed(), vocabulary=vocab
    )

    vocab_path = workdir / "vocab.txt"
    topics_mod.save_vocabulary(vocab, vocab_path)
    model_path = workdir / "nmf_model.bin"
    topics_mod.save_nmf(model, model_path)

    assignments, skipped = topics_mod.assign_topics(model, tau)
    assign_path = workdir / "assignments.csv"
    with open(assign_path, "w", encoding="utf-8") as fh:
        writer = _csv_writer(fh)
        writer.writerow(["tweet_id", "topic", "weight"])
        for record, members in zip(records, assignments):
            for topic_idx, weight in members:
                writer.writerow([record["tweet_id"], topic_idx, f"{weight:.6f}"])
    unassigned_path = workdir / "unassigned.csv"
    with open(unassigned_path, "w", encoding="utf-8") as fh:
        writer = _csv_writer(fh)
        writer.writerow(["tweet_id"])
        for d in skipped:
            writer.writerow([records[d]["tweet_id"]])

    keywords_path = workdir / "topic_keywords.csv"
    keyword_lists = topics_mod.topic_keywords(model, min(top_k, len(vocab)))
    with open(keywords_path, "w", encoding="utf-8") as fh:
        writer = _csv_writer(fh)
        writer.writerow(["topic", "keyword", "weight"])
        for topic_idx, pairs in enumerate(keyword_lists):
            for keyword, weight in pairs:
                writer.writerow([topic_idx, keyword, f"{weight:.6f}"])

    artifacts = [vocab_path, model_path, assign_path, unassigned_path, keywords_path]
    _write_manifest(
        workdir, "topics", [workdir / "cleaned.jsonl"],
        {"vocab_cap": cap, "topics": u, "nmf_iters": iters, "nmf_tol": tol,
         "dominance": tau, "top_k": top_k},
        settings.seed(), artifacts,
    )
    return artifacts


def _read_assignments(workdir: Path) -> dict[int, list[tuple[int, float]]]:
    path = _require_artifact(workdir, "assignments.csv", "topics")
    out: dict[int, list[tuple[int, float]]] = {}
    with open(path, "r", encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            out.setdefault(int(row["tweet_id"]), []).append(
                (int(row["topic"]), float(row["weight"]))
            )
    return out


def _read_topic_keywords(workdir: Path) -> list[list[tuple[str, float]]]:
    path = _require_artifact(workdir, "topic_keywords.csv", "topics")
    per_topic: dict[int, list[tuple[str, float]]] = {}
    with open(path, "r", encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            per_topic.setdefault(int(row["topic"]), []).append(
                (row["keyword"], float(row["weight"]))
            )
    count = max(per_topic) + 1 if per_topic else 0
    return [per_topic.get(i, []) for i in range(count)]


def _stage_sentiment(settings: Settings) -> list[Path]:
    workdir = settings.workdir()
    records = _load_cleaned(workdir)
    lexicon_path = settings.get("lexicon")
    lexicon = (
        sentiment_mod.load_lexicon(lexicon_path) if lexicon_path else sentiment_mod.demo_lexicon()
    )

    scores_path = workdir / "sentiment.csv"
    with open(scores_path, "w", encoding="utf-8") as fh:
        writer = _csv_writer(fh)
        writer.writerow(["tweet_id", "score"])
        for record in records:
            score = sentiment_mod.score_text(record["text"], lexicon)
            writer.writerow([record["tweet_id"], f"{score:.6f}"])

    links_path = workdir / "keyword_links.csv"
    inputs = [workdir / "cleaned.jsonl"]
    if lexicon_path:
        inputs.append(Path(lexicon_path))
    vectors_path = settings.get("vectors")
    with open(links_path, "w", encoding="utf-8") as fh:
        writer = _csv_writer(fh)
        writer.writerow(["tweet_id", "keyword", "weight", "aspect_sentiment"])
        if vectors_path:
            inputs.append(Path(vectors_path))
            vectors = wordvec.load_vectors(vectors_path)
            assignments = _read_assignments(workdir)
            topic_kw = _read_topic_keywords(workdir)
            inputs.extend([workdir / "assignments.csv", workdir / "topic_keywords.csv"])
            for record in records:
                tweet_id = record["tweet_id"]
                candidates: set[str] = set()
                for topic_idx, _ in assignments.get(tweet_id, ()):  # assigned topics only
                    candidates.update(k for k, _ in topic_kw[topic_idx])
                if not candidates:
                    continue
                link = wordvec.best_keyword_link(record["cleaned_text"], candidates, vectors)
                if link is None:
                    continue
                keyword, weight = link
                aspects = sentiment_mod.aspect_scores(record["text"], [keyword], lexicon)
                aspect = f"{aspects[keyword]:.6f}" if keyword in aspects else ""
                writer.writerow([tweet_id, keyword, f"{weight:.6f}", aspect])

    artifacts = [scores_path, links_path]
    _write_manifest(
        workdir, "sentiment", inputs,
        {"lexicon": str(lexicon_path) if lexicon_path else "bundled",
         "vectors": str(vectors_path) if vectors_path else None},
        settings.seed(), artifacts,
    )
    return artifacts


def _stage_changepoints(settings: Settings) -> list[Path]:
    workdir = settings.workdir()
    records = _load_cleaned(workdir)
    scores_path = _require_artifact(workdir, "sentiment.csv", "sentiment")
    assignments = _read_assignments(workdir)
    window = settings.get("window", 7, int)
    penalty = settings.get("penalty", 1.0, float)
    raw_series = settings.get("raw_series", False, bool)
    prominence = settings.get("prominence", 3.0, float)

    scores: dict[int, float] = {}
    with open(scores_path, "r", encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            scores[int(row["tweet_id"])] = float(row["score"])

    tweet_dates = {r["tweet_id"]: date.fromisoformat(r["created_at"][:10]) for r in records}
    topic_ids = sorted({t for members in assignments.values() for t, _ in members})

    by_topic_obs: dict[int, list[tuple[date, float]]] = {t: [] for t in topic_ids}
    corpus_obs: list[tuple[date, float]] = []
    by_topic_volume: dict[int, dict[date, int]] = {t: {} for t in topic_ids}
    for record in records:
        tweet_id = record["tweet_id"]
        day = tweet_dates[tweet_id]
        score = scores.get(tweet_id, 0.0)
        corpus_obs.append((day, score))
        for topic_idx, _ in assignments.get(tweet_id, ()):  # soft membership
            by_topic_obs[topic_idx].append((day, score))
            by_topic_volume[topic_idx][day] = by_topic_volume[topic_idx].get(day, 0) + 1

    series_path = workdir / "series.csv"
    cps_path = workdir / "changepoints.csv"
    volumes_path = workdir / "volumes.csv"
    peaks_path = workdir / "peaks.csv"
    with open(series_path, "w", encoding="utf-8") as series_fh, open(
        cps_path, "w", encoding="utf-8"
    ) as cps_fh, open(volumes_path, "w", encoding="utf-8") as vol_fh, open(
        peaks_path, "w", encoding="utf-8"
    ) as peaks_fh:
        series_writer = _csv_writer(series_fh)
        series_writer.writerow(["topic_id", "date", "value"])
        cps_writer = _csv_writer(cps_fh)
        cps_writer.writerow(["topic_id", "date"])
        vol_writer = _csv_writer(vol_fh)
        vol_writer.writerow(["topic_id", "date", "count"])
        peaks_writer = _csv_writer(peaks_fh)
        peaks_writer.writerow(["topic_id", "date"])

        for topic_idx in [-1] + topic_ids:
            observations = corpus_obs if topic_idx == -1 else by_topic_obs[topic_idx]
            if not observations:
                continue
            daily = timeseries_cpd.daily_mean(observations)
            working = daily if raw_series else timeseries_cpd.rolling_mean(daily, window)
            for day, value in zip(working.dates, working.values):
                series_writer.writerow([topic_idx, day.isoformat(), f"{value:.6f}"])
            cps = timeseries_cpd.pelt(working.values, penalty)
            for day in timeseries_cpd.changepoint_dates(working, cps):
                cps_writer.writerow([topic_idx, day.isoformat()])
            if topic_idx >= 0:
                volume = by_topic_volume[topic_idx]
                days = sorted(volume)
                counts = [float(volume[d]) for d in days]
                for day, count in zip(days, counts):
                    vol_writer.writerow([topic_idx, day.isoformat(), int(count)])
                for position in timeseries_cpd.detect_peaks(counts, prominence):
                    peaks_writer.writerow([topic_idx, days[position].isoformat()])

    artifacts = [series_path, cps_path, volumes_path, peaks_path]
    _write_manifest(
        workdir, "changepoints",
        [workdir / "cleaned.jsonl", scores_path, workdir / "assignments.csv"],
        {"window": window, "penalty": penalty, "raw_series": raw_series,
         "prominence": prominence},
        settings.seed(), artifacts,
    )
    return artifacts


def _stage_build_graph(settings: Settings) -> list[Path]:
    workdir = settings.workdir()
    records = _load_cleaned(workdir)
    assignments = _read_assignments(workdir)
    topic_kw = _read_topic_keywords(workdir)
    links_path = _require_artifact(workdir, "keyword_links.csv", "sentiment")
    cps_path = _require_artifact(workdir, "changepoints.csv", "changepoints")

    tweets = []
    for record in records:
        tweets.append(
            tweet_ingest.RawTweet(
                tweet_id=record["tweet_id"],
                created_at=tweet_ingest.parse_timestamp(record["created_at"]),
                user_id=record["user_id"],
                text=record["text"],
                hashtags=tuple(record.get("hashtags") or ()),
                mentions=tuple(record.get("mentions") or ()),
                in_reply_to=record.get("in_reply_to"),
                quoted=record.get("quoted"),
            )
        )

    keyword_links: dict[int, tuple[str, float]] = {}
    aspect_sentiments: dict[int, float] = {}
    with open(links_path, "r", encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            tweet_id = int(row["tweet_id"])
            keyword_links[tweet_id] = (row["keyword"], float(row["weight"]))
            if row.get("aspect_sentiment"):
                aspect_sentiments[tweet_id] = float(row["aspect_sentiment"])

    sentiment_scores: dict[int, float] = {}
    scores_path = _require_artifact(workdir, "sentiment.csv", "sentiment")
    with open(scores_path, "r", encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            sentiment_scores[int(row["tweet_id"])] = float(row["score"])

    topic_changepoints: dict[int, list[date]] = {}
    with open(cps_path, "r", encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            topic_idx = int(row["topic_id"])
            if topic_idx >= 0:
                topic_changepoints.setdefault(topic_idx, []).append(
                    date.fromisoformat(row["date"])
                )

    inputs = [workdir / "cleaned.jsonl", workdir / "assignments.csv",
              workdir / "topic_keywords.csv", links_path, scores_path, cps_path]
    events: list[kg_builder.EventRecord] = []
    events_path = settings.get("events")
    if events_path:
        inputs.append(Path(events_path))
        events, errors = kg_builder.load_events(events_path)
        if errors:
            raise DataError("events CSV errors: " + "; ".join(errors))
    date_stats: dict[date, graph_store.DateAttrs] = {}
    stats_path = settings.get("stats")
    if stats_path:
        inputs.append(Path(stats_path))
        date_stats, errors = kg_builder.load_date_stats(stats_path)
        if errors:
            raise DataError("stats CSV errors: " + "; ".join(errors))

    span_start = settings.get("span_start")
    span_end = settings.get("span_end")
    if span_start and span_end:
        start, end = date.fromisoformat(span_start), date.fromisoformat(span_end)
    else:
        days = sorted(t.created_at.date() for t in tweets)
        if not days:
            raise DataError("cannot infer a date span from an empty corpus")
        start, end = days[0], days[-1]
    config = kg_builder.BuildConfig(
        span_start=start,
        span_end=end,
        topic_dominance=settings.get("dominance", 0.5, float),
        keywords_per_topic=settings.get("top_k", 10, int),
        changepoint_penalty=settings.get("penalty", 1.0, float),
    )

    graph, report = kg_builder.build(
        tweets, assignments, keyword_links, aspect_sentiments, topic_kw,
        topic_changepoints, events, date_stats, config,
        sentiment_scores=sentiment_scores,
    )
    graph_path = workdir / "graph.tsv"
    attrs_path = workdir / "graph_attrs.jsonl"
    graph_store.export_triples(graph, graph_path)
    graph_store.export_entity_attrs(graph, attrs_path)
    report_path = workdir / "build_report.json"
    report_path.write_text(
        json.dumps(
            {"dangling_replies": report.dangling_replies,
             "dangling_quotes": report.dangling_quotes,
             "unassigned_tweets": report.unassigned_tweets},
            sort_keys=True, indent=2,
        ) + "\n",
        encoding="utf-8",
    )

    artifacts = [graph_path, attrs_path, report_path]
    _write_manifest(
        workdir, "build-graph", inputs,
        {"span_start": start.isoformat(), "span_end": end.isoformat(),
         "dominance": config.topic_dominance, "top_k": config.keywords_per_topic},
        settings.seed(), artifacts,
    )
    return artifacts


def _load_graph(workdir: Path) -> graph_store.KnowledgeGraph:
    graph_path = _require_artifact(workdir, "graph.tsv", "build-graph")
    attrs_path = workdir / "graph_attrs.jsonl"
    return graph_store.import_triples(
        graph_path, attrs_path if attrs_path.exists() else None
    )


def _stage_stats(settings: Settings) -> list[Path]:
    workdir = settings.workdir()
    graph = _load_graph(workdir)
    counts = graph.stats()

    stats_path = workdir / "graph_stats.csv"
    with open(stats_path, "w", encoding="utf-8") as fh:
        writer = _csv_writer(fh)
        writer.writerow(list(counts.keys()))
        writer.writerow([counts[k] for k in counts])

    components = graph.weakly_connected_components([graph_store.EntityKind.TWEET])
    size_hist: dict[int, int] = {}
    path_hist: dict[int, int] = {}
    for component in components:
        size_hist[len(component)] = size_hist.get(len(component), 0) + 1
        length = graph.longest_path_length(component)
        path_hist[length] = path_hist.get(length, 0) + 1

    sizes_path = workdir / "wcc_sizes.csv"
    with open(sizes_path, "w", encoding="utf-8") as fh:
        writer = _csv_writer(fh)
        writer.writerow(["size", "count"])
        for size in sorted(size_hist):
            writer.writerow([size, size_hist[size]])
    paths_path = workdir / "longest_paths.csv"
    with open(paths_path, "w", encoding="utf-8") as fh:
        writer = _csv_writer(fh)
        writer.writerow(["length", "count"])
        for length in sorted(path_hist):
            writer.writerow([length, path_hist[length]])

    artifacts = [stats_path, sizes_path, paths_path]
    _write_manifest(
        workdir, "stats", [workdir / "graph.tsv"], {}, settings.seed(), artifacts
    )
    return artifacts


def _embedding_params(settings: Settings) -> embedding.EmbeddingParams:
    defaults = embedding.EmbeddingParams()
    return embedding.EmbeddingParams(
        entity_dim=settings.get("entity_dim", defaults.entity_dim, int),
        relation_dim=settings.get("relation_dim", defaults.relation_dim, int),
        margin=settings.get("margin", defaults.margin, float),
        beta=settings.get("beta", defaults.beta, float),
        learning_rate=settings.get("learning_rate", defaults.learning_rate, float),
        epochs=settings.get("epochs", defaults.epochs, int),
        batch_size=settings.get("batch_size", defaults.batch_size, int),
        seed=settings.seed(),
        train_fraction=settings.get("train_fraction", defaults.train_fraction, float),
    )


def _stage_train(settings: Settings) -> list[Path]:
    workdir = settings.workdir()
    graph = _load_graph(workdir)
    params = _embedding_params(settings)
    use_focuse = not settings.get("no_focuse", False, bool)
    model, trace = embedding.train(graph, params, use_focuse=use_focuse)

    model_path = workdir / "model.bin"
    embedding.save_model(model, model_path)
    trace_path = workdir / "loss_trace.csv"
    with open(trace_path, "w", encoding="utf-8") as fh:
        writer = _csv_writer(fh)
        writer.writerow(["epoch", "train_loss", "val_loss"])
        for entry in trace:
            writer.writerow([entry.epoch, repr(entry.train_loss), repr(entry.val_loss)])

    artifacts = [model_path, trace_path]
    _write_manifest(
        workdir, "train", [workdir / "graph.tsv"],
        {"entity_dim": params.entity_dim, "relation_dim": params.relation_dim,
         "margin": params.margin, "beta": params.beta,
         "learning_rate": params.learning_rate, "epochs": params.epochs,
         "batch_size": params.batch_size, "train_fraction": params.train_fraction,
         "focuse": use_focuse},
        settings.seed(), artifacts,
    )
    return artifacts


def _stage_predict(settings: Settings) -> list[Path]:
    workdir = settings.workdir()
    model_path = _require_artifact(workdir, "model.bin", "train")
    graph = _load_graph(workdir)
    model = embedding.load_model(model_path)
    relation = graph_store.RelationType(settings.get("relation", "has_changepoint"))
    percentile = settings.get("percentile", 2.0, float)
    head_kind, tail_kind = graph_store.RELATION_SIGNATURES[relation]
    heads = list(graph.entities(head_kind))
    tails = list(graph.entities(tail_kind))
    predictions = analysis.predict_links(model, graph, relation, heads, tails, percentile)

    pred_path = workdir / "predictions.csv"
    with open(pred_path, "w", encoding="utf-8") as fh:
        writer = _csv_writer(fh)
        writer.writerow(["head", "relation", "tail", "distance", "percentile"])
        for link in predictions:
            writer.writerow([
                str(link.head), link.relation.value, str(link.tail),
                f"{link.distance:.9g}", f"{link.percentile:.4f}",
            ])

    artifacts = [pred_path]
    _write_manifest(
        workdir, "predict", [workdir / "graph.tsv", model_path],
        {"relation": relation.value, "percentile": percentile},
        settings.seed(), artifacts,
    )
    return artifacts


def _stage_communities(settings: Settings) -> list[Path]:
    workdir = settings.workdir()
    graph = _load_graph(workdir)
    partition, trace = analysis.louvain(graph, settings.seed())

    communities_path = workdir / "communities.csv"
    with open(communities_path, "w", encoding="utf-8") as fh:
        writer = _csv_writer(fh)
        writer.writerow(["entity_kind", "entity_id", "community"])
        for ref in graph.entities():
            writer.writerow([ref.kind.value, ref.id, partition.membership[ref]])

    report_path = workdir / "community_report.csv"
    with open(report_path, "w", encoding="utf-8") as fh:
        writer = _csv_writer(fh)
        writer.writerow(["community", "tweets", "users", "topics"])
        for row in analysis.community_report(partition, graph):
            writer.writerow([row.community, row.tweets, row.users, ";".join(row.topics)])

    trace_path = workdir / "modularity_trace.csv"
    with open(trace_path, "w", encoding="utf-8") as fh:
        writer = _csv_writer(fh)
        writer.writerow(["level", "modularity"])
        for level, q in enumerate(trace):
            writer.writerow([level, repr(q)])

    artifacts = [communities_path, report_path, trace_path]
    _write_manifest(
        workdir, "communities", [workdir / "graph.tsv"], {}, settings.seed(), artifacts
    )
    return artifacts


_STAGES = {
    "ingest": _stage_ingest,
    "topics": _stage_topics,
    "sentiment": _stage_sentiment,
    "changepoints": _stage_changepoints,
    "build-graph": _stage_build_graph,
    "stats": _stage_stats,
    "train": _stage_train,
    "predict": _stage_predict,
    "communities": _stage_communities,
}


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", help="key=value config file; flags override")
    sub.add_argument("--workdir", help="artifact directory")
    sub.add_argument("--seed", type=int, help="global random seed")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="covkg", description=__doc__.split("\n")[0])
    subparsers = parser.add_subparsers(dest="stage", required=True)

    p = subparsers.add_parser("ingest", help="filter and clean the tweet corpus")
    _add_common(p)
    p.add_argument("--tweets", help="raw tweets JSONL")
    p.add_argument("--keywords", help="keyword list, one phrase per line")
    p.add_argument("--stopwords", help="comma-separated extra stopword files")

    p = subparsers.add_parser("topics", help="TF-IDF + NMF topic model")
    _add_common(p)
    p.add_argument("--vocab-cap", dest="vocab_cap", type=int)
    p.add_argument("--topics", type=int, help="number of topics")
    p.add_argument("--nmf-iters", dest="nmf_iters", type=int)
    p.add_argument("--nmf-tol", dest="nmf_tol", type=float)
    p.add_argument("--dominance", type=float, help="soft-membership threshold")
    p.add_argument("--top-k", dest="top_k", type=int, help="keywords per topic")

    p = subparsers.add_parser("sentiment", help="sentiment scores and keyword links")
    _add_common(p)
    p.add_argument("--lexicon", help="token<TAB>valence lexicon file")
    p.add_argument("--vectors", help="word vector file (optionally .gz)")

    p = subparsers.add_parser("changepoints", help="daily series + changepoint detection")
    _add_common(p)
    p.add_argument("--window", type=int, help="rolling mean window")
    p.add_argument("--penalty", type=float, help="changepoint penalty")
    p.add_argument("--raw-series", dest="raw_series", action="store_const", const=True,
                   help="detect on raw daily means instead of the rolling series")
    p.add_argument("--prominence", type=float, help="peak prominence factor")

    p = subparsers.add_parser("build-graph", help="assemble the knowledge graph")
    _add_common(p)
    p.add_argument("--events", help="events CSV")
    p.add_argument("--stats", help="disease statistics CSV")
    p.add_argument("--span-start", dest="span_start", help="ISO date")
    p.add_argument("--span-end", dest="span_end", help="ISO date")
    p.add_argument("--dominance", type=float)
    p.add_argument("--top-k", dest="top_k", type=int)

    p = subparsers.add_parser("stats", help="graph statistics and WCC histograms")
    _add_common(p)

    p = subparsers.add_parser("train", help="train the graph embedding")
    _add_common(p)
    p.add_argument("--entity-dim", dest="entity_dim", type=int)
    p.add_argument("--relation-dim", dest="relation_dim", type=int)
    p.add_argument("--margin", type=float)
    p.add_argument("--beta", type=float, help="structural influence in [0,1]")
    p.add_argument("--learning-rate", dest="learning_rate", type=float)
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--train-fraction", dest="train_fraction", type=float)
    p.add_argument("--no-focuse", dest="no_focuse", action="store_const", const=True,
                   help="train the plain translational model (ignore edge weights)")

    p = subparsers.add_parser("predict", help="link prediction from the embedding")
    _add_common(p)
    p.add_argument("--relation", help="relation to predict (default has_changepoint)")
    p.add_argument("--percentile", type=float)

    p = subparsers.add_parser("communities", help="Louvain community detection")
    _add_common(p)

    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    try:
        artifacts = _STAGES[args.stage](Settings(args))
        for path in artifacts:
            logger.info("wrote %s", path)
        return 0
    except StageError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # pragma: no cover - defensive
        logger.exception("internal error: %s", exc)
        return 3


if __name__ == "__main__":
    sys.exit(main())
