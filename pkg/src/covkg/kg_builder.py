"""Assemble the knowledge graph from tweets, model outputs, and external feeds.

The builder is deterministic: identical inputs and config yield a graph whose
exported triples are byte-identical.  Reply and quote edges are only added
when both tweets survived filtering; dangling targets are counted, not fatal.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from datetime import date, timedelta
from pathlib import Path
from typing import IO, Iterable, Mapping, Sequence

from .errors import DataError
from .graph_store import (
    DateAttrs,
    EntityKind,
    EntityRef,
    Fact,
    KnowledgeGraph,
    RelationType,
)
from .tweet_ingest import RawTweet

logger = logging.getLogger(__name__)

EVENT_CATEGORIES = ("policy", "milestone", "vaccine", "other")


@dataclass(frozen=True)
class EventRecord:
    """An external event: id, date, category, free-text description."""

    event_id: str
    date: date
    description: str
    category: str = "other"

    def __post_init__(self) -> None:
        if not self.event_id:
            raise DataError("event id must be nonempty")
        if self.category not in EVENT_CATEGORIES:
            raise DataError(f"unknown event category {self.category!r}")


@dataclass(frozen=True)
class BuildConfig:
    """Date span and model parameters used during assembly."""

    span_start: date
    span_end: date
    topic_dominance: float = 0.5
    keywords_per_topic: int = 10
    changepoint_penalty: float = 1.0

    def __post_init__(self) -> None:
        if self.span_start > self.span_end:
            raise DataError("span start must not exceed span end")

    def span_dates(self) -> list[date]:
        days = (self.span_end - self.span_start).days
        return [self.span_start + timedelta(days=i) for i in range(days + 1)]


@dataclass
class BuildReport:
    """Counters for records skipped during assembly."""

    dangling_replies: int = 0
    dangling_quotes: int = 0
    unassigned_tweets: list[int] = field(default_factory=list)


def load_events(source: str | Path | IO[str]) -> tuple[list[EventRecord], list[str]]:
    """Parse the events CSV (event_id,date,category,description).

    Malformed rows are collected as "line N: reason" strings; parsing continues.
    """
    own = isinstance(source, (str, Path))
    fh = open(source, "r", encoding="utf-8", newline="") if own else source
    events: list[EventRecord] = []
    errors: list[str] = []
    try:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"event_id", "date"} <= set(reader.fieldnames):
            raise DataError("events CSV must have event_id and date columns")
        for row in reader:
            lineno = reader.line_num
            try:
                events.append(
                    EventRecord(
                        event_id=(row.get("event_id") or "").strip(),
                        date=date.fromisoformat((row.get("date") or "").strip()),
                        description=(row.get("description") or "").strip(),
                        category=(row.get("category") or "other").strip() or "other",
                    )
                )
            except (DataError, ValueError) as exc:
                errors.append(f"line {lineno}: {exc}")
    finally:
        if own:
            fh.close()
    return events, errors


def load_date_stats(
    source: str | Path | IO[str],
) -> tuple[dict[date, DateAttrs], list[str]]:
    """Parse the statistics CSV (date,case_count,new_cases,death_count,new_deaths).

    Negative counts are row errors.  A new_cases value inconsistent with the
    case_count delta of the previous date is logged as a warning, not an error.
    """
    own = isinstance(source, (str, Path))
    fh = open(source, "r", encoding="utf-8", newline="") if own else source
    stats: dict[date, DateAttrs] = {}
    errors: list[str] = []
    try:
        reader = csv.DictReader(fh)
        required = {"date", "case_count", "new_cases", "death_count", "new_deaths"}
        if reader.fieldnames is None or not required <= set(reader.fieldnames):
            raise DataError(f"stats CSV must have columns {sorted(required)}")
        for row in reader:
            lineno = reader.line_num
            try:
                day = date.fromisoformat((row.get("date") or "").strip())
                attrs = DateAttrs(
                    case_count=int(row["case_count"]),
                    new_cases=int(row["new_cases"]),
                    death_count=int(row["death_count"]),
                    new_deaths=int(row["new_deaths"]),
                )
                stats[day] = attrs
            except (DataError, ValueError, KeyError) as exc:
                errors.append(f"line {lineno}: {exc}")
    finally:
        if own:
            fh.close()
    for day in sorted(stats):
        prev = day - timedelta(days=1)
        if prev in stats:
            delta = stats[day].case_count - stats[prev].case_count
            if delta != stats[day].new_cases:
                logger.warning(
                    "stats inconsistency on %s: new_cases=%d but case_count delta=%d",
                    day.isoformat(), stats[day].new_cases, delta,
                )
    return stats, errors


def _mention_user_id(mention: str) -> str:
    text = mention.lstrip("@").strip()
    return text


def build(
    tweets: Sequence[RawTweet],
    topic_assignments: Mapping[int, Sequence[tuple[int, float]]],
    keyword_links: Mapping[int, tuple[str, float]],
    aspect_sentiments: Mapping[int, float] | None,
    topic_keyword_weights: Sequence[Sequence[tuple[str, float]]],
    topic_changepoints: Mapping[int, Iterable[date]],
    events: Sequence[EventRecord],
    date_stats: Mapping[date, DateAttrs],
    config: BuildConfig,
    sentiment_scores: Mapping[int, float] | None = None,
) -> tuple[KnowledgeGraph, BuildReport]:
    """Emit all entities and the eleven relation kinds into one graph.

    ``topic_assignments`` and ``keyword_links`` are keyed by tweet id;
    ``aspect_sentiments`` optionally carries the linked keyword's clause-level
    sentiment, stored as an in-memory attribute of the keyword fact.
    ``topic_keyword_weights`` lists, per topic index, (keyword, weight) pairs.
    ``sentiment_scores`` become a "sentiment" attribute on tweet entities.
    """
    graph = KnowledgeGraph()
    report = BuildReport()
    span = config.span_dates()
    span_set = set(span)

    for day in span:
        ref = EntityRef(EntityKind.DATE, day.isoformat())
        attrs = date_stats.get(day)
        graph.add_entity(ref, attrs.to_attrs() if attrs else {})

    topic_count = len(topic_keyword_weights)
    for topic_idx in range(topic_count):
        graph.add_entity(EntityRef(EntityKind.TOPIC, str(topic_idx)))

    corpus_ids = {t.tweet_id for t in tweets}

    # Entities first: all facts require both endpoints to exist.
    for tweet in tweets:
        attrs = None
        if sentiment_scores and tweet.tweet_id in sentiment_scores:
            attrs = {"sentiment": sentiment_scores[tweet.tweet_id]}
        graph.add_entity(EntityRef(EntityKind.TWEET, str(tweet.tweet_id)), attrs)
        graph.add_entity(EntityRef(EntityKind.USER, str(tweet.user_id)))
        for tag in tweet.hashtags:
            graph.add_entity(EntityRef(EntityKind.HASHTAG, tag.lower()))
        for mention in tweet.mentions:
            graph.add_entity(EntityRef(EntityKind.USER, _mention_user_id(mention)))

    keyword_entities = {
        keyword
        for per_topic in topic_keyword_weights
        for keyword, _ in per_topic
    } | {link[0] for link in keyword_links.values()}
    for keyword in sorted(keyword_entities):
        graph.add_entity(EntityRef(EntityKind.KEYWORD, keyword))

    for event in events:
        if event.date not in span_set:
            raise DataError(f"event {event.event_id} dated {event.date} outside the span")
        graph.add_entity(
            EntityRef(EntityKind.EVENT, event.event_id),
            {"category": event.category, "description": event.description},
        )

    # Twitter-derived relations, in input order for determinism.
    for tweet in tweets:
        tweet_ref = EntityRef(EntityKind.TWEET, str(tweet.tweet_id))
        day = tweet.created_at.date()
        if day not in span_set:
            raise DataError(f"tweet {tweet.tweet_id} dated {day} outside the span")
        graph.add_fact(Fact(tweet_ref, EntityRef(EntityKind.USER, str(tweet.user_id)),
                            RelationType.AUTHORED_BY))
        graph.add_fact(Fact(tweet_ref, EntityRef(EntityKind.DATE, day.isoformat()),
                            RelationType.TWEETED_ON))
        for tag in tweet.hashtags:
            graph.add_fact(Fact(tweet_ref, EntityRef(EntityKind.HASHTAG, tag.lower()),
                                RelationType.HAS_HASHTAG))
        for mention in tweet.mentions:
            graph.add_fact(Fact(tweet_ref, EntityRef(EntityKind.USER, _mention_user_id(mention)),
                                RelationType.MENTIONS))
        if tweet.in_reply_to is not None:
            if tweet.in_reply_to in corpus_ids:
                graph.add_fact(Fact(tweet_ref, EntityRef(EntityKind.TWEET, str(tweet.in_reply_to)),
                                    RelationType.REPLIES_TO))
            else:
                report.dangling_replies += 1
        if tweet.quoted is not None:
            if tweet.quoted in corpus_ids:
                graph.add_fact(Fact(tweet_ref, EntityRef(EntityKind.TWEET, str(tweet.quoted)),
                                    RelationType.QUOTES))
            else:
                report.dangling_quotes += 1

    # Model-derived relations.
    for tweet in tweets:
        tweet_ref = EntityRef(EntityKind.TWEET, str(tweet.tweet_id))
        memberships = topic_assignments.get(tweet.tweet_id, ())
        if not memberships:
            report.unassigned_tweets.append(tweet.tweet_id)
        for topic_idx, weight in memberships:
            if not (0 <= topic_idx < topic_count):
                raise DataError(f"tweet {tweet.tweet_id} assigned unknown topic {topic_idx}")
            graph.add_fact(Fact(tweet_ref, EntityRef(EntityKind.TOPIC, str(topic_idx)),
                                RelationType.HAS_TOPIC, weight))
        link = keyword_links.get(tweet.tweet_id)
        if link is not None:
            keyword, weight = link
            attrs = None
            if aspect_sentiments and tweet.tweet_id in aspect_sentiments:
                attrs = {"aspect_sentiment": aspect_sentiments[tweet.tweet_id]}
            graph.add_fact(Fact(tweet_ref, EntityRef(EntityKind.KEYWORD, keyword),
                                RelationType.HAS_KEYWORD, weight, attrs=attrs))

    for topic_idx, per_topic in enumerate(topic_keyword_weights):
        topic_ref = EntityRef(EntityKind.TOPIC, str(topic_idx))
        for keyword, weight in per_topic[: config.keywords_per_topic]:
            graph.add_fact(Fact(EntityRef(EntityKind.KEYWORD, keyword), topic_ref,
                                RelationType.ASSOCIATED_WITH, weight))
        for day in topic_changepoints.get(topic_idx, ()):
            if day not in span_set:
                raise DataError(f"changepoint {day} for topic {topic_idx} outside the span")
            graph.add_fact(Fact(topic_ref, EntityRef(EntityKind.DATE, day.isoformat()),
                                RelationType.HAS_CHANGEPOINT))

    for event in events:
        graph.add_fact(Fact(EntityRef(EntityKind.EVENT, event.event_id),
                            EntityRef(EntityKind.DATE, event.date.isoformat()),
                            RelationType.OCCURRED_ON))

    if report.dangling_replies or report.dangling_quotes:
        logger.info(
            "skipped %d dangling replies and %d dangling quotes",
            report.dangling_replies, report.dangling_quotes,
        )
    return graph, report
