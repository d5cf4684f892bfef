"""Parse raw tweet records, filter by keyword with reply-thread closure, clean text.

All functions are pure over immutable inputs; a corpus can be sharded, cleaned
concurrently and concatenated back in input order.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from datetime import datetime, timezone
from importlib import resources
from pathlib import Path
from typing import IO, Iterable

from .errors import DataError

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)
_URL_RE = re.compile(r"(?:https?://|www\.)\S+", re.IGNORECASE)
_MENTION_RE = re.compile(r"@\w+")
_HASHTAG_RE = re.compile(r"#\w+")


@dataclass(frozen=True)
class RawTweet:
    """One tweet record with the attributes kept for graph construction."""

    tweet_id: int
    created_at: datetime
    user_id: int
    text: str
    hashtags: tuple[str, ...] = ()
    mentions: tuple[str, ...] = ()
    in_reply_to: int | None = None
    quoted: int | None = None

    def __post_init__(self) -> None:
        if self.in_reply_to == self.tweet_id or self.quoted == self.tweet_id:
            raise DataError(f"tweet {self.tweet_id} references itself")


@dataclass(frozen=True)
class CleanedTweet:
    """A tweet id and its cleaned token sequence."""

    tweet_id: int
    tokens: tuple[str, ...]


def parse_timestamp(value: str) -> datetime:
    text = value.strip()
    try:
        stamp = datetime.fromisoformat(text.replace("Z", "+00:00"))
    except ValueError:
        try:
            stamp = datetime.strptime(text, "%a %b %d %H:%M:%S %z %Y")
        except ValueError as exc:
            raise DataError(f"unparseable timestamp {value!r}") from exc
    if stamp.tzinfo is None:
        stamp = stamp.replace(tzinfo=timezone.utc)
    return stamp.astimezone(timezone.utc)


def _optional_id(record: dict, name: str) -> int | None:
    value = record.get(name)
    if value in (None, "", 0):
        return None
    try:
        return int(value)
    except (TypeError, ValueError) as exc:
        raise DataError(f"field {name!r} is not an integer id: {value!r}") from exc


def parse_tweets(stream: Iterable[str] | IO[str]) -> tuple[list[RawTweet], list[str]]:
    """Parse a JSONL stream of tweet records.

    Returns the well-formed tweets in input order plus a list of error strings
    ("line N: reason") for lines that could not be parsed; parsing continues
    past bad lines.  Duplicate tweet ids are reported and skipped.
    """
    tweets: list[RawTweet] = []
    errors: list[str] = []
    seen: set[int] = set()
    for lineno, line in enumerate(stream, start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
            if not isinstance(record, dict):
                raise DataError("record is not a JSON object")
            if "tweet_id" not in record:
                raise DataError("missing tweet_id")
            tweet_id = int(record["tweet_id"])
            if tweet_id in seen:
                raise DataError(f"duplicate tweet_id {tweet_id}")
            tweet = RawTweet(
                tweet_id=tweet_id,
                created_at=parse_timestamp(str(record["created_at"])),
                user_id=int(record["user_id"]),
                text=str(record.get("text", "")),
                hashtags=tuple(str(h).lower() for h in record.get("hashtags") or ()),
                mentions=tuple(str(m) for m in record.get("mentions") or ()),
                in_reply_to=_optional_id(record, "in_reply_to"),
                quoted=_optional_id(record, "quoted"),
            )
            seen.add(tweet_id)
            tweets.append(tweet)
        except (DataError, KeyError, TypeError, ValueError) as exc:
            errors.append(f"line {lineno}: {exc}")
    return tweets, errors


# -- keyword filtering ---------------------------------------------------------


def load_keywords(source: str | Path | IO[str]) -> set[str]:
    """Load a keyword list: one lowercase phrase per line, ``#`` comments."""
    own = isinstance(source, (str, Path))
    fh = open(source, "r", encoding="utf-8") if own else source
    try:
        keywords = set()
        for line in fh:
            text = line.split("#", 1)[0].strip().lower()
            if text:
                keywords.add(text)
    finally:
        if own:
            fh.close()
    if not keywords:
        raise DataError("keyword list is empty")
    return keywords


def _match_tokens(text: str) -> list[str]:
    return [t.lower() for t in _TOKEN_RE.findall(text)]


def matches_keywords(text: str, keywords: Iterable[str]) -> bool:
    """True when some keyword phrase occurs at token boundaries in the text.

    Matching is token-wise, not substring: "vaccine" does not match inside
    "vaccinate", while "covid-19" matches the token pair ("covid", "19").
    """
    tokens = _match_tokens(text)
    if not tokens:
        return False
    token_set = set(tokens)
    for keyword in keywords:
        phrase = _match_tokens(keyword)
        if not phrase:
            continue
        if len(phrase) == 1:
            if phrase[0] in token_set:
                return True
            continue
        for i in range(len(tokens) - len(phrase) + 1):
            if tokens[i : i + len(phrase)] == phrase:
                return True
    return False


def filter_corpus(tweets: list[RawTweet], keywords: set[str]) -> list[RawTweet]:
    """Keep tweets matching a keyword, plus their whole reply threads.

    A reply thread is a connected component under in_reply_to links, walked in
    both directions; two replies to a common parent share a thread even when
    the parent itself is absent from the corpus.
    """
    parent: dict[int, int] = {}

    def find(x: int) -> int:
        parent.setdefault(x, x)
        root = x
        while parent[root] != root:
            root = parent[root]
        while parent[x] != root:
            parent[x], x = root, parent[x]
        return root

    def union(a: int, b: int) -> None:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[rb] = ra

    for tweet in tweets:
        find(tweet.tweet_id)
        if tweet.in_reply_to is not None:
            union(tweet.tweet_id, tweet.in_reply_to)

    matched_roots = {
        find(t.tweet_id) for t in tweets if matches_keywords(t.text, keywords)
    }
    return [t for t in tweets if find(t.tweet_id) in matched_roots]


# -- cleaning -------------------------------------------------------------------


def load_stopwords(*sources: str | Path | IO[str]) -> set[str]:
    """Union of stopword files: one word per line, ``#`` comments ignored."""
    words: set[str] = set()
    for source in sources:
        own = isinstance(source, (str, Path))
        fh = open(source, "r", encoding="utf-8") if own else source
        try:
            for line in fh:
                text = line.split("#", 1)[0].strip().lower()
                if text:
                    words.add(text)
        finally:
            if own:
                fh.close()
    return words


def default_stopwords() -> set[str]:
    """The bundled English + Spanish lists."""
    words: set[str] = set()
    for name in ("stopwords_en.txt", "stopwords_es.txt"):
        with resources.files("covkg.data").joinpath(name).open("r", encoding="utf-8") as fh:
            words |= load_stopwords(fh)
    return words


def load_lemma_exceptions(source: str | Path | IO[str]) -> dict[str, str]:
    """token<TAB>lemma pairs, ``#`` comments ignored."""
    own = isinstance(source, (str, Path))
    fh = open(source, "r", encoding="utf-8") if own else source
    try:
        table: dict[str, str] = {}
        for line in fh:
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            token, sep, lemma = text.partition("\t")
            if not sep:
                raise DataError(f"lemma line missing tab: {line!r}")
            table[token.strip().lower()] = lemma.strip().lower()
        return table
    finally:
        if own:
            fh.close()


def default_lemma_exceptions() -> dict[str, str]:
    with resources.files("covkg.data").joinpath("lemma_exceptions.txt").open(
        "r", encoding="utf-8"
    ) as fh:
        return load_lemma_exceptions(fh)


_ES_SUFFIXES = ("sses", "xes", "zes", "ches", "shes")


def lemmatize(token: str, exceptions: dict[str, str] | None = None) -> str:
    """Exception map lookup, then a conservative -s/-es/-ing/-ed stripper.

    Suffixes are removed only when at least three characters remain; a final
    doubled consonant left by -ing/-ed is undoubled unless it is l, s or z
    ("stopped" -> "stop" but "falling" -> "fall").
    """
    if exceptions and token in exceptions:
        return exceptions[token]
    if token.endswith("ing") and len(token) >= 6:
        stem = token[:-3]
        return _undouble(stem)
    if token.endswith("ed") and len(token) >= 5:
        stem = token[:-2]
        return _undouble(stem)
    for suffix in _ES_SUFFIXES:
        if token.endswith(suffix) and len(token) - 2 >= 3:
            return token[:-2]
    if token.endswith("s") and not token.endswith("ss") and len(token) >= 4:
        return token[:-1]
    return token


def _undouble(stem: str) -> str:
    if len(stem) >= 2 and stem[-1] == stem[-2] and stem[-1] not in "lsz" and stem[-1] not in "aeiou":
        return stem[:-1]
    return stem


def clean_text(
    text: str,
    stopwords: set[str] | None = None,
    lemma_map: dict[str, str] | None = None,
) -> list[str]:
    """Clean raw tweet text into tokens.

    Pipeline order: strip URLs, @mentions and #hashtags; lowercase; drop
    non-alphanumeric characters; split on whitespace; drop tokens shorter than
    3 characters; drop stopwords; lemmatize.  A lemma that itself lands on a
    stopword or below 3 characters is dropped, so every output token satisfies
    the cleaned-token invariant.  The empty list is a valid result.
    """
    if stopwords is None:
        stopwords = default_stopwords()
    if lemma_map is None:
        lemma_map = default_lemma_exceptions()
    text = _URL_RE.sub(" ", text)
    text = _MENTION_RE.sub(" ", text)
    text = _HASHTAG_RE.sub(" ", text)
    text = text.lower()
    text = "".join(ch if (ch.isalnum() or ch.isspace()) else "" for ch in text)
    tokens = [t for t in text.split() if len(t) >= 3 and t not in stopwords]
    lemmas = (lemmatize(t, lemma_map) for t in tokens)
    return [t for t in lemmas if len(t) >= 3 and t not in stopwords]


def clean_tweets(
    tweets: Iterable[RawTweet],
    stopwords: set[str] | None = None,
    lemma_map: dict[str, str] | None = None,
) -> list[CleanedTweet]:
    """clean_text over a corpus, preserving input order."""
    if stopwords is None:
        stopwords = default_stopwords()
    if lemma_map is None:
        lemma_map = default_lemma_exceptions()
    return [
        CleanedTweet(t.tweet_id, tuple(clean_text(t.text, stopwords, lemma_map)))
        for t in tweets
    ]
