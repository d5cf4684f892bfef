"""
Filtering a tweet corpus by keyword and cleaning the text
=========================================================

A tweet joins the working corpus when a keyword matches at token
boundaries, or when it sits in the same reply thread as a matched tweet.
Cleaning strips URLs, mentions and hashtags, lowercases, drops short
tokens and stopwords, then lemmatizes.
"""

import io
import json

from covkg import clean_text, filter_corpus, load_keywords, parse_tweets

records = [
    {"tweet_id": 1, "created_at": "2020-03-11T09:00:00Z", "user_id": 10,
     "text": "Covid cases rising again in the county"},
    {"tweet_id": 2, "created_at": "2020-03-11T09:05:00Z", "user_id": 11,
     "text": "honestly this thread is wild", "in_reply_to": 1},
    {"tweet_id": 3, "created_at": "2020-03-11T10:00:00Z", "user_id": 12,
     "text": "my cat learned a new trick"},
    {"tweet_id": 4, "created_at": "2020-03-11T11:00:00Z", "user_id": 13,
     "text": "@mayor Masks masks MASKS!! see https://example.org #stayhome"},
]
stream = io.StringIO("\n".join(json.dumps(r) for r in records))

tweets, errors = parse_tweets(stream)
print(f"parsed {len(tweets)} tweets, {len(errors)} malformed lines")

keywords = load_keywords(io.StringIO("covid\nmask\nstay home\n"))
kept = filter_corpus(tweets, keywords)
print("kept after filtering:", [t.tweet_id for t in kept])
# tweet 2 has no keyword but replies to tweet 1, so the thread rule keeps it;
# tweet 3 is about a cat and drops out.

for tweet in kept:
    print(f"  {tweet.tweet_id}: {tweet.text!r}")
    print(f"     cleaned -> {clean_text(tweet.text)}")
