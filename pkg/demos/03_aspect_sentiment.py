"""
Clause-level aspect sentiment
=============================

The sentence splits on punctuation and conjunctions; each aspect word is
scored by averaging the sentiment of exactly the clauses containing it,
so one sentence can be positive about vaccines and negative about masks
at the same time.
"""

from covkg import aspect_scores, demo_lexicon, score_text, split_clauses

lexicon = demo_lexicon()
text = "I love vaccines, but I hate wearing masks; still, great progress."

print("text:", text)
for clause in split_clauses(text):
    print(f"  clause {clause.position}: {clause.text!r} "
          f"score={score_text(clause.text, lexicon):+.3f}")

scores = aspect_scores(text, ["vaccines", "masks", "progress"], lexicon)
for aspect, score in scores.items():
    print(f"aspect {aspect!r}: {score:+.3f}")

print("whole text:", f"{score_text(text, lexicon):+.3f}")
print("negation flips:", f"{score_text('not great', lexicon):+.3f}",
      "vs", f"{score_text('great', lexicon):+.3f}")
