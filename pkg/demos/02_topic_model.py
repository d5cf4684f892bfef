"""
TF-IDF and NMF topic modeling
=============================

Build a vocabulary from cleaned documents, vectorize with the pinned
TF-IDF convention (raw counts, smoothed idf, L2 rows), factor the matrix
with multiplicative updates, and read off topics and memberships.
"""

import numpy as np

from covkg import assign_topics, build_tfidf, build_vocabulary, nmf_fit, topic_keywords

rng = np.random.default_rng(0)

# Two word families so the factorization has something to find.
health = ["vaccine", "dose", "shot", "pfizer", "appointment"]
policy = ["lockdown", "order", "mandate", "curfew", "county"]
docs = []
for _ in range(40):
    family = health if rng.random() < 0.5 else policy
    docs.append([family[int(rng.integers(len(family)))] for _ in range(6)])

vocab = build_vocabulary(docs, cap=50)
print(f"vocabulary ({len(vocab)} terms):", ", ".join(vocab.terms))

X = build_tfidf(docs, vocab)
print("tf-idf shape:", X.shape, "nonzeros:", X.nnz)

model, errors = nmf_fit(X, u=2, max_iters=300, seed=1, vocabulary=vocab)
print(f"reconstruction error: {errors[0]:.4f} -> {errors[-1]:.4f} "
      f"({len(errors) - 1} iterations, never increasing)")

for i, pairs in enumerate(topic_keywords(model, k=4)):
    print(f"topic {i}:", ", ".join(f"{term} ({weight:.2f})" for term, weight in pairs))

memberships, skipped = assign_topics(model, dominance=0.5)
print("doc 0 words:", docs[0])
print("doc 0 memberships (topic, weight):", memberships[0])
print("documents with no topic:", skipped)
