import math

import numpy as np
import pytest
import scipy.sparse as sp

from covkg.errors import DataError
from covkg.topics import (
    NmfModel,
    Vocabulary,
    assign_topics,
    build_tfidf,
    build_vocabulary,
    load_nmf,
    load_vocabulary,
    nmf_fit,
    save_nmf,
    save_vocabulary,
    topic_keywords,
)


class TestVocabulary:
    def test_cap_keeps_highest_document_frequency(self):
        vocab = build_vocabulary([["mask"], ["mask", "vaccine"]], cap=10)
        assert vocab.terms == ("mask", "vaccine")

    def test_cap_one(self):
        vocab = build_vocabulary([["mask"], ["mask", "vaccine"]], cap=1)
        assert vocab.terms == ("mask",)

    def test_tie_breaks_lexicographically(self):
        vocab = build_vocabulary([["bbb"], ["aaa"]], cap=1)
        assert vocab.terms == ("aaa",)

    def test_empty_corpus(self):
        assert build_vocabulary([], cap=5).terms == ()

    def test_duplicate_terms_rejected(self):
        with pytest.raises(DataError):
            Vocabulary(("a", "a"))


class TestTfidf:
    def test_single_doc_single_term(self):
        vocab = Vocabulary(("mask",))
        X = build_tfidf([["mask"]], vocab)
        assert X.toarray()[0] == pytest.approx([1.0], abs=1e-12)

    def test_two_doc_hand_computation(self):
        # m=2; idf(mask)=ln(3/3)+1=1, idf(vaccine)=ln(3/2)+1
        vocab = Vocabulary(("mask", "vaccine"))
        X = build_tfidf([["mask"], ["mask", "vaccine"]], vocab).toarray()
        idf_vaccine = math.log(3 / 2) + 1
        assert idf_vaccine == pytest.approx(1.405465, abs=1e-6)
        raw = np.array([1.0, idf_vaccine])
        expected = raw / np.linalg.norm(raw)
        assert X[1] == pytest.approx(expected, abs=1e-12)
        assert expected == pytest.approx([0.579739, 0.814802], abs=1e-6)

    def test_out_of_vocabulary_doc_zero_row(self):
        vocab = Vocabulary(("mask",))
        X = build_tfidf([["zzz"]], vocab).toarray()
        assert (X == 0).all()

    def test_nonzero_rows_unit_norm(self):
        rng = np.random.default_rng(3)
        terms = [f"t{i}" for i in range(12)]
        docs = [
            [terms[int(rng.integers(len(terms)))] for _ in range(int(rng.integers(1, 8)))]
            for _ in range(30)
        ]
        X = build_tfidf(docs, build_vocabulary(docs, 12)).toarray()
        norms = np.linalg.norm(X, axis=1)
        for norm in norms:
            assert norm == pytest.approx(1.0, abs=1e-12) or norm == 0.0

    def test_term_frequency_is_raw_count(self):
        vocab = Vocabulary(("mask", "vaccine"))
        X = build_tfidf([["mask", "mask", "vaccine"]], vocab).toarray()
        # tf 2 vs 1, same idf -> ratio of entries is exactly 2
        assert X[0, 0] / X[0, 1] == pytest.approx(2.0, abs=1e-12)


class TestNmf:
    def test_identity_exact_factorization(self):
        X = np.eye(2)
        model, errors = nmf_fit(X, u=2, max_iters=2000, tol=0.0, seed=0)
        assert errors[-1] < 1e-6

    def test_all_zero_matrix(self):
        X = np.zeros((3, 4))
        model, errors = nmf_fit(X, u=2, max_iters=10, tol=0.0, seed=0)
        assert errors[-1] == pytest.approx(0.0, abs=1e-12)
        assert np.abs(model.W @ model.H).max() == pytest.approx(0.0, abs=1e-12)

    def test_error_sequence_non_increasing(self):
        rng = np.random.default_rng(4)
        for trial in range(5):
            X = rng.random((20, 15))
            _, errors = nmf_fit(X, u=4, max_iters=300, tol=0.0, seed=trial)
            diffs = np.diff(errors)
            assert (diffs <= 1e-10).all()

    def test_factors_stay_nonnegative(self):
        rng = np.random.default_rng(5)
        X = rng.random((10, 8))
        model, _ = nmf_fit(X, u=3, max_iters=200, tol=0.0, seed=1)
        assert (model.W >= 0).all() and (model.H >= 0).all()

    def test_same_seed_bit_identical(self):
        rng = np.random.default_rng(6)
        X = rng.random((12, 9))
        a, _ = nmf_fit(X, u=3, max_iters=50, tol=0.0, seed=9)
        b, _ = nmf_fit(X, u=3, max_iters=50, tol=0.0, seed=9)
        assert (a.W == b.W).all() and (a.H == b.H).all()

    def test_sparse_input_supported(self):
        rng = np.random.default_rng(7)
        dense = rng.random((15, 10)) * (rng.random((15, 10)) < 0.3)
        _, errors = nmf_fit(sp.csr_matrix(dense), u=3, max_iters=100, tol=0.0, seed=2)
        assert (np.diff(errors) <= 1e-10).all()

    def test_topic_count_out_of_range(self):
        with pytest.raises(DataError):
            nmf_fit(np.eye(3), u=4)
        with pytest.raises(DataError):
            nmf_fit(np.eye(3), u=0)


class TestTopicKeywords:
    def _model(self, H):
        H = np.asarray(H, dtype=float)
        vocab = Vocabulary(tuple(f"term{i}" for i in range(H.shape[1])))
        W = np.ones((2, H.shape[0]))
        return NmfModel(W=W, H=H, vocabulary=vocab)

    def test_weights_normalized_by_row_max(self):
        model = self._model([[0.0, 5.0, 10.0]])
        assert topic_keywords(model, 2) == [[("term2", 1.0), ("term1", 0.5)]]

    def test_uniform_row_tie_breaks_lexicographically(self):
        model = self._model([[1.0, 1.0, 1.0]])
        assert topic_keywords(model, 1) == [[("term0", 1.0)]]

    def test_zero_row_yields_empty(self):
        model = self._model([[0.0, 0.0, 0.0]])
        assert topic_keywords(model, 2) == [[]]

    def test_k_exceeding_vocab_rejected(self):
        with pytest.raises(DataError):
            topic_keywords(self._model([[1.0, 2.0, 3.0]]), 4)


class TestAssignTopics:
    def _model(self, W):
        W = np.asarray(W, dtype=float)
        H = np.ones((W.shape[1], 3))
        return NmfModel(W=W, H=H, vocabulary=Vocabulary(("a", "b", "c")))

    def test_dominant_topic_only(self):
        model = self._model([[0.9, 0.1]])
        assignments, skipped = assign_topics(model, 0.5)
        assert assignments == [[(0, 1.0)]] and skipped == []

    def test_tied_topics_both_kept(self):
        model = self._model([[0.6, 0.6]])
        assignments, _ = assign_topics(model, 0.5)
        assert assignments == [[(0, 1.0), (1, 1.0)]]

    def test_hand_arithmetic(self):
        model = self._model([[0.8, 0.5, 0.1]])
        assignments, _ = assign_topics(model, 0.5)
        assert assignments == [[(0, 1.0), (1, pytest.approx(0.625, abs=1e-12))]]

    def test_zero_row_reported_not_assigned(self):
        model = self._model([[0.0, 0.0], [0.3, 0.1]])
        assignments, skipped = assign_topics(model, 0.5)
        assert assignments[0] == [] and skipped == [0]
        assert assignments[1] == [(0, 1.0)]

    def test_weights_in_unit_interval_argmax_one(self):
        rng = np.random.default_rng(8)
        model = self._model(rng.random((20, 4)))
        assignments, _ = assign_topics(model, 0.3)
        for members in assignments:
            weights = dict(members)
            assert max(weights.values()) == 1.0
            assert all(0 < w <= 1 for w in weights.values())

    def test_dominance_out_of_range(self):
        with pytest.raises(DataError):
            assign_topics(self._model([[1.0]]), 0.0)


class TestPersistence:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(9)
        vocab = Vocabulary(("alpha", "beta", "gamma"))
        model, _ = nmf_fit(rng.random((6, 3)), u=2, max_iters=20, seed=3, vocabulary=vocab)
        vocab_path = tmp_path / "vocab.txt"
        model_path = tmp_path / "model.bin"
        save_vocabulary(vocab, vocab_path)
        save_nmf(model, model_path)
        vocab2 = load_vocabulary(vocab_path)
        model2 = load_nmf(model_path, vocab2)
        assert vocab2.terms == vocab.terms
        assert (model2.W == model.W).all() and (model2.H == model.H).all()

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.bin"
        path.write_bytes(b"other-magic v1\n" + b"\x00" * 24)
        with pytest.raises(DataError, match="magic"):
            load_nmf(path, Vocabulary(("a",)))

    def test_truncated_payload(self, tmp_path):
        rng = np.random.default_rng(10)
        vocab = Vocabulary(("a", "b"))
        model, _ = nmf_fit(rng.random((4, 2)), u=2, max_iters=5, seed=0, vocabulary=vocab)
        path = tmp_path / "model.bin"
        save_nmf(model, path)
        path.write_bytes(path.read_bytes()[:-9])
        with pytest.raises(DataError, match="truncated"):
            load_nmf(path, vocab)
