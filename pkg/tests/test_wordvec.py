import gzip
import io
import math

import numpy as np
import pytest

from covkg.errors import DataError
from covkg.wordvec import WordVectors, best_keyword_link, cosine, load_vectors


def vectors_from(mapping):
    wv = WordVectors()
    for token, vec in mapping.items():
        wv.add(token, np.array(vec, dtype=float))
    return wv


class TestLoadVectors:
    def test_two_rows(self):
        wv = load_vectors(io.StringIO("cat 1 0 0\ndog 0 1 0\n"))
        assert len(wv) == 2 and wv.dim == 3

    def test_header_recognized(self):
        wv = load_vectors(io.StringIO("2 3\ncat 1 0 0\ndog 0 1 0\n"))
        assert len(wv) == 2 and wv.dim == 3

    def test_dimension_mismatch(self):
        with pytest.raises(DataError, match="dimension"):
            load_vectors(io.StringIO("cat 1 0 0\ndog 0 1 0 0\n"))

    def test_non_numeric_component(self):
        with pytest.raises(DataError, match="non-numeric"):
            load_vectors(io.StringIO("cat 1 x 0\n"))

    def test_empty_file(self):
        wv = load_vectors(io.StringIO(""))
        assert len(wv) == 0 and wv.dim is None

    def test_gzip_input(self, tmp_path):
        path = tmp_path / "vecs.txt.gz"
        with gzip.open(path, "wt", encoding="utf-8") as fh:
            fh.write("cat 1 0\ndog 0 1\n")
        wv = load_vectors(str(path))
        assert len(wv) == 2


class TestCosine:
    def test_identity(self):
        wv = vectors_from({"x": [2.0, 3.0, -1.0]})
        assert cosine("x", "x", wv) == pytest.approx(1.0, abs=1e-12)

    def test_orthogonal(self):
        wv = vectors_from({"a": [1, 0], "b": [0, 1]})
        assert cosine("a", "b", wv) == 0.0

    def test_hand_value(self):
        wv = vectors_from({"a": [1, 1], "b": [1, 0]})
        assert cosine("a", "b", wv) == pytest.approx(math.sqrt(2) / 2, abs=1e-12)
        assert cosine("a", "b", wv) == pytest.approx(0.707107, abs=1e-6)

    def test_symmetry_and_scale_invariance(self):
        rng = np.random.default_rng(1)
        for _ in range(25):
            va, vb = rng.normal(size=4), rng.normal(size=4)
            wv = vectors_from({"a": va, "b": vb, "a2": 7.5 * va})
            assert cosine("a", "b", wv) == pytest.approx(cosine("b", "a", wv), abs=1e-12)
            assert cosine("a2", "b", wv) == pytest.approx(cosine("a", "b", wv), abs=1e-12)

    def test_missing_token(self):
        wv = vectors_from({"a": [1, 0]})
        with pytest.raises(DataError):
            cosine("a", "zzz", wv)

    def test_zero_vector(self):
        wv = vectors_from({"a": [1, 0], "z": [0, 0]})
        with pytest.raises(DataError, match="zero vector"):
            cosine("a", "z", wv)


class TestBestKeywordLink:
    def test_exact_token_match_wins_with_weight_one(self):
        wv = vectors_from({"mask": [1, 0], "vaccine": [0, 1], "city": [0.6, 0.8]})
        link = best_keyword_link(["city", "mask"], ["mask", "vaccine"], wv)
        assert link == ("mask", pytest.approx(1.0, abs=1e-12))

    def test_no_vectors_means_none(self):
        wv = vectors_from({"other": [1, 0]})
        assert best_keyword_link(["aaa"], ["bbb"], wv) is None

    def test_exhaustive_pair_comparison(self):
        wv = vectors_from(
            {"a": [1, 0], "b": [0.9, 0.1], "k1": [0.5, 0.5], "k2": [1, 0.05]}
        )
        # oracle: enumerate all four cosines by hand
        pairs = {}
        for tok in ("a", "b"):
            for kw in ("k1", "k2"):
                pairs[(tok, kw)] = cosine(tok, kw, wv)
        best_pair = max(pairs, key=pairs.get)
        link = best_keyword_link(["a", "b"], ["k1", "k2"], wv)
        assert link[0] == best_pair[1]
        assert link[1] == pytest.approx(max(0.0, min(1.0, pairs[best_pair])), abs=1e-12)

    def test_negative_cosine_clamped_to_zero(self):
        wv = vectors_from({"a": [1, 0], "k": [-1, 0]})
        link = best_keyword_link(["a"], ["k"], wv)
        assert link == ("k", 0.0)

    def test_tie_breaks_to_smallest_keyword(self):
        wv = vectors_from({"tok": [1, 0], "kb": [1, 0], "ka": [1, 0]})
        link = best_keyword_link(["tok"], ["kb", "ka"], wv)
        assert link[0] == "ka"

    def test_weight_always_in_unit_interval(self):
        rng = np.random.default_rng(2)
        for _ in range(25):
            wv = vectors_from(
                {name: rng.normal(size=3) for name in ("t1", "t2", "k1", "k2")}
            )
            link = best_keyword_link(["t1", "t2"], ["k1", "k2"], wv)
            assert link is not None and 0.0 <= link[1] <= 1.0
