import io
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from covkg.errors import DataError
from covkg.sentiment import (
    aspect_scores,
    demo_lexicon,
    load_lexicon,
    score_text,
    split_clauses,
)

_PUNCT = set(".,;:!?")


def squash(v):
    return v / math.sqrt(v * v + 15.0)


class TestSplitClauses:
    def test_no_separators(self):
        assert [c.text for c in split_clauses("I love this")] == ["I love this"]

    def test_conjunction_starts_following_clause(self):
        clauses = [c.text for c in split_clauses("I love vaccines, but I hate masks")]
        assert clauses == ["I love vaccines,", "but I hate masks"]

    def test_empty(self):
        assert split_clauses("") == []

    def test_punctuation_attaches_to_preceding(self):
        clauses = [c.text for c in split_clauses("Great news! Cases dropped.")]
        assert clauses == ["Great news!", "Cases dropped."]

    def test_conjunction_inside_word_not_split(self):
        assert [c.text for c in split_clauses("sand or butter")] == ["sand", "or butter"]
        assert [c.text for c in split_clauses("sandwiches forever")] == [
            "sandwiches forever"
        ]

    def test_separator_only_clauses_dropped(self):
        assert [c.text for c in split_clauses("GO!! , ?")] == ["GO!"]

    def test_positions_are_ordered(self):
        clauses = split_clauses("one, two; three")
        assert [c.position for c in clauses] == [0, 1, 2]

    @settings(max_examples=200, deadline=None)
    @given(st.text(max_size=120))
    def test_no_content_characters_lost(self, text):
        kept = "".join(c.text for c in split_clauses(text))
        expected = [ch for ch in text if ch not in _PUNCT and not ch.isspace()]
        got = [ch for ch in kept if ch not in _PUNCT and not ch.isspace()]
        assert got == expected


class TestScoreText:
    def test_empty_is_zero(self):
        assert score_text("", {"good": 2.0}) == 0.0

    def test_positive_token(self):
        # v=2 -> 2/sqrt(4+15)
        expected = squash(2.0)
        assert score_text("good", {"good": 2.0}) == pytest.approx(expected, abs=1e-12)
        assert expected == pytest.approx(0.458831, abs=1e-6)

    def test_negation_flips(self):
        assert score_text("not good", {"good": 2.0}) == pytest.approx(
            -squash(2.0), abs=1e-12
        )

    def test_negation_window_is_two_tokens(self):
        lex = {"good": 2.0}
        assert score_text("not very good", lex) < 0
        assert score_text("not at all good", lex) > 0

    def test_score_strictly_inside_unit_interval(self):
        lex = {"good": 4.0, "bad": -4.0}
        s = score_text("good good good good good", lex)
        assert 0 < s < 1
        s = score_text("bad bad bad bad bad", lex)
        assert -1 < s < 0

    def test_sign_matches_valence_sum(self):
        lex = {"good": 1.0, "bad": -3.0}
        assert score_text("good bad", lex) < 0

    def test_odd_in_lexicon(self):
        lex = {"good": 2.0, "bad": -1.5}
        neg = {k: -v for k, v in lex.items()}
        for text in ("good day", "bad bad", "not good but bad"):
            assert score_text(text, neg) == pytest.approx(-score_text(text, lex), abs=1e-12)


class TestAspectScores:
    LEX = {"love": 3.0, "hate": -3.0}

    def test_two_clause_symmetry(self):
        scores = aspect_scores(
            "I love vaccines, but I hate masks", ["vaccines", "masks"], self.LEX
        )
        expected = squash(3.0)  # single scored token per clause
        assert scores["vaccines"] == pytest.approx(expected, abs=1e-12)
        assert scores["masks"] == pytest.approx(-expected, abs=1e-12)
        assert abs(abs(scores["vaccines"]) - abs(scores["masks"])) < 1e-12

    def test_absent_aspect_absent_key(self):
        scores = aspect_scores("I love vaccines", ["masks"], self.LEX)
        assert scores == {}

    def test_opposite_clauses_average_to_zero(self):
        text = "masks love, masks hate"
        scores = aspect_scores(text, ["masks"], self.LEX)
        assert scores["masks"] == pytest.approx(0.0, abs=1e-12)

    def test_single_clause_aspect_equals_clause_score(self):
        text = "I love vaccines, but I hate masks"
        scores = aspect_scores(text, ["vaccines"], self.LEX)
        clause_score = score_text("I love vaccines,", self.LEX)
        assert scores["vaccines"] == clause_score

    def test_mean_over_all_containing_clauses(self):
        text = "love masks, hate masks, love vaccines"
        scores = aspect_scores(text, ["masks", "vaccines"], self.LEX)
        assert scores["masks"] == pytest.approx(
            (squash(3.0) + squash(-3.0)) / 2, abs=1e-12
        )
        assert scores["vaccines"] == pytest.approx(squash(3.0), abs=1e-12)

    def test_odd_in_lexicon(self):
        text = "I love vaccines, but I hate masks"
        pos = aspect_scores(text, ["vaccines", "masks"], self.LEX)
        neg = aspect_scores(text, ["vaccines", "masks"], {k: -v for k, v in self.LEX.items()})
        for aspect in pos:
            assert neg[aspect] == pytest.approx(-pos[aspect], abs=1e-12)


class TestLexiconIO:
    def test_tab_separated(self):
        lex = load_lexicon(io.StringIO("good\t1.9\nbad\t-2.5\n# note\n"))
        assert lex == {"good": 1.9, "bad": -2.5}

    def test_extra_columns_ignored(self):
        lex = load_lexicon(io.StringIO("good\t1.9\t0.80623\t[2, 1, 3]\n"))
        assert lex == {"good": 1.9}

    def test_bad_valence_rejected(self):
        with pytest.raises(DataError):
            load_lexicon(io.StringIO("good\toops\n"))

    def test_demo_lexicon_loads(self):
        lex = demo_lexicon()
        assert lex["love"] > 0 > lex["hate"]
        assert all(t == t.lower() for t in lex)
