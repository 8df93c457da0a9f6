import pytest
from hypothesis import given, settings, strategies as st

from oracles import brute_edit, brute_f1
from wcnslu.lattice import ScoredHypothesis
from wcnslu.metrics import (EditAlignment, EmptyLabelSet, EmptyNBest, EmptyReference, edit_align,
                            exact_match, match_intent, normalize_answer, select_oracle,
                            tokenize_transcript, unigram_f1, wer)

ATIS = ["abbreviation", "aircraft", "airfare", "airline", "airport", "capacity", "city", "day_name",
        "distance", "flight", "flight_no", "flight_time", "ground_fare", "ground_service", "meal",
        "quantity", "restriction"]


def test_edit_align_examples():
    ref = "how many total yards".split()
    assert edit_align(ref, ref) == EditAlignment(0, 0, 0, 4, 4)
    assert edit_align("how many towel yards".split(), ref) == EditAlignment(1, 0, 0, 3, 4)
    assert edit_align([], "a b c".split()) == EditAlignment(0, 3, 0, 0, 3)
    assert edit_align("a b c".split(), []) == EditAlignment(0, 0, 3, 0, 0)


def test_edit_align_prefers_hits():
    # "a b" vs "b a": cost 2 either as two substitutions or as one deletion + one insertion
    assert edit_align(["b", "a"], ["a", "b"]) == EditAlignment(0, 1, 1, 1, 2)


def test_wer_examples():
    assert wer("a b".split(), "a b".split()) == 0.0
    assert wer("how many towel yards".split(), "how many total yards".split()) == 25.0
    assert wer("x a y b z".split(), "a b".split()) == 150.0
    with pytest.raises(EmptyReference):
        wer(["a"], [])


def test_tokenize_transcript():
    assert tokenize_transcript("How many total yards did Denver gain?") == \
        "how many total yards did denver gain".split()


def hyp(text, score):
    return ScoredHypothesis(tuple(text.split()), score)


def test_select_oracle():
    ref = "who did denver beat".split()
    only = hyp("who did them for beat", -1.0)
    assert select_oracle([only], ref) is only
    far, near = hyp("who did them for beat", -1.0), hyp("who did denver beating", -2.0)
    assert select_oracle([far, near], ref) is near
    a, b = hyp("who did denver beating", -5.0), hyp("who did denver meat", -4.0)
    assert select_oracle([a, b], ref) is b
    c, d = hyp("who did denver beating", -4.0), hyp("who did denver meat", -4.0)
    assert select_oracle([c, d], ref) is c
    with pytest.raises(EmptyNBest):
        select_oracle([], ref)


@pytest.mark.parametrize("text, tokens", [
    ("The New England Patriots!", ("new", "england", "patriots")),
    ("teach by rote", ("teach", "by", "rote")),
    ("", ()),
    ("  An   apple, a day. ", ("apple", "day")),
])
def test_normalize_answer(text, tokens):
    assert normalize_answer(text) == tokens


def test_unigram_f1():
    assert unigram_f1("teach by rote", "teach by rote") == 1.0
    assert unigram_f1(["nineteen", "hundred"], ["nineteen", "hundred"]) == 1.0
    assert unigram_f1(["a", "b", "c"], ["b", "c", "d"]) == pytest.approx(2 / 3, abs=1e-12)
    assert unigram_f1("", "") == 1.0
    assert unigram_f1("knock", "") == 0.0
    assert unigram_f1("x y", "y y") == pytest.approx(0.5)  # multiset overlap is 1


def test_exact_match():
    assert exact_match("The new england patriots", "new england patriots") == 1
    assert exact_match("knock", "teach by rote") == 0
    assert exact_match("", "") == 1
    assert exact_match("The Answer", "answer", normalize=False) == 0


def test_match_intent():
    assert match_intent("flight", ATIS) == "flight"
    assert match_intent(" Flight.", ATIS) == "flight"
    assert match_intent("The intent is airfare.", ATIS) == "airfare"
    assert match_intent("I cannot tell", ATIS) is None
    assert match_intent("flight_time", ATIS) == "flight_time"
    assert match_intent("it is flight_time, not flight", ATIS) == "flight_time"
    assert match_intent("city or airport", ATIS) == "city"
    assert match_intent("The intent is airfare.", ATIS, substring=False) is None
    with pytest.raises(EmptyLabelSet):
        match_intent("flight", [])


tokens = st.lists(st.sampled_from("a b c d the".split()), max_size=6)


@settings(max_examples=300, deadline=None)
@given(tokens, tokens)
def test_edit_align_matches_enumeration(h, r):
    al = edit_align(h, r)
    assert (al.substitutions, al.deletions, al.insertions, al.hits) == brute_edit(h, r)
    assert al.hits + al.substitutions + al.deletions == len(r)


@settings(max_examples=200, deadline=None)
@given(tokens, tokens, tokens)
def test_edit_distance_is_a_metric(x, y, z):
    d = lambda a, b: edit_align(a, b).errors  # noqa: E731
    assert d(x, y) == d(y, x)
    swapped = edit_align(y, x)
    assert edit_align(x, y).deletions + edit_align(x, y).insertions == \
        swapped.deletions + swapped.insertions
    assert d(x, z) <= d(x, y) + d(y, z)
    assert (d(x, y) == 0) == (x == y)


@settings(max_examples=200, deadline=None)
@given(tokens, tokens)
def test_f1_properties(p, g):
    assert unigram_f1(p, g) == pytest.approx(brute_f1(p, g), abs=1e-12)
    assert unigram_f1(p, g) == unigram_f1(g, p)
    assert exact_match(p, p) == 1
    assert exact_match(p, g) <= (unigram_f1(p, g) == 1.0)


@given(st.text(max_size=40))
def test_normalize_idempotent(s):
    once = normalize_answer(s)
    assert normalize_answer(" ".join(once)) == once
