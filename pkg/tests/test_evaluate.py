"""Metric tests: entity F1 against hand-computed values, BLEU against an
independent accumulator-style reference implementation."""

import math
import random
from collections import Counter

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_kb
from kbdialog.corpus import NAVIGATION_COLUMNS, join_entities, tokenize
from kbdialog.evaluate import corpus_bleu, entity_f1, extract_entities


# -----------------------------------------------------------------------------
# entity extraction
# -----------------------------------------------------------------------------

FIG4_ROW = {"poi": "chevron", "traffic_info": "moderate_traffic",
            "poi_type": "gas_station", "address": "783_arcadia_pl",
            "distance": "5_miles"}


def test_no_entities_in_chitchat():
    kb = make_kb(NAVIGATION_COLUMNS, [FIG4_ROW])
    assert extract_entities(["thank", "you"], kb.value_tokens()) == set()


def test_address_reply_yields_single_entity():
    kb = make_kb(NAVIGATION_COLUMNS, [FIG4_ROW])
    reply = "the address is 783 arcadia pl , i sent on your screen the best route ."
    tokens = join_entities(tokenize(reply), kb)
    assert extract_entities(tokens, kb.value_tokens()) == {"783_arcadia_pl"}


def test_repeated_value_counts_once():
    kb = make_kb(NAVIGATION_COLUMNS, [FIG4_ROW])
    tokens = ["chevron", "is", "chevron", "yes", "chevron"]
    ents = extract_entities(tokens, kb.value_tokens())
    assert ents == {"chevron"}
    micro, macro = entity_f1([({"chevron"}, ents)])
    assert micro == macro == 100.0


# -----------------------------------------------------------------------------
# entity F1
# -----------------------------------------------------------------------------


def test_perfect_predictions_score_100():
    pairs = [({"a", "b"}, {"a", "b"}), ({"c"}, {"c"})]
    assert entity_f1(pairs) == (100.0, 100.0)


def test_partial_recall_gives_two_thirds():
    micro, macro = entity_f1([({"a", "b"}, {"a"})])
    assert micro == pytest.approx(200 / 3)
    assert macro == pytest.approx(200 / 3)


def test_three_instance_fixture_matches_hand_computation():
    # by hand: micro TP=2 FP=0 FN=1 -> 80.0; macro mean(2/3, 1) over the two
    # instances with entities (the empty/empty one is deleted) -> 83.333...
    pairs = [({"a", "b"}, {"a"}), (set(), set()), ({"c"}, {"c"})]
    micro, macro = entity_f1(pairs)
    assert micro == pytest.approx(80.0)
    assert macro == pytest.approx(250.0 / 3)


def test_empty_gold_with_prediction_scores_zero_but_counts():
    micro, macro = entity_f1([(set(), {"a"}), ({"b"}, {"b"})])
    assert micro == pytest.approx(2 * 1 / (2 * 1 + 1 + 0) * 100)
    assert macro == pytest.approx(50.0)
    # and symmetrically for missed gold
    micro2, macro2 = entity_f1([({"a"}, set()), ({"b"}, {"b"})])
    assert (micro2, macro2) == (micro, macro)


def test_micro_f1_invariant_under_reordering():
    pairs = [({"a", "b"}, {"a"}), ({"c"}, {"c", "d"}), (set(), {"e"})]
    base = entity_f1(pairs)
    for _ in range(5):
        random.shuffle(pairs)
        assert entity_f1(pairs) == base


def test_removing_doubly_empty_instance_changes_nothing():
    pairs = [({"a"}, {"a"}), ({"b"}, set())]
    assert entity_f1(pairs + [(set(), set())]) == entity_f1(pairs)


def test_empty_corpus_rejected():
    with pytest.raises(ValueError):
        entity_f1([])


@given(st.lists(
    st.tuples(st.sets(st.sampled_from("abcdef")), st.sets(st.sampled_from("abcdef"))),
    min_size=1, max_size=20))
@settings(max_examples=100, deadline=None)
def test_f1_bounds_and_empty_deletion(pairs):
    micro, macro = entity_f1(pairs)
    assert 0.0 <= micro <= 100.0
    assert 0.0 <= macro <= 100.0
    assert entity_f1(pairs + [(set(), set())]) == (micro, macro)


# -----------------------------------------------------------------------------
# BLEU
# -----------------------------------------------------------------------------


def _reference_bleu(parallel):
    """Independent oracle in the classical dialogue-toolkit accumulator style."""
    count = [0, 0, 0, 0]
    clip_count = [0, 0, 0, 0]
    r = c = 0
    for hyp, ref in parallel:
        for i in range(4):
            hypcnts = Counter(tuple(hyp[j:j + i + 1]) for j in range(len(hyp) - i))
            count[i] += sum(hypcnts.values())
            refcnts = Counter(tuple(ref[j:j + i + 1]) for j in range(len(ref) - i))
            clip_count[i] += sum(min(v, refcnts[ng]) for ng, v in hypcnts.items())
        r += len(ref)
        c += len(hyp)
    bp = 1 if c > r else math.exp(1 - float(r) / float(c))
    s = math.fsum(0.25 * math.log(float(clip_count[i]) / count[i]) for i in range(4))
    return bp * math.exp(s) * 100


CAND = ["the address is 200_alester_ave .".split(),
        "there is a road block nearby on the way".split()]
REF = ["the address is 200_alester_ave .".split(),
       "there is road block nearby on your way today".split()]


def test_identical_corpus_scores_100():
    assert corpus_bleu(REF, REF) == pytest.approx(100.0)


def test_zero_fourgram_overlap_is_near_zero():
    cands = ["a b c d e".split(), "f g h i".split()]
    refs = ["a x b y c".split(), "f q g w".split()]
    assert corpus_bleu(cands, refs) <= 1.0


def test_two_sentence_fixture_matches_reference_implementation():
    ours = corpus_bleu(CAND, REF)
    oracle = _reference_bleu(list(zip(CAND, REF)))
    assert ours == pytest.approx(oracle, abs=0.1)
    # frozen from the oracle above
    assert ours == pytest.approx(57.2124842, abs=1e-4)


def test_bleu_symmetric_under_corpus_permutation():
    base = corpus_bleu(CAND, REF)
    assert corpus_bleu(CAND[::-1], REF[::-1]) == pytest.approx(base, abs=1e-12)


def test_bleu_rejects_empty_or_mismatched_input():
    with pytest.raises(ValueError):
        corpus_bleu([], [])
    with pytest.raises(ValueError):
        corpus_bleu(CAND, REF[:1])


def test_brevity_penalty_punishes_short_candidates():
    full = corpus_bleu([["a", "b", "c", "d", "e", "f"]], [["a", "b", "c", "d", "e", "f"]])
    short = corpus_bleu([["a", "b", "c", "d"]], [["a", "b", "c", "d", "e", "f"]])
    assert short < full
    assert short == pytest.approx(100 * math.exp(1 - 6 / 4), abs=1e-9)
