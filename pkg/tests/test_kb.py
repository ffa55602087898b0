"""Soft KB attention tests: table encoding, entry scoring, fused memory."""

import numpy as np
import pytest

from conftest import fd_max_rel_error, make_kb, make_vocab, np_softmax
from kbdialog import autodiff as ad
from kbdialog import encoder, kb
from kbdialog.model import DialogueModel, ModelConfig


COLS2 = ("poi", "address")
WORDS = ["valero", "chevron", "teavana", "200_alester_ave", "783_arcadia_pl",
         "145_amherst_st", "where", "is", "the"]


@pytest.fixture
def vocab():
    return make_vocab(WORDS, COLS2)


def _emb_wc(vocab, d=2, seed=0):
    rng = np.random.default_rng(seed)
    emb = ad.param(rng.normal(size=(vocab.extended_size, d)) * 0.5)
    wc = ad.param(rng.normal(size=(d, 2 * d)) * 0.5)
    return emb, wc


def test_single_cell_table(vocab):
    emb, wc = _emb_wc(vocab)
    kb1 = make_kb(("poi",), [{"poi": "valero"}])
    cells = kb.encode_table(emb, wc, kb1, vocab)
    assert cells.value.shape == (2, 1, 1)


def test_changing_one_cell_changes_only_that_column(vocab):
    emb, wc = _emb_wc(vocab)
    rows_a = [{"poi": "valero", "address": "200_alester_ave"},
              {"poi": "chevron", "address": "783_arcadia_pl"}]
    rows_b = [{"poi": "valero", "address": "200_alester_ave"},
              {"poi": "chevron", "address": "145_amherst_st"}]
    ca = kb.encode_table(emb, wc, make_kb(COLS2, rows_a), vocab).value
    cb = kb.encode_table(emb, wc, make_kb(COLS2, rows_b), vocab).value
    assert np.array_equal(ca[:, 0, :], cb[:, 0, :])
    assert np.array_equal(ca[:, 1, 0], cb[:, 1, 0])
    assert not np.allclose(ca[:, 1, 1], cb[:, 1, 1])


def test_cell_representation_matches_hand_computation(vocab):
    emb, wc = _emb_wc(vocab, d=2, seed=3)
    table = make_kb(COLS2, [{"poi": "valero", "address": "200_alester_ave"}])
    cells = kb.encode_table(emb, wc, table, vocab).value
    for j, col in enumerate(COLS2):
        v = emb.value[vocab.id_of(table.rows[0][col])]
        f = emb.value[vocab.id_of(col)]
        expect = np.tanh(wc.value @ np.concatenate([v, f]))
        assert np.allclose(cells[:, 0, j], expect, atol=1e-12)


def test_unknown_cell_value_uses_unk_embedding(vocab):
    emb, wc = _emb_wc(vocab)
    t1 = make_kb(COLS2, [{"poi": "never_seen_token", "address": "200_alester_ave"}])
    t2 = make_kb(COLS2, [{"poi": "<unk>", "address": "200_alester_ave"}])
    c1 = kb.encode_table(emb, wc, t1, vocab).value
    c2 = kb.encode_table(emb, wc, t2, vocab).value
    assert np.array_equal(c1, c2)


def test_column_mismatch_rejected(vocab):
    emb, wc = _emb_wc(vocab)
    table = make_kb(("poi", "distance"), [{"poi": "valero", "distance": "2_miles"}])
    with pytest.raises(ValueError, match="columns"):
        kb.encode_table(emb, wc, table, vocab, columns=COLS2)


def test_empty_kb_rejected(vocab):
    emb, wc = _emb_wc(vocab)
    with pytest.raises(ValueError, match="empty KB"):
        kb.encode_table(emb, wc, make_kb(COLS2, []), vocab)


# -----------------------------------------------------------------------------
# querying
# -----------------------------------------------------------------------------


def _query_fixture(d=2, m=2, t=3, seed=11):
    rng = np.random.default_rng(seed)
    cells = ad.constant(rng.normal(size=(d, t, m)))
    u_in = ad.constant(rng.normal(size=(d, m)))
    wcat = ad.constant(rng.normal(size=(d, 2 * d)))
    return cells, u_in, wcat


def test_single_entry_gets_probability_one(vocab):
    cells, u_in, wcat = _query_fixture(t=1)
    probs, u_kb, _ = kb.query(cells, u_in, wcat)
    assert np.allclose(probs.value, [1.0])
    assert np.allclose(u_kb.value, cells.value[:, 0, :], atol=1e-12)


def test_identical_entries_split_probability():
    rng = np.random.default_rng(2)
    one = rng.normal(size=(2, 1, 3))
    cells = ad.constant(np.concatenate([one, one], axis=1))
    probs, _, _ = kb.query(cells, ad.constant(rng.normal(size=(2, 3))),
                           ad.constant(rng.normal(size=(2, 4))))
    assert np.allclose(probs.value, [0.5, 0.5], atol=1e-12)


def test_query_matches_brute_force_script():
    # d=2, m=2, |T|=3 fixed values against an independent straight-line script
    cells, u_in, wcat = _query_fixture()
    c, u, w = cells.value, u_in.value, wcat.value
    sim = np.zeros(3)
    for k in range(3):
        for t in range(2):
            sim[k] += c[:, k, t] @ u[:, t]
    probs = np_softmax(sim)
    u_kb = np.zeros((2, 2))
    for k in range(3):
        u_kb += probs[k] * c[:, k, :]
    u_cat = np.concatenate([u, u_kb], axis=0)
    memory = np.tanh(w @ u_cat)

    got_probs, got_ukb, got_u = kb.query(cells, u_in, wcat)
    assert np.allclose(got_probs.value, probs, atol=1e-12)
    assert np.allclose(got_ukb.value, u_kb, atol=1e-12)
    assert np.allclose(got_u.value, memory, atol=1e-12)


def test_entry_scores_are_shift_invariant():
    cells, u_in, wcat = _query_fixture()
    c, u = cells.value, u_in.value
    sim = np.einsum("dkt,dt->k", c, u)
    probs, _, _ = kb.query(cells, u_in, wcat)
    assert np.allclose(probs.value, np_softmax(sim + 123.0), atol=1e-12)


def test_row_shuffle_permutes_probs_and_preserves_ukb():
    cells, u_in, wcat = _query_fixture(t=4, seed=8)
    perm = [3, 0, 2, 1]
    shuffled = ad.constant(cells.value[:, perm, :])
    p1, ukb1, u1 = kb.query(cells, u_in, wcat)
    p2, ukb2, u2 = kb.query(shuffled, u_in, wcat)
    assert np.allclose(p2.value, p1.value[perm], atol=1e-12)
    assert np.allclose(ukb2.value, ukb1.value, atol=1e-12)
    assert np.allclose(u2.value, u1.value, atol=1e-12)


def test_parameter_shapes_independent_of_kb_size(vocab):
    model = DialogueModel(vocab, ModelConfig(dim=3, columns=COLS2),
                          rng=np.random.default_rng(0))
    shapes_before = {k: v.value.shape for k, v in model.params.items()}
    small = make_kb(COLS2, [{"poi": "valero", "address": "200_alester_ave"},
                            {"poi": "chevron", "address": "783_arcadia_pl"}])
    big = make_kb(COLS2, [{"poi": "valero", "address": "200_alester_ave"},
                          {"poi": "chevron", "address": "783_arcadia_pl"},
                          {"poi": "teavana", "address": "145_amherst_st"},
                          {"poi": "chevron", "address": "145_amherst_st"},
                          {"poi": "teavana", "address": "783_arcadia_pl"}])
    t1 = model.encode_turn(["where", "is", "the", "valero"], small)
    t2 = model.encode_turn(["where", "is", "the", "valero"], big)
    assert t1.entry_probs.value.shape == (2,)
    assert t2.entry_probs.value.shape == (5,)
    assert t1.memory.value.shape == t2.memory.value.shape == (3, 2)
    assert {k: v.value.shape for k, v in model.params.items()} == shapes_before


def test_entry_probs_gradient_wrt_state_weights(vocab):
    # sim must be differentiable end to end: FD through encoder + W_a + W_c
    model = DialogueModel(vocab, ModelConfig(dim=3, columns=COLS2),
                          rng=np.random.default_rng(4))
    table = make_kb(COLS2, [{"poi": "valero", "address": "200_alester_ave"},
                            {"poi": "chevron", "address": "783_arcadia_pl"}])
    ids = vocab.encode(["where", "is", "the", "valero"])
    p = model.params

    def build(leaves):
        h, _ = encoder.encode_sequence(p["emb"], p["enc_w"], p["enc_b"], ids)
        u_in, _ = encoder.state_representation(leaves[0], h)
        cells = kb.encode_table(p["emb"], p["wc"], table, vocab)
        probs, _, _ = kb.query(cells, u_in, p["wcat"])
        return ad.pick(probs, 0)

    assert fd_max_rel_error(build, [p["wa"].value.copy()]) < 1e-4
