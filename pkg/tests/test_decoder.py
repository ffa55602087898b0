"""Decoder tests: attentions, extended softmax, copy redistribution, greedy decode."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import fd_max_rel_error, make_kb, make_vocab, np_softmax
from kbdialog import autodiff as ad
from kbdialog import decoder as dec
from kbdialog.corpus import NAVIGATION_COLUMNS
from kbdialog.model import DialogueModel, ModelConfig


WORDS = ["where", "is", "the", "gas_station", "address", "to", "valero",
         "2_miles", "1_miles", "road_block_nearby", "located", "at"]


@pytest.fixture(scope="module")
def vocab():
    return make_vocab(WORDS, NAVIGATION_COLUMNS)


@pytest.fixture(scope="module")
def kb_fig1():
    return make_kb(NAVIGATION_COLUMNS, [
        {"poi": "valero", "traffic_info": "road_block_nearby", "poi_type": "gas_station",
         "address": "200_alester_ave", "distance": "2_miles"},
        {"poi": "teavana", "traffic_info": "road_block_nearby", "poi_type": "coffee_place",
         "address": "145_amherst_st", "distance": "1_miles"},
        {"poi": "willows_market", "traffic_info": "no_traffic", "poi_type": "grocery_store",
         "address": "409_bollard_st", "distance": "1_miles"},
    ])


def _attend(keys_v, w_v, v_v, h_v):
    keys = ad.constant(keys_v)
    w = ad.constant(w_v)
    d = h_v.shape[0]
    proj = ad.matmul(ad.narrow(w, 1, 0, d), keys)
    ctx, weights = dec.attention(keys, proj, ad.narrow(w, 1, d, 2 * d),
                                 ad.constant(v_v), ad.constant(h_v))
    return ctx.value, weights.value


# -----------------------------------------------------------------------------
# attentions
# -----------------------------------------------------------------------------


def test_single_key_attention_returns_that_key():
    rng = np.random.default_rng(0)
    keys = rng.normal(size=(3, 1))
    ctx, weights = _attend(keys, rng.normal(size=(3, 6)), rng.normal(size=3),
                           rng.normal(size=3))
    assert np.allclose(weights, [1.0])
    assert np.allclose(ctx, keys[:, 0], atol=1e-12)


def test_zero_score_vector_gives_uniform_mean():
    rng = np.random.default_rng(1)
    keys = rng.normal(size=(3, 5))
    ctx, weights = _attend(keys, rng.normal(size=(3, 6)), np.zeros(3),
                           rng.normal(size=3))
    assert np.allclose(weights, 0.2, atol=1e-12)
    assert np.allclose(ctx, keys.mean(axis=1), atol=1e-12)


def test_attention_matches_hand_computation():
    # d=2, n=3 fixed values: score_i = v . tanh(W [key_i; h])
    keys = np.array([[0.2, -0.5, 0.9], [0.4, 0.1, -0.7]])
    w = np.array([[0.3, -0.1, 0.5, 0.2], [-0.4, 0.6, 0.1, -0.3]])
    v = np.array([0.7, -0.2])
    h = np.array([0.25, -0.65])
    scores = np.array([v @ np.tanh(w @ np.concatenate([keys[:, i], h])) for i in range(3)])
    weights = np_softmax(scores)
    expect = keys @ weights
    ctx, got_w = _attend(keys, w, v, h)
    assert np.allclose(got_w, weights, atol=1e-12)
    assert np.allclose(ctx, expect, atol=1e-12)


# -----------------------------------------------------------------------------
# output distribution
# -----------------------------------------------------------------------------


def test_zero_output_projection_gives_uniform(vocab):
    d = 3
    n_out = vocab.extended_size
    probs = dec.output_distribution(ad.constant(np.zeros((n_out, 3 * d))),
                                    ad.constant(np.ones(d)), ad.constant(np.ones(d)),
                                    ad.constant(np.ones(d)))
    assert np.allclose(probs.value, 1.0 / n_out, atol=1e-15)


def test_output_distribution_sums_to_one(vocab):
    rng = np.random.default_rng(7)
    probs = dec.output_distribution(ad.constant(rng.normal(size=(vocab.extended_size, 9))),
                                    ad.constant(rng.normal(size=3)),
                                    ad.constant(rng.normal(size=3)),
                                    ad.constant(rng.normal(size=3)))
    assert abs(probs.value.sum() - 1.0) < 1e-12


def test_output_projection_gradient(vocab):
    rng = np.random.default_rng(8)
    h, ci, cm = rng.normal(size=3), rng.normal(size=3), rng.normal(size=3)
    wo = rng.normal(size=(vocab.extended_size, 9))

    def build(leaves):
        probs = dec.output_distribution(leaves[0], ad.constant(h),
                                        ad.constant(ci), ad.constant(cm))
        return ad.pick(probs, 2)

    assert fd_max_rel_error(build, [wo]) < 1e-4


# -----------------------------------------------------------------------------
# copy redistribution
# -----------------------------------------------------------------------------


def _dist(vocab, slot_mass: dict, base=None):
    """Extended distribution with given slot masses, rest spread over V."""
    x = np.zeros(vocab.extended_size)
    total = sum(slot_mass.values())
    if base is None:
        x[:vocab.size] = (1.0 - total) / vocab.size
    else:
        x[:vocab.size] = base
    for slot, mass in slot_mass.items():
        x[vocab.slot_id(slot)] = mass
    return x


def test_full_slot_mass_lands_on_attended_entry_value(vocab, kb_fig1):
    # all mass on <poi>, entry distribution one-hot on the Valero row
    entry = ad.constant(np.array([1.0, 0.0, 0.0]))
    ctx = dec.build_copy_context(kb_fig1, vocab, entry)
    ext = ad.constant(_dist(vocab, {"<poi>": 1.0}, base=np.zeros(vocab.size)))
    final = dec.copy_redistribute(ext, ctx)
    valero = ctx.final_id("valero", vocab)
    assert final.value[valero] == pytest.approx(1.0, abs=1e-12)
    assert final.value.sum() == pytest.approx(1.0, abs=1e-12)


def test_zero_slot_mass_keeps_vocab_distribution(vocab, kb_fig1):
    entry = ad.constant(np.array([0.2, 0.5, 0.3]))
    ctx = dec.build_copy_context(kb_fig1, vocab, entry)
    rng = np.random.default_rng(3)
    base = rng.random(vocab.size)
    base /= base.sum()
    final = dec.copy_redistribute(ad.constant(_dist(vocab, {}, base=base)), ctx)
    assert np.allclose(final.value[:vocab.size], base, atol=1e-12)
    assert np.allclose(final.value[vocab.size:], 0.0)


def test_shared_column_value_accumulates_both_entries(vocab, kb_fig1):
    # rows 2 and 3 both have distance 1_miles; slot mass 0.5 on <distance>,
    # entry probs 0.3/0.7 on those rows -> 1_miles gains 0.5*(0.3+0.7) = 0.5
    entry = ad.constant(np.array([0.0, 0.3, 0.7]))
    ctx = dec.build_copy_context(kb_fig1, vocab, entry)
    ext = _dist(vocab, {"<distance>": 0.5}, base=np.zeros(vocab.size))
    one_mile = vocab.id_of("1_miles")
    ext[one_mile] = 0.5  # rest of the mass sits on the token itself
    final = dec.copy_redistribute(ad.constant(ext), ctx)
    assert final.value[one_mile] == pytest.approx(0.5 + 0.5, abs=1e-12)
    assert final.value.sum() == pytest.approx(1.0, abs=1e-12)


def test_copying_only_adds_mass_to_in_vocab_values(vocab, kb_fig1):
    rng = np.random.default_rng(4)
    entry = ad.constant(np_softmax(rng.normal(size=3)))
    ctx = dec.build_copy_context(kb_fig1, vocab, entry)
    ext = np_softmax(rng.normal(size=vocab.extended_size))
    final = dec.copy_redistribute(ad.constant(ext), ctx).value
    for token in ("valero", "2_miles", "1_miles", "road_block_nearby"):
        tid = vocab.id_of(token)
        assert final[tid] >= ext[tid] - 1e-12


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=50, deadline=None)
def test_copy_conserves_probability_mass(vocab, kb_fig1, seed):
    rng = np.random.default_rng(seed)
    entry = ad.constant(np_softmax(rng.normal(size=3)))
    ctx = dec.build_copy_context(kb_fig1, vocab, entry)
    ext = np_softmax(rng.normal(size=vocab.extended_size))
    final = dec.copy_redistribute(ad.constant(ext), ctx).value
    assert final.sum() == pytest.approx(ext.sum(), abs=1e-9)
    assert np.all(final >= -1e-15)


def test_copy_is_linear_in_both_arguments(vocab, kb_fig1):
    rng = np.random.default_rng(9)
    e1, e2 = np_softmax(rng.normal(size=3)), np_softmax(rng.normal(size=3))
    x1 = np_softmax(rng.normal(size=vocab.extended_size))
    x2 = np_softmax(rng.normal(size=vocab.extended_size))
    a, b = 0.3, 0.7

    def run(entry_v, ext_v):
        ctx = dec.build_copy_context(kb_fig1, vocab, ad.constant(entry_v))
        return dec.copy_redistribute(ad.constant(ext_v), ctx).value

    # linear in the extended distribution
    mixed_ext = run(e1, a * x1 + b * x2)
    assert np.allclose(mixed_ext, a * run(e1, x1) + b * run(e1, x2), atol=1e-12)
    # linear in the entry distribution
    mixed_entry = run(a * e1 + b * e2, x1)
    assert np.allclose(mixed_entry, a * run(e1, x1) + b * run(e2, x1), atol=1e-12)


def test_extra_tokens_only_reachable_through_copying(vocab, kb_fig1):
    entry = ad.constant(np.array([1.0, 0.0, 0.0]))
    ctx = dec.build_copy_context(kb_fig1, vocab, entry)
    assert "200_alester_ave" in ctx.extra_tokens  # not in V
    ext = _dist(vocab, {}, base=np.full(vocab.size, 1.0 / vocab.size))
    final = dec.copy_redistribute(ad.constant(ext), ctx).value
    assert final[ctx.final_id("200_alester_ave", vocab)] == 0.0


# -----------------------------------------------------------------------------
# greedy decoding
# -----------------------------------------------------------------------------


def test_no_copy_config_decodes_over_vocab_only(vocab, kb_fig1):
    model = DialogueModel(vocab, ModelConfig(dim=4, columns=NAVIGATION_COLUMNS, no_copy=True),
                          rng=np.random.default_rng(0))
    assert model.params["wo"].value.shape[0] == vocab.size
    turn = model.encode_turn(["where", "is", "the", "gas_station"], kb_fig1)
    assert turn.copy is None
    step = model.decode_step(turn, vocab.id_of("<bos>"), turn.final_state)
    assert step.final is step.extended
    assert step.final.value.shape == (vocab.size,)


def test_greedy_decode_is_deterministic(vocab, kb_fig1):
    model = DialogueModel(vocab, ModelConfig(dim=4, columns=NAVIGATION_COLUMNS),
                          rng=np.random.default_rng(5))
    query = ["<driver>", "address", "to", "the", "gas_station"]
    t1, trace1 = model.respond(query, kb_fig1)
    t2, trace2 = model.respond(query, kb_fig1)
    assert t1 == t2
    assert trace1.to_json() == trace2.to_json()


def test_untrained_model_emits_up_to_max_len(vocab, kb_fig1):
    model = DialogueModel(vocab, ModelConfig(dim=4, columns=NAVIGATION_COLUMNS),
                          rng=np.random.default_rng(6))
    # zero output projection -> uniform extended distribution, no early <eos>
    model.params["wo"].value[:] = 0.0
    tokens, trace = model.respond(["where", "is", "the", "gas_station"], kb_fig1,
                                  max_len=17)
    assert len(tokens) == 17
    assert len(trace.steps) == len(tokens)


def test_trace_shapes_match_contract(vocab, kb_fig1):
    model = DialogueModel(vocab, ModelConfig(dim=4, columns=NAVIGATION_COLUMNS),
                          rng=np.random.default_rng(7))
    query = ["<driver>", "address", "to", "the", "gas_station"]
    tokens, trace = model.respond(query, kb_fig1, max_len=5)
    data = trace.to_json()
    assert len(data["state_attention"]) == 5  # m rows
    assert all(len(row) == len(query) for row in data["state_attention"])
    assert len(data["entry_probs"]) == kb_fig1.num_rows
    assert data["entry_labels"][0] == "valero"
    assert len(data["steps"]) == len(data["tokens"])
    for step in data["steps"]:
        assert len(step["input_attention"]) == len(query)
        assert len(step["memory_attention"]) == 5
