"""Decoder-side attention, the extended output softmax, and copy redistribution.

The decoder LSTM mixes two context vectors per step: input attention over the
encoder states and memory attention over the fused matrix U, both of the
additive form v . tanh(W [key; h_dec]). Its softmax ranges over the output
vocabulary plus one token per slot type; copy redistribution then moves each
slot token's mass onto the actual cell values of the current KB, weighted by
the per-turn entry distribution, leaving a proper distribution over
V u {scenario values}.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .corpus import KBTable, Vocabulary


def attention(keys: ad.Node, keys_proj: ad.Node, w_query: ad.Node, v: ad.Node,
              h_dec: ad.Node):
    """Additive attention over the columns of `keys` (d, n).

    keys_proj is W[:, :d] @ keys precomputed once per turn; w_query is
    W[:, d:]. Returns (context (d,), weights (n,)).
    """
    d = h_dec.value.shape[0]
    pre = ad.add(keys_proj, ad.matmul(w_query, ad.reshape(h_dec, (d, 1))))
    weights = ad.softmax(ad.matmul(v, ad.tanh(pre)), axis=0)
    return ad.matmul(keys, weights), weights


def output_distribution(wo: ad.Node, h_dec: ad.Node, c_in: ad.Node, c_mem: ad.Node) -> ad.Node:
    """softmax(W_o [h_dec; c_in; c_mem]) over V u V_SLOT (or V if no copying)."""
    return ad.softmax(ad.matmul(wo, ad.concat([h_dec, c_in, c_mem], axis=0)), axis=0)


@dataclass
class CopyContext:
    """Per-turn mapping from the extended space onto V u {scenario values}.

    `redistribution` (n_final, m) already folds in the entry distribution:
    column s holds sum_k p(e_k) * one_hot(final_id(cell[k, s])).
    """

    vocab_size: int
    num_slots: int
    extra_tokens: list
    redistribution: ad.Node

    @property
    def final_size(self) -> int:
        return self.vocab_size + len(self.extra_tokens)

    def final_token(self, index: int, vocab: Vocabulary) -> str:
        if index < self.vocab_size:
            return vocab.tokens[index]
        return self.extra_tokens[index - self.vocab_size]

    def final_id(self, token: str, vocab: Vocabulary) -> int:
        if token in vocab.index:
            return vocab.index[token]
        if token in self.extra_tokens:
            return self.vocab_size + self.extra_tokens.index(token)
        return vocab.unk_id


def build_copy_context(kb: KBTable, vocab: Vocabulary, entry_probs: ad.Node,
                       columns=None) -> CopyContext:
    """Scatter matrices for one scenario, contracted with its entry distribution."""
    columns = tuple(columns or kb.columns)
    extras: list = []
    for row in kb.rows:
        for col in columns:
            v = row[col]
            if v not in vocab.index and v not in extras:
                extras.append(v)
    n_final = vocab.size + len(extras)

    def fid(token):
        if token in vocab.index:
            return vocab.index[token]
        return vocab.size + extras.index(token)

    kcols = []
    for col in columns:
        scatter = np.zeros((n_final, kb.num_rows))
        for k, row in enumerate(kb.rows):
            scatter[fid(row[col]), k] += 1.0
        kcols.append(ad.matmul(ad.constant(scatter), entry_probs))
    return CopyContext(
        vocab_size=vocab.size,
        num_slots=len(columns),
        extra_tokens=extras,
        redistribution=ad.stack_cols(kcols),
    )


def copy_redistribute(extended: ad.Node, ctx: CopyContext) -> ad.Node:
    """Move slot-token mass onto KB values; total mass is conserved."""
    v_part = ad.narrow(extended, 0, 0, ctx.vocab_size)
    slot_part = ad.narrow(extended, 0, ctx.vocab_size, ctx.vocab_size + ctx.num_slots)
    base = ad.pad_vec(v_part, ctx.final_size, 0)
    return ad.add(base, ad.matmul(ctx.redistribution, slot_part))


@dataclass
class DecodeTrace:
    """Per-turn record of attentions and emitted tokens, for eval/viz/UI."""

    tokens: list = field(default_factory=list)
    input_tokens: list = field(default_factory=list)
    slot_names: list = field(default_factory=list)
    state_attention: list = field(default_factory=list)  # m x n_in
    entry_probs: list = field(default_factory=list)
    entry_labels: list = field(default_factory=list)
    steps: list = field(default_factory=list)  # {token, input_attention, memory_attention}

    def to_json(self) -> dict:
        return {
            "tokens": list(self.tokens),
            "input_tokens": list(self.input_tokens),
            "slot_names": list(self.slot_names),
            "state_attention": [list(row) for row in self.state_attention],
            "entry_probs": list(self.entry_probs),
            "entry_labels": list(self.entry_labels),
            "steps": [dict(s) for s in self.steps],
        }
