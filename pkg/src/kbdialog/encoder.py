"""History encoder and per-slot dialogue state representation.

A single-layer unidirectional LSTM reads the flattened history; stacking the
hidden states gives H_enc (d, n_in). The state representation projects m
per-slot score vectors onto the sequence and softmax-averages:

    score_k(t) = w_k . h_t,   a_k = softmax_t(score_k),   u_k = sum_t a_k(t) h_t

so U_in (d, m) holds one aggregated column per KB slot and A_in (m, n_in)
keeps the weights for visualization.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad


def lstm_step(w: ad.Node, b: ad.Node, x: ad.Node, h: ad.Node, c: ad.Node):
    """One LSTM cell update. w (4d, d_in+d), b (4d,), x (d_in,), h/c (d,)."""
    d = h.value.shape[0]
    z = ad.add(ad.matmul(w, ad.concat([x, h], axis=0)), b)
    i = ad.sigmoid(ad.narrow(z, 0, 0, d))
    f = ad.sigmoid(ad.narrow(z, 0, d, 2 * d))
    g = ad.tanh(ad.narrow(z, 0, 2 * d, 3 * d))
    o = ad.sigmoid(ad.narrow(z, 0, 3 * d, 4 * d))
    c_next = ad.add(ad.mul(f, c), ad.mul(i, g))
    h_next = ad.mul(o, ad.tanh(c_next))
    return h_next, c_next


def encode_sequence(emb: ad.Node, w: ad.Node, b: ad.Node, ids,
                    train: bool = False, rng: np.random.Generator | None = None,
                    dropout_rate: float = 0.0):
    """Run the LSTM over token ids; returns (H (d, n), (h_final, c_final)).

    Dropout hits the LSTM input and output; the recurrent carry stays clean,
    and the returned final state is the clean one.
    """
    ids = list(ids)
    if not ids:
        raise ValueError("cannot encode an empty token sequence")
    d = b.value.shape[0] // 4
    h = ad.constant(np.zeros(d))
    c = ad.constant(np.zeros(d))
    outputs = []
    for token_id in ids:
        x = ad.embed_vec(emb, token_id)
        x = ad.dropout(x, dropout_rate, train, rng)
        h, c = lstm_step(w, b, x, h, c)
        outputs.append(ad.dropout(h, dropout_rate, train, rng))
    return ad.stack_cols(outputs), (h, c)


def state_representation(wa: ad.Node, h_enc: ad.Node):
    """Per-slot attention summary of the history.

    wa (d, m), h_enc (d, n) -> (U_in (d, m), A_in (m, n)); every A_in row is a
    softmax over the n positions and U_in[:, k] = H_enc @ A_in[k].
    """
    scores = ad.matmul(ad.transpose(wa), h_enc)  # (m, n)
    a_in = ad.softmax(scores, axis=1)
    u_in = ad.matmul(h_enc, ad.transpose(a_in))  # (d, m)
    return u_in, a_in
