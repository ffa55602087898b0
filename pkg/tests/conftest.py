"""Shared test helpers: finite-difference oracle and tiny fixtures."""

from __future__ import annotations

import numpy as np

from kbdialog import autodiff as ad
from kbdialog.corpus import SPECIALS, KBTable, Vocabulary, slot_token


def make_vocab(words, columns) -> Vocabulary:
    tokens = list(SPECIALS) + sorted(set(words) | set(columns))
    return Vocabulary(tokens=tokens, slot_types=[slot_token(c) for c in columns])


def make_kb(columns, rows, domain="custom") -> KBTable:
    return KBTable(columns=tuple(columns), rows=tuple(dict(r) for r in rows), domain=domain)


def np_lstm(w, b, xs, d):
    """Plain-numpy LSTM oracle; returns (H (d, n), h, c)."""
    h = np.zeros(d)
    c = np.zeros(d)
    cols = []
    for x in xs:
        z = w @ np.concatenate([x, h]) + b
        i = 1 / (1 + np.exp(-z[:d]))
        f = 1 / (1 + np.exp(-z[d:2 * d]))
        g = np.tanh(z[2 * d:3 * d])
        o = 1 / (1 + np.exp(-z[3 * d:]))
        c = f * c + i * g
        h = o * np.tanh(c)
        cols.append(h)
    return np.stack(cols, axis=1), h, c


def np_softmax(x, axis=-1):
    e = np.exp(x - x.max(axis=axis, keepdims=True))
    return e / e.sum(axis=axis, keepdims=True)


def fd_max_rel_error(build, arrays, eps: float = 1e-5) -> float:
    """Central finite differences vs analytic grads for scalar-valued `build`.

    `build` takes a list of Nodes (one per input array) and returns a scalar
    Node; it must be deterministic so the graph can be rebuilt per probe.
    Returns the max relative error over every coordinate of every input.
    """
    leaves = [ad.param(a.copy()) for a in arrays]
    loss = build(leaves)
    ad.backward(loss)
    analytic = [np.zeros_like(a) if leaf.grad is None else np.array(leaf.grad)
                for a, leaf in zip(arrays, leaves)]

    def value_at(arrs):
        out = build([ad.constant(a) for a in arrs])
        return float(out.value)

    worst = 0.0
    for i, a in enumerate(arrays):
        flat = a.reshape(-1)
        for j in range(flat.size):
            bumped = [x.copy() for x in arrays]
            bumped[i].reshape(-1)[j] += eps
            hi = value_at(bumped)
            bumped[i].reshape(-1)[j] -= 2 * eps
            lo = value_at(bumped)
            numeric = (hi - lo) / (2 * eps)
            got = analytic[i].reshape(-1)[j]
            rel = abs(got - numeric) / max(1.0, abs(got), abs(numeric))
            worst = max(worst, rel)
    return worst
