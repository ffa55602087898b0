"""Soft knowledge-base attention: table encoding, entry scoring, fused memory.

Every cell becomes tanh(W_c [emb(value); emb(column-name)]); an entry is the
(d, m) matrix of its cells. Entries are scored against the state
representation by summing per-column dot products, softmaxed into an entry
distribution, and averaged into U_kb. Concatenating U_in with U_kb column-wise
and projecting through tanh(W_cat .) yields the fixed-size memory U (d, m) —
no parameter shape depends on the number of entries, so the KB can change
between dialogues without touching the checkpoint.
"""

from __future__ import annotations

from . import autodiff as ad
from .corpus import KBTable, Vocabulary


def encode_table(emb: ad.Node, wc: ad.Node, kb: KBTable, vocab: Vocabulary,
                 columns=None) -> ad.Node:
    """Cell representations for the whole table, shape (d, |T|, m).

    `columns` fixes the column iteration order (defaults to the table's own);
    unknown value or column-name tokens fall back to the <unk> embedding.
    """
    columns = tuple(columns or kb.columns)
    if set(columns) != set(kb.columns) or len(columns) != len(kb.columns):
        raise ValueError(
            f"KB columns {kb.columns} do not match the expected set {columns}"
        )
    if kb.num_rows == 0:
        raise ValueError("cannot encode an empty KB: every scenario carries entries")
    value_ids = []
    name_ids = []
    for row in kb.rows:
        for col in columns:
            value_ids.append(vocab.id_of(row[col]))
            name_ids.append(vocab.id_of(col))
    d = emb.value.shape[1]
    values = ad.embed_lookup(emb, value_ids)  # (d, T*m)
    names = ad.embed_lookup(emb, name_ids)
    cells = ad.tanh(ad.matmul(wc, ad.concat([values, names], axis=0)))
    return ad.reshape(cells, (d, kb.num_rows, len(columns)))


def query(cells: ad.Node, u_in: ad.Node, wcat: ad.Node):
    """Score entries against U_in and fuse history + KB into the memory U.

    cells (d, T, m), u_in (d, m), wcat (d, 2d) ->
    (entry_probs (T,), u_kb (d, m), u (d, m)).
    """
    d, _, m = cells.value.shape
    sim = ad.reduce_sum(ad.mul(cells, ad.reshape(u_in, (d, 1, m))), axis=(0, 2))
    entry_probs = ad.softmax(sim, axis=0)
    weighted = ad.mul(cells, ad.reshape(entry_probs, (1, -1, 1)))
    u_kb = ad.reduce_sum(weighted, axis=1)
    u = ad.tanh(ad.matmul(wcat, ad.concat([u_in, u_kb], axis=0)))
    return entry_probs, u_kb, u
