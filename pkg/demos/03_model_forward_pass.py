"""One forward pass, piece by piece: encoder states, per-slot state
representation, soft KB attention, and a copy-redistributed decode step."""

import numpy as np

from kbdialog.corpus import SPECIALS, KBTable, Vocabulary, slot_token
from kbdialog.model import DialogueModel, ModelConfig

columns = ("poi", "poi_type", "address")
words = ["where", "is", "the", "gas_station", "grocery_store", "valero",
         "willows_market", "200_alester_ave", "409_bollard_st"]
vocab = Vocabulary(tokens=list(SPECIALS) + sorted(words),
                   slot_types=[slot_token(c) for c in columns])
kb = KBTable(columns=columns, rows=(
    {"poi": "valero", "poi_type": "gas_station", "address": "200_alester_ave"},
    {"poi": "willows_market", "poi_type": "grocery_store", "address": "409_bollard_st"},
))

model = DialogueModel(vocab, ModelConfig(dim=8, columns=columns, init_scale=0.4),
                      rng=np.random.default_rng(1))

query = ["<driver>", "where", "is", "the", "gas_station"]
turn = model.encode_turn(query, kb)

print("encoder states H:", turn.h_enc.value.shape, "(d x n_in)")
print("state representation U_in:", turn.u_in.value.shape, "(d x m)")
print("state attention rows sum to",
      np.round(turn.a_in.value.sum(axis=1), 12), "(one softmax per slot)")
print("entry distribution over", kb.num_rows, "rows:",
      np.round(turn.entry_probs.value, 4))
print("fused memory U:", turn.memory.value.shape)

step = model.decode_step(turn, vocab.id_of("<bos>"), turn.final_state)
print("\nextended distribution over V + slot types:", step.extended.value.shape,
      "sum", round(float(step.extended.value.sum()), 12))
print("final distribution over V + scenario values:", step.final.value.shape,
      "sum", round(float(step.final.value.sum()), 12))

slot_mass = step.extended.value[vocab.size:]
print("slot-type mass being redistributed onto KB values:",
      {s: round(float(v), 4) for s, v in zip(vocab.slot_types, slot_mass)})

tokens, trace = model.respond(query, kb, max_len=8)
print("\nuntrained greedy decode:", " ".join(tokens) or "(empty)")
print("trace keys:", sorted(trace.to_json()))
