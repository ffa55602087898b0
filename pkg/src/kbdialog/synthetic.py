"""Synthetic navigation corpus generator.

Emits KVRET-format scenario dicts: every dialogue gets its own 8-row KB
sampled from fixed pools (one POI per type, random addresses/distances/
traffic), plus a templated driver query and car answer about one target row.
Because the value assignment is re-rolled per dialogue, answering correctly
requires consulting the KB rather than memorizing surface co-occurrences,
and a slice of the address pool never appears in training responses, so some
gold entities are reachable only through copying.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

POI_TYPES = {
    "gas station": ["valero", "chevron", "shell", "texaco", "mobil"],
    "grocery store": ["sigona farmers market", "willows market", "whole foods",
                      "safeway", "trader joes"],
    "coffee shop": ["starbucks", "cafe venetia", "teavana", "peets coffee",
                    "philz coffee"],
    "hospital": ["stanford childrens health", "el camino hospital",
                 "palo alto medical foundation", "kaiser permanente"],
    "parking garage": ["palo alto garage r", "webster garage",
                       "high street garage", "city lot b"],
    "rest stop": ["the clement hotel", "comfort inn", "hilton garden inn",
                  "four seasons"],
    "chinese restaurant": ["tai pan", "pf changs", "panda express",
                           "mandarin roots", "china delight"],
    "shopping center": ["town and country", "stanford shopping center",
                        "midtown plaza", "the village mall"],
}

_STREETS = ["amherst", "alger", "barringer", "alester", "ames", "amaranta",
            "bollard", "arcadia", "university", "almanor", "baylor", "cedar",
            "dogwood", "elm", "foothill", "grant", "hickory", "iris",
            "juniper", "keller"]
_SUFFIXES = ["st", "ave", "dr", "ln", "rd"]

ADDRESSES = [f"{100 + 45 * i + 7 * j} {street} {_SUFFIXES[j % len(_SUFFIXES)]}"
             for i, street in enumerate(_STREETS) for j in range(10)]

DISTANCES = [f"{n} miles" for n in range(1, 10)]
TRAFFIC = ["no traffic", "moderate traffic", "heavy traffic",
           "road block nearby", "car collision nearby"]

# (query template, answer template); `type` queries identify the row by its
# poi_type, `name` queries by the POI itself
TEMPLATES = [
    ("where is the nearest {poi_type} ?", "{poi} is {distance} away at {address} ."),
    ("give me the address to the {poi_type}", "the address to {poi} is {address} ."),
    ("how far is {poi} ?", "{poi} is {distance} away ."),
    ("is there traffic on the way to the {poi_type} ?",
     "there is {traffic_info} on the way to {poi} ."),
    ("find the closest {poi_type}", "the closest {poi_type} is {poi} , {distance} away ."),
]

FOLLOW_UP = ("what is the address ?", "{poi} is located at {address} .")


def _sample_kb(rng: np.random.Generator, rows: int):
    """One KB: every poi_type once (value assignment re-rolled per dialogue)."""
    types = list(POI_TYPES)
    order = rng.permutation(len(types))[:rows]
    addresses = rng.choice(len(ADDRESSES), size=rows, replace=False)
    items = []
    for slot, type_idx in enumerate(order):
        poi_type = types[type_idx]
        names = POI_TYPES[poi_type]
        items.append({
            "poi": names[rng.integers(len(names))],
            "poi_type": poi_type,
            "address": ADDRESSES[addresses[slot]],
            "distance": DISTANCES[rng.integers(len(DISTANCES))],
            "traffic_info": TRAFFIC[rng.integers(len(TRAFFIC))],
        })
    return items


def generate_corpus(num_dialogues: int = 500, rows_per_kb: int = 8,
                    seed: int = 0, follow_up_fraction: float = 0.3) -> list:
    """KVRET-format dialogue entries; deterministic for a fixed seed."""
    rng = np.random.default_rng(seed)
    dialogues = []
    for i in range(num_dialogues):
        items = _sample_kb(rng, rows_per_kb)
        target = items[rng.integers(len(items))]
        query_t, answer_t = TEMPLATES[rng.integers(len(TEMPLATES))]
        turns = [
            {"turn": "driver", "data": {"utterance": query_t.format(**target)}},
            {"turn": "assistant", "data": {"utterance": answer_t.format(**target)}},
        ]
        if rng.random() < follow_up_fraction:
            q2, a2 = FOLLOW_UP
            turns.append({"turn": "driver", "data": {"utterance": q2}})
            turns.append({"turn": "assistant", "data": {"utterance": a2.format(**target)}})
        dialogues.append({
            "scenario": {
                "uuid": f"syn-{seed:04d}-{i:05d}",
                "task": {"intent": "navigate"},
                "kb": {
                    "kb_title": "location information",
                    "column_names": ["poi", "poi_type", "address", "distance",
                                     "traffic_info"],
                    "items": items,
                },
            },
            "dialogue": turns,
        })
    return dialogues


def training_config(**overrides):
    """Tuned TrainConfig for this corpus: small dims, wide init, entropy-aided
    RL pretraining. Converges on one core in a few minutes."""
    from .training import TrainConfig

    base = dict(dim=48, dropout=0.2, lr=1e-3, batch_size=16, seed=7,
                rl_pretrain_epochs=18, epochs=14, patience=5,
                rl_entropy_weight=0.3, init_scale=0.4, max_decode_len=30)
    base.update(overrides)
    return TrainConfig(**base)


def write_splits(out_dir, num_dialogues: int = 500, held_out: int = 100,
                 dev: int = 40, seed: int = 0) -> dict:
    """Write train/dev/test JSON files; the last `held_out` dialogues are test."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    corpus = generate_corpus(num_dialogues=num_dialogues, seed=seed)
    test = corpus[-held_out:]
    rest = corpus[:-held_out]
    dev_part = rest[-dev:] if dev else []
    train = rest[:-dev] if dev else rest
    paths = {}
    for name, chunk in (("train", train), ("dev", dev_part), ("test", test)):
        path = out_dir / f"synthetic_{name}.json"
        path.write_text(json.dumps(chunk, indent=1), encoding="utf-8")
        paths[name] = path
    return paths
