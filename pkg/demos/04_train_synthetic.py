"""End-to-end training on the synthetic navigation corpus.

Generates the 500-dialogue corpus, runs RL pretraining + joint training,
reports held-out scores, and shows the trained model answering against a
brand-new KB (including an address it never saw in training).

Takes a few minutes on one core. Pass --quick for a small, weaker run.
"""

import sys
import tempfile
import time
from pathlib import Path

from kbdialog.corpus import build_instances, kb_from_items, load_kvret
from kbdialog.evaluate import evaluate_model
from kbdialog.synthetic import training_config, write_splits
from kbdialog.training import train

quick = "--quick" in sys.argv
out = Path(tempfile.mkdtemp(prefix="kbdialog-synth-"))
paths = write_splits(out, num_dialogues=240 if quick else 500,
                     held_out=40 if quick else 100, dev=20 if quick else 40)
train_d = load_kvret(paths["train"], "navigation", "train")
dev_d = load_kvret(paths["dev"], "navigation", "dev")
test_d = load_kvret(paths["test"], "navigation", "test")
print(f"corpus: {len(train_d)} train / {len(dev_d)} dev / {len(test_d)} test")

config = training_config(**({"rl_pretrain_epochs": 12, "epochs": 10} if quick else {}))
start = time.time()
result = train(config, train_d, dev_dialogues=dev_d, echo=True)
print(f"\ntrained in {time.time() - start:.0f}s; "
      f"phase-1 attention accuracy {result.rl_pretrain_accuracy:.1%}")

report = evaluate_model(result.model, build_instances(test_d),
                        max_len=config.max_decode_len)
print("held-out:", report.table_row())

# a fresh KB at inference time; 783_arcadia_pl never occurs in training
kb = kb_from_items([
    {"poi": "Chevron", "poi_type": "gas station", "address": "783 Arcadia Pl",
     "distance": "5 miles", "traffic_info": "moderate traffic"},
    {"poi": "Town and Country", "poi_type": "shopping center",
     "address": "383 University Ave", "distance": "5 miles",
     "traffic_info": "no traffic"},
], "navigation", "demo")
tokens, trace = result.model.respond(
    ["<driver>", "give", "me", "the", "address", "to", "the", "gas_station"],
    kb, max_len=20)
best = max(range(len(trace.entry_probs)), key=trace.entry_probs.__getitem__)
print("\nfresh-KB query -> ", " ".join(tokens))
print(f"attended entry: {trace.entry_labels[best]} (p={trace.entry_probs[best]:.2f})")
