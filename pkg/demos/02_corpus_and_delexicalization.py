"""Loading KVRET-format data, restructuring KBs, and delexicalizing responses."""

from pathlib import Path

from kbdialog.corpus import (
    build_instances,
    build_vocabulary,
    delexicalize,
    load_kvret,
    oov_rate,
)

DATA = Path(__file__).resolve().parent.parent / "tests" / "data"

nav = load_kvret(DATA / "nav_small.json", "navigation", split="train")
dialogue = nav[0]
print("dialogue", dialogue.id, "| KB", dialogue.kb.num_rows, "rows x",
      dialogue.kb.num_columns, "columns")
for row in dialogue.kb.rows[:3]:
    print("  ", row)

# multi-word values arrive as single underscore-joined tokens
print("\nsecond turn:", " ".join(dialogue.turns[1][1]))
print("delexicalized:", " ".join(delexicalize(list(dialogue.turns[1][1]), dialogue.kb)))

# weather scenarios are restructured into one row per (location, weekday)
weather = load_kvret(DATA / "weather_small.json", "weather", split="train")
print("\nweather KB columns:", weather[0].kb.columns)
for row in weather[0].kb.rows[:3]:
    print("  ", row)

# instances flatten the history with speaker separators
instances = build_instances(nav, augment=True)
print(f"\n{len(instances)} instances from {len(nav)} dialogues (with augmentation)")
third = instances[2]
print("input:  ", " ".join(third.input_tokens))
print("target: ", " ".join(third.target_tokens))

vocab = build_vocabulary(nav)
oov, total = oov_rate(weather, vocab)
print(f"\nvocabulary: {vocab.size} tokens + {len(vocab.slot_types)} slot types")
print(f"weather-split OOV rate against it: {oov}/{total} = {100 * oov / total:.1f}%")
