"""Response scoring: corpus BLEU-4 and micro/macro entity F1.

Entities are compared on exact underscore-joined surface forms against the
scenario's own KB lexicon (optionally the union over all scenarios). Macro F1
averages per-instance F1 after deleting instances where neither the gold nor
the generated response contains an entity; micro F1 pools TP/FP/FN globally.

BLEU is corpus-level with uniform 1-4 gram weights, clipped counts and the
standard brevity penalty. Smoothing: a zero n-gram precision is replaced by
EPS/total (EPS if the total itself is zero); nonzero precisions are untouched,
so scores on corpora with full n-gram support are smoothing-free.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, field

from .corpus import EOS

BLEU_EPS = 1e-9


def extract_entities(tokens, lexicon) -> set:
    """Set of response tokens that are KB values (set semantics: dupes count once)."""
    lexicon = set(lexicon)
    return {t for t in tokens if t in lexicon}


def _f1(tp: int, fp: int, fn: int) -> float:
    denom = 2 * tp + fp + fn
    return (2 * tp / denom) if denom else 0.0


def entity_f1(pairs) -> tuple[float, float]:
    """(micro, macro) percentages over (gold_set, predicted_set) pairs."""
    pairs = list(pairs)
    if not pairs:
        raise ValueError("entity_f1 needs at least one instance")
    tp = fp = fn = 0
    per_instance = []
    for gold, pred in pairs:
        gold, pred = set(gold), set(pred)
        itp = len(gold & pred)
        ifp = len(pred - gold)
        ifn = len(gold - pred)
        tp, fp, fn = tp + itp, fp + ifp, fn + ifn
        if gold or pred:
            per_instance.append(_f1(itp, ifp, ifn))
    micro = 100.0 * _f1(tp, fp, fn)
    macro = 100.0 * (sum(per_instance) / len(per_instance)) if per_instance else 0.0
    return micro, macro


def _ngram_counts(tokens, n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def corpus_bleu(candidates, references, max_order: int = 4) -> float:
    """Corpus BLEU-4 percentage, single reference per candidate."""
    candidates = [list(c) for c in candidates]
    references = [list(r) for r in references]
    if not candidates:
        raise ValueError("corpus_bleu needs at least one candidate")
    if len(candidates) != len(references):
        raise ValueError(f"{len(candidates)} candidates vs {len(references)} references")
    hits = [0] * max_order
    totals = [0] * max_order
    cand_len = ref_len = 0
    for cand, ref in zip(candidates, references):
        cand_len += len(cand)
        ref_len += len(ref)
        for n in range(1, max_order + 1):
            counts = _ngram_counts(cand, n)
            ref_counts = _ngram_counts(ref, n)
            totals[n - 1] += sum(counts.values())
            hits[n - 1] += sum(min(c, ref_counts[g]) for g, c in counts.items())
    if cand_len == 0:
        return 0.0
    log_sum = 0.0
    for h, t in zip(hits, totals):
        if t == 0:
            p = BLEU_EPS
        elif h == 0:
            p = BLEU_EPS / t
        else:
            p = h / t
        log_sum += math.log(p) / max_order
    bp = 1.0 if cand_len > ref_len else math.exp(1.0 - ref_len / cand_len)
    return 100.0 * bp * math.exp(log_sum)


@dataclass
class InstanceRecord:
    dialogue_id: str
    turn_index: int
    gold: list
    predicted: list
    gold_entities: list
    predicted_entities: list
    tp: int
    fp: int
    fn: int


@dataclass
class EvalReport:
    bleu: float
    micro_f1: float
    macro_f1: float
    records: list = field(default_factory=list)

    def table_row(self) -> str:
        return (f"BLEU {self.bleu:.1f} | Macro F1 {self.macro_f1:.1f} | "
                f"Micro F1 {self.micro_f1:.1f}")

    def to_json(self) -> dict:
        return {
            "bleu": self.bleu,
            "micro_f1": self.micro_f1,
            "macro_f1": self.macro_f1,
            "instances": [vars(r) for r in self.records],
        }

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json(), fh, indent=2)


def evaluate_model(model, instances, max_len: int = 60,
                   global_lexicon: bool = False) -> EvalReport:
    """Greedy-decode every non-delexicalized instance and score it."""
    instances = [i for i in instances if not i.is_delexicalized]
    if not instances:
        raise ValueError("no instances to evaluate")
    shared = set()
    if global_lexicon:
        for inst in instances:
            shared |= inst.kb.value_tokens()
    candidates = []
    references = []
    pairs = []
    records = []
    for inst in instances:
        predicted, _ = model.respond(inst.input_tokens, inst.kb, max_len=max_len)
        gold = [t for t in inst.target_tokens if t != EOS]
        lexicon = shared if global_lexicon else inst.kb.value_tokens()
        gold_ents = extract_entities(gold, lexicon)
        pred_ents = extract_entities(predicted, lexicon)
        candidates.append(predicted)
        references.append(gold)
        pairs.append((gold_ents, pred_ents))
        records.append(InstanceRecord(
            dialogue_id=inst.dialogue_id,
            turn_index=inst.turn_index,
            gold=gold,
            predicted=predicted,
            gold_entities=sorted(gold_ents),
            predicted_entities=sorted(pred_ents),
            tp=len(gold_ents & pred_ents),
            fp=len(pred_ents - gold_ents),
            fn=len(gold_ents - pred_ents),
        ))
    micro, macro = entity_f1(pairs)
    return EvalReport(
        bleu=corpus_bleu(candidates, references),
        micro_f1=micro,
        macro_f1=macro,
        records=records,
    )
