"""Dialogue corpus handling: KVRET-style JSON, KB tables, instances, vocabulary.

Utterances are lowercased, punctuation split off, and multi-word KB values
collapsed into single underscore-joined tokens ("200 Alester Ave" ->
"200_alester_ave") so that copying a value is always a single-token emission.
The weather domain's per-weekday forecast strings are restructured into one
row per (location, weekday) with separate temperature/attribute columns.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field
from pathlib import Path


class CorpusError(ValueError):
    """Malformed corpus input (bad JSON, unknown domain, broken KB row)."""


PAD = "<pad>"
BOS = "<bos>"
EOS = "<eos>"
UNK = "<unk>"
DRIVER = "<driver>"
CAR = "<car>"
NONE = "<none>"
SPECIALS = (PAD, BOS, EOS, UNK, DRIVER, CAR, NONE)

NAVIGATION_COLUMNS = ("poi", "traffic_info", "poi_type", "address", "distance")
WEATHER_COLUMNS = (
    "location",
    "date",
    "highest_temperature",
    "lowest_temperature",
    "weather_attribute",
)
DOMAIN_COLUMNS = {"navigation": NAVIGATION_COLUMNS, "weather": WEATHER_COLUMNS}
# subject field: a row without it cannot be restructured or labelled
DOMAIN_SUBJECT = {"navigation": "poi", "weather": "location"}
DOMAIN_LABELS = {"navigation": ("poi",), "weather": ("location", "date")}
_DOMAIN_ALIASES = {"navigate": "navigation", "navigation": "navigation", "weather": "weather"}

WEEKDAYS = ("monday", "tuesday", "wednesday", "thursday", "friday", "saturday", "sunday")
_FORECAST = re.compile(r"^(?P<attr>.+?),\s*low of (?P<low>-?\d+)\s*f\s*,\s*high of (?P<high>-?\d+)\s*f$")

_TOKEN = re.compile(r"[a-z0-9']+|[^a-z0-9\s]")


def tokenize(text: str) -> list[str]:
    """Lowercase and split, keeping punctuation as separate tokens."""
    return _TOKEN.findall(text.lower())


def normalize_value(raw: str) -> str:
    """Canonical single-token form of a KB cell value."""
    toks = tokenize(raw)
    return "_".join(toks) if toks else NONE


def slot_token(column: str) -> str:
    return f"<{column}>"


@dataclass(frozen=True)
class KBTable:
    """|T| rows x m named columns of single-token cell values."""

    columns: tuple[str, ...]
    rows: tuple[dict, ...]
    domain: str = "custom"
    label_columns: tuple[str, ...] = ()

    @property
    def num_columns(self) -> int:
        return len(self.columns)

    @property
    def num_rows(self) -> int:
        return len(self.rows)

    def cell(self, row: int, column: str) -> str:
        return self.rows[row][column]

    def row_label(self, row: int) -> str:
        cols = self.label_columns or self.columns[:1]
        return "|".join(self.rows[row][c] for c in cols)

    def value_tokens(self) -> set:
        """All non-sentinel cell tokens in the table."""
        return {v for row in self.rows for v in row.values() if v != NONE}

    def value_slot_map(self) -> dict:
        """value token -> slot token of the first canonical column holding it."""
        mapping: dict = {}
        for col in self.columns:
            for row in self.rows:
                v = row[col]
                if v != NONE and v not in mapping:
                    mapping[v] = slot_token(col)
        return mapping

    def surface_forms(self) -> dict:
        """Multi-word piece tuples -> joined cell token, for entity joining."""
        forms: dict = {}
        for token in self.value_tokens():
            pieces = tuple(token.split("_"))
            if len(pieces) >= 2:
                forms[pieces] = token
        return forms

    def to_json(self) -> dict:
        return {
            "domain": self.domain,
            "columns": list(self.columns),
            "label_columns": list(self.label_columns),
            "rows": [dict(r) for r in self.rows],
        }

    @staticmethod
    def from_json(obj: dict) -> "KBTable":
        return KBTable(
            columns=tuple(obj["columns"]),
            rows=tuple(dict(r) for r in obj["rows"]),
            domain=obj.get("domain", "custom"),
            label_columns=tuple(obj.get("label_columns", ())),
        )


@dataclass(frozen=True)
class Dialogue:
    id: str
    turns: tuple  # of (speaker, tuple of tokens), speakers alternate
    kb: KBTable
    split: str = "train"


@dataclass(frozen=True)
class Instance:
    """One training/eval example: flattened history -> one car response."""

    dialogue_id: str
    turn_index: int
    input_tokens: tuple
    target_tokens: tuple  # ends with <eos>
    kb: KBTable
    is_delexicalized: bool = False


def join_entities(tokens, kb: KBTable) -> list:
    """Collapse multi-word KB value mentions into their joined tokens.

    Longest match wins; scanning is left to right.
    """
    forms = kb.surface_forms()
    if not forms:
        return list(tokens)
    max_len = max(len(p) for p in forms)
    out: list = []
    i = 0
    n = len(tokens)
    while i < n:
        match = None
        for length in range(min(max_len, n - i), 1, -1):
            cand = tuple(tokens[i:i + length])
            if cand in forms:
                match = (forms[cand], length)
                break
        if match:
            out.append(match[0])
            i += match[1]
        else:
            out.append(tokens[i])
            i += 1
    return out


def delexicalize(tokens, kb: KBTable) -> list:
    """Replace tokens matching a KB cell value with that column's slot token."""
    joined = join_entities(tokens, kb)
    mapping = kb.value_slot_map()
    return [mapping.get(t, t) for t in joined]


# -----------------------------------------------------------------------------
# KVRET loading
# -----------------------------------------------------------------------------


def _canonical_domain(domain: str) -> str:
    key = domain.strip().lower()
    if key not in _DOMAIN_ALIASES:
        raise CorpusError(f"unknown domain '{domain}' (expected navigation or weather)")
    return _DOMAIN_ALIASES[key]


def _navigation_rows(items, dialogue_id: str) -> list:
    rows = []
    for item in items:
        if DOMAIN_SUBJECT["navigation"] not in item:
            raise CorpusError(f"dialogue {dialogue_id}: KB row missing subject field 'poi'")
        row = {}
        for col in NAVIGATION_COLUMNS:
            raw = item.get(col)
            row[col] = normalize_value(str(raw)) if raw not in (None, "") else NONE
        rows.append(row)
    return rows


def _weather_rows(items, dialogue_id: str) -> list:
    rows = []
    for item in items:
        lowered = {str(k).strip().lower(): v for k, v in item.items()}
        if "location" not in lowered:
            raise CorpusError(f"dialogue {dialogue_id}: KB row missing subject field 'location'")
        location = normalize_value(str(lowered["location"]))
        for day in WEEKDAYS:
            if day not in lowered:
                continue
            forecast = str(lowered[day]).strip().lower()
            m = _FORECAST.match(forecast)
            if not m:
                raise CorpusError(
                    f"dialogue {dialogue_id}: cannot parse forecast '{forecast}' for {day}"
                )
            rows.append({
                "location": location,
                "date": day,
                "highest_temperature": f"{m.group('high')}f",
                "lowest_temperature": f"{m.group('low')}f",
                "weather_attribute": normalize_value(m.group("attr")),
            })
    return rows


def kb_from_items(items, domain: str, dialogue_id: str = "?") -> KBTable:
    """Restructure raw scenario KB items into the domain's canonical table."""
    domain = _canonical_domain(domain)
    if domain == "navigation":
        rows = _navigation_rows(items or [], dialogue_id)
    else:
        rows = _weather_rows(items or [], dialogue_id)
    return KBTable(
        columns=DOMAIN_COLUMNS[domain],
        rows=tuple(rows),
        domain=domain,
        label_columns=DOMAIN_LABELS[domain],
    )


_SPEAKER_ALIASES = {"driver": "driver", "user": "driver", "assistant": "car", "car": "car"}


def load_kvret(path, domain: str, split: str = "train") -> list:
    """Load one KVRET-format JSON file, keeping dialogues of `domain` only.

    Utterance tokens come back lowercased, punctuation-split and entity-joined
    against the dialogue's own KB. Dialogues without a car turn are dropped.
    """
    domain = _canonical_domain(domain)
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise CorpusError(f"{path}: malformed JSON ({exc})") from exc
    if not isinstance(raw, list):
        raise CorpusError(f"{path}: expected a top-level list of dialogues")

    dialogues = []
    for i, entry in enumerate(raw):
        scenario = entry.get("scenario", {})
        intent = str(scenario.get("task", {}).get("intent", "")).lower()
        if _DOMAIN_ALIASES.get(intent) != domain:
            continue
        did = str(scenario.get("uuid", f"{path.stem}-{i}"))
        kb = kb_from_items(scenario.get("kb", {}).get("items") or [], domain, did)
        turns: list = []
        for t in entry.get("dialogue", []):
            speaker = _SPEAKER_ALIASES.get(str(t.get("turn", "")).lower())
            if speaker is None:
                raise CorpusError(f"dialogue {did}: unknown speaker '{t.get('turn')}'")
            tokens = join_entities(tokenize(str(t.get("data", {}).get("utterance", ""))), kb)
            if not tokens:
                continue
            if turns and turns[-1][0] == speaker:
                # some source dialogues repeat a speaker; merge to keep alternation
                turns[-1] = (speaker, turns[-1][1] + tuple(tokens))
            else:
                turns.append((speaker, tuple(tokens)))
        if not any(spk == "car" for spk, _ in turns):
            continue
        dialogues.append(Dialogue(id=did, turns=tuple(turns), kb=kb, split=split))
    return dialogues


# -----------------------------------------------------------------------------
# vocabulary
# -----------------------------------------------------------------------------


@dataclass
class Vocabulary:
    """Token ids for the generation vocabulary V plus slot-type tokens.

    V occupies ids 0..len(tokens)-1; slot types follow as the extended output
    space V u V_SLOT used by the decoder before copy redistribution.
    """

    tokens: list
    slot_types: list
    index: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.index:
            self.index = {t: i for i, t in enumerate(self.tokens)}
        overlap = set(self.tokens) & set(self.slot_types)
        if overlap:
            raise CorpusError(f"slot types collide with vocabulary tokens: {sorted(overlap)}")

    @property
    def size(self) -> int:
        return len(self.tokens)

    @property
    def extended_size(self) -> int:
        return len(self.tokens) + len(self.slot_types)

    @property
    def unk_id(self) -> int:
        return self.index[UNK]

    def id_of(self, token: str) -> int:
        return self.index.get(token, self.index[UNK])

    def encode(self, tokens) -> list:
        return [self.id_of(t) for t in tokens]

    def slot_id(self, slot: str) -> int:
        return self.size + self.slot_types.index(slot)

    def extended_id(self, token: str) -> int:
        if token in self.index:
            return self.index[token]
        if token in self.slot_types:
            return self.slot_id(token)
        return self.unk_id

    def token_of(self, token_id: int) -> str:
        if token_id < self.size:
            return self.tokens[token_id]
        return self.slot_types[token_id - self.size]

    def digest(self) -> str:
        payload = "\n".join(self.tokens + self.slot_types).encode("utf-8")
        return hashlib.sha256(payload).hexdigest()

    def save(self, path) -> None:
        Path(path).write_text("\n".join(self.tokens + self.slot_types) + "\n", encoding="utf-8")

    @staticmethod
    def load(path, num_slots: int | None = None) -> "Vocabulary":
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        if num_slots is None:
            num_slots = 0
            for line in reversed(lines):
                if re.fullmatch(r"<[a-z0-9_]+>", line) and line not in SPECIALS:
                    num_slots += 1
                else:
                    break
        cut = len(lines) - num_slots
        return Vocabulary(tokens=lines[:cut], slot_types=lines[cut:])


def build_vocabulary(train_dialogues) -> Vocabulary:
    """Vocabulary from the train split only: utterance tokens + column names."""
    seen = set()
    columns: tuple = ()
    for d in train_dialogues:
        columns = d.kb.columns
        seen.update(columns)
        for _, tokens in d.turns:
            seen.update(tokens)
    seen.difference_update(SPECIALS)
    tokens = list(SPECIALS) + sorted(seen)
    return Vocabulary(tokens=tokens, slot_types=[slot_token(c) for c in columns])


def oov_rate(dialogues, vocab: Vocabulary) -> tuple[int, int]:
    """(#tokens outside V, #tokens) over all turns; never silently zero."""
    oov = total = 0
    for d in dialogues:
        for _, tokens in d.turns:
            for t in tokens:
                total += 1
                if t not in vocab.index:
                    oov += 1
    return oov, total


# -----------------------------------------------------------------------------
# instances
# -----------------------------------------------------------------------------


def build_instances(dialogues, augment: bool = False) -> list:
    """One instance per car turn; optionally an extra delexicalized copy.

    The input flattens every preceding turn, each prefixed by its speaker
    token (<driver>/<car>); the target is the car turn plus <eos>.
    """
    instances = []
    for d in dialogues:
        for j, (speaker, tokens) in enumerate(d.turns):
            if speaker != "car" or j == 0:
                continue
            inp: list = []
            for spk, toks in d.turns[:j]:
                inp.append(DRIVER if spk == "driver" else CAR)
                inp.extend(toks)
            target = tuple(tokens) + (EOS,)
            instances.append(Instance(
                dialogue_id=d.id,
                turn_index=j,
                input_tokens=tuple(inp),
                target_tokens=target,
                kb=d.kb,
            ))
            if augment:
                delex = delexicalize(list(tokens), d.kb)
                if tuple(delex) != tuple(tokens):
                    instances.append(Instance(
                        dialogue_id=d.id,
                        turn_index=j,
                        input_tokens=tuple(inp),
                        target_tokens=tuple(delex) + (EOS,),
                        kb=d.kb,
                        is_delexicalized=True,
                    ))
    return instances


def write_instances_jsonl(instances, path) -> None:
    """Instances as JSON-lines for inspection."""
    with open(path, "w", encoding="utf-8") as fh:
        for inst in instances:
            fh.write(json.dumps({
                "dialogue_id": inst.dialogue_id,
                "turn": inst.turn_index,
                "input": list(inst.input_tokens),
                "target": list(inst.target_tokens),
                "delexicalized": inst.is_delexicalized,
            }) + "\n")
