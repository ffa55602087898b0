"""Parameter container and full forward passes for the dialogue model.

One `TurnContext` holds everything computed once per dialogue turn (encoder
states, state representation, table encoding, entry distribution, fused
memory, copy scatter); teacher-forced training and greedy decoding then step
the decoder against it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from . import decoder as dec
from . import encoder as enc
from . import kb as kbmod
from .corpus import BOS, EOS, KBTable, Vocabulary

# phase-1 (RL-only pretraining) trains the soft KB attention and its encoder
PHASE1_PARAMS = ("emb", "enc_w", "enc_b", "wa", "wc")


@dataclass
class ModelConfig:
    dim: int
    columns: tuple
    no_copy: bool = False
    init_scale: float = 0.08

    @property
    def num_slots(self) -> int:
        return len(self.columns)


def init_params(vocab: Vocabulary, config: ModelConfig,
                rng: np.random.Generator) -> dict[str, ad.Node]:
    """Uniform [-init_scale, init_scale] init; LSTM forget-gate biases start at 1."""
    d = config.dim
    m = config.num_slots
    n_out = vocab.size if config.no_copy else vocab.extended_size

    def u(*shape):
        return rng.uniform(-config.init_scale, config.init_scale, shape)

    def lstm_bias():
        b = np.zeros(4 * d)
        b[d:2 * d] = 1.0
        return b

    spec = {
        "emb": u(vocab.extended_size, d),
        "enc_w": u(4 * d, 2 * d),
        "enc_b": lstm_bias(),
        "wa": u(d, m),
        "wc": u(d, 2 * d),
        "wcat": u(d, 2 * d),
        "dec_w": u(4 * d, 2 * d),
        "dec_b": lstm_bias(),
        "w_in": u(d, 2 * d),
        "v_in": u(d),
        "w_mem": u(d, 2 * d),
        "v_mem": u(d),
        "wo": u(n_out, 3 * d),
    }
    return {name: ad.param(value, name=name) for name, value in spec.items()}


@dataclass
class TurnContext:
    """Everything fixed for one dialogue turn before decoding starts."""

    input_tokens: tuple
    kb: KBTable
    h_enc: ad.Node
    final_state: tuple
    u_in: ad.Node
    a_in: ad.Node
    cells: ad.Node
    entry_probs: ad.Node
    u_kb: ad.Node
    memory: ad.Node
    copy: dec.CopyContext | None
    proj_in: ad.Node
    proj_mem: ad.Node
    attn_splits: dict = field(default_factory=dict)


@dataclass
class StepResult:
    extended: ad.Node
    final: ad.Node
    input_attention: ad.Node
    memory_attention: ad.Node
    state: tuple


class DialogueModel:
    """Bundles vocabulary, config and parameters; exposes the forward passes."""

    def __init__(self, vocab: Vocabulary, config: ModelConfig,
                 params: dict[str, ad.Node] | None = None,
                 rng: np.random.Generator | None = None):
        self.vocab = vocab
        self.config = config
        if params is None:
            params = init_params(vocab, config, rng or np.random.default_rng(0))
        self.params = params

    # -- per-turn setup --------------------------------------------------

    def encode_turn(self, input_tokens, kb: KBTable, train: bool = False,
                    rng: np.random.Generator | None = None,
                    dropout_rate: float = 0.0) -> TurnContext:
        p = self.params
        d = self.config.dim
        ids = self.vocab.encode(input_tokens)
        h_enc, final_state = enc.encode_sequence(
            p["emb"], p["enc_w"], p["enc_b"], ids,
            train=train, rng=rng, dropout_rate=dropout_rate,
        )
        u_in, a_in = enc.state_representation(p["wa"], h_enc)
        cells = kbmod.encode_table(p["emb"], p["wc"], kb, self.vocab,
                                   columns=self.config.columns)
        entry_probs, u_kb, memory = kbmod.query(cells, u_in, p["wcat"])
        copy = None
        if not self.config.no_copy:
            copy = dec.build_copy_context(kb, self.vocab, entry_probs,
                                          columns=self.config.columns)
        splits = {
            "w_in_key": ad.narrow(p["w_in"], 1, 0, d),
            "w_in_query": ad.narrow(p["w_in"], 1, d, 2 * d),
            "w_mem_key": ad.narrow(p["w_mem"], 1, 0, d),
            "w_mem_query": ad.narrow(p["w_mem"], 1, d, 2 * d),
        }
        return TurnContext(
            input_tokens=tuple(input_tokens),
            kb=kb,
            h_enc=h_enc,
            final_state=final_state,
            u_in=u_in,
            a_in=a_in,
            cells=cells,
            entry_probs=entry_probs,
            u_kb=u_kb,
            memory=memory,
            copy=copy,
            proj_in=ad.matmul(splits["w_in_key"], h_enc),
            proj_mem=ad.matmul(splits["w_mem_key"], memory),
            attn_splits=splits,
        )

    # -- one decoder step -------------------------------------------------

    def decode_step(self, turn: TurnContext, prev_id: int, state: tuple,
                    train: bool = False, rng: np.random.Generator | None = None,
                    dropout_rate: float = 0.0) -> StepResult:
        p = self.params
        x = ad.embed_vec(p["emb"], prev_id)
        x = ad.dropout(x, dropout_rate, train, rng)
        h, c = enc.lstm_step(p["dec_w"], p["dec_b"], x, state[0], state[1])
        h_out = ad.dropout(h, dropout_rate, train, rng)
        c_in, a_in = dec.attention(turn.h_enc, turn.proj_in,
                                   turn.attn_splits["w_in_query"], p["v_in"], h_out)
        c_mem, a_mem = dec.attention(turn.memory, turn.proj_mem,
                                     turn.attn_splits["w_mem_query"], p["v_mem"], h_out)
        extended = dec.output_distribution(p["wo"], h_out, c_in, c_mem)
        final = extended if turn.copy is None else dec.copy_redistribute(extended, turn.copy)
        return StepResult(extended=extended, final=final, input_attention=a_in,
                          memory_attention=a_mem, state=(h, c))

    def feed_id(self, token: str) -> int:
        """Embedding id used when feeding a produced/gold token back in."""
        return self.vocab.extended_id(token)

    # -- greedy decoding ---------------------------------------------------

    def respond(self, history_tokens, kb: KBTable, max_len: int = 60):
        """Greedy decode; returns (tokens, DecodeTrace). Ties pick the lowest id."""
        turn = self.encode_turn(history_tokens, kb, train=False)
        trace = dec.DecodeTrace(
            input_tokens=list(turn.input_tokens),
            slot_names=list(self.config.columns),
            state_attention=[list(row) for row in turn.a_in.value],
            entry_probs=list(turn.entry_probs.value),
            entry_labels=[kb.row_label(i) for i in range(kb.num_rows)],
        )
        state = turn.final_state
        prev = self.vocab.id_of(BOS)
        tokens: list = []
        for _ in range(max_len):
            step = self.decode_step(turn, prev, state)
            state = step.state
            idx = int(np.argmax(step.final.value))
            if turn.copy is None:
                token = self.vocab.tokens[idx]
            else:
                token = turn.copy.final_token(idx, self.vocab)
            if token == EOS:
                break
            tokens.append(token)
            trace.steps.append({
                "token": token,
                "input_attention": [float(v) for v in step.input_attention.value],
                "memory_attention": [float(v) for v in step.memory_attention.value],
            })
            prev = self.feed_id(token)
        trace.tokens = list(tokens)
        return tokens, trace

    # -- teacher-forced distributions ---------------------------------------

    def forced_distributions(self, turn: TurnContext, target_tokens,
                             use_extended: bool, train: bool = False,
                             rng: np.random.Generator | None = None,
                             dropout_rate: float = 0.0):
        """Distribution node + gold id per target position.

        use_extended scores against V u V_SLOT (delexicalized targets);
        otherwise against the copy-final space V u {scenario values}.
        """
        state = turn.final_state
        prev = self.vocab.id_of(BOS)
        out = []
        for gold in target_tokens:
            step = self.decode_step(turn, prev, state, train=train, rng=rng,
                                    dropout_rate=dropout_rate)
            state = step.state
            if use_extended or turn.copy is None:
                gold_id = (self.vocab.extended_id(gold) if not self.config.no_copy
                           else self.vocab.id_of(gold))
                out.append((step.extended, gold_id))
            else:
                out.append((step.final, turn.copy.final_id(gold, self.vocab)))
            prev = self.feed_id(gold)
        return out
