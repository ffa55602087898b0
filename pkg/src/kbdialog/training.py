"""Two-phase training: RL-only pretraining of the soft KB attention, then
joint NLL + lambda * RL optimization with delexicalized augmentation.

The RL objective is REINFORCE with a constant baseline, J_rl =
-E_p(e|x)[R(e) - b], where R(e) counts the entry's cells whose value appears
in the history or the gold response. Because entry counts are small the
expectation is enumerated exactly by default (identical gradient, zero
variance); a sampling estimator is available behind `rl_sampling`.
"""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import autodiff as ad
from .corpus import NONE, Instance, build_instances, build_vocabulary
from .evaluate import evaluate_model
from .model import PHASE1_PARAMS, DialogueModel, ModelConfig


@dataclass
class TrainConfig:
    """Defaults follow the reference configuration (200-dim, Adam 1e-3,
    dropout 0.75, weight decay 5e-6, lambda 0.1, baseline 1.5, 30 RL epochs)."""

    lr: float = 1e-3
    lam: float = 0.1
    dropout: float = 0.75
    weight_decay: float = 5e-6
    dim: int = 200
    rl_pretrain_epochs: int = 30
    baseline: float = 1.5
    batch_size: int = 32
    epochs: int = 50
    patience: int = 5
    seed: int = 0
    no_copy: bool = False
    no_rl: bool = False
    augment: bool = True
    rl_include_augmented: bool = True
    rl_sampling: bool = False
    rl_entropy_weight: float = 0.0
    init_scale: float = 0.08
    clip_norm: float = 5.0
    max_decode_len: int = 60

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lambda must be >= 0")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must be in [0, 1)")


def compute_rewards(instance: Instance) -> np.ndarray:
    """R(e_k): number of row-k cells whose value occurs in input or gold."""
    present = set(instance.input_tokens) | set(instance.target_tokens)
    kb = instance.kb
    rewards = np.zeros(kb.num_rows)
    for k, row in enumerate(kb.rows):
        rewards[k] = sum(1 for col in kb.columns
                         if row[col] != NONE and row[col] in present)
    return rewards


def rl_loss(entry_probs: ad.Node, rewards, baseline: float) -> ad.Node:
    """Exact expectation -sum_k p(e_k) (R(e_k) - b)."""
    advantage = ad.constant(np.asarray(rewards, dtype=np.float64) - baseline)
    return ad.scale(ad.reduce_sum(ad.mul(entry_probs, advantage)), -1.0)


def rl_loss_sampled(entry_probs: ad.Node, rewards, baseline: float,
                    rng: np.random.Generator) -> ad.Node:
    """Single-sample REINFORCE estimator -(R(e_k) - b) log p(e_k), e_k ~ p."""
    p = entry_probs.value
    k = int(rng.choice(len(p), p=p / p.sum()))
    return ad.scale(ad.safe_log(ad.pick(entry_probs, k)), -(float(rewards[k]) - baseline))


def entropy_bonus(entry_probs: ad.Node, weight: float) -> ad.Node:
    """-weight * H(p), added to the phase-1 loss to keep the entry softmax from
    locking onto an arbitrary row before the content matching is learned."""
    neg_entropy = ad.reduce_sum(ad.mul(entry_probs, ad.safe_log(entry_probs)))
    return ad.scale(neg_entropy, weight)


def nll_loss(dists) -> tuple[ad.Node, int]:
    """Mean -log p(gold_t) over (distribution, gold_id) pairs.

    Probabilities are clamped at 1e-12 inside the log; the number of clamped
    positions is returned so callers can flag starved gold tokens.
    """
    if not dists:
        raise ValueError("nll_loss needs at least one target position")
    clamped = 0
    total = None
    for probs, gold_id in dists:
        if probs.value[gold_id] < 1e-12:
            clamped += 1
        term = ad.safe_log(ad.pick(probs, gold_id))
        total = term if total is None else ad.add(total, term)
    return ad.scale(total, -1.0 / len(dists)), clamped


def instance_joint_loss(model: DialogueModel, inst: Instance, config: TrainConfig,
                        rng: np.random.Generator, train: bool = True):
    """NLL (+ lambda * RL unless ablated) for one teacher-forced instance."""
    rate = config.dropout if train else 0.0
    turn = model.encode_turn(inst.input_tokens, inst.kb, train=train, rng=rng,
                             dropout_rate=rate)
    dists = model.forced_distributions(turn, inst.target_tokens,
                                       use_extended=inst.is_delexicalized,
                                       train=train, rng=rng, dropout_rate=rate)
    loss, clamped = nll_loss(dists)
    include_rl = (not config.no_rl and config.lam > 0
                  and (config.rl_include_augmented or not inst.is_delexicalized))
    if include_rl:
        if config.rl_sampling:
            rl = rl_loss_sampled(turn.entry_probs, compute_rewards(inst),
                                 config.baseline, rng)
        else:
            rl = rl_loss(turn.entry_probs, compute_rewards(inst), config.baseline)
        loss = ad.add(loss, ad.scale(rl, config.lam))
    return loss, clamped


def rl_argmax_accuracy(model: DialogueModel, instances) -> float:
    """Fraction of instances whose argmax entry carries the maximum reward."""
    if not instances:
        return 0.0
    hits = 0
    for inst in instances:
        turn = model.encode_turn(inst.input_tokens, inst.kb, train=False)
        rewards = compute_rewards(inst)
        hits += bool(rewards[int(np.argmax(turn.entry_probs.value))] == rewards.max())
    return hits / len(instances)


@dataclass
class TrainResult:
    model: DialogueModel
    config: TrainConfig
    metrics: list = field(default_factory=list)
    rl_pretrain_accuracy: float | None = None
    best_dev: dict | None = None
    clamped_positions: int = 0


def _run_batches(model, instances, losses_of, optimizer, config, batch_offset=0):
    """Accumulate per-instance grads over batches of batch_size, clip, step."""
    epoch_loss = 0.0
    batch_sums: dict = {}
    batch_count = 0
    batch_id = batch_offset
    for idx, inst in enumerate(instances):
        loss = losses_of(inst)
        value = float(loss.value)
        if not np.isfinite(value):
            raise ad.GraphError(
                f"non-finite loss in batch {batch_id} "
                f"(dialogue {inst.dialogue_id}, turn {inst.turn_index})")
        epoch_loss += value
        for node, grad in ad.backward(loss).items():
            if node.name is not None:
                if node.name in batch_sums:
                    batch_sums[node.name] += grad
                else:
                    batch_sums[node.name] = grad.copy()
        batch_count += 1
        if batch_count == config.batch_size or idx == len(instances) - 1:
            grads = {k: g / batch_count for k, g in batch_sums.items()}
            grads, _ = ad.clip_by_global_norm(grads, config.clip_norm)
            optimizer.step(grads)
            batch_sums = {}
            batch_count = 0
            batch_id += 1
    return epoch_loss / max(len(instances), 1), batch_id


def train(config: TrainConfig, train_dialogues, dev_dialogues=(),
          metrics_path=None, echo: bool = False) -> TrainResult:
    """Full two-phase run; returns the best-dev-micro-F1 model.

    Phase 1 optimizes J_rl alone over {embeddings, encoder, W_a, W_c} for
    rl_pretrain_epochs; phase 2 optimizes J = J_nll + lambda * J_rl over all
    parameters with early stopping (patience on dev micro F1).
    """
    if not train_dialogues:
        raise ValueError("no training dialogues")
    rng = np.random.default_rng(config.seed)
    vocab = build_vocabulary(train_dialogues)
    columns = train_dialogues[0].kb.columns
    model = DialogueModel(vocab, ModelConfig(dim=config.dim, columns=columns,
                                             no_copy=config.no_copy,
                                             init_scale=config.init_scale), rng=rng)
    augment = config.augment and not config.no_copy
    instances = build_instances(train_dialogues, augment=augment)
    dev_instances = build_instances(dev_dialogues, augment=False)

    metrics: list = []
    sink = open(metrics_path, "w", encoding="utf-8") if metrics_path else None

    def log(record):
        metrics.append(record)
        if sink:
            sink.write(json.dumps(record) + "\n")
            sink.flush()
        if echo:
            print(json.dumps(record), flush=True)

    result = TrainResult(model=model, config=config)
    try:
        batch_id = 0
        if not config.no_rl and config.rl_pretrain_epochs > 0:
            rl_set = [i for i in instances
                      if config.rl_include_augmented or not i.is_delexicalized]
            opt = ad.Adam({k: model.params[k] for k in PHASE1_PARAMS},
                          lr=config.lr, weight_decay=config.weight_decay)

            def rl_only(inst):
                turn = model.encode_turn(inst.input_tokens, inst.kb, train=True,
                                         rng=rng, dropout_rate=config.dropout)
                rewards = compute_rewards(inst)
                if config.rl_sampling:
                    loss = rl_loss_sampled(turn.entry_probs, rewards, config.baseline, rng)
                else:
                    loss = rl_loss(turn.entry_probs, rewards, config.baseline)
                if config.rl_entropy_weight > 0:
                    loss = ad.add(loss, entropy_bonus(turn.entry_probs,
                                                      config.rl_entropy_weight))
                return loss

            for epoch in range(config.rl_pretrain_epochs):
                order = list(rl_set)
                rng.shuffle(order)
                start = time.time()
                loss, batch_id = _run_batches(model, order, rl_only, opt, config, batch_id)
                log({"phase": "rl", "epoch": epoch, "loss": loss,
                     "rl_on_augmented": config.rl_include_augmented,
                     "seconds": round(time.time() - start, 2)})
            result.rl_pretrain_accuracy = rl_argmax_accuracy(model, rl_set)
            log({"phase": "rl_check", "epoch": config.rl_pretrain_epochs - 1,
                 "argmax_matches_max_reward": result.rl_pretrain_accuracy})

        opt = ad.Adam(model.params, lr=config.lr, weight_decay=config.weight_decay)
        best_micro = -1.0
        best_params = None
        stale = 0
        for epoch in range(config.epochs):
            order = list(instances)
            rng.shuffle(order)
            start = time.time()

            def joint(inst):
                loss, clamped = instance_joint_loss(model, inst, config, rng)
                result.clamped_positions += clamped
                return loss

            loss, batch_id = _run_batches(model, order, joint, opt, config, batch_id)
            record = {"phase": "joint", "epoch": epoch, "loss": loss,
                      "seconds": round(time.time() - start, 2)}
            if dev_instances:
                report = evaluate_model(model, dev_instances,
                                        max_len=config.max_decode_len)
                record.update(dev_bleu=report.bleu, dev_micro_f1=report.micro_f1,
                              dev_macro_f1=report.macro_f1)
                if report.micro_f1 > best_micro:
                    best_micro = report.micro_f1
                    best_params = {k: p.value.copy() for k, p in model.params.items()}
                    result.best_dev = {"epoch": epoch, "bleu": report.bleu,
                                       "micro_f1": report.micro_f1,
                                       "macro_f1": report.macro_f1}
                    stale = 0
                else:
                    stale += 1
            log(record)
            if dev_instances and stale > config.patience:
                break
        if best_params is not None:
            for name, value in best_params.items():
                model.params[name].value = value
    finally:
        if sink:
            sink.close()
    result.metrics = metrics
    return result


def config_manifest(config: TrainConfig) -> dict:
    return asdict(config)
