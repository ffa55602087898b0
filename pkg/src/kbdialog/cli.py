"""Command-line entry points: prepare, train, eval, viz, chat, serve, synth."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import checkpoint, synthetic
from .corpus import (
    NONE,
    CorpusError,
    KBTable,
    build_instances,
    build_vocabulary,
    join_entities,
    load_kvret,
    normalize_value,
    oov_rate,
    tokenize,
    write_instances_jsonl,
)
from .evaluate import evaluate_model
from .training import TrainConfig, config_manifest, train


def _load_split(path, domain, split):
    return load_kvret(path, domain, split=split)


def cmd_prepare(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    train_d = _load_split(args.train, args.domain, "train")
    if not train_d:
        print("no training dialogues found", file=sys.stderr)
        return 1
    vocab = build_vocabulary(train_d)
    vocab.save(out / "vocab.txt")
    instances = build_instances(train_d, augment=args.augment)
    write_instances_jsonl(instances, out / "train.jsonl")
    print(f"train: {len(train_d)} dialogues, {len(instances)} instances, "
          f"vocabulary {vocab.size} (+{len(vocab.slot_types)} slot types)")
    for name, path in (("dev", args.dev), ("test", args.test)):
        if not path:
            continue
        dialogues = _load_split(path, args.domain, name)
        write_instances_jsonl(build_instances(dialogues), out / f"{name}.jsonl")
        oov, total = oov_rate(dialogues, vocab)
        print(f"{name}: {len(dialogues)} dialogues, "
              f"OOV rate {oov}/{total} = {100.0 * oov / max(total, 1):.2f}%")
    return 0


def cmd_train(args) -> int:
    config = TrainConfig(
        lr=args.lr, lam=args.lam, dropout=args.dropout,
        weight_decay=args.weight_decay, dim=args.dim,
        rl_pretrain_epochs=args.rl_epochs, baseline=args.baseline,
        batch_size=args.batch_size, epochs=args.epochs, patience=args.patience,
        seed=args.seed, no_copy=args.no_copy, no_rl=args.no_rl,
        augment=args.augment, rl_include_augmented=not args.rl_skip_augmented,
        rl_sampling=args.rl_sampling, rl_entropy_weight=args.rl_entropy,
        init_scale=args.init_scale, max_decode_len=args.max_len,
    )
    train_d = _load_split(args.train, args.domain, "train")
    dev_d = _load_split(args.dev, args.domain, "dev") if args.dev else []
    result = train(config, train_d, dev_dialogues=dev_d,
                   metrics_path=args.metrics, echo=not args.quiet)
    checkpoint.save(args.out, result.model, train_config=config_manifest(config))
    if result.rl_pretrain_accuracy is not None:
        print(f"phase-1 argmax/max-reward agreement: {result.rl_pretrain_accuracy:.3f}")
    if result.best_dev:
        print(f"best dev (epoch {result.best_dev['epoch']}): "
              f"BLEU {result.best_dev['bleu']:.1f} | "
              f"Micro F1 {result.best_dev['micro_f1']:.1f}")
    print(f"checkpoint written to {args.out}")
    return 0


def cmd_eval(args) -> int:
    model, _ = checkpoint.load(args.checkpoint)
    dialogues = _load_split(args.data, args.domain, args.split)
    instances = build_instances(dialogues)
    report = evaluate_model(model, instances, max_len=args.max_len,
                            global_lexicon=args.global_lexicon)
    print(report.table_row())
    if args.report:
        report.save(args.report)
        print(f"report written to {args.report}")
    return 0


def cmd_viz(args) -> int:
    model, _ = checkpoint.load(args.checkpoint)
    dialogues = _load_split(args.data, args.domain, args.split)
    matches = [d for d in dialogues if d.id == args.dialogue]
    if not matches:
        print(f"dialogue '{args.dialogue}' not found", file=sys.stderr)
        return 1
    dialogue = matches[0]
    instances = build_instances([dialogue])
    if not instances:
        print("dialogue has no car turns to visualize", file=sys.stderr)
        return 1
    index = args.turn if args.turn is not None else len(instances) - 1
    inst = instances[index]
    _, trace = model.respond(inst.input_tokens, inst.kb, max_len=args.max_len)
    if args.format == "json":
        payload = json.dumps(trace.to_json(), indent=2)
    else:
        lines = ["\t".join(("slot",) + tuple(trace.input_tokens))]
        for slot, row in zip(trace.slot_names, trace.state_attention):
            lines.append("\t".join([slot] + [f"{w:.6f}" for w in row]))
        payload = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(payload, encoding="utf-8")
        print(f"written to {args.out}")
    else:
        print(payload, end="")
    return 0


def cmd_chat(args) -> int:
    model, _ = checkpoint.load(args.checkpoint)
    raw = KBTable.from_json(json.loads(Path(args.kb).read_text(encoding="utf-8")))
    kb = KBTable(
        columns=raw.columns,
        rows=tuple({c: normalize_value(str(r.get(c))) if r.get(c) else NONE
                    for c in raw.columns} for r in raw.rows),
        domain=raw.domain,
        label_columns=raw.label_columns or raw.columns[:1],
    )
    history: list = []
    print("type an utterance (blank line or /quit to leave)")
    while True:
        try:
            line = input("driver> ").strip()
        except (EOFError, KeyboardInterrupt):
            break
        if not line or line == "/quit":
            break
        history.append(("driver", join_entities(tokenize(line), kb)))
        tokens = []
        for speaker, toks in history:
            tokens.append("<driver>" if speaker == "driver" else "<car>")
            tokens.extend(toks)
        reply, trace = model.respond(tokens, kb, max_len=args.max_len)
        history.append(("car", reply))
        top = max(range(len(trace.entry_probs)), key=trace.entry_probs.__getitem__)
        print(f"car> {' '.join(reply)}")
        print(f"     [attended entry: {trace.entry_labels[top]} "
              f"p={trace.entry_probs[top]:.2f}]")
    return 0


def cmd_serve(args) -> int:
    from .server import serve

    model, manifest = checkpoint.load(args.checkpoint)
    httpd = serve(model, port=args.port, ui_dir=args.ui, max_len=args.max_len)
    print(f"serving checkpoint (vocab {manifest['vocab_hash'][:12]}...) "
          f"on port {httpd.server_address[1]}")
    try:
        httpd.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        httpd.server_close()
    return 0


def cmd_synth(args) -> int:
    paths = synthetic.write_splits(args.out, num_dialogues=args.dialogues,
                                   held_out=args.held_out, dev=args.dev,
                                   seed=args.seed)
    for name, path in paths.items():
        print(f"{name}: {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kbdialog",
        description="Task-oriented dialogue with soft KB attention and copy decoding",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prepare", help="KVRET JSON -> instances + vocabulary")
    p.add_argument("--train", required=True)
    p.add_argument("--dev")
    p.add_argument("--test")
    p.add_argument("--domain", required=True, choices=["navigation", "weather"])
    p.add_argument("--out", required=True)
    p.add_argument("--augment", action="store_true",
                   help="also write delexicalized copies of the targets")
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("train", help="two-phase training run")
    p.add_argument("--train", required=True)
    p.add_argument("--dev")
    p.add_argument("--domain", required=True, choices=["navigation", "weather"])
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--metrics", help="JSON-lines metrics log path")
    p.add_argument("--dim", type=int, default=200)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--lam", type=float, default=0.1)
    p.add_argument("--dropout", type=float, default=0.75)
    p.add_argument("--weight-decay", type=float, default=5e-6)
    p.add_argument("--baseline", type=float, default=1.5)
    p.add_argument("--rl-epochs", type=int, default=30)
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--patience", type=int, default=5)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-len", type=int, default=60)
    p.add_argument("--init-scale", type=float, default=0.08)
    p.add_argument("--rl-entropy", type=float, default=0.0,
                   help="entropy bonus weight for RL pretraining")
    p.add_argument("--rl-sampling", action="store_true",
                   help="sampled REINFORCE instead of the exact expectation")
    p.add_argument("--rl-skip-augmented", action="store_true",
                   help="exclude delexicalized instances from the RL loss")
    p.add_argument("--no-copy", action="store_true", help="ablation: no copying")
    p.add_argument("--no-rl", action="store_true", help="ablation: no RL loss")
    p.add_argument("--augment", action=argparse.BooleanOptionalAction, default=True,
                   help="delexicalized data augmentation")
    p.add_argument("--quiet", action="store_true", help="suppress per-epoch logging")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="score a checkpoint on a split")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--domain", required=True, choices=["navigation", "weather"])
    p.add_argument("--split", default="test")
    p.add_argument("--max-len", type=int, default=60)
    p.add_argument("--global-lexicon", action="store_true",
                   help="extract entities against the union of all scenario KBs")
    p.add_argument("--report", help="write the full EvalReport JSON here")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("viz", help="state-attention heatmap data for one dialogue")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--domain", required=True, choices=["navigation", "weather"])
    p.add_argument("--split", default="test")
    p.add_argument("--dialogue", required=True)
    p.add_argument("--turn", type=int, help="instance index within the dialogue")
    p.add_argument("--format", choices=["tsv", "json"], default="tsv")
    p.add_argument("--max-len", type=int, default=60)
    p.add_argument("--out")
    p.set_defaults(func=cmd_viz)

    p = sub.add_parser("chat", help="terminal REPL against a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--kb", required=True, help="KBTable JSON file")
    p.add_argument("--max-len", type=int, default=60)
    p.set_defaults(func=cmd_chat)

    p = sub.add_parser("serve", help="HTTP inference service")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--port", type=int, default=8080)
    p.add_argument("--ui", help="static directory for the browser chat client")
    p.add_argument("--max-len", type=int, default=60)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("synth", help="generate the synthetic navigation corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--dialogues", type=int, default=500)
    p.add_argument("--held-out", type=int, default=100)
    p.add_argument("--dev", type=int, default=40)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (CorpusError, checkpoint.CheckpointError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
