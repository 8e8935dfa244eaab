"""Command line: train, export, serve."""

from __future__ import annotations

import argparse
import json
import sys

from faqembed import EmbedderError
from faqembed.data import load_pairs
from faqembed.export import export_vectors
from faqembed.model import load_model, save_model
from faqembed.server import make_embed_server
from faqembed.train import TrainConfig, finetune


def _add_train(subparsers):
    p = subparsers.add_parser("train", help="fine-tune a preset on a pairs file")
    p.add_argument("--train-pairs", required=True)
    p.add_argument("--val-pairs", required=True)
    p.add_argument("--model", default="intfloat/e5-base")
    p.add_argument("--out", required=True, help="checkpoint directory")
    p.add_argument("--batch-size", type=int, default=8)
    p.add_argument("--learning-rate", type=float, default=None)
    p.add_argument("--max-steps", type=int, default=500)
    p.add_argument("--eval-steps", type=int, default=100)
    p.add_argument("--patience", type=int, default=5)
    p.add_argument("--warmup-ratio", type=float, default=0.01)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--hash-buckets", type=int, default=4096)


def _add_export(subparsers):
    p = subparsers.add_parser("export", help="embed a corpus or query file to vectors")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--texts", required=True, help="JSONL with _id and text fields")
    p.add_argument("--kind", choices=["query", "passage"], required=True)
    p.add_argument("--out", required=True)


def _add_serve(subparsers):
    p = subparsers.add_parser("serve", help="serve POST /embed")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8091)


def _load_texts(path: str) -> tuple[list[str], list[str]]:
    ids, texts = [], []
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            if "_id" not in obj or "text" not in obj:
                raise EmbedderError(f"{path}: line {lineno} needs _id and text")
            ids.append(obj["_id"])
            texts.append(obj["text"])
    return ids, texts


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="faqembed")
    subparsers = parser.add_subparsers(dest="command", required=True)
    _add_train(subparsers)
    _add_export(subparsers)
    _add_serve(subparsers)
    args = parser.parse_args(argv)

    try:
        if args.command == "train":
            config = TrainConfig(
                model_name=args.model,
                batch_size=args.batch_size,
                learning_rate=args.learning_rate,
                warmup_ratio=args.warmup_ratio,
                eval_steps=args.eval_steps,
                patience=args.patience,
                seed=args.seed,
                max_steps=args.max_steps,
                hash_buckets=args.hash_buckets,
            )
            result = finetune(load_pairs(args.train_pairs), load_pairs(args.val_pairs), config)
            save_model(result.model, args.out)
            print(json.dumps({
                "best_val_loss": result.best_val_loss,
                "best_step": result.best_step,
                "steps_run": result.steps_run,
                "stopped_early": result.stopped_early,
                "checkpoint": args.out,
            }))
        elif args.command == "export":
            model = load_model(args.checkpoint)
            ids, texts = _load_texts(args.texts)
            count = export_vectors(model, ids, texts, kind=args.kind, out_path=args.out)
            print(json.dumps({"count": count, "dim": model.dim, "out": args.out}))
        elif args.command == "serve":
            model = load_model(args.checkpoint)
            server = make_embed_server(model, args.host, args.port)
            print(f"listening on {args.host}:{server.server_address[1]}", flush=True)
            try:
                server.serve_forever()
            except KeyboardInterrupt:
                server.shutdown()
        return 0
    except EmbedderError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
