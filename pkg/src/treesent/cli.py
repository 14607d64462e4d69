"""Thin command-line client for the service.

Commands talk to an in-process app by default, so no server needs to be
running; ``--server URL`` points them at a remote instance instead.
Flag values override config-file values, which override the documented
defaults.
"""

from __future__ import annotations

import argparse
import json
import sys
import warnings

import httpx

from .schemas import (
    AttentionRequest,
    EvalRequest,
    GradcheckRequest,
    TrainRequest,
)

EVAL_SCHEMA = "treesent/eval-v1"
PREDICTION_SCHEMA = "treesent/prediction-v1"
GRADCHECK_SCHEMA = "treesent/gradcheck-v1"
TRAIN_SCHEMA = "treesent/train-v1"


class Client:
    """POSTs request models either in process or over HTTP."""

    def __init__(self, server: str | None = None):
        if server:
            self._client = httpx.Client(base_url=server, timeout=None)
        else:
            from .service import create_app
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                from fastapi.testclient import TestClient
            self._client = TestClient(create_app())

    def post(self, path: str, request) -> dict:
        response = self._client.post(path, json=request.model_dump(mode="json"))
        if response.status_code != 200:
            try:
                detail = response.json().get("detail", response.text)
            except ValueError:
                detail = response.text
            raise RuntimeError(f"{path} failed ({response.status_code}): {detail}")
        return response.json()


def _load_config_file(path: str | None) -> dict:
    if not path:
        return {}
    with open(path, encoding="utf-8") as handle:
        data = json.load(handle)
    if not isinstance(data, dict):
        raise ValueError(f"config file {path} must hold a JSON object")
    return data


def _merge(file_values: dict, cli_values: dict) -> dict:
    merged = dict(file_values)
    merged.update({k: v for k, v in cli_values.items() if v is not None})
    return merged


def _add_common(parser) -> None:
    parser.add_argument("--server", default=None,
                        help="base URL of a running service (default: in-process)")
    parser.add_argument("--config", default=None,
                        help="JSON config file; flags override its values")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="treesent",
        description="Tree-structured sentiment classifiers with subtree "
                    "attention and polar-dictionary distant supervision.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train a model and write a checkpoint")
    _add_common(p_train)
    p_train.add_argument("--train", dest="train_path", default=None)
    p_train.add_argument("--dev", dest="dev_path", default=None)
    p_train.add_argument("--dict", dest="dict_path", default=None)
    p_train.add_argument("--embeddings", dest="embeddings_path", default=None)
    p_train.add_argument("--checkpoint", dest="checkpoint_path", default=None)
    p_train.add_argument("--metrics", dest="metrics_path", default=None)
    p_train.add_argument("--mode", dest="encoder",
                         choices=["treelstm", "rvnn"], default=None)
    p_train.add_argument("--classifier",
                         choices=["hidden", "attention_only", "concat"],
                         default=None)
    p_train.add_argument("--no-dict", dest="no_dict", action="store_true",
                         default=None, help="ignore the dictionary file")
    p_train.add_argument("--labels", choices=["binary", "fine5"], default=None)
    p_train.add_argument("--phrase-labels", dest="phrase_labels",
                         action="store_true", default=None,
                         help="keep gold phrase labels instead of root-only")
    p_train.add_argument("--seed", type=int, default=None)
    p_train.add_argument("--epochs", type=int, default=None)
    p_train.add_argument("--lr", type=float, default=None)
    p_train.add_argument("--weight-decay", dest="weight_decay", type=float,
                         default=None)
    p_train.add_argument("--clip", type=float, default=None)
    p_train.add_argument("--clip-mode", dest="clip_mode",
                         choices=["global_norm", "per_element"], default=None)
    p_train.add_argument("--hidden-dim", dest="hidden_dim", type=int, default=None)
    p_train.add_argument("--word-dim", dest="word_dim", type=int, default=None)
    p_train.add_argument("--attn-dim", dest="attn_dim", type=int, default=None)
    p_train.add_argument("--attn-candidates", dest="attn_candidates",
                         choices=["descendants", "children"], default=None)
    p_train.add_argument("--optimizer", choices=["adagrad", "adadelta"],
                         default=None)
    p_train.add_argument("--eval-every", dest="eval_every", type=int, default=None)

    p_eval = sub.add_parser("eval", help="evaluate a checkpoint on a tree file")
    _add_common(p_eval)
    p_eval.add_argument("--checkpoint", dest="checkpoint_path", default=None)
    p_eval.add_argument("--test", dest="trees_path", default=None)

    p_dump = sub.add_parser("dump-attention",
                            help="write per-sentence prediction records")
    _add_common(p_dump)
    p_dump.add_argument("--checkpoint", dest="checkpoint_path", default=None)
    p_dump.add_argument("--test", dest="trees_path", default=None)
    p_dump.add_argument("--out", default="-", help="JSONL output path or '-'")
    p_dump.add_argument("--dot", default=None,
                        help="also write Graphviz digraphs to this path")

    p_check = sub.add_parser("gradcheck", help="run the gradient-check suites")
    _add_common(p_check)
    p_check.add_argument("--seed", type=int, default=None)
    p_check.add_argument("--instances", type=int, default=None)
    p_check.add_argument("--corrupt-op", dest="corrupt_op", action="store_true",
                         default=None, help="negative-control hook")

    p_serve = sub.add_parser("serve", help="run the HTTP service")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8000)

    return parser


_TRAIN_FIELDS = [
    "train_path", "dev_path", "checkpoint_path", "metrics_path", "dict_path",
    "embeddings_path", "no_dict", "encoder", "classifier", "labels",
    "phrase_labels", "hidden_dim", "word_dim", "attn_dim", "attn_candidates",
    "optimizer", "lr", "weight_decay", "clip", "clip_mode", "epochs", "seed",
    "eval_every",
]


def _cmd_train(args) -> int:
    values = _merge(_load_config_file(args.config),
                    {k: getattr(args, k, None) for k in _TRAIN_FIELDS})
    request = TrainRequest(**values)
    result = Client(args.server).post("/train", request)
    print(json.dumps({
        "schema": TRAIN_SCHEMA,
        "best_epoch": result["best_epoch"],
        "best_dev_accuracy": result["best_dev_accuracy"],
        "epochs_run": result["epochs_run"],
        "checkpoint_path": result["checkpoint_path"],
        "metrics_path": result["metrics_path"],
    }, sort_keys=True))
    return 0


def _cmd_eval(args) -> int:
    values = _merge(_load_config_file(args.config),
                    {"checkpoint_path": args.checkpoint_path,
                     "trees_path": args.trees_path})
    result = Client(args.server).post("/evaluate", EvalRequest(**values))
    print(json.dumps({"schema": EVAL_SCHEMA, "accuracy": result["accuracy"],
                      "n": result["n"]}, sort_keys=True))
    return 0


def _cmd_dump_attention(args) -> int:
    values = _merge(_load_config_file(args.config),
                    {"checkpoint_path": args.checkpoint_path,
                     "trees_path": args.trees_path})
    values["include_dot"] = bool(args.dot)
    result = Client(args.server).post("/attention", AttentionRequest(**values))
    lines = []
    dots = []
    for record in result["records"]:
        dots.append(record.pop("dot", None))
        record.pop("dot", None)
        lines.append(json.dumps({"schema": PREDICTION_SCHEMA, **record},
                                sort_keys=True))
    text = "\n".join(lines) + "\n"
    if args.out == "-":
        sys.stdout.write(text)
    else:
        with open(args.out, "w", encoding="utf-8") as handle:
            handle.write(text)
    if args.dot:
        with open(args.dot, "w", encoding="utf-8") as handle:
            handle.write("\n".join(d for d in dots if d) + "\n")
    return 0


def _cmd_gradcheck(args) -> int:
    values = _merge(_load_config_file(args.config),
                    {"seed": args.seed, "instances": args.instances,
                     "corrupt_op": args.corrupt_op})
    result = Client(args.server).post("/gradcheck", GradcheckRequest(**values))
    print(json.dumps({"schema": GRADCHECK_SCHEMA, **result}, sort_keys=True))
    return 0 if result["passed"] else 1


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app
    uvicorn.run(create_app(), host=args.host, port=args.port)
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {
        "train": _cmd_train,
        "eval": _cmd_eval,
        "dump-attention": _cmd_dump_attention,
        "gradcheck": _cmd_gradcheck,
        "serve": _cmd_serve,
    }
    try:
        return handlers[args.command](args)
    except (RuntimeError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
