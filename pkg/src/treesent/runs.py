"""File-level orchestration behind the service endpoints.

Each run function reads its inputs from disk, drives the core package, and
writes any artifacts (checkpoint, metrics) server-side so results land on
the filesystem the service owns.
"""

from __future__ import annotations

import json
from pathlib import Path

from .checkpoint import load_checkpoint, save_checkpoint
from .checks import run_suite
from .config import TrainingConfig
from .embeddings import build_vocabulary, load_embeddings
from .lexicon import load_dictionary
from .model import predict
from .schemas import (
    AttentionRecord,
    AttentionRequest,
    AttentionResponse,
    CheckResult,
    EpochMetrics,
    EvalRequest,
    EvalResponse,
    GradcheckRequest,
    GradcheckResponse,
    TrainRequest,
    TrainResponse,
)
from .training import evaluate, train
from .trees import ParseTree, binarize, label_scheme, parse_sexpr, read_tree_file

__all__ = ["run_train", "run_eval", "run_attention", "run_gradcheck",
           "METRICS_SCHEMA", "tree_to_dot"]

METRICS_SCHEMA = "treesent/metrics-v1"


def _load_trees(path, scheme) -> list[ParseTree]:
    return [binarize(t) for t in read_tree_file(path, scheme)]


def run_train(req: TrainRequest) -> TrainResponse:
    scheme = label_scheme(req.labels, sentence_level_only=not req.phrase_labels)
    train_trees = _load_trees(req.train_path, scheme)
    if not train_trees:
        raise ValueError(f"empty training file {req.train_path}")
    dev_trees = _load_trees(req.dev_path, scheme)
    if not dev_trees:
        raise ValueError(f"empty dev file {req.dev_path}")

    dictionary = None
    if req.dict_path and not req.no_dict:
        with open(req.dict_path, encoding="utf-8") as handle:
            dictionary = load_dictionary(handle, scheme)

    config = TrainingConfig(
        hidden_dim=req.hidden_dim, word_dim=req.word_dim, attn_dim=req.attn_dim,
        labels=req.labels, sentence_level_only=not req.phrase_labels,
        encoder=req.encoder, classifier=req.classifier,
        use_dictionary=dictionary is not None,
        attn_candidates=req.attn_candidates, optimizer=req.optimizer,
        lr=req.lr, weight_decay=req.weight_decay, clip=req.clip,
        clip_mode=req.clip_mode, epochs=req.epochs, seed=req.seed,
        eval_every=req.eval_every, early_stop_dev_acc=req.early_stop_dev_acc,
        embeddings_in_l2=req.embeddings_in_l2,
    )
    vocab = build_vocabulary(train_trees, dictionary)
    if req.embeddings_path:
        with open(req.embeddings_path, encoding="utf-8") as handle:
            embedding = load_embeddings(handle, vocab, req.word_dim, req.seed)
    else:
        embedding = load_embeddings((), vocab, req.word_dim, req.seed)

    result = train(train_trees, dev_trees, config, vocab, embedding, dictionary)
    save_checkpoint(req.checkpoint_path, result.params, config, vocab,
                    result.best_epoch, result.best_dev_accuracy)

    metrics_path = Path(req.metrics_path if req.metrics_path
                        else req.checkpoint_path + ".metrics.jsonl")
    metrics_path.parent.mkdir(parents=True, exist_ok=True)
    lines = [
        json.dumps({"schema": METRICS_SCHEMA, "epoch": r.epoch,
                    "train_loss": r.mean_loss, "dev_acc": r.dev_accuracy},
                   sort_keys=True)
        for r in result.history
    ]
    metrics_path.write_text("\n".join(lines) + "\n", encoding="utf-8")

    return TrainResponse(
        best_epoch=result.best_epoch,
        best_dev_accuracy=result.best_dev_accuracy,
        epochs_run=len(result.history),
        checkpoint_path=str(req.checkpoint_path),
        metrics_path=str(metrics_path),
        history=[EpochMetrics(epoch=r.epoch, train_loss=r.mean_loss,
                              dev_acc=r.dev_accuracy) for r in result.history],
    )


def run_eval(req: EvalRequest) -> EvalResponse:
    ckpt = load_checkpoint(req.checkpoint_path)
    trees = _load_trees(req.trees_path, ckpt.config.scheme())
    if not trees:
        raise ValueError(f"empty test file {req.trees_path}")
    accuracy = evaluate(trees, ckpt.params, ckpt.vocab, ckpt.config)
    return EvalResponse(accuracy=accuracy, n=len(trees))


def tree_to_dot(tree: ParseTree, prediction) -> str:
    """Graphviz rendering with attention weights annotated per node."""
    weights = {tuple(span): w for span, w in (prediction.attention or [])}

    def esc(text: str) -> str:
        return text.replace("\\", "\\\\").replace('"', '\\"')

    lines = ["digraph tree {"]
    for i in tree.post_order():
        node = tree.node(i)
        parts = [esc(node.token)] if node.is_leaf else []
        parts.append(f"[{node.span[0]},{node.span[1]})")
        if i == tree.root:
            parts.append(f"pred={prediction.argmax}")
        w = weights.get(node.span)
        if w is not None:
            parts.append(f"a={w:.4f}")
        lines.append(f'  n{i} [label="{" ".join(parts)}"];')
    for i in tree.post_order():
        for child in tree.node(i).children:
            lines.append(f"  n{i} -> n{child};")
    lines.append("}")
    return "\n".join(lines)


def run_attention(req: AttentionRequest) -> AttentionResponse:
    ckpt = load_checkpoint(req.checkpoint_path)
    if not ckpt.config.use_attention:
        raise ValueError("attention is disabled in this checkpoint")
    scheme = ckpt.config.scheme()
    if req.trees_path:
        trees = _load_trees(req.trees_path, scheme)
    elif req.trees:
        trees = [binarize(parse_sexpr(text, scheme)) for text in req.trees]
    else:
        raise ValueError("either trees_path or trees must be given")
    if not trees:
        raise ValueError("no trees to dump attention for")

    records = []
    for tree in trees:
        pred = predict(tree, ckpt.params, ckpt.vocab, ckpt.config)
        record = pred.to_record()
        if req.include_dot:
            record["dot"] = tree_to_dot(tree, pred)
        records.append(AttentionRecord(**record))
    return AttentionResponse(records=records)


def run_gradcheck(req: GradcheckRequest) -> GradcheckResponse:
    report = run_suite(seed=req.seed, instances=req.instances,
                       corrupt=req.corrupt_op)
    return GradcheckResponse(
        passed=report["passed"],
        checks=[CheckResult(**c) for c in report["checks"]],
    )
