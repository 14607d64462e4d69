"""Loss assembly, optimizers, gradient clipping, training loop, evaluation.

The per-sentence objective is the summed cross-entropy over all labeled
nodes plus (weight_decay / 2) * ||theta||^2. The L2 term is recorded on
the tape, so backward already delivers the decayed gradient and the
optimizer steps stay plain updates (no second decay application).
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tape, Value
from .config import TrainingConfig
from .embeddings import Vocabulary
from .lexicon import PolarDictionary, annotate, collect_loss_nodes
from .attention import node_logits
from .model import ModelParams, encode, init_model, predict, wrap_model
from .trees import ParseTree

__all__ = [
    "LossRecord",
    "SentenceLoss",
    "TrainResult",
    "sentence_loss",
    "clip_gradients",
    "adagrad_step",
    "adadelta_step",
    "train",
    "evaluate",
]

THREADS_ENV = "TREESENT_THREADS"


@dataclass
class SentenceLoss:
    """Scalar objective on the tape plus its reported decomposition."""

    value: Value
    cross_entropy: float
    l2: float
    loss_nodes: list[int]


@dataclass
class LossRecord:
    epoch: int
    mean_loss: float
    mean_cross_entropy: float
    mean_l2: float
    labeled_nodes: int
    dev_accuracy: float | None


@dataclass
class TrainResult:
    """Best-dev parameters plus the per-epoch history."""

    params: ModelParams
    best_epoch: int
    best_dev_accuracy: float
    history: list[LossRecord]


def loss_from_wrapped(tree: ParseTree, wrapped, leaves, vocab: Vocabulary,
                      config: TrainingConfig) -> SentenceLoss:
    """Objective for one (already annotated) tree over given tape leaves."""
    encoded = encode(tree, wrapped, vocab, config)
    nodes = collect_loss_nodes(tree)
    terms = []
    for node_id in nodes:
        logits, _, _ = node_logits(tree, encoded, node_id, wrapped.attention,
                                   wrapped.classifier, config.classifier,
                                   config.attn_candidates)
        terms.append(ad.softmax_cross_entropy(logits, tree.node(node_id).label))
    ce = terms[0] if len(terms) == 1 else ad.add_n(terms)
    lam = config.weight_decay
    if lam > 0.0:
        tensors = [v for name, v in leaves.items()
                   if config.embeddings_in_l2 or name != "embedding"]
        l2 = ad.scale(ad.sum_squares_n(tensors), lam / 2.0)
        total = ad.add(ce, l2)
        l2_part = float(l2.data)
    else:
        total = ce
        l2_part = 0.0
    return SentenceLoss(value=total, cross_entropy=float(ce.data),
                        l2=l2_part, loss_nodes=nodes)


def sentence_loss(tree: ParseTree, params: ModelParams, vocab: Vocabulary,
                  config: TrainingConfig, tape: Tape | None = None
                  ) -> SentenceLoss:
    """Record the full objective for one tree on a (fresh) tape."""
    tape = tape if tape is not None else Tape()
    wrapped, leaves = wrap_model(tape, params)
    return loss_from_wrapped(tree, wrapped, leaves, vocab, config)


def global_grad_norm(grads: dict[str, np.ndarray]) -> float:
    return float(np.sqrt(sum(float(np.sum(g * g)) for g in grads.values())))


def clip_gradients(grads: dict[str, np.ndarray], threshold: float,
                   mode: str = "global_norm") -> float:
    """Rescale gradients in place; returns the pre-clip global norm."""
    norm = global_grad_norm(grads)
    if mode == "global_norm":
        if norm > threshold:
            factor = threshold / norm
            for g in grads.values():
                g *= factor
    elif mode == "per_element":
        for g in grads.values():
            np.clip(g, -threshold, threshold, out=g)
    else:
        raise ValueError(f"unknown clip mode {mode!r}")
    return norm


def adagrad_step(params: ModelParams, grads: dict[str, np.ndarray],
                 state: dict, lr: float, eps: float = 1e-8) -> None:
    for name, arr in params.named_tensors():
        g = grads[name]
        if g.shape != arr.shape:
            raise ValueError(f"gradient shape mismatch for {name}")
        acc = state.get(name)
        if acc is None:
            acc = state[name] = np.zeros_like(arr)
        acc += g * g
        arr -= lr * g / (np.sqrt(acc) + eps)


def adadelta_step(params: ModelParams, grads: dict[str, np.ndarray],
                  state: dict, rho: float = 0.95, eps: float = 1e-6) -> None:
    for name, arr in params.named_tensors():
        g = grads[name]
        if g.shape != arr.shape:
            raise ValueError(f"gradient shape mismatch for {name}")
        slot = state.get(name)
        if slot is None:
            slot = state[name] = (np.zeros_like(arr), np.zeros_like(arr))
        acc_g, acc_d = slot
        acc_g *= rho
        acc_g += (1.0 - rho) * g * g
        delta = -np.sqrt(acc_d + eps) / np.sqrt(acc_g + eps) * g
        arr += delta
        acc_d *= rho
        acc_d += (1.0 - rho) * delta * delta


def _optimizer_step(params, grads, state, config: TrainingConfig) -> None:
    if config.optimizer == "adagrad":
        adagrad_step(params, grads, state, lr=config.lr, eps=config.adagrad_eps)
    else:
        adadelta_step(params, grads, state, rho=config.adadelta_rho,
                      eps=config.adadelta_eps)


def _root_correct(tree: ParseTree, params, vocab, config) -> int:
    gold = tree.node(tree.root).label
    if gold is None:
        raise ValueError("unlabeled root in evaluation set")
    return int(predict(tree, params, vocab, config).argmax == gold)


def evaluate(trees, params: ModelParams, vocab: Vocabulary,
             config: TrainingConfig) -> float:
    """Fraction of sentences whose root argmax matches the gold label.

    Never consults a dictionary. TREESENT_THREADS > 1 fans the sentences
    out over a thread pool (the merge is an order-independent count).
    """
    trees = list(trees)
    if not trees:
        raise ValueError("empty evaluation set")
    workers = int(os.environ.get(THREADS_ENV, "1") or "1")
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            hits = sum(pool.map(
                lambda t: _root_correct(t, params, vocab, config), trees))
    else:
        hits = sum(_root_correct(t, params, vocab, config) for t in trees)
    return hits / len(trees)


def train(train_trees, dev_trees, config: TrainingConfig, vocab: Vocabulary,
          embedding: np.ndarray, dictionary: PolarDictionary | None = None
          ) -> TrainResult:
    """Per-sentence stochastic training with best-dev model selection.

    The dictionary is applied up front (training side only). Sentences are
    visited in a seeded shuffled order each epoch; dev accuracy is taken
    every ``eval_every`` epochs and at the end, and the best-dev snapshot
    (ties keep the earlier epoch) is returned.
    """
    train_trees = list(train_trees)
    dev_trees = list(dev_trees)
    if not train_trees:
        raise ValueError("empty training set")
    if not dev_trees:
        raise ValueError("empty development set")
    if config.use_dictionary and dictionary is None:
        raise ValueError("use_dictionary is set but no dictionary was given")

    rng = np.random.default_rng(config.seed)
    params = init_model(config, embedding, rng)
    if config.use_dictionary:
        data = [annotate(t, dictionary) for t in train_trees]
    else:
        data = train_trees
    for tree in data:
        collect_loss_nodes(tree)  # fail fast on unlabeled roots

    opt_state: dict = {}
    history: list[LossRecord] = []
    best: tuple[ModelParams, int, float] | None = None
    n = len(data)
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(n)
        total = ce_total = l2_total = 0.0
        labeled = 0
        for idx in order:
            tape = Tape()
            wrapped, leaves = wrap_model(tape, params)
            sl = loss_from_wrapped(data[idx], wrapped, leaves, vocab, config)
            ad.backward(tape, sl.value)
            grads = {name: leaf.grad for name, leaf in leaves.items()}
            clip_gradients(grads, config.clip, config.clip_mode)
            _optimizer_step(params, grads, opt_state, config)
            total += float(sl.value.data)
            ce_total += sl.cross_entropy
            l2_total += sl.l2
            labeled += len(sl.loss_nodes)
        dev_acc = None
        if epoch % config.eval_every == 0 or epoch == config.epochs:
            dev_acc = evaluate(dev_trees, params, vocab, config)
        history.append(LossRecord(
            epoch=epoch, mean_loss=total / n, mean_cross_entropy=ce_total / n,
            mean_l2=l2_total / n, labeled_nodes=labeled, dev_accuracy=dev_acc,
        ))
        if dev_acc is not None and (best is None or dev_acc > best[2]):
            best = (params.copy(), epoch, dev_acc)
        if (config.early_stop_dev_acc is not None and dev_acc is not None
                and dev_acc >= config.early_stop_dev_acc):
            break
    assert best is not None
    return TrainResult(params=best[0], best_epoch=best[1],
                       best_dev_accuracy=best[2], history=history)
