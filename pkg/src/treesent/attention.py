"""Subtree attention and the softmax classifier in its three modes.

``hidden`` scores a node from its own hidden vector, ``attention_only``
from the attention vector over its descendants, and ``concat`` (the
default) from both concatenated. A candidate set is the strict descendants
of the scored node; leaves therefore fall back to hidden mode.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Value
from .trees import ParseTree

__all__ = [
    "CLASSIFIER_MODES",
    "AttentionParams",
    "ClassifierParams",
    "Prediction",
    "attention_scores",
    "attention_vector",
    "candidate_ids",
    "node_logits",
    "classify",
]

CLASSIFIER_MODES = ("hidden", "attention_only", "concat")


@dataclass
class AttentionParams:
    """Two-layer scorer: W1 (d_a, 2d), b1 (d_a,), w2 (d_a,), b2 scalar.

    The biases are trainable but start at zero, matching the bias-free
    formulation when untouched.
    """

    W1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray

    @classmethod
    def init(cls, d_a: int, d: int, rng: np.random.Generator) -> "AttentionParams":
        bound = 1.0 / np.sqrt(d)
        return cls(
            W1=rng.uniform(-bound, bound, size=(d_a, 2 * d)),
            b1=np.zeros(d_a),
            w2=rng.uniform(-bound, bound, size=(d_a,)),
            b2=np.zeros(()),
        )


@dataclass
class ClassifierParams:
    """W_s (d_l, d) + b_s for hidden/attention-only input; the concat mode
    additionally carries W_sp (d_l, 2d) + b_a. W_s stays allocated in
    concat mode for the leaf fallback."""

    W_s: np.ndarray
    b_s: np.ndarray
    W_sp: np.ndarray | None = None
    b_a: np.ndarray | None = None

    @classmethod
    def init(cls, d_l: int, d: int, rng: np.random.Generator,
             concat: bool) -> "ClassifierParams":
        bound = 1.0 / np.sqrt(d)
        return cls(
            W_s=rng.uniform(-bound, bound, size=(d_l, d)),
            b_s=np.zeros(d_l),
            W_sp=rng.uniform(-bound, bound, size=(d_l, 2 * d)) if concat else None,
            b_a=np.zeros(d_l) if concat else None,
        )


@dataclass
class Prediction:
    """Per-node label distribution plus attention weights when computed."""

    node_span: tuple[int, int]
    distribution: np.ndarray
    argmax: int
    attention: list[tuple[tuple[int, int], float]] | None = None

    def to_record(self) -> dict:
        record = {
            "node_span": list(self.node_span),
            "distribution": [float(p) for p in self.distribution],
            "argmax": self.argmax,
            "attention": [],
        }
        if self.attention is not None:
            record["attention"] = [
                {"node_span": list(span), "weight": float(w)}
                for span, w in self.attention
            ]
        return record


def attention_scores(candidates, target: Value, p) -> Value:
    """Normalized exponentiated scores over the candidate set.

    Returns a weight vector: positive entries summing to 1.
    """
    candidates = list(candidates)
    if not candidates:
        raise ValueError("empty candidate set")
    logits = ad.pair_scores(p.W1, p.b1, p.w2, p.b2, candidates, target)
    return ad.normalize(ad.exp(logits))


def attention_vector(candidates, weights: Value) -> Value:
    """Convex combination of candidate hidden vectors."""
    candidates = list(candidates)
    if len(candidates) != weights.data.shape[0]:
        raise ValueError("length mismatch between candidates and weights")
    return ad.weighted_sum(weights, candidates)


def candidate_ids(tree: ParseTree, node_id: int, scope: str = "descendants"
                  ) -> list[int]:
    """Attention candidates for a node: all strict descendants, or just the
    two children when ``scope`` is ``children``."""
    if scope == "descendants":
        return tree.descendants(node_id)
    if scope == "children":
        return sorted(tree.node(node_id).children)
    raise ValueError(f"unknown candidate scope {scope!r}")


def node_logits(tree: ParseTree, encoded, node_id: int, attn_p, clf_p,
                mode: str, scope: str = "descendants"):
    """Classifier logits for one node.

    Returns (logits, weights-or-None, candidate-ids). Nodes without
    candidates (leaves) are scored in hidden mode regardless of ``mode``.
    """
    if mode not in CLASSIFIER_MODES:
        raise ValueError(f"invalid classifier mode {mode!r}")
    h_j = encoded.h[node_id]
    if h_j is None:
        raise ValueError(f"node {node_id} is not encoded")
    ids = candidate_ids(tree, node_id, scope) if mode != "hidden" else []
    if not ids:
        return ad.affine(clf_p.W_s, h_j, clf_p.b_s), None, []
    cands = [encoded.h[i] for i in ids]
    weights = attention_scores(cands, h_j, attn_p)
    a_j = attention_vector(cands, weights)
    if mode == "attention_only":
        logits = ad.affine(clf_p.W_s, a_j, clf_p.b_s)
    else:
        logits = ad.affine(clf_p.W_sp, ad.concat(a_j, h_j), clf_p.b_a)
    return logits, weights, ids


def classify(tree: ParseTree, encoded, node_id: int, attn_p, clf_p,
             mode: str, scope: str = "descendants") -> Prediction:
    """Label distribution and argmax for one node; attention weights are
    attached whenever they were computed."""
    logits, weights, ids = node_logits(tree, encoded, node_id, attn_p, clf_p,
                                       mode, scope)
    probs = ad.softmax(logits.data)
    attention = None
    if weights is not None:
        attention = [(tree.node(i).span, float(w))
                     for i, w in zip(ids, weights.data)]
    return Prediction(
        node_span=tree.node(node_id).span,
        distribution=probs,
        argmax=int(np.argmax(probs)),
        attention=attention,
    )
