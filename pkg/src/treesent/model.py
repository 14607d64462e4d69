"""All trainable tensors in one bundle, plus whole-tree forward passes.

Tensor order in ``named_tensors`` is the declared order used by the
checkpoint blob, so it must stay stable.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from . import autodiff as ad
from .attention import AttentionParams, ClassifierParams, Prediction, classify
from .autodiff import Tape, Value
from .config import TrainingConfig
from .embeddings import Vocabulary
from .encoder import EncodedTree, RvnnParams, TreeLstmParams, encode_tree
from .trees import ParseTree

__all__ = [
    "ModelParams",
    "WrappedModel",
    "init_model",
    "wrap_model",
    "wrap_from_leaves",
    "encode",
    "predict",
]


@dataclass
class ModelParams:
    embedding: np.ndarray
    encoder: TreeLstmParams | RvnnParams
    attention: AttentionParams | None
    classifier: ClassifierParams

    def _groups(self):
        yield "encoder", self.encoder
        if self.attention is not None:
            yield "attention", self.attention
        yield "classifier", self.classifier

    def named_tensors(self):
        """(name, array) pairs in declared (checkpoint) order."""
        yield "embedding", self.embedding
        for prefix, group in self._groups():
            for f in fields(group):
                arr = getattr(group, f.name)
                if arr is not None:
                    yield f"{prefix}.{f.name}", arr

    def copy(self) -> "ModelParams":
        def copy_group(group):
            return type(group)(**{
                f.name: (getattr(group, f.name).copy()
                         if getattr(group, f.name) is not None else None)
                for f in fields(group)
            })

        return ModelParams(
            embedding=self.embedding.copy(),
            encoder=copy_group(self.encoder),
            attention=copy_group(self.attention) if self.attention else None,
            classifier=copy_group(self.classifier),
        )

    def global_norm(self) -> float:
        return float(np.sqrt(sum(
            np.sum(arr * arr) for _, arr in self.named_tensors()
        )))


class WrappedModel:
    """ModelParams mirrored as tape Values."""

    __slots__ = ("embedding", "encoder", "attention", "classifier")

    def __init__(self, embedding, encoder, attention, classifier):
        self.embedding = embedding
        self.encoder = encoder
        self.attention = attention
        self.classifier = classifier


def init_model(config: TrainingConfig, embedding: np.ndarray,
               rng: np.random.Generator) -> ModelParams:
    """Fresh parameters; the embedding table is taken as provided."""
    d, d_word = config.hidden_dim, config.word_dim
    if embedding.ndim != 2 or embedding.shape[1] != d_word:
        raise ValueError(
            f"embedding table shape {embedding.shape} does not match word_dim {d_word}"
        )
    if config.encoder == "treelstm":
        enc = TreeLstmParams.init(
            d, d_word, rng,
            forget_bias=1.0 if config.forget_bias_one else 0.0,
        )
    else:
        enc = RvnnParams.init(d, d_word, rng)
    attn = (AttentionParams.init(config.attention_dim, d, rng)
            if config.use_attention else None)
    clf = ClassifierParams.init(config.num_classes, d, rng,
                                concat=config.classifier == "concat")
    return ModelParams(embedding=embedding, encoder=enc,
                       attention=attn, classifier=clf)


class _Group:
    """Attribute bag for one wrapped params dataclass."""


def wrap_from_leaves(leaves: dict[str, Value], params: ModelParams) -> WrappedModel:
    """Assemble a WrappedModel from an existing name -> Value map."""

    def group_ns(prefix, group):
        ns = _Group()
        for f in fields(group):
            name = f"{prefix}.{f.name}"
            setattr(ns, f.name, leaves.get(name))
        return ns

    return WrappedModel(
        embedding=leaves["embedding"],
        encoder=group_ns("encoder", params.encoder),
        attention=(group_ns("attention", params.attention)
                   if params.attention is not None else None),
        classifier=group_ns("classifier", params.classifier),
    )


def wrap_model(tape: Tape, params: ModelParams
               ) -> tuple[WrappedModel, dict[str, Value]]:
    """Record every tensor as a tape leaf; returns the model view plus the
    name -> Value map used to read gradients back out."""
    leaves = {name: tape.leaf(arr) for name, arr in params.named_tensors()}
    return wrap_from_leaves(leaves, params), leaves


def encode(tree: ParseTree, wrapped: WrappedModel, vocab: Vocabulary,
           config: TrainingConfig) -> EncodedTree:
    def leaf_input(node_id: int) -> Value:
        return ad.row(wrapped.embedding, vocab.index(tree.node(node_id).token))

    return encode_tree(tree, wrapped.encoder, leaf_input, cell=config.encoder)


def predict(tree: ParseTree, params: ModelParams, vocab: Vocabulary,
            config: TrainingConfig, node_id: int | None = None) -> Prediction:
    """Decode-time prediction for one node (default: the root).

    Builds a throwaway forward-only tape; the dictionary plays no part
    here.
    """
    tape = Tape(grad=False)
    wrapped, _ = wrap_model(tape, params)
    encoded = encode(tree, wrapped, vocab, config)
    target = tree.root if node_id is None else node_id
    return classify(tree, encoded, target, wrapped.attention,
                    wrapped.classifier, config.classifier,
                    config.attn_candidates)
