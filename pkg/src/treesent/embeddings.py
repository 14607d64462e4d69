"""Vocabulary construction and pre-trained word-vector ingestion.

The embedding text format is word2vec/GloVe style: one ``token v1 .. vd``
per line, no header required; an optional leading ``V d`` count header is
auto-detected and skipped. Loaded rows become trainable parameters.
"""

from __future__ import annotations

import hashlib

import numpy as np

__all__ = [
    "UNK_TOKEN",
    "EmbeddingFormatError",
    "Vocabulary",
    "build_vocabulary",
    "load_embeddings",
    "lookup",
]

UNK_TOKEN = "<unk>"


class EmbeddingFormatError(ValueError):
    pass


class Vocabulary:
    """Dense token -> index map with the UNK row reserved at index 0."""

    def __init__(self, tokens=()):
        self._index = {UNK_TOKEN: 0}
        for tok in tokens:
            if tok not in self._index:
                self._index[tok] = len(self._index)
        self._tokens = list(self._index)

    def __len__(self) -> int:
        return len(self._tokens)

    def __contains__(self, token: str) -> bool:
        return token in self._index

    def index(self, token: str) -> int:
        return self._index.get(token, 0)

    @property
    def tokens(self) -> list[str]:
        return list(self._tokens)

    def sha256(self) -> str:
        digest = hashlib.sha256("\n".join(self._tokens).encode("utf-8"))
        return digest.hexdigest()


def build_vocabulary(trees, dictionary=None) -> Vocabulary:
    """Vocabulary over the training corpus plus dictionary surface tokens.

    Dictionary tokens are included so dictionary-matched leaves always
    have their own (trainable) embedding rows.
    """
    tokens: list[str] = []
    for tree in trees:
        tokens.extend(tree.tokens())
    if dictionary is not None:
        for surface in dictionary.entries:
            tokens.extend(surface.split(" "))
    return Vocabulary(tokens)


def _is_count_header(fields, dim):
    if len(fields) != 2 or dim == 1:
        return False
    try:
        int(fields[0]), int(fields[1])
    except ValueError:
        return False
    return True


def load_embeddings(reader, vocab: Vocabulary, dim: int, seed: int) -> np.ndarray:
    """Build the V x dim table: file rows copied, the rest seeded uniform.

    Tokens absent from the file (always including UNK) are initialized
    uniform in [-0.05, 0.05] from ``seed``; identical file + seed gives an
    identical table.
    """
    if dim <= 0:
        raise ValueError("embedding dimension must be positive")
    rng = np.random.default_rng(seed)
    table = rng.uniform(-0.05, 0.05, size=(len(vocab), dim))
    for lineno, line in enumerate(reader, start=1):
        fields = line.rstrip("\n").split()
        if not fields:
            continue
        if lineno == 1 and _is_count_header(fields, dim):
            continue
        token, values = fields[0], fields[1:]
        if len(values) != dim:
            raise EmbeddingFormatError(
                f"line {lineno}: expected {dim} components, got {len(values)}"
            )
        if token not in vocab:
            continue
        try:
            table[vocab.index(token)] = [float(v) for v in values]
        except ValueError:
            raise EmbeddingFormatError(
                f"line {lineno}: non-numeric component for token {token!r}"
            ) from None
    return table


def lookup(vocab: Vocabulary, table: np.ndarray, token: str) -> np.ndarray:
    """Row for ``token``, falling back to the UNK row."""
    return table[vocab.index(token)]
