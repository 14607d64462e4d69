"""Per-node hidden states over a binarized tree: plain RvNN or Tree-LSTM.

The two-child LSTM cell wires each child's forget gate to the *opposite*
child's hidden state; that asymmetry is what makes child order matter.
Terminal nodes use an input-only LSTM cell (no forget gates) fed by the
word vector, since the composition cell has no word input.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from . import autodiff as ad
from .autodiff import Tape, Value
from .trees import ParseTree

__all__ = [
    "TreeLstmParams",
    "RvnnParams",
    "EncodedTree",
    "wrap_params",
    "leaf_cell",
    "binary_cell",
    "rvnn_cell",
    "rvnn_leaf",
    "encode_tree",
]


@dataclass
class TreeLstmParams:
    """Composition matrices/biases plus the leaf-input transforms.

    U_i, U_o, U_u: (d, 2d); U_fl, U_fr: (d, d); all b_*: (d,).
    W_li/W_lo/W_lu: (d, d_word) with matching biases.
    """

    U_i: np.ndarray
    U_fl: np.ndarray
    U_fr: np.ndarray
    U_o: np.ndarray
    U_u: np.ndarray
    b_i: np.ndarray
    b_fl: np.ndarray
    b_fr: np.ndarray
    b_o: np.ndarray
    b_u: np.ndarray
    W_li: np.ndarray
    W_lo: np.ndarray
    W_lu: np.ndarray
    b_li: np.ndarray
    b_lo: np.ndarray
    b_lu: np.ndarray

    @classmethod
    def init(cls, d: int, d_word: int, rng: np.random.Generator,
             forget_bias: float = 1.0) -> "TreeLstmParams":
        bound = 1.0 / np.sqrt(d)

        def u(*shape):
            return rng.uniform(-bound, bound, size=shape)

        return cls(
            U_i=u(d, 2 * d), U_fl=u(d, d), U_fr=u(d, d),
            U_o=u(d, 2 * d), U_u=u(d, 2 * d),
            b_i=np.zeros(d), b_fl=np.full(d, forget_bias),
            b_fr=np.full(d, forget_bias), b_o=np.zeros(d), b_u=np.zeros(d),
            W_li=u(d, d_word), W_lo=u(d, d_word), W_lu=u(d, d_word),
            b_li=np.zeros(d), b_lo=np.zeros(d), b_lu=np.zeros(d),
        )


@dataclass
class RvnnParams:
    """Plain recursive composition: W (d, 2d), b (d,), leaf projection
    P (d, d_word)."""

    W: np.ndarray
    b: np.ndarray
    P: np.ndarray

    @classmethod
    def init(cls, d: int, d_word: int, rng: np.random.Generator) -> "RvnnParams":
        bound = 1.0 / np.sqrt(d)
        return cls(
            W=rng.uniform(-bound, bound, size=(d, 2 * d)),
            b=np.zeros(d),
            P=rng.uniform(-bound, bound, size=(d, d_word)),
        )


class _Wrapped:
    """Attribute bag mirroring a params dataclass with tape Values."""


def wrap_params(tape: Tape, params) -> _Wrapped:
    """Wrap every ndarray field of a params dataclass as a tape leaf."""
    out = _Wrapped()
    for f in fields(params):
        arr = getattr(params, f.name)
        setattr(out, f.name, tape.leaf(arr) if arr is not None else None)
    return out


@dataclass
class EncodedTree:
    """Hidden (and, for Tree-LSTM, memory) vectors indexed by node id."""

    h: list
    c: list | None = None


def leaf_cell(x: Value, p) -> tuple[Value, Value]:
    """Input-only LSTM cell for terminals: no forget gates."""
    i = ad.sigmoid(ad.affine(p.W_li, x, p.b_li))
    o = ad.sigmoid(ad.affine(p.W_lo, x, p.b_lo))
    u = ad.tanh(ad.affine(p.W_lu, x, p.b_lu))
    c = ad.mul(i, u)
    h = ad.mul(o, ad.tanh(c))
    return h, c


def binary_cell(h_l: Value, c_l: Value, h_r: Value, c_r: Value, p
                ) -> tuple[Value, Value]:
    """Two-child LSTM composition; forget gates read the opposite child."""
    lr = ad.concat(h_l, h_r)
    i = ad.sigmoid(ad.affine(p.U_i, lr, p.b_i))
    f_l = ad.sigmoid(ad.affine(p.U_fl, h_r, p.b_fl))
    f_r = ad.sigmoid(ad.affine(p.U_fr, h_l, p.b_fr))
    o = ad.sigmoid(ad.affine(p.U_o, lr, p.b_o))
    u = ad.tanh(ad.affine(p.U_u, lr, p.b_u))
    c = ad.add(ad.mul(i, u), ad.add(ad.mul(f_l, c_l), ad.mul(f_r, c_r)))
    h = ad.mul(o, ad.tanh(c))
    return h, c


def rvnn_cell(h_l: Value, h_r: Value, p) -> Value:
    """tanh(W [h_l; h_r] + b)."""
    return ad.tanh(ad.affine(p.W, ad.concat(h_l, h_r), p.b))


def rvnn_leaf(x: Value, p) -> Value:
    """Squashed projection of the word vector into the hidden space."""
    return ad.tanh(ad.matvec(p.P, x))


def encode_tree(tree: ParseTree, p, leaf_input, cell: str = "treelstm"
                ) -> EncodedTree:
    """Post-order pass applying the leaf cell / composition cell per node.

    ``leaf_input(node_id)`` must return the word vector Value for a leaf.
    """
    if cell not in ("treelstm", "rvnn"):
        raise ValueError(f"unknown cell {cell!r}")
    n = len(tree)
    h: list = [None] * n
    c: list = [None] * n
    for i in tree.post_order():
        node = tree.node(i)
        if node.is_leaf:
            if cell == "treelstm":
                h[i], c[i] = leaf_cell(leaf_input(i), p)
            else:
                h[i] = rvnn_leaf(leaf_input(i), p)
            continue
        if len(node.children) != 2:
            raise ValueError(f"non-binary internal node {i}")
        left, right = node.children
        if cell == "treelstm":
            h[i], c[i] = binary_cell(h[left], c[left], h[right], c[right], p)
        else:
            h[i] = rvnn_cell(h[left], h[right], p)
    return EncodedTree(h=h, c=c if cell == "treelstm" else None)
