"""Minimal reverse-mode automatic differentiation on a per-sentence tape.

Tree topology changes with every sentence, so the graph is rebuilt
define-by-run: each op appends one record (output value, parent values,
backward closure) to a Tape. Records are created parents-first, so walking
them in reverse order is a valid topological order for the backward pass.
Everything is float64.
"""

from __future__ import annotations

import contextlib
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Tape",
    "Value",
    "backward",
    "row",
    "matvec",
    "affine",
    "dot",
    "concat",
    "add",
    "add_n",
    "mul",
    "scale",
    "sigmoid",
    "tanh",
    "exp",
    "stack",
    "normalize",
    "weighted_sum",
    "pair_scores",
    "softmax_cross_entropy",
    "sum_squares",
    "sum_squares_n",
    "softmax",
    "GradCheckReport",
    "grad_check",
    "corrupted_tanh_backward",
]

# Test hook: when True the tanh backward rule is deliberately wrong, so
# negative-control gradient checks have something to catch.
_CORRUPT_TANH = False


@contextlib.contextmanager
def corrupted_tanh_backward():
    global _CORRUPT_TANH
    _CORRUPT_TANH = True
    try:
        yield
    finally:
        _CORRUPT_TANH = False


class Value:
    """A tape-recorded array with an adjoint of the same shape."""

    __slots__ = ("data", "grad", "tape")

    def __init__(self, data: np.ndarray, tape: "Tape"):
        self.data = data
        self.grad = np.zeros_like(data) if tape.grad else None
        self.tape = tape


class Tape:
    """Ordered record of one computation; reset by building a fresh Tape.

    ``Tape(grad=False)`` runs forward-only: no adjoints are allocated and
    nothing is recorded, which roughly halves the cost of the many loss
    evaluations a finite-difference check needs.
    """

    __slots__ = ("_records", "grad")

    def __init__(self, grad: bool = True):
        # (output, parents, backward closure or None for leaves)
        self._records: list[tuple[Value, tuple[Value, ...], object]] = []
        self.grad = grad

    def __len__(self) -> int:
        return len(self._records)

    def leaf(self, data) -> Value:
        out = Value(np.asarray(data, dtype=np.float64), self)
        if self.grad:
            self._records.append((out, (), None))
        return out


def _result(parents, data) -> Value:
    """Create the output Value on the shared tape of ``parents``."""
    tape = parents[0].tape
    for p in parents[1:]:
        if p.tape is not tape:
            raise ValueError("op mixes values from different tapes")
    return Value(np.asarray(data, dtype=np.float64), tape)


def backward(tape: Tape, loss: Value) -> None:
    """Populate adjoints of everything on ``tape`` with d(loss)/d(node)."""
    if loss.tape is not tape:
        raise ValueError("loss was not recorded on this tape")
    if not tape.grad:
        raise ValueError("tape was built with grad=False")
    if loss.data.shape != ():
        raise ValueError("loss must be a scalar")
    loss.grad[...] = 1.0
    for _, _, backward_fn in reversed(tape._records):
        if backward_fn is not None:
            backward_fn()


def row(matrix: Value, index: int) -> Value:
    """Row extraction (embedding lookup)."""
    if matrix.data.ndim != 2:
        raise ValueError("row expects a matrix")
    out = _result((matrix,), matrix.data[index])
    if matrix.tape.grad:
        def back():
            matrix.grad[index] += out.grad

        matrix.tape._records.append((out, (matrix,), back))
    return out


def matvec(matrix: Value, vector: Value) -> Value:
    if matrix.data.ndim != 2 or vector.data.ndim != 1:
        raise ValueError("matvec expects a matrix and a vector")
    if matrix.data.shape[1] != vector.data.shape[0]:
        raise ValueError(
            f"matvec shape mismatch: {matrix.data.shape} @ {vector.data.shape}"
        )
    out = _result((matrix, vector), matrix.data @ vector.data)
    if matrix.tape.grad:
        def back():
            matrix.grad += np.outer(out.grad, vector.data)
            vector.grad += matrix.data.T @ out.grad

        matrix.tape._records.append((out, (matrix, vector), back))
    return out


def affine(matrix: Value, vector: Value, bias: Value) -> Value:
    """matrix @ vector + bias in one record."""
    if matrix.data.ndim != 2 or vector.data.ndim != 1:
        raise ValueError("affine expects a matrix and a vector")
    if (matrix.data.shape[1] != vector.data.shape[0]
            or matrix.data.shape[0] != bias.data.shape[0]):
        raise ValueError(
            f"affine shape mismatch: {matrix.data.shape} @ "
            f"{vector.data.shape} + {bias.data.shape}"
        )
    out = _result((matrix, vector, bias), matrix.data @ vector.data + bias.data)
    if matrix.tape.grad:
        def back():
            matrix.grad += np.outer(out.grad, vector.data)
            vector.grad += matrix.data.T @ out.grad
            bias.grad += out.grad

        matrix.tape._records.append((out, (matrix, vector, bias), back))
    return out


def dot(u: Value, v: Value) -> Value:
    if u.data.shape != v.data.shape or u.data.ndim != 1:
        raise ValueError("dot expects two vectors of equal length")
    out = _result((u, v), np.dot(u.data, v.data))
    if u.tape.grad:
        def back():
            u.grad += out.grad * v.data
            v.grad += out.grad * u.data

        u.tape._records.append((out, (u, v), back))
    return out


def concat(u: Value, v: Value) -> Value:
    if u.data.ndim != 1 or v.data.ndim != 1:
        raise ValueError("concat expects vectors")
    split = u.data.shape[0]
    out = _result((u, v), np.concatenate((u.data, v.data)))
    if u.tape.grad:
        def back():
            u.grad += out.grad[:split]
            v.grad += out.grad[split:]

        u.tape._records.append((out, (u, v), back))
    return out


def add(a: Value, b: Value) -> Value:
    if a.data.shape != b.data.shape:
        raise ValueError(f"add shape mismatch: {a.data.shape} vs {b.data.shape}")
    out = _result((a, b), a.data + b.data)
    if a.tape.grad:
        def back():
            a.grad += out.grad
            b.grad += out.grad

        a.tape._records.append((out, (a, b), back))
    return out


def add_n(values) -> Value:
    """Sum of same-shaped values."""
    values = tuple(values)
    if not values:
        raise ValueError("add_n needs at least one value")
    total = values[0].data.copy()
    for v in values[1:]:
        if v.data.shape != total.shape:
            raise ValueError("add_n shape mismatch")
        total += v.data
    out = _result(values, total)
    if out.tape.grad:
        def back():
            for v in values:
                v.grad += out.grad

        out.tape._records.append((out, values, back))
    return out


def mul(a: Value, b: Value) -> Value:
    """Elementwise (Hadamard) product."""
    if a.data.shape != b.data.shape:
        raise ValueError(f"mul shape mismatch: {a.data.shape} vs {b.data.shape}")
    out = _result((a, b), a.data * b.data)
    if a.tape.grad:
        def back():
            a.grad += out.grad * b.data
            b.grad += out.grad * a.data

        a.tape._records.append((out, (a, b), back))
    return out


def scale(v: Value, factor: float) -> Value:
    """Multiplication by a fixed (non-trainable) scalar."""
    out = _result((v,), v.data * factor)
    if v.tape.grad:
        def back():
            v.grad += out.grad * factor

        v.tape._records.append((out, (v,), back))
    return out


def sigmoid(x: Value) -> Value:
    with np.errstate(over="ignore"):
        y = 1.0 / (1.0 + np.exp(-x.data))
    out = _result((x,), y)
    if x.tape.grad:
        def back():
            x.grad += out.grad * out.data * (1.0 - out.data)

        x.tape._records.append((out, (x,), back))
    return out


def tanh(x: Value) -> Value:
    out = _result((x,), np.tanh(x.data))
    if x.tape.grad:
        def back():
            factor = 1.0 - out.data * out.data
            if _CORRUPT_TANH:
                factor = 1.0 - 0.9 * out.data * out.data
            x.grad += out.grad * factor

        x.tape._records.append((out, (x,), back))
    return out


def exp(x: Value) -> Value:
    out = _result((x,), np.exp(x.data))
    if x.tape.grad:
        def back():
            x.grad += out.grad * out.data

        x.tape._records.append((out, (x,), back))
    return out


def stack(scalars) -> Value:
    """Scalar values -> one vector."""
    scalars = tuple(scalars)
    if not scalars:
        raise ValueError("stack needs at least one value")
    for s in scalars:
        if s.data.shape != ():
            raise ValueError("stack expects scalars")
    out = _result(scalars, np.array([s.data for s in scalars]))
    if out.tape.grad:
        def back():
            for k, s in enumerate(scalars):
                s.grad += out.grad[k]

        out.tape._records.append((out, scalars, back))
    return out


def normalize(v: Value) -> Value:
    """v / sum(v); with positive inputs the output is a distribution."""
    if v.data.ndim != 1:
        raise ValueError("normalize expects a vector")
    total = v.data.sum()
    out = _result((v,), v.data / total)
    if v.tape.grad:
        def back():
            v.grad += (out.grad - np.dot(out.grad, out.data)) / total

        v.tape._records.append((out, (v,), back))
    return out


def weighted_sum(weights: Value, vectors) -> Value:
    """Scalar-weighted vector sum: sum_k weights[k] * vectors[k]."""
    vectors = tuple(vectors)
    if weights.data.ndim != 1 or len(vectors) != weights.data.shape[0]:
        raise ValueError("weighted_sum length mismatch")
    data = np.zeros_like(vectors[0].data)
    for k, vec in enumerate(vectors):
        data += weights.data[k] * vec.data
    out = _result((weights, *vectors), data)
    if out.tape.grad:
        def back():
            for k, vec in enumerate(vectors):
                weights.grad[k] += np.dot(out.grad, vec.data)
                vec.grad += weights.data[k] * out.grad

        out.tape._records.append((out, (weights, *vectors), back))
    return out


def pair_scores(W: Value, b: Value, w: Value, bias: Value, candidates,
                target: Value) -> Value:
    """Batched pre-exp attention logits: w . tanh(W [c_i; t] + b) + bias
    for every candidate c_i, in one record.

    Equivalent to the per-candidate concat/affine/tanh/dot chain, fused
    because the candidate set can be as large as the whole subtree.
    """
    candidates = tuple(candidates)
    if not candidates:
        raise ValueError("pair_scores needs at least one candidate")
    d = target.data.shape[0]
    if W.data.ndim != 2 or W.data.shape[1] != 2 * d:
        raise ValueError("pair_scores expects W of width 2 * dim(target)")
    W_left = W.data[:, :d]
    W_right = W.data[:, d:]
    H = np.stack([c.data for c in candidates])            # (n, d)
    base = W_right @ target.data + b.data                 # (d_a,)
    U = np.tanh(W_left @ H.T + base[:, None])             # (d_a, n)
    scores = U.T @ w.data + bias.data                     # (n,)
    out = _result((W, b, w, bias, *candidates, target), scores)
    if out.tape.grad:
        def back():
            g = out.grad                                  # (n,)
            dU = np.outer(w.data, g) * (1.0 - U * U)      # (d_a, n)
            if _CORRUPT_TANH:
                dU = np.outer(w.data, g) * (1.0 - 0.9 * U * U)
            dU_sum = dU.sum(axis=1)
            W.grad[:, :d] += dU @ H
            W.grad[:, d:] += np.outer(dU_sum, target.data)
            b.grad += dU_sum
            w.grad += U @ g
            bias.grad += g.sum()
            target.grad += W_right.T @ dU_sum
            dH = dU.T @ W_left                            # (n, d)
            for k, c in enumerate(candidates):
                c.grad += dH[k]

        out.tape._records.append((out, (W, b, w, bias, *candidates, target), back))
    return out


def softmax(z: np.ndarray) -> np.ndarray:
    """Plain softmax on raw data (decode-time helper, not a tape op)."""
    shifted = z - z.max()
    e = np.exp(shifted)
    return e / e.sum()


def softmax_cross_entropy(logits: Value, target: int) -> Value:
    """Fused softmax + cross-entropy against a one-hot target index."""
    if logits.data.ndim != 1:
        raise ValueError("softmax_cross_entropy expects a logit vector")
    if not 0 <= target < logits.data.shape[0]:
        raise ValueError(f"target {target} out of range")
    shifted = logits.data - logits.data.max()
    log_z = np.log(np.exp(shifted).sum())
    out = _result((logits,), np.float64(log_z - shifted[target]))
    if logits.tape.grad:
        probs = np.exp(shifted - log_z)

        def back():
            g = probs.copy()
            g[target] -= 1.0
            logits.grad += out.grad * g

        logits.tape._records.append((out, (logits,), back))
    return out


def sum_squares(v: Value) -> Value:
    """Sum of squared entries (L2 accumulation)."""
    out = _result((v,), np.float64(np.sum(v.data * v.data)))
    if v.tape.grad:
        def back():
            v.grad += 2.0 * out.grad * v.data

        v.tape._records.append((out, (v,), back))
    return out


def sum_squares_n(values) -> Value:
    """Sum of squared entries over several tensors in one record."""
    values = tuple(values)
    if not values:
        raise ValueError("sum_squares_n needs at least one value")
    total = np.float64(sum(float(np.sum(v.data * v.data)) for v in values))
    out = _result(values, total)
    if out.tape.grad:
        def back():
            for v in values:
                v.grad += 2.0 * out.grad * v.data

        out.tape._records.append((out, values, back))
    return out


@dataclass
class GradCheckReport:
    """Per-tensor relative error between tape adjoints and central finite
    differences: 2-norm of the difference over the larger of the norms."""

    errors: dict[str, float]
    tolerance: float
    step: float

    @property
    def max_error(self) -> float:
        return max(self.errors.values()) if self.errors else 0.0

    @property
    def passed(self) -> bool:
        return self.max_error <= self.tolerance


def _relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    denom = max(np.linalg.norm(analytic), np.linalg.norm(numeric))
    if denom < 1e-7:
        # Both gradients sit at the finite-difference noise floor (e.g. a
        # parameter the loss provably does not depend on); the ratio would
        # be noise over noise, so compare absolutely instead.
        return float(np.linalg.norm(analytic - numeric))
    return float(np.linalg.norm(analytic - numeric) / denom)


def grad_check(build_loss, tensors, step: float = 1e-4,
               tolerance: float = 1e-4) -> GradCheckReport:
    """Compare tape adjoints of a scalar loss against central differences.

    ``build_loss(tape, leaves)`` must rebuild the loss from scratch from
    the dict of leaf Values wrapping ``tensors``; it is re-run with
    perturbed tensors, so it has to be deterministic.
    """
    tape = Tape()
    leaves = {name: tape.leaf(arr) for name, arr in tensors.items()}
    loss = build_loss(tape, leaves)
    backward(tape, loss)
    analytic = {name: leaves[name].grad.copy() for name in tensors}

    def evaluate() -> float:
        t = Tape(grad=False)
        ls = {name: t.leaf(arr) for name, arr in tensors.items()}
        return float(build_loss(t, ls).data)

    errors: dict[str, float] = {}
    for name, arr in tensors.items():
        numeric = np.zeros_like(arr)
        flat = arr.reshape(-1)
        num_flat = numeric.reshape(-1)
        for idx in range(flat.shape[0]):
            original = flat[idx]
            flat[idx] = original + step
            f_plus = evaluate()
            flat[idx] = original - step
            f_minus = evaluate()
            flat[idx] = original
            num_flat[idx] = (f_plus - f_minus) / (2.0 * step)
        errors[name] = _relative_error(analytic[name], numeric)
    return GradCheckReport(errors=errors, tolerance=tolerance, step=step)
