"""Seeded gradient-check suites: per-op checks and full-model checks.

The full-model instance is a random binary tree with a root label and one
dictionary-stamped extra loss node, attention on, so the finite-difference
oracle exercises every backward rule the trainer uses.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .autodiff import GradCheckReport, grad_check
from .config import TrainingConfig
from .embeddings import build_vocabulary
from .lexicon import PolarDictionary, annotate
from .model import init_model, wrap_from_leaves
from .training import loss_from_wrapped
from .trees import binarize, label_scheme, parse_sexpr

__all__ = [
    "random_instance",
    "full_model_check",
    "single_op_checks",
    "run_suite",
    "OP_TOLERANCE",
    "MODEL_TOLERANCE",
]

OP_TOLERANCE = 1e-6
MODEL_TOLERANCE = 1e-4

_TOKEN_POOL = [f"w{i}" for i in range(12)]


def _random_sexpr(rng: np.random.Generator, tokens: list[str]) -> str:
    """Random binary bracketing over ``tokens`` with throwaway inner labels."""

    def build(seq: list[str]) -> str:
        if len(seq) == 1:
            return f"(N {seq[0]})"
        split = int(rng.integers(1, len(seq)))
        return f"(N {build(seq[:split])} {build(seq[split:])})"

    root_label = "P" if rng.integers(2) else "N"
    if len(tokens) == 1:
        return f"({root_label} {tokens[0]})"
    split = int(rng.integers(1, len(tokens)))
    return f"({root_label} {build(tokens[:split])} {build(tokens[split:])})"


def random_instance(seed: int, d: int = 8, d_word: int = 8, d_a: int = 8,
                    min_leaves: int = 2, max_leaves: int = 9,
                    encoder: str = "treelstm", classifier: str = "concat",
                    weight_decay: float = 1e-4):
    """A (tree, params, vocab, config) tuple for full-model checking.

    Tokens are sampled without replacement so the dictionary surface
    matches exactly one node: an internal node when the tree has one below
    the root, otherwise a leaf.

    Every tensor (biases included) is redrawn uniform in [-0.5, 0.5] so the
    check runs at a generic parameter point. At the zero-bias training init
    the attention biases have structurally tiny gradients (the scalar score
    bias is loss-inert by shift invariance, apart from its L2 term), which
    turns the relative-error ratio into noise over noise.
    """
    rng = np.random.default_rng(seed)
    n = int(rng.integers(min_leaves, max_leaves + 1))
    tokens = list(rng.choice(_TOKEN_POOL, size=n, replace=False))
    scheme = label_scheme("binary", sentence_level_only=True)
    tree = binarize(parse_sexpr(_random_sexpr(rng, tokens), scheme))

    internal = [i for i in tree.post_order()
                if i != tree.root and not tree.node(i).is_leaf]
    candidates = internal if internal else [
        i for i in tree.post_order() if i != tree.root]
    target = int(rng.choice(candidates))
    surface = " ".join(tree.yield_tokens(target))
    polarity = int(rng.integers(2))
    dictionary = PolarDictionary(entries={surface: polarity},
                                 n_positive=polarity, n_negative=1 - polarity)
    tree = annotate(tree, dictionary)

    config = TrainingConfig(
        hidden_dim=d, word_dim=d_word, attn_dim=d_a, labels="binary",
        encoder=encoder, classifier=classifier, use_dictionary=True,
        weight_decay=weight_decay, seed=seed, epochs=1,
    )
    vocab = build_vocabulary([tree], dictionary)
    embedding = rng.uniform(-0.05, 0.05, size=(len(vocab), d_word))
    params = init_model(config, embedding, rng)
    for _, arr in params.named_tensors():
        arr[...] = rng.uniform(-0.5, 0.5, size=arr.shape)
    return tree, params, vocab, config


def full_model_check(seed: int, step: float = 1e-4,
                     tolerance: float = MODEL_TOLERANCE, **kwargs
                     ) -> GradCheckReport:
    """Finite-difference check of the whole objective for one instance."""
    tree, params, vocab, config = random_instance(seed, **kwargs)
    tensors = dict(params.named_tensors())

    def build_loss(tape, leaves):
        wrapped = wrap_from_leaves(leaves, params)
        return loss_from_wrapped(tree, wrapped, leaves, vocab, config).value

    return grad_check(build_loss, tensors, step=step, tolerance=tolerance)


def single_op_checks(seed: int = 0, step: float = 1e-5,
                     tolerance: float = OP_TOLERANCE
                     ) -> dict[str, GradCheckReport]:
    """One isolated gradient check per registered op."""
    rng = np.random.default_rng(seed)
    d = 5

    def v(*shape):
        return rng.uniform(-1.0, 1.0, size=shape)

    probe = rng.uniform(-1.0, 1.0, size=d)
    probe6 = rng.uniform(-1.0, 1.0, size=2 * d)
    probe3 = rng.uniform(-1.0, 1.0, size=3)

    def reduce(vec, const):
        return lambda tape, ls: ad.dot(vec(tape, ls), tape.leaf(const))

    cases = {
        "row": ({"M": v(4, d)},
                reduce(lambda t, ls: ad.row(ls["M"], 2), probe)),
        "matvec": ({"M": v(d, d), "x": v(d)},
                   reduce(lambda t, ls: ad.matvec(ls["M"], ls["x"]), probe)),
        "dot": ({"u": v(d), "w": v(d)},
                lambda t, ls: ad.dot(ls["u"], ls["w"])),
        "concat": ({"u": v(d), "w": v(d)},
                   reduce(lambda t, ls: ad.concat(ls["u"], ls["w"]), probe6)),
        "add": ({"u": v(d), "w": v(d)},
                reduce(lambda t, ls: ad.add(ls["u"], ls["w"]), probe)),
        "add_n": ({"u": v(d), "w": v(d), "z": v(d)},
                  reduce(lambda t, ls: ad.add_n([ls["u"], ls["w"], ls["z"]]),
                         probe)),
        "mul": ({"u": v(d), "w": v(d)},
                reduce(lambda t, ls: ad.mul(ls["u"], ls["w"]), probe)),
        "scale": ({"u": v(d)},
                  reduce(lambda t, ls: ad.scale(ls["u"], 1.7), probe)),
        "sigmoid": ({"u": v(d)},
                    reduce(lambda t, ls: ad.sigmoid(ls["u"]), probe)),
        "tanh": ({"u": v(d)},
                 reduce(lambda t, ls: ad.tanh(ls["u"]), probe)),
        "exp": ({"u": v(d)},
                reduce(lambda t, ls: ad.exp(ls["u"]), probe)),
        "stack": ({"a": v(), "b": v(), "c": v()},
                  reduce(lambda t, ls: ad.stack([ls["a"], ls["b"], ls["c"]]),
                         probe3)),
        "normalize": ({"u": rng.uniform(0.5, 1.5, size=d)},
                      reduce(lambda t, ls: ad.normalize(ls["u"]), probe)),
        "weighted_sum": ({"w3": v(3), "x": v(d), "y": v(d), "z": v(d)},
                         reduce(lambda t, ls: ad.weighted_sum(
                             ls["w3"], [ls["x"], ls["y"], ls["z"]]), probe)),
        "softmax_cross_entropy": ({"z": v(d)},
                                  lambda t, ls: ad.softmax_cross_entropy(
                                      ls["z"], 1)),
        "sum_squares": ({"u": v(d)},
                        lambda t, ls: ad.sum_squares(ls["u"])),
        "sum_squares_n": ({"u": v(d), "M": v(3, d), "s": v()},
                          lambda t, ls: ad.sum_squares_n(
                              [ls["u"], ls["M"], ls["s"]])),
        "affine": ({"M": v(d, d), "x": v(d), "b": v(d)},
                   reduce(lambda t, ls: ad.affine(ls["M"], ls["x"], ls["b"]),
                          probe)),
        "pair_scores": ({"W": v(4, 2 * d), "b": v(4), "w4": v(4), "c": v(),
                         "h1": v(d), "h2": v(d), "h3": v(d), "t": v(d)},
                        reduce(lambda t, ls: ad.pair_scores(
                            ls["W"], ls["b"], ls["w4"], ls["c"],
                            [ls["h1"], ls["h2"], ls["h3"]], ls["t"]), probe3)),
    }
    return {
        name: grad_check(build, tensors, step=step, tolerance=tolerance)
        for name, (tensors, build) in cases.items()
    }


def run_suite(seed: int = 0, instances: int = 3, corrupt: bool = False) -> dict:
    """Deterministic pass/fail report for the op and full-model suites.

    ``corrupt`` flips the deliberately-wrong tanh backward rule so the
    negative control has something to fail on.
    """

    def collect() -> list[dict]:
        checks: list[dict] = []
        for name, report in sorted(single_op_checks(seed).items()):
            checks.append({
                "name": f"op.{name}",
                "max_relative_error": report.max_error,
                "tolerance": report.tolerance,
                "passed": report.passed,
            })
        variants = [("treelstm", "concat"), ("treelstm", "hidden"),
                    ("treelstm", "attention_only"), ("rvnn", "concat")]
        for i in range(instances):
            enc, clf = variants[i % len(variants)]
            report = full_model_check(seed + i, encoder=enc, classifier=clf)
            checks.append({
                "name": f"model.{enc}.{clf}.seed{seed + i}",
                "max_relative_error": report.max_error,
                "tolerance": report.tolerance,
                "passed": report.passed,
            })
        return checks

    if corrupt:
        with ad.corrupted_tanh_backward():
            checks = collect()
    else:
        checks = collect()
    return {"passed": all(c["passed"] for c in checks), "checks": checks}
