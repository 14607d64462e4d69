"""Polar dictionaries and distant supervision over parsed trees.

A dictionary file is UTF-8, one ``surface<TAB>pos|neg`` entry per line;
lines starting with ``#`` are comments. Multiword surfaces must be
tokenized exactly like the corpus (single spaces). Matching subtrees are
stamped with a hard class label at training time only; the decode path
never sees the dictionary.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

from .trees import LabelScheme, ParseTree

__all__ = [
    "DictionaryFormatError",
    "PolarDictionary",
    "load_dictionary",
    "annotate",
    "collect_loss_nodes",
]

log = logging.getLogger(__name__)


class DictionaryFormatError(ValueError):
    pass


@dataclass(frozen=True)
class PolarDictionary:
    """Surface string (space-joined token sequence) to class index."""

    entries: dict[str, int] = field(default_factory=dict)
    n_positive: int = 0
    n_negative: int = 0

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, surface: str) -> bool:
        return surface in self.entries

    def lookup(self, surface: str) -> int | None:
        return self.entries.get(surface)


def load_dictionary(reader, scheme: LabelScheme) -> PolarDictionary:
    """Parse an open file (or iterable of lines) into a PolarDictionary.

    Polarity tags are mapped through ``scheme``; duplicate surfaces keep
    the last entry and emit a warning.
    """
    entries: dict[str, int] = {}
    for lineno, line in enumerate(reader, start=1):
        line = line.rstrip("\n")
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise DictionaryFormatError(
                f"line {lineno}: expected 'surface<TAB>pos|neg', got {line!r}"
            )
        surface, tag = parts[0].strip(), parts[1].strip()
        if not surface:
            raise DictionaryFormatError(f"line {lineno}: empty surface")
        if tag == "pos":
            cls = scheme.positive_class
        elif tag == "neg":
            cls = scheme.negative_class
        else:
            raise DictionaryFormatError(
                f"line {lineno}: unknown polarity tag {tag!r}"
            )
        if surface in entries:
            log.warning("duplicate dictionary surface %r (line %d): last entry wins",
                        surface, lineno)
        entries[surface] = cls
    n_pos = sum(1 for c in entries.values() if c == scheme.positive_class)
    n_neg = sum(1 for c in entries.values() if c == scheme.negative_class)
    return PolarDictionary(entries=entries, n_positive=n_pos, n_negative=n_neg)


def annotate(tree: ParseTree, dictionary: PolarDictionary) -> ParseTree:
    """Stamp dictionary polarities onto matching subtrees as hard labels.

    Every node except the root whose space-joined yield equals a
    dictionary surface gets that polarity; existing gold labels (and the
    root's corpus label) always take precedence. Idempotent.
    """
    new_labels: dict[int, int] = {}
    for i in tree.post_order():
        if i == tree.root or tree.node(i).label is not None:
            continue
        cls = dictionary.lookup(" ".join(tree.yield_tokens(i)))
        if cls is not None:
            new_labels[i] = cls
    return tree.with_labels(new_labels)


def collect_loss_nodes(tree: ParseTree) -> list[int]:
    """All labeled node ids, root first.

    Without distant supervision on a sentence-level corpus this is exactly
    the root. Raises if the root carries no label.
    """
    if tree.node(tree.root).label is None:
        raise ValueError("unlabeled root")
    rest = [i for i in tree.labeled_nodes() if i != tree.root]
    return [tree.root] + rest
