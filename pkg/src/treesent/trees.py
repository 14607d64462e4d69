"""Labeled constituency trees: s-expression parsing, binarization, yields.

Trees arrive one per line as SST-style s-expressions::

    (3 (2 good) (1 bad))

Every group opens with a raw label token; a leaf group holds exactly one
word. Parsed trees are arena-backed and immutable. Node ids are assigned in
post order, so iterating ids 0..n-1 always visits children before their
parent and the root is the last id.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, replace

__all__ = [
    "TreeParseError",
    "LabelScheme",
    "label_scheme",
    "TreeNode",
    "ParseTree",
    "parse_sexpr",
    "binarize",
    "yield_tokens",
    "read_tree_file",
]

_TOKEN = re.compile(r"\(|\)|[^()\s]+")


class TreeParseError(ValueError):
    """Malformed s-expression or label outside the active scheme."""


@dataclass(frozen=True)
class LabelScheme:
    """Maps raw label strings to dense class indices.

    ``sentence_level_only`` keeps only the root label; raw label strings
    below the root are preserved for re-serialization but not validated,
    so syntactically-labeled trees load cleanly in that mode.

    ``positive_class``/``negative_class`` are the targets that polar
    dictionary entries map onto.
    """

    name: str
    num_classes: int
    sentence_level_only: bool = False
    positive_class: int = 1
    negative_class: int = 0

    def parse_label(self, raw: str) -> int:
        if self.name == "binary":
            mapping = {"N": 0, "P": 1, "0": 0, "1": 1}
            if raw not in mapping:
                raise TreeParseError(
                    f"label {raw!r} not in binary scheme (expected P, N, 0 or 1)"
                )
            return mapping[raw]
        try:
            value = int(raw)
        except ValueError:
            raise TreeParseError(f"non-numeric label {raw!r}") from None
        if not 0 <= value < self.num_classes:
            raise TreeParseError(
                f"label {raw!r} outside scheme range [0, {self.num_classes})"
            )
        return value


def label_scheme(
    name: str,
    sentence_level_only: bool = False,
    positive_class: int | None = None,
    negative_class: int | None = None,
) -> LabelScheme:
    """Build one of the two supported schemes: ``binary`` or ``fine5``."""
    if name == "binary":
        pos, neg = 1, 0
        classes = 2
    elif name == "fine5":
        pos, neg = 3, 1
        classes = 5
    else:
        raise ValueError(f"unknown label scheme {name!r}")
    return LabelScheme(
        name=name,
        num_classes=classes,
        sentence_level_only=sentence_level_only,
        positive_class=positive_class if positive_class is not None else pos,
        negative_class=negative_class if negative_class is not None else neg,
    )


@dataclass(frozen=True)
class TreeNode:
    """One arena slot: a leaf carries a token, an internal node 2+ child ids.

    ``label`` is the mapped class index (None when absent or dropped);
    ``raw_label`` keeps the original label string for serialization.
    ``span`` is the half-open token-index interval covered by the node.
    """

    label: int | None
    raw_label: str | None
    token: str | None
    children: tuple[int, ...]
    span: tuple[int, int]

    @property
    def is_leaf(self) -> bool:
        return not self.children


class ParseTree:
    """Immutable arena of nodes in post order; ``root`` is the last id."""

    __slots__ = ("nodes", "root")

    def __init__(self, nodes: list[TreeNode]):
        if not nodes:
            raise ValueError("a tree needs at least one node")
        seen_parent: set[int] = set()
        for i, node in enumerate(nodes):
            for c in node.children:
                if not 0 <= c < i:
                    raise ValueError("children must precede their parent")
                if c in seen_parent:
                    raise ValueError(f"node {c} has more than one parent")
                seen_parent.add(c)
        if len(seen_parent) != len(nodes) - 1:
            raise ValueError("exactly one root expected")
        self.nodes = tuple(nodes)
        self.root = len(nodes) - 1

    def __len__(self) -> int:
        return len(self.nodes)

    def __eq__(self, other) -> bool:
        return isinstance(other, ParseTree) and self.nodes == other.nodes

    def __hash__(self):
        return hash(self.nodes)

    def __repr__(self) -> str:
        return f"ParseTree({self.to_sexpr()})"

    def node(self, node_id: int) -> TreeNode:
        if not 0 <= node_id < len(self.nodes):
            raise ValueError(f"unknown node id {node_id}")
        return self.nodes[node_id]

    def post_order(self) -> range:
        return range(len(self.nodes))

    def leaves(self) -> list[int]:
        return [i for i, n in enumerate(self.nodes) if n.is_leaf]

    def labeled_nodes(self) -> list[int]:
        return [i for i, n in enumerate(self.nodes) if n.label is not None]

    def descendants(self, node_id: int) -> list[int]:
        """Strict descendants of ``node_id`` in ascending id order."""
        self.node(node_id)
        out: list[int] = []
        stack = list(self.nodes[node_id].children)
        while stack:
            i = stack.pop()
            out.append(i)
            stack.extend(self.nodes[i].children)
        return sorted(out)

    def yield_tokens(self, node_id: int) -> list[str]:
        """Left-to-right leaf tokens of the subtree rooted at ``node_id``."""
        node = self.node(node_id)
        start, end = node.span
        leaf_tokens = [n.token for n in self.nodes if n.is_leaf]
        return leaf_tokens[start:end]

    def tokens(self) -> list[str]:
        return self.yield_tokens(self.root)

    def is_binary(self) -> bool:
        return all(len(n.children) in (0, 2) for n in self.nodes)

    def with_labels(self, new_labels: dict[int, int]) -> "ParseTree":
        """A copy with class labels set at the given node ids."""
        if not new_labels:
            return self
        nodes = list(self.nodes)
        for i, cls in new_labels.items():
            self.node(i)
            nodes[i] = replace(nodes[i], label=cls)
        return ParseTree(nodes)

    def to_sexpr(self) -> str:
        """Serialize; byte-identical to the input format for labeled nodes."""

        def render(i: int) -> str:
            node = self.nodes[i]
            body = node.token if node.is_leaf else " ".join(
                render(c) for c in node.children
            )
            if node.raw_label is None:
                return f"({body})"
            return f"({node.raw_label} {body})"

        return render(self.root)


class _Raw:
    """Parser/binarizer scratch node before arena flattening.

    ``mapped`` is the class index once the label scheme has been applied;
    the parser leaves it None.
    """

    __slots__ = ("raw_label", "token", "children", "mapped")

    def __init__(self, raw_label, token=None, children=None, mapped=None):
        self.raw_label = raw_label
        self.token = token
        self.children = children or []
        self.mapped = mapped

    @property
    def is_leaf(self):
        return self.token is not None


def _parse_raw(text: str) -> _Raw:
    tokens = _TOKEN.findall(text)
    if not tokens:
        raise TreeParseError("empty input")
    pos = 0

    def peek():
        return tokens[pos] if pos < len(tokens) else None

    def parse_group() -> _Raw:
        nonlocal pos
        if peek() != "(":
            raise TreeParseError(f"expected '(' but found {peek()!r}")
        pos += 1
        head = peek()
        if head is None:
            raise TreeParseError("unbalanced parentheses")
        if head == ")":
            raise TreeParseError("empty group")
        if head == "(":
            raise TreeParseError("group is missing a label")
        pos += 1
        words: list[str] = []
        groups: list[_Raw] = []
        while True:
            item = peek()
            if item is None:
                raise TreeParseError("unbalanced parentheses")
            if item == ")":
                pos += 1
                break
            if item == "(":
                groups.append(parse_group())
            else:
                words.append(item)
                pos += 1
        if groups and words:
            raise TreeParseError("group mixes tokens and subgroups")
        if not groups:
            if not words:
                raise TreeParseError(f"group {head!r} has no token or children")
            if len(words) > 1:
                raise TreeParseError("leaf group holds more than one token")
            return _Raw(head, token=words[0])
        return _Raw(head, children=groups)

    tree = parse_group()
    if pos != len(tokens):
        raise TreeParseError("unbalanced parentheses" if tokens[pos] == ")" else
                             "trailing content after the tree")
    return tree


def _to_arena(raw: _Raw, scheme: LabelScheme) -> ParseTree:
    nodes: list[TreeNode] = []
    counter = [0]

    def build(node: _Raw, is_root: bool) -> int:
        if node.raw_label is None:
            label = None
        elif is_root or not scheme.sentence_level_only:
            label = scheme.parse_label(node.raw_label)
        else:
            label = None
        if node.is_leaf:
            start = counter[0]
            counter[0] += 1
            nodes.append(TreeNode(label, node.raw_label, node.token, (), (start, start + 1)))
            return len(nodes) - 1
        child_ids = tuple(build(c, False) for c in node.children)
        span = (nodes[child_ids[0]].span[0], nodes[child_ids[-1]].span[1])
        nodes.append(TreeNode(label, node.raw_label, None, child_ids, span))
        return len(nodes) - 1

    build(raw, True)
    return ParseTree(nodes)


def parse_sexpr(text: str, scheme: LabelScheme) -> ParseTree:
    """Parse one SST-style s-expression into a ParseTree.

    The first token of each group is its raw label, mapped through
    ``scheme``. Raises TreeParseError on malformed input.
    """
    return _to_arena(_parse_raw(text), scheme)


def _from_tree(tree: ParseTree) -> _Raw:
    def build(i: int) -> _Raw:
        node = tree.nodes[i]
        return _Raw(node.raw_label, token=node.token,
                    children=[build(c) for c in node.children],
                    mapped=node.label)

    return build(tree.root)


def _binarize_raw(node: _Raw) -> _Raw:
    # Collapse unary chains onto the lowest non-unary descendant; the
    # topmost class label present on the chain wins, along with its raw
    # string. Chains without any class label keep the topmost raw string.
    mapped = node.mapped
    raw = node.raw_label
    cur = node
    while len(cur.children) == 1:
        cur = cur.children[0]
        if mapped is None and cur.mapped is not None:
            mapped, raw = cur.mapped, cur.raw_label
    if cur.is_leaf:
        return _Raw(raw, token=cur.token, mapped=mapped)
    kids = [_binarize_raw(c) for c in cur.children]
    # Left-branching fold; intermediate nodes carry no label.
    acc = kids[0]
    for k in kids[1:-1]:
        acc = _Raw(None, children=[acc, k])
    return _Raw(raw, children=[acc, kids[-1]], mapped=mapped)


def binarize(tree: ParseTree) -> ParseTree:
    """Left-branching binarization; unary chains collapse onto their child.

    Intermediate fold nodes carry no label and therefore never attract
    loss. Idempotent.
    """
    raw = _binarize_raw(_from_tree(tree))

    nodes: list[TreeNode] = []
    counter = [0]

    def build(node: _Raw) -> int:
        label = node.mapped
        if node.is_leaf:
            start = counter[0]
            counter[0] += 1
            nodes.append(TreeNode(label, node.raw_label, node.token, (), (start, start + 1)))
            return len(nodes) - 1
        child_ids = tuple(build(c) for c in node.children)
        span = (nodes[child_ids[0]].span[0], nodes[child_ids[-1]].span[1])
        nodes.append(TreeNode(label, node.raw_label, None, child_ids, span))
        return len(nodes) - 1

    build(raw)
    return ParseTree(nodes)


def yield_tokens(tree: ParseTree, node_id: int) -> list[str]:
    """Module-level alias for ParseTree.yield_tokens."""
    return tree.yield_tokens(node_id)


def read_tree_file(path, scheme: LabelScheme) -> list[ParseTree]:
    """Load one tree per line (UTF-8); blank lines are skipped.

    Parse errors are re-raised with the 1-based line number.
    """
    trees: list[ParseTree] = []
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                trees.append(parse_sexpr(line, scheme))
            except TreeParseError as exc:
                raise TreeParseError(f"{path}: line {lineno}: {exc}") from None
    return trees
