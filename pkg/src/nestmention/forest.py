"""Nested mention annotations and their binarized forest representation.

A sentence with properly nested mentions maps to an ordered forest: every
outermost mention is the root of a tree whose internal nodes are its inner
mentions, and every word outside all mentions is a bare leaf root.  Trees are
binarized left-branching, with ``X*`` marking incomplete constituents of
label ``X``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, NamedTuple, Union

TERMINAL_SYMBOL = "$"


@dataclass(frozen=True, order=True)
class Label:
    name: str
    is_temporary: bool = False

    def __post_init__(self):
        if not self.name:
            raise ValueError("label name must be non-empty")
        if self.name.endswith("*"):
            raise ValueError(f"label name {self.name!r} clashes with temporary notation")
        if self.name == TERMINAL_SYMBOL:
            raise ValueError(f"{TERMINAL_SYMBOL!r} is reserved for the terminal symbol")

    @property
    def base(self) -> Label:
        return Label(self.name) if self.is_temporary else self

    @property
    def temporary(self) -> Label:
        return Label(self.name, True)

    def __str__(self) -> str:
        return self.name + "*" if self.is_temporary else self.name

    @classmethod
    def parse(cls, text: str) -> Label:
        if text.endswith("*"):
            return cls(text[:-1], True)
        return cls(text)


class Span(NamedTuple):
    """Inclusive token range."""

    start: int
    end: int

    def contains(self, other: Span) -> bool:
        return self.start <= other.start and other.end <= self.end

    def crosses(self, other: Span) -> bool:
        overlap = self.start <= other.end and other.start <= self.end
        return overlap and not (self.contains(other) or other.contains(self))


@dataclass(frozen=True, order=True)
class Mention:
    """A labeled inclusive token span."""

    start: int
    end: int
    label: str

    @property
    def span(self) -> Span:
        return Span(self.start, self.end)

    def __str__(self) -> str:
        return f"({self.start},{self.end},{self.label})"


@dataclass(frozen=True)
class SentenceAnnotation:
    tokens: tuple[str, ...]
    pos_tags: tuple[str, ...]
    mentions: frozenset[Mention] = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))
        object.__setattr__(self, "pos_tags", tuple(self.pos_tags))
        object.__setattr__(self, "mentions", frozenset(self.mentions))
        if len(self.tokens) != len(self.pos_tags):
            raise ValueError(
                f"{len(self.tokens)} tokens but {len(self.pos_tags)} POS tags"
            )

    def __len__(self) -> int:
        return len(self.tokens)

    def with_mentions(self, mentions: Iterable[Mention]) -> SentenceAnnotation:
        return SentenceAnnotation(self.tokens, self.pos_tags, frozenset(mentions))


# ---------------------------------------------------------------------------
# nesting validation


@dataclass(frozen=True)
class Violation:
    kind: str  # "out-of-bounds" | "crossing" | "identical-span"
    mentions: tuple[Mention, ...]

    def __str__(self) -> str:
        return f"{self.kind}: " + " / ".join(str(m) for m in self.mentions)


@dataclass(frozen=True)
class NestingReport:
    violations: tuple[Violation, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok

    def __str__(self) -> str:
        if self.ok:
            return "ok"
        return "; ".join(str(v) for v in self.violations)


class NestingError(ValueError):
    def __init__(self, report: NestingReport):
        super().__init__(str(report))
        self.report = report


def validate_nesting(mentions: Iterable[Mention], n: int) -> NestingReport:
    """Report every out-of-bounds mention and every crossing or same-span pair."""
    ms = sorted(set(mentions))
    violations = []
    for m in ms:
        if not 0 <= m.start <= m.end < n:
            violations.append(Violation("out-of-bounds", (m,)))
    for a, b in combinations(ms, 2):
        if a.span == b.span:
            violations.append(Violation("identical-span", (a, b)))
        elif a.span.crosses(b.span):
            violations.append(Violation("crossing", (a, b)))
    return NestingReport(tuple(violations))


# ---------------------------------------------------------------------------
# tree nodes


@dataclass(frozen=True)
class Leaf:
    index: int

    @property
    def start(self) -> int:
        return self.index

    @property
    def end(self) -> int:
        return self.index

    @property
    def span(self) -> Span:
        return Span(self.index, self.index)


@dataclass(frozen=True)
class Terminal:
    """The end-of-sentence symbol; never part of a finished forest."""

    def __str__(self) -> str:
        return TERMINAL_SYMBOL


@dataclass(frozen=True)
class Internal:
    label: Label
    children: tuple[TreeNode, ...]
    start: int = field(init=False, compare=False, repr=False)
    end: int = field(init=False, compare=False, repr=False)

    def __post_init__(self):
        if len(self.children) not in (1, 2):
            raise ValueError(f"internal node needs 1 or 2 children, got {len(self.children)}")
        for child in self.children:
            if isinstance(child, Terminal):
                raise ValueError("the terminal symbol cannot be a child")
        if len(self.children) == 2 and self.children[0].end + 1 != self.children[1].start:
            raise ValueError("children of a binary node must be adjacent")
        object.__setattr__(self, "children", tuple(self.children))
        object.__setattr__(self, "start", self.children[0].start)
        object.__setattr__(self, "end", self.children[-1].end)

    @property
    def span(self) -> Span:
        return Span(self.start, self.end)

    @property
    def is_unary(self) -> bool:
        return len(self.children) == 1


TreeNode = Union[Leaf, Terminal, Internal]


@dataclass(frozen=True)
class NaryNode:
    """An unbinarized mention node; children are NaryNode or Leaf."""

    label: str
    children: tuple[Union[NaryNode, Leaf], ...]

    @property
    def start(self) -> int:
        return self.children[0].start

    @property
    def end(self) -> int:
        return self.children[-1].end


def binarize(node: Union[NaryNode, Leaf]) -> TreeNode:
    """Left-branching binarization: X over c1..ck becomes X(X*(...X*(c1, c2)...), ck)."""
    if isinstance(node, Leaf):
        return node
    children = [binarize(c) for c in node.children]
    label = Label(node.label)
    if len(children) == 1:
        return Internal(label, (children[0],))
    acc = children[0]
    temporary = label.temporary
    for child in children[1:-1]:
        acc = Internal(temporary, (acc, child))
    return Internal(label, (acc, children[-1]))


def debinarize(node: TreeNode) -> Union[NaryNode, Leaf]:
    """Inverse of :func:`binarize`: fold temporary chains back into their parent."""
    if isinstance(node, Leaf):
        return node
    if not isinstance(node, Internal) or node.label.is_temporary:
        raise ValueError(f"cannot debinarize {node!r} as a tree root")
    return NaryNode(node.label.name, tuple(debinarize(c) for c in _flat_children(node)))


def _flat_children(node: Internal) -> list[TreeNode]:
    if node.is_unary:
        return [node.children[0]]
    left, right = node.children
    if isinstance(left, Internal) and left.label.is_temporary:
        if left.label.base != node.label.base:
            raise ValueError(f"temporary {left.label} under {node.label}")
        return _flat_children(left) + [right]
    return [left, right]


# ---------------------------------------------------------------------------
# forests


@dataclass(frozen=True)
class Forest:
    roots: tuple[TreeNode, ...]

    def __post_init__(self):
        object.__setattr__(self, "roots", tuple(self.roots))

    @property
    def n(self) -> int:
        return self.roots[-1].end + 1 if self.roots else 0

    def leaves(self) -> list[int]:
        out: list[int] = []
        for root in self.roots:
            _collect_leaves(root, out)
        return out

    def check(self) -> None:
        """Raise ValueError unless the forest invariants hold."""
        if self.leaves() != list(range(self.n)):
            raise ValueError("forest leaves do not cover 0..n-1 in order")
        for root in self.roots:
            if isinstance(root, Terminal):
                raise ValueError("terminal symbol inside a forest")
            if isinstance(root, Internal) and root.label.is_temporary:
                raise ValueError(f"root carries temporary label {root.label}")
            _check_node(root)


def _collect_leaves(node: TreeNode, out: list[int]) -> None:
    if isinstance(node, Leaf):
        out.append(node.index)
    elif isinstance(node, Internal):
        for child in node.children:
            _collect_leaves(child, out)


def _check_node(node: TreeNode) -> None:
    if not isinstance(node, Internal):
        return
    if node.is_unary:
        if not isinstance(node.children[0], Leaf):
            raise ValueError(f"unary {node.label} over a non-leaf")
        if node.label.is_temporary:
            raise ValueError(f"unary node with temporary label {node.label}")
    else:
        left, right = node.children
        if isinstance(right, Internal) and right.label.is_temporary:
            raise ValueError(f"temporary {right.label} as a right child")
        if isinstance(left, Internal) and left.label.is_temporary:
            if left.label.name != node.label.name:
                raise ValueError(f"temporary {left.label} under {node.label}")
    for child in node.children:
        _check_node(child)


def mentions_to_forest(sentence: SentenceAnnotation) -> Forest:
    n = len(sentence)
    report = validate_nesting(sentence.mentions, n)
    if not report.ok:
        raise NestingError(report)
    ordered = sorted(sentence.mentions, key=lambda m: (m.start, -m.end))
    return Forest(tuple(binarize(c) for c in _nary_children(0, n - 1, ordered)))


def _nary_children(lo: int, hi: int, mentions: list[Mention]) -> list[Union[NaryNode, Leaf]]:
    # mentions are strictly inside [lo, hi], sorted by (start, -end), non-crossing
    children: list[Union[NaryNode, Leaf]] = []
    pos, j = lo, 0
    while pos <= hi:
        if j < len(mentions) and mentions[j].start == pos:
            outer = mentions[j]
            j += 1
            inner = []
            while j < len(mentions) and mentions[j].end <= outer.end:
                inner.append(mentions[j])
                j += 1
            children.append(NaryNode(outer.label, tuple(_nary_children(outer.start, outer.end, inner))))
            pos = outer.end + 1
        else:
            children.append(Leaf(pos))
            pos += 1
    return children


def forest_to_mentions(forest: Forest) -> frozenset[Mention]:
    found: set[Mention] = set()
    stack = list(forest.roots)
    while stack:
        node = stack.pop()
        if isinstance(node, Internal):
            if not node.label.is_temporary:
                found.add(Mention(node.start, node.end, node.label.name))
            stack.extend(node.children)
    return frozenset(found)


def nesting_depth(mentions: Iterable[Mention]) -> int:
    """Length of the longest containment chain (0 for no mentions)."""
    ms = sorted(set(mentions), key=lambda m: (m.start, -m.end))
    depth = 0
    open_ends: list[int] = []
    for m in ms:
        while open_ends and open_ends[-1] < m.start:
            open_ends.pop()
        open_ends.append(m.end)
        depth = max(depth, len(open_ends))
    return depth


def format_tree(node: TreeNode, tokens=None) -> str:
    """Bracketed rendering, e.g. ``(PER (GPE Indonesian) leaders)``."""
    if isinstance(node, Leaf):
        return tokens[node.index] if tokens is not None else str(node.index)
    if isinstance(node, Terminal):
        return TERMINAL_SYMBOL
    inner = " ".join(format_tree(c, tokens) for c in node.children)
    return f"({node.label} {inner})"
