"""Bracketed constituency treebanks: reading, writing, transforms and statistics.

Examples:
    >>> from spanparse.treebank import parse_bracketed, tree_to_spans
    >>> (tree,) = parse_bracketed("(S (NP (N mèo)) (VP (V ngủ)))")
    >>> sorted(tree_to_spans(tree))
    [LabeledSpan(i=0, j=1, label='NP'), LabeledSpan(i=0, j=2, label='S'),
     LabeledSpan(i=1, j=2, label='VP')]

"""

import bisect
import logging
import os
import random
import re
from collections import Counter
from collections.abc import Callable, Iterable, Iterator, Sequence
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, TypeVar, Union

from .const import EMPTY_LABEL, ESCAPES, UNARY_SEP, UNK
from .errors import (
    CountsExceedCorpus,
    EmptyNode,
    LeafWithoutTag,
    MissingConstituent,
    SeparatorInLabel,
    TreebankError,
    UnbalancedParens,
)

logger = logging.getLogger(__name__)

_TOKEN_RE = re.compile(r"\(|\)|[^\s()]+")
_UNESCAPES = {value: key for key, value in ESCAPES.items()}

T = TypeVar("T")


@dataclass(frozen=True)
class Leaf:
    """Preterminal: a word with its part-of-speech tag."""

    word: str
    pos: str


@dataclass(frozen=True)
class Internal:
    """Constituent node over one or more children."""

    label: str
    children: tuple["ParseTree", ...]

    def __post_init__(self):
        if not self.children:
            raise TreebankError(f"internal node {self.label!r} without children")


ParseTree = Union[Leaf, Internal]


class LabeledSpan(NamedTuple):
    """Labeled span over fenceposts, covering words i+1..j."""

    i: int
    j: int
    label: str


@dataclass(frozen=True)
class Sentence:
    words: tuple[str, ...]
    pos_tags: Optional[tuple[str, ...]] = None

    def __post_init__(self):
        if not self.words:
            raise TreebankError("empty sentence")
        for word in self.words:
            if not word or any(ch.isspace() for ch in word):
                raise TreebankError(f"invalid token {word!r}")
        if self.pos_tags is not None and len(self.pos_tags) != len(self.words):
            raise TreebankError(
                f"{len(self.pos_tags)} tags for {len(self.words)} words"
            )

    def __len__(self) -> int:
        return len(self.words)

    @classmethod
    def from_tree(cls, tree: ParseTree) -> "Sentence":
        leaves = list(iter_leaves(tree))
        return cls(
            words=tuple(leaf.word for leaf in leaves),
            pos_tags=tuple(leaf.pos for leaf in leaves),
        )

    @classmethod
    def from_line(cls, line: str) -> "Sentence":
        """Pre-tokenized, whitespace separated input line."""
        return cls(words=tuple(line.split()))


def iter_leaves(tree: ParseTree) -> Iterator[Leaf]:
    stack = [tree]
    while stack:
        node = stack.pop()
        if isinstance(node, Leaf):
            yield node
        else:
            stack.extend(reversed(node.children))


def fold_tree(
    tree: ParseTree,
    leaf: Callable[[Leaf], Optional[T]],
    node: Callable[[Internal, tuple[T, ...]], Optional[T]],
) -> Optional[T]:
    """Bottom-up rebuild of *tree* without recursion.

    *leaf* maps the leaves from left to right. *node* receives an internal
    node with the results of its children, `None` results dropped.
    """
    values: list[Optional[T]] = []
    stack: list[tuple[ParseTree, bool]] = [(tree, False)]
    while stack:
        current, expanded = stack.pop()
        if isinstance(current, Leaf):
            values.append(leaf(current))
        elif expanded:
            first = len(values) - len(current.children)
            kids = tuple(value for value in values[first:] if value is not None)
            del values[first:]
            values.append(node(current, kids))
        else:
            stack.append((current, True))
            stack.extend((child, False) for child in reversed(current.children))
    return values[0]


def tree_words(tree: ParseTree) -> tuple[str, ...]:
    return tuple(leaf.word for leaf in iter_leaves(tree))


def tree_tags(tree: ParseTree) -> tuple[str, ...]:
    return tuple(leaf.pos for leaf in iter_leaves(tree))


# ---------------------------------------------------------------------------
# Bracketed format
# ---------------------------------------------------------------------------


class _Frame:
    __slots__ = ("children", "label", "line", "position")

    def __init__(self, position: int, line: int):
        self.label: Optional[str] = None
        self.children: list = []
        self.position = position
        self.line = line


def _escape(token: str) -> str:
    for char, escaped in ESCAPES.items():
        token = token.replace(char, escaped)
    return token


def _unescape(token: str) -> str:
    for escaped, char in _UNESCAPES.items():
        token = token.replace(escaped, char)
    return token


def parse_bracketed(text: str) -> list[ParseTree]:
    """Parse every top-level bracketed expression of *text*.

    An unlabeled outer wrapper `( ... )` around a single tree is stripped.
    Trees may span several lines.

    Raises:
        UnbalancedParens: a `)` without opener or an unclosed `(`.
        EmptyNode: `()` or a label without children.
        LeafWithoutTag: a word that is not the only child of a tag.
        MissingConstituent: a top-level tree that is only a preterminal.
    """
    line_starts = [0] + [m.end() for m in re.finditer("\n", text)]
    trees: list[ParseTree] = []
    stack: list[_Frame] = []

    for position, match in enumerate(_TOKEN_RE.finditer(text)):
        token = match.group()
        line = bisect.bisect_right(line_starts, match.start())
        if token == "(":
            stack.append(_Frame(position, line))
        elif token == ")":
            if not stack:
                raise UnbalancedParens(line, "unexpected ')'")
            frame = stack.pop()
            node = _close(frame, toplevel=not stack)
            if stack:
                stack[-1].children.append(node)
            else:
                if isinstance(node, Leaf):
                    raise MissingConstituent(
                        f"tree at line {frame.line} has no constituent above"
                        f" {node.word!r}"
                    )
                trees.append(node)
        elif not stack:
            raise LeafWithoutTag(position, token)
        elif stack[-1].label is None and not stack[-1].children:
            stack[-1].label = token
        else:
            stack[-1].children.append(token)

    if stack:
        raise UnbalancedParens(stack[0].line, "unclosed '('")
    return trees


def _close(frame: _Frame, toplevel: bool) -> ParseTree:
    children = frame.children
    if not children:
        raise EmptyNode(frame.position)
    words = [child for child in children if isinstance(child, str)]
    if words:
        if len(children) == 1 and frame.label is not None:
            return Leaf(_unescape(words[0]), frame.label)
        raise LeafWithoutTag(frame.position, words[0])
    if frame.label is None:
        if toplevel and len(children) == 1:
            return children[0]
        raise EmptyNode(frame.position, "unlabeled node")
    return Internal(frame.label, tuple(children))


def write_bracketed(tree: ParseTree) -> str:
    """Canonical single-line form with single spaces."""
    parts: list[str] = []
    stack: list[Union[ParseTree, str]] = [tree]
    while stack:
        item = stack.pop()
        if isinstance(item, str):
            parts.append(item)
        elif isinstance(item, Leaf):
            parts.append(f"({item.pos} {_escape(item.word)})")
        else:
            parts.append(f"({item.label}")
            stack.append(")")
            for child in reversed(item.children):
                stack.extend((child, " "))
    return "".join(parts)


def read_treebank(path: os.PathLike | str) -> list[ParseTree]:
    """Read every tree of the UTF-8 file *path*.

    Raises:
        TreebankError: the file is not UTF-8 or not well formed.
    """
    with open(path, encoding="utf-8") as handle:
        try:
            text = handle.read()
        except UnicodeDecodeError as exc:
            raise TreebankError(f"{path}: not UTF-8 at byte {exc.start}") from exc
    trees = parse_bracketed(text)
    logger.debug("read %d trees from %s", len(trees), path)
    return trees


def write_treebank(trees: Iterable[ParseTree], path: os.PathLike | str) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for tree in trees:
            handle.write(write_bracketed(tree))
            handle.write("\n")


# ---------------------------------------------------------------------------
# Unary chains and spans
# ---------------------------------------------------------------------------


def _same(leaf: Leaf) -> Leaf:
    return leaf


def _check_label(label: str, sep: str) -> str:
    if sep in label:
        raise SeparatorInLabel(label, sep)
    return label


def collapse_unaries(tree: ParseTree, sep: str = UNARY_SEP) -> ParseTree:
    """Merge chains of single-child internal nodes into one joined label."""

    def merge(node: Internal, kids: tuple[ParseTree, ...]) -> Internal:
        label = _check_label(node.label, sep)
        if len(kids) == 1 and isinstance(kids[0], Internal):
            return Internal(label + sep + kids[0].label, kids[0].children)
        return Internal(label, kids)

    return fold_tree(tree, _same, merge)


def expand_unaries(tree: ParseTree, sep: str = UNARY_SEP) -> ParseTree:
    """Inverse of `collapse_unaries`."""
    return fold_tree(
        tree, _same, lambda node, kids: build_chain(node.label, kids, sep)
    )


def build_chain(label: str, children: tuple[ParseTree, ...], sep: str) -> Internal:
    labels = label.split(sep)
    node = Internal(labels[-1], children)
    for outer in reversed(labels[:-1]):
        node = Internal(outer, (node,))
    return node


def iter_spans(tree: ParseTree, start: int = 0) -> Iterator[LabeledSpan]:
    """Yield one span per internal node of *tree* as it stands (no collapse).

    Spans come in preorder: a node before the nodes below it, siblings left
    to right.
    """
    widths: dict[int, int] = {}

    def width(node: Internal, kids: tuple[int, ...]) -> int:
        widths[id(node)] = total = sum(kids)
        return total

    fold_tree(tree, lambda leaf: 1, width)
    stack: list[tuple[ParseTree, int]] = [(tree, start)]
    while stack:
        node, begin = stack.pop()
        if isinstance(node, Leaf):
            continue
        yield LabeledSpan(begin, begin + widths[id(node)], node.label)
        placed = []
        position = begin
        for child in node.children:
            placed.append((child, position))
            position += 1 if isinstance(child, Leaf) else widths[id(child)]
        stack.extend(reversed(placed))


def tree_to_spans(tree: ParseTree, sep: str = UNARY_SEP) -> frozenset[LabeledSpan]:
    """Labeled spans of the unary-collapsed tree, preterminals excluded."""
    return frozenset(iter_spans(collapse_unaries(tree, sep)))


# ---------------------------------------------------------------------------
# Vocabularies
# ---------------------------------------------------------------------------


class Vocab:
    """Bidirectional token <-> index map, index 0 reserved.

    Args:
        items: all tokens in index order, `items[0]` is the reserved token.
    """

    def __init__(self, items: Sequence[str]):
        if not items:
            raise ValueError("vocabulary needs its reserved item")
        self._items = tuple(items)
        self._index = {item: idx for idx, item in enumerate(self._items)}
        if len(self._index) != len(self._items):
            raise ValueError("duplicate vocabulary items")

    @classmethod
    def build(cls, tokens: Iterable[str], reserved: str) -> "Vocab":
        """Vocabulary in first-seen order behind the reserved token."""
        items = [reserved]
        seen = {reserved}
        for token in tokens:
            if token not in seen:
                seen.add(token)
                items.append(token)
        return cls(items)

    @property
    def items(self) -> tuple[str, ...]:
        return self._items

    @property
    def reserved(self) -> str:
        return self._items[0]

    def index(self, token: str) -> int:
        return self._index[token]

    def get(self, token: str, default: int = 0) -> int:
        return self._index.get(token, default)

    def lookup(self, index: int) -> str:
        return self._items[index]

    def __len__(self) -> int:
        return len(self._items)

    def __contains__(self, token: object) -> bool:
        return token in self._index

    def __iter__(self) -> Iterator[str]:
        return iter(self._items)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Vocab) and self._items == other._items

    def __hash__(self) -> int:
        return hash(self._items)

    def __repr__(self) -> str:
        return f"Vocab({len(self)} items)"


def build_label_vocab(trees: Iterable[ParseTree], sep: str = UNARY_SEP) -> Vocab:
    """Collapsed constituent labels of *trees*, index 0 is the empty label."""
    labels = (
        span.label
        for tree in trees
        for span in sorted(tree_to_spans(tree, sep), key=lambda s: (s.i, -s.j))
    )
    return Vocab.build(labels, EMPTY_LABEL)


def build_pos_vocab(trees: Iterable[ParseTree]) -> Vocab:
    return Vocab.build((leaf.pos for tree in trees for leaf in iter_leaves(tree)), UNK)


def build_word_vocab(trees: Iterable[ParseTree]) -> Vocab:
    return Vocab.build((leaf.word for tree in trees for leaf in iter_leaves(tree)), UNK)


# ---------------------------------------------------------------------------
# Statistics and splits
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TreebankStats:
    """Constituent and token counts of a corpus."""

    label_counts: Counter = field(default_factory=Counter)
    pos_counts: Counter = field(default_factory=Counter)
    sentence_count: int = 0
    token_count: int = 0
    max_length: int = 0

    @property
    def mean_length(self) -> float:
        if not self.sentence_count:
            return 0.0
        return self.token_count / self.sentence_count

    @property
    def constituent_count(self) -> int:
        return sum(self.label_counts.values())

    def shares(self) -> list[tuple[str, int, float]]:
        """(label, count, percent of all constituents), most frequent first."""
        total = self.constituent_count
        return [
            (label, count, 100.0 * count / total)
            for label, count in sorted(
                self.label_counts.items(), key=lambda item: (-item[1], item[0])
            )
        ]

    def __add__(self, other: "TreebankStats") -> "TreebankStats":
        if not isinstance(other, TreebankStats):
            return NotImplemented
        return TreebankStats(
            label_counts=self.label_counts + other.label_counts,
            pos_counts=self.pos_counts + other.pos_counts,
            sentence_count=self.sentence_count + other.sentence_count,
            token_count=self.token_count + other.token_count,
            max_length=max(self.max_length, other.max_length),
        )


def compute_stats(corpus: Iterable[ParseTree]) -> TreebankStats:
    labels: Counter = Counter()
    tags: Counter = Counter()
    sentences = tokens = longest = 0
    for tree in corpus:
        labels.update(span.label for span in iter_spans(tree))
        length = 0
        for leaf in iter_leaves(tree):
            tags[leaf.pos] += 1
            length += 1
        sentences += 1
        tokens += length
        longest = max(longest, length)
    return TreebankStats(labels, tags, sentences, tokens, longest)


def split_corpus(
    corpus: Sequence[ParseTree],
    train_count: int,
    dev_count: int,
    seed: Optional[int] = None,
    shuffle: bool = False,
) -> tuple[list[ParseTree], list[ParseTree]]:
    """Split off a dev set.

    The default tail-cut keeps the first *train_count* trees for training and
    takes the last *dev_count* trees as dev, both in corpus order. With
    *shuffle* the corpus is permuted by *seed* first.
    """
    if train_count < 0 or dev_count < 0:
        raise CountsExceedCorpus("counts must not be negative")
    if train_count + dev_count > len(corpus):
        raise CountsExceedCorpus(
            f"{train_count} + {dev_count} exceeds corpus of {len(corpus)} trees"
        )
    trees = list(corpus)
    if shuffle:
        random.Random(seed).shuffle(trees)
    train = trees[:train_count]
    dev = trees[len(trees) - dev_count :] if dev_count else []
    return train, dev
