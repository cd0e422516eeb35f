"""Exact chart inference and the structured margin loss.

The decoder searches binary trees over fenceposts 0..n. Every span of the
binary tree takes its best label, where the empty label (index 0) stands for
"no constituent here"; only the root must carry a real label. Empty-labeled
nodes are spliced out when the result is turned back into a `ParseTree`.

Ties are broken by the smallest split point, then the lowest label index.
"""

import logging
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .const import EMPTY_LABEL, UNARY_SEP, UNK
from .errors import EmptyLabelVocab, LengthMismatch, SpanOutOfRange, UnknownLabel
from .span_model import Chart
from .treebank import (
    Leaf,
    LabeledSpan,
    ParseTree,
    Sentence,
    Vocab,
    build_chain,
    iter_leaves,
    tree_to_spans,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ScoredTree:
    """Decoder result.

    Attributes:
        tree: reconstructed tree, unary chains expanded, no empty labels.
        score: S(tree), or S(tree) + Hamming loss for loss-augmented decoding.
        slots: every span of the binary decoder tree, sorted, with the empty
            label where no constituent was chosen.
    """

    tree: ParseTree
    score: float
    slots: tuple[LabeledSpan, ...]


def _sum_cells(scores: np.ndarray, cells: Iterable[tuple[int, int, int]]) -> float:
    total = 0.0
    for i, j, label in sorted(cells):
        total += float(scores[i, j, label])
    return total


def tree_score(
    chart: Chart,
    tree: ParseTree,
    labels: Vocab,
    strict: bool = False,
    sep: str = UNARY_SEP,
) -> float:
    """Sum of the chart cells of the tree's (collapsed) labeled spans.

    Raises:
        SpanOutOfRange: the tree does not cover the chart's n words.
        UnknownLabel: *strict* and a span label is not in *labels*;
            otherwise such spans score 0 like the empty label.
    """
    n = sum(1 for _ in iter_leaves(tree))
    if n != chart.n:
        raise SpanOutOfRange(f"tree over {n} words, chart over {chart.n}")
    cells = []
    for span in tree_to_spans(tree, sep):
        index = labels.get(span.label, -1)
        if index <= 0:
            if strict:
                raise UnknownLabel(span.label)
            continue
        cells.append((span.i, span.j, index))
    return _sum_cells(chart.scores, cells)


def _decode_slots(scores: np.ndarray) -> tuple[list[tuple[int, int, int]], float]:
    """Best binary tree over a score table; returns slots and the DP optimum."""
    n = scores.shape[0] - 1
    if scores.shape[2] < 2:
        raise EmptyLabelVocab("no real label available for the root")
    best_label = scores.argmax(axis=2)
    best_score = scores.max(axis=2)
    root_label = int(scores[0, n, 1:].argmax()) + 1
    best_label[0, n] = root_label
    best_score[0, n] = scores[0, n, root_label]

    value = np.zeros((n + 1, n + 1))
    split = np.zeros((n + 1, n + 1), dtype=np.intp)
    for length in range(1, n + 1):
        for i in range(n - length + 1):
            j = i + length
            if length == 1:
                value[i, j] = best_score[i, j]
                continue
            ks = np.arange(i + 1, j)
            candidates = value[i, ks] + value[ks, j]
            pick = int(candidates.argmax())
            split[i, j] = ks[pick]
            value[i, j] = best_score[i, j] + candidates[pick]

    slots = []
    stack = [(0, n)]
    while stack:
        i, j = stack.pop()
        slots.append((i, j, int(best_label[i, j])))
        if j - i > 1:
            k = int(split[i, j])
            stack.append((k, j))
            stack.append((i, k))
    return sorted(slots), float(value[0, n])


def _build_tree(
    slots: Sequence[tuple[int, int, int]],
    labels: Vocab,
    sentence: Sentence,
    sep: str,
) -> ParseTree:
    by_start: dict[int, list[tuple[int, int]]] = {}
    for i, j, label in slots:
        by_start.setdefault(i, []).append((j, label))
    tags = sentence.pos_tags or (UNK,) * len(sentence)

    n = len(sentence)
    root_label = next(label for j, label in by_start[0] if j == n)
    # postorder over the slot tree; empty-label slots splice their children
    parts: list[list[ParseTree]] = []
    stack = [(0, n, root_label, False)]
    while stack:
        i, j, label, expanded = stack.pop()
        if j - i == 1:
            children: list[ParseTree] = [Leaf(sentence.words[i], tags[i])]
        elif not expanded:
            # the left child is the longest slot starting at i inside (i, j)
            k, left = max((s for s in by_start[i] if s[0] < j), key=lambda s: s[0])
            right = next(s for s in by_start[k] if s[0] == j)
            stack.append((i, j, label, True))
            stack.append((k, j, right[1], False))
            stack.append((i, k, left, False))
            continue
        else:
            right_part = parts.pop()
            children = parts.pop() + right_part
        if label == 0:
            parts.append(children)
        else:
            parts.append([build_chain(labels.lookup(label), tuple(children), sep)])
    ((tree,),) = parts
    return tree


def _placeholder(n: int) -> Sentence:
    return Sentence(words=tuple(f"w{k}" for k in range(n)))


def _slot_spans(
    slots: Iterable[tuple[int, int, int]], labels: Vocab
) -> tuple[LabeledSpan, ...]:
    return tuple(LabeledSpan(i, j, labels.lookup(label)) for i, j, label in slots)


def cky_decode(
    chart: Chart,
    labels: Vocab,
    sentence: Optional[Sentence] = None,
    sep: str = UNARY_SEP,
) -> ScoredTree:
    """Highest scoring tree of *chart*.

    Args:
        chart: span scores.
        labels: label vocabulary the chart columns follow.
        sentence: words and tags for the leaves; placeholders `w0 .. w{n-1}`
            when omitted.
        sep: unary chain separator used to expand collapsed labels.

    Raises:
        EmptyLabelVocab: the chart has no column besides the empty label.
        LengthMismatch: *sentence* length differs from the chart.
    """
    sentence = _placeholder(chart.n) if sentence is None else sentence
    if len(sentence) != chart.n:
        raise LengthMismatch(f"sentence of {len(sentence)} words, chart of {chart.n}")
    slots, _ = _decode_slots(chart.scores)
    tree = _build_tree(slots, labels, sentence, sep)
    return ScoredTree(tree, _sum_cells(chart.scores, slots), _slot_spans(slots, labels))


def hamming_delta(
    pred_slots: Iterable[LabeledSpan], gold_spans: Iterable[LabeledSpan]
) -> int:
    """Number of predicted slots whose label differs from the gold label.

    Gold spans absent from *gold_spans* carry the empty label.

    Raises:
        LengthMismatch: the two span sets cover different sentence lengths.
    """
    pred = list(pred_slots)
    gold = {(span.i, span.j): span.label for span in gold_spans}
    pred_n = max((span.j for span in pred), default=0)
    gold_n = max((j for _, j in gold), default=0)
    if pred_n != gold_n:
        raise LengthMismatch(f"prediction over {pred_n} words, gold over {gold_n}")
    return sum(
        1 for span in pred if gold.get((span.i, span.j), EMPTY_LABEL) != span.label
    )


def gold_label_table(
    gold_tree: ParseTree, labels: Vocab, n: int, sep: str = UNARY_SEP
) -> np.ndarray:
    """Gold label index per span: 0 for unbracketed, -1 for unknown labels."""
    table = np.zeros((n + 1, n + 1), dtype=np.intp)
    for span in tree_to_spans(gold_tree, sep):
        if span.j > n:
            raise SpanOutOfRange(f"gold span {span} beyond n={n}")
        table[span.i, span.j] = labels.get(span.label, -1)
    return table


def augment_chart(
    chart: Chart, gold_tree: ParseTree, labels: Vocab, sep: str = UNARY_SEP
) -> Chart:
    """s'(i, j, l) = s(i, j, l) + 1 unless l is the gold label of (i, j)."""
    table = gold_label_table(gold_tree, labels, chart.n, sep)
    scores = chart.scores + 1.0
    rows, cols = np.nonzero(table >= 0)
    scores[rows, cols, table[rows, cols]] -= 1.0
    return Chart(chart.n, scores)


def loss_augmented_decode(
    chart: Chart,
    gold_tree: ParseTree,
    labels: Vocab,
    sentence: Optional[Sentence] = None,
    sep: str = UNARY_SEP,
) -> ScoredTree:
    """argmax_T S(T) + Hamming(T, gold); the score is that augmented value."""
    if sentence is None:
        sentence = Sentence.from_tree(gold_tree)
    if len(sentence) != chart.n:
        raise LengthMismatch(f"sentence of {len(sentence)} words, chart of {chart.n}")
    augmented = augment_chart(chart, gold_tree, labels, sep)
    slots, _ = _decode_slots(augmented.scores)
    spans = _slot_spans(slots, labels)
    delta = hamming_delta(spans, tree_to_spans(gold_tree, sep))
    score = _sum_cells(chart.scores, slots) + delta
    tree = _build_tree(slots, labels, sentence, sep)
    return ScoredTree(tree, score, spans)


def hinge_loss(
    chart: Chart, gold_tree: ParseTree, labels: Vocab, sep: str = UNARY_SEP
) -> float:
    """max(0, max_T [S(T) + Hamming(T, gold)] - S(gold))."""
    augmented = loss_augmented_decode(chart, gold_tree, labels, sep=sep)
    return max(0.0, augmented.score - tree_score(chart, gold_tree, labels, sep=sep))
