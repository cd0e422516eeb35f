"""Labeled bracket scoring in the evalb convention.

Brackets are the internal nodes of the unary-expanded trees, so every label
of a unary chain is scored over the same interval. Preterminals are never
brackets. Predicted brackets pair off against gold brackets as multisets,
and corpus scores sum the counts of all sentences before dividing.

Examples:
    >>> from spanparse.evalb import f1_from_pr, round_half_up
    >>> round_half_up(f1_from_pr(80.78, 81.61))
    81.19

"""

import csv
import logging
import os
from collections import Counter
from collections.abc import Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from typing import NamedTuple, Optional

from .const import PUNCT_TAGS
from .errors import LengthMismatch, TokenMismatch
from .treebank import (
    Internal,
    Leaf,
    ParseTree,
    fold_tree,
    iter_leaves,
    iter_spans,
    tree_tags,
)

logger = logging.getLogger(__name__)

TOTAL_ROW = "TOTAL"


class PRF(NamedTuple):
    precision: float
    recall: float
    f1: float


@dataclass(frozen=True)
class BracketCounts:
    """T_C (correct), T_P (predicted) and T_G (gold) bracket counts."""

    correct: int = 0
    predicted: int = 0
    gold: int = 0

    def __add__(self, other: "BracketCounts") -> "BracketCounts":
        if not isinstance(other, BracketCounts):
            return NotImplemented
        return BracketCounts(
            self.correct + other.correct,
            self.predicted + other.predicted,
            self.gold + other.gold,
        )

    def prf(self) -> PRF:
        return prf(self.correct, self.predicted, self.gold)


@dataclass(frozen=True)
class BracketMatch:
    """Result of matching one predicted tree against its gold tree."""

    counts: BracketCounts
    per_label: dict[str, BracketCounts]

    @property
    def exact(self) -> bool:
        c = self.counts
        return c.correct == c.predicted == c.gold


def f1_from_pr(precision: float, recall: float) -> float:
    """Harmonic mean of two percentages, 0 when both are 0."""
    if precision + recall == 0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def round_half_up(value: float, digits: int = 2) -> float:
    """Round like the printed score tables do (0.125 -> 0.13)."""
    quantum = Decimal(1).scaleb(-digits)
    return float(Decimal(repr(value)).quantize(quantum, rounding=ROUND_HALF_UP))


def prf(correct: int, predicted: int, gold: int) -> PRF:
    """Precision, recall and F1 in percent.

    P is 0 when nothing was predicted and R is 0 when there is no gold
    bracket, so the function is total.
    """
    precision = 100.0 * correct / predicted if predicted else 0.0
    recall = 100.0 * correct / gold if gold else 0.0
    return PRF(precision, recall, f1_from_pr(precision, recall))


def _strip_punct(tree: ParseTree) -> Optional[ParseTree]:
    return fold_tree(
        tree,
        lambda leaf: None if leaf.pos in PUNCT_TAGS else leaf,
        lambda node, kids: Internal(node.label, kids) if kids else None,
    )


def brackets(
    tree: ParseTree, ignore_root: bool = False, delete_punct: bool = False
) -> Counter:
    """Multiset of (i, j, label) brackets of *tree*."""
    if delete_punct:
        stripped = _strip_punct(tree)
        if stripped is None:
            return Counter()
        tree = stripped
    spans = list(iter_spans(tree))
    if ignore_root:
        spans = spans[1:]
    return Counter(spans)


def _label_counts(pred: Counter, gold: Counter) -> dict[str, BracketCounts]:
    correct: Counter = Counter()
    predicted: Counter = Counter()
    golds: Counter = Counter()
    for span, count in pred.items():
        predicted[span.label] += count
        correct[span.label] += min(count, gold[span])
    for span, count in gold.items():
        golds[span.label] += count
    return {
        label: BracketCounts(correct[label], predicted[label], golds[label])
        for label in sorted(set(predicted) | set(golds))
    }


def match_brackets(
    pred_tree: ParseTree,
    gold_tree: ParseTree,
    ignore_root: bool = False,
    delete_punct: bool = False,
) -> BracketMatch:
    """Count correct, predicted and gold brackets of one sentence.

    Raises:
        TokenMismatch: the two trees are over different word sequences.
    """
    pred_words = [leaf.word for leaf in iter_leaves(pred_tree)]
    gold_words = [leaf.word for leaf in iter_leaves(gold_tree)]
    if pred_words != gold_words:
        raise TokenMismatch(0, f"prediction {pred_words} vs gold {gold_words}")
    if delete_punct:
        # punctuation is decided by the gold tags, so both sides drop the same words
        gold_tags = tree_tags(gold_tree)
        pred_tree = _retag(pred_tree, gold_tags)
    pred = brackets(pred_tree, ignore_root, delete_punct)
    gold = brackets(gold_tree, ignore_root, delete_punct)
    per_label = _label_counts(pred, gold)
    counts = sum(per_label.values(), BracketCounts())
    return BracketMatch(counts, per_label)


def _retag(tree: ParseTree, tags: Sequence[str]) -> ParseTree:
    tagged = iter(tags)
    return fold_tree(
        tree,
        lambda leaf: Leaf(leaf.word, next(tagged)),
        lambda node, kids: Internal(node.label, kids),
    )


def pos_accuracy(pred_tags: Sequence[str], gold_tags: Sequence[str]) -> float:
    """Percentage of positions where the tags agree (0 for no tokens)."""
    if len(pred_tags) != len(gold_tags):
        raise LengthMismatch(f"{len(pred_tags)} predicted tags, {len(gold_tags)} gold")
    if not gold_tags:
        return 0.0
    hits = sum(1 for p, g in zip(pred_tags, gold_tags) if p == g)
    return 100.0 * hits / len(gold_tags)


@dataclass(frozen=True)
class EvalReport:
    """Corpus level bracket scores.

    Attributes:
        counts: corpus totals, micro-averaged.
        per_label: counts for every label present in prediction or gold.
        pos_accuracy: tagging accuracy in percent.
        sentence_count: number of scored sentences.
        exact_match: sentences whose brackets match exactly.
    """

    counts: BracketCounts = BracketCounts()
    per_label: dict[str, BracketCounts] = field(default_factory=dict)
    pos_accuracy: float = 0.0
    sentence_count: int = 0
    exact_match: int = 0

    @property
    def precision(self) -> float:
        return self.counts.prf().precision

    @property
    def recall(self) -> float:
        return self.counts.prf().recall

    @property
    def f1(self) -> float:
        return self.counts.prf().f1

    def label_scores(self) -> dict[str, PRF]:
        return {label: counts.prf() for label, counts in self.per_label.items()}


def evaluate_corpus(
    pred_trees: Sequence[ParseTree],
    gold_trees: Sequence[ParseTree],
    ignore_root: bool = False,
    delete_punct: bool = False,
    threads: int = 1,
) -> EvalReport:
    """Score aligned prediction and gold corpora.

    Raises:
        LengthMismatch: the corpora hold different numbers of trees.
        TokenMismatch: sentence *index* has different words in the two trees.
    """
    if len(pred_trees) != len(gold_trees):
        raise LengthMismatch(
            f"{len(pred_trees)} predicted trees, {len(gold_trees)} gold trees"
        )

    def match(index: int) -> BracketMatch:
        try:
            return match_brackets(
                pred_trees[index], gold_trees[index], ignore_root, delete_punct
            )
        except TokenMismatch as exc:
            raise TokenMismatch(index, "token sequences differ") from exc

    indices = range(len(gold_trees))
    if threads > 1 and len(gold_trees) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            matches = list(pool.map(match, indices))
    else:
        matches = [match(index) for index in indices]

    per_label: dict[str, BracketCounts] = {}
    for result in matches:
        for label, counts in result.per_label.items():
            per_label[label] = per_label.get(label, BracketCounts()) + counts
    pred_tags = [tag for tree in pred_trees for tag in tree_tags(tree)]
    gold_tags = [tag for tree in gold_trees for tag in tree_tags(tree)]
    report = EvalReport(
        counts=sum((m.counts for m in matches), BracketCounts()),
        per_label=dict(sorted(per_label.items())),
        pos_accuracy=pos_accuracy(pred_tags, gold_tags),
        sentence_count=len(matches),
        exact_match=sum(1 for m in matches if m.exact),
    )
    logger.debug("evaluated %d sentences: %s", report.sentence_count, report.counts)
    return report


def compare_systems(
    gold_trees: Sequence[ParseTree],
    systems: Mapping[str, Sequence[ParseTree]],
    ignore_root: bool = False,
    delete_punct: bool = False,
) -> dict[str, EvalReport]:
    """One report per named system, all against the same gold corpus."""
    return {
        name: evaluate_corpus(pred, gold_trees, ignore_root, delete_punct)
        for name, pred in systems.items()
    }


def _fmt(value: float) -> str:
    return f"{round_half_up(value):.2f}"


def report_rows(report: EvalReport) -> list[list[str]]:
    """Per-label rows followed by the TOTAL row, most frequent gold label first."""
    rows = []
    labels = sorted(report.per_label.items(), key=lambda item: (-item[1].gold, item[0]))
    for label, counts in [*labels, (TOTAL_ROW, report.counts)]:
        scores = counts.prf()
        rows.append(
            [
                label,
                str(counts.gold),
                str(counts.predicted),
                str(counts.correct),
                _fmt(scores.precision),
                _fmt(scores.recall),
                _fmt(scores.f1),
            ]
        )
    return rows


REPORT_COLUMNS = ["label", "T_G", "T_P", "T_C", "P", "R", "F1"]


def format_report(report: EvalReport, per_label: bool = True) -> str:
    """Human readable score table."""
    lines = [
        f"sentences      {report.sentence_count}",
        f"exact match    {report.exact_match}",
        f"precision      {_fmt(report.precision)}",
        f"recall         {_fmt(report.recall)}",
        f"F1             {_fmt(report.f1)}",
        f"POS accuracy   {_fmt(report.pos_accuracy)}",
    ]
    if per_label:
        rows = [REPORT_COLUMNS, *report_rows(report)]
        widths = [max(len(row[k]) for row in rows) for k in range(len(REPORT_COLUMNS))]
        lines.append("")
        for row in rows:
            lines.append(
                "  ".join(
                    cell.ljust(width) if k == 0 else cell.rjust(width)
                    for k, (cell, width) in enumerate(zip(row, widths))
                )
            )
    return "\n".join(lines) + "\n"


def format_comparison(reports: Mapping[str, EvalReport]) -> str:
    """Per-label F1 of several systems side by side."""
    labels: Counter = Counter()
    for report in reports.values():
        for label, counts in report.per_label.items():
            labels[label] = max(labels[label], counts.gold)
    names = list(reports)
    header = ["label", *names]
    rows = [header]
    for label, _ in sorted(labels.items(), key=lambda item: (-item[1], item[0])):
        row = [label]
        for name in names:
            counts = reports[name].per_label.get(label, BracketCounts())
            row.append(_fmt(counts.prf().f1))
        rows.append(row)
    rows.append([TOTAL_ROW, *(_fmt(reports[name].f1) for name in names)])
    widths = [max(len(row[k]) for row in rows) for k in range(len(header))]
    return "\n".join(
        "  ".join(cell.rjust(width) for cell, width in zip(row, widths)) for row in rows
    ) + "\n"


def write_report_csv(report: EvalReport, path: os.PathLike | str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(REPORT_COLUMNS)
        writer.writerows(report_rows(report))
