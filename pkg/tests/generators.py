"""Random trees, charts and brute-force oracles shared by the tests."""

import functools
import itertools
import random
from typing import Optional

import numpy as np

from spanparse.span_model import Chart
from spanparse.treebank import Internal, Leaf, ParseTree

LABELS = ("S", "NP", "VP", "PP", "AP")
TAGS = ("N", "V", "E", "A", "PU")
WORDS = ("mèo", "chó", "ăn", "cá", "trên", "bàn", "đẹp", "Nam", "kể", "về")

CAT_TREE = (
    "(S (NP (Nr Nam)) (VP (Vv kể) (PP (Cs về) (NP (Nc con) (N mèo)))) (PU .))"
)


def random_leaf(rng: random.Random) -> Leaf:
    return Leaf(rng.choice(WORDS), rng.choice(TAGS))


def _subtree(rng: random.Random, length: int, unary: float) -> ParseTree:
    if length == 1 and rng.random() < 0.6:
        return random_leaf(rng)
    if length == 1:
        node: ParseTree = Internal(rng.choice(LABELS), (random_leaf(rng),))
    else:
        parts = rng.randint(2, min(3, length))
        cuts = sorted(rng.sample(range(1, length), parts - 1))
        bounds = [0, *cuts, length]
        children = tuple(
            _subtree(rng, b - a, unary) for a, b in itertools.pairwise(bounds)
        )
        node = Internal(rng.choice(LABELS), children)
    if rng.random() < unary:
        node = Internal(rng.choice(LABELS), (node,))
    return node


def random_tree(
    rng: random.Random, n: Optional[int] = None, unary: float = 0.2
) -> Internal:
    """Random tree over *n* words (1..8 when omitted) with an internal root."""
    n = rng.randint(1, 8) if n is None else n
    tree = _subtree(rng, n, unary)
    if isinstance(tree, Leaf):
        tree = Internal(rng.choice(LABELS), (tree,))
    return tree


def two_label_tree(rng: random.Random, n: int) -> Internal:
    """S over a random binary bracketing of *n* words, inner constituents NP."""
    leaves = [random_leaf(rng) for _ in range(n)]

    def build(i: int, j: int, label: str) -> ParseTree:
        if j - i == 1:
            return leaves[i]
        k = rng.randint(i + 1, j - 1)
        return Internal(label, (build(i, k, "NP"), build(k, j, "NP")))

    return build(0, n, "S")


def random_chart(
    rng: np.random.Generator, n: int, num_labels: int, dyadic: bool = True
) -> Chart:
    """Random chart with a zero empty-label column.

    Dyadic charts hold multiples of 1/4 so every sum is exact.
    """
    if dyadic:
        scores = rng.integers(-8, 9, size=(n + 1, n + 1, num_labels)) / 4.0
    else:
        scores = rng.normal(size=(n + 1, n + 1, num_labels))
    scores[:, :, 0] = 0.0
    return Chart(n, scores)


@functools.cache
def binary_trees(i: int, j: int) -> tuple[tuple[tuple[int, int], ...], ...]:
    """Every binary bracketing of (i, j) as a tuple of its spans."""
    if j - i == 1:
        return (((i, j),),)
    result = []
    for k in range(i + 1, j):
        for left in binary_trees(i, k):
            for right in binary_trees(k, j):
                result.append(((i, j), *left, *right))
    return tuple(result)


def brute_force_best(scores: np.ndarray, gold: Optional[np.ndarray] = None) -> float:
    """max over binary trees and labels of S(T), plus Hamming if *gold* given.

    *gold* holds the gold label index per span (0 unbracketed, -1 unknown).
    The root span must take a real label.
    """
    n = scores.shape[0] - 1
    cell = scores.copy()
    if gold is not None:
        cell = cell + 1.0
        for i in range(n + 1):
            for j in range(n + 1):
                if gold[i, j] >= 0:
                    cell[i, j, gold[i, j]] -= 1.0
    best = cell.max(axis=2)
    root = cell[0, n, 1:].max()
    return max(
        root + sum(best[i, j] for i, j in spans[1:]) for spans in binary_trees(0, n)
    )


def brute_force_full(scores: np.ndarray) -> float:
    """Enumerate label assignments too; only feasible for tiny charts."""
    n, num_labels = scores.shape[0] - 1, scores.shape[2]
    best = -np.inf
    for spans in binary_trees(0, n):
        for labels in itertools.product(range(num_labels), repeat=len(spans)):
            if labels[0] == 0:
                continue
            total = sum(scores[i, j, lab] for (i, j), lab in zip(spans, labels))
            best = max(best, total)
    return best
