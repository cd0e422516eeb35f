"""Small hand-written grammar producing a desk-scale treebank.

The grammar covers ten constituent labels (S, NP, VP, PP, AP, ADVP, SBAR,
QP, VCP, WHNP) over a tiny Vietnamese-style lexicon where every word has one
tag and every tag sequence has exactly one tree, so a parser can fit the
generated corpus perfectly.

Examples:
    >>> from spanparse.synthetic import generate_corpus
    >>> trees = generate_corpus(2, seed=7)
    >>> len(trees)
    2

"""

import logging
import random
from typing import Optional

from .treebank import Internal, Leaf, ParseTree

logger = logging.getLogger(__name__)

LEXICON: dict[str, tuple[str, ...]] = {
    "N": ("mèo", "chó", "cá", "bàn", "nhà", "sách", "trẻ_em", "bà"),
    "Nc": ("con", "cái", "quyển"),
    "M": ("ba", "hai", "nhiều"),
    "A": ("đẹp", "nhỏ", "lớn", "ngon"),
    "R": ("rất", "khá"),
    "Vt": ("ăn", "thấy", "đọc", "mua"),
    "Vi": ("ngủ", "ngồi", "chạy"),
    "Vs": ("nói", "nghĩ"),
    "Vc": ("là",),
    "E": ("trên", "trong", "dưới"),
    "C": ("rằng",),
    "P": ("gì",),
}
"words by lexical class; the class is the POS tag except for verbs"

TAGS = {"Vt": "V", "Vi": "V", "Vs": "V"}
"lexical classes sharing one POS tag"

LABELS = ("S", "NP", "VP", "PP", "AP", "ADVP", "SBAR", "QP", "VCP", "WHNP")


class _Generator:
    def __init__(self, rng: random.Random, max_depth: int) -> None:
        self.rng = rng
        self.max_depth = max_depth

    def word(self, cls: str) -> Leaf:
        return Leaf(self.rng.choice(LEXICON[cls]), TAGS.get(cls, cls))

    def np(self) -> Internal:
        choice = self.rng.randrange(4)
        if choice == 0:
            children: tuple[ParseTree, ...] = (self.word("N"),)
        elif choice == 1:
            children = (self.word("Nc"), self.word("N"))
        elif choice == 2:
            quantity = Internal("QP", (self.word("M"),))
            children = (quantity, self.word("Nc"), self.word("N"))
        else:
            children = (self.word("N"), self.ap())
        return Internal("NP", children)

    def ap(self) -> Internal:
        if self.rng.random() < 0.5:
            return Internal("AP", (self.word("A"),))
        degree = Internal("ADVP", (self.word("R"),))
        return Internal("AP", (degree, self.word("A")))

    def pp(self) -> Internal:
        return Internal("PP", (self.word("E"), self.np()))

    def vp(self, depth: int) -> Internal:
        choices = 4 if depth < self.max_depth else 3
        choice = self.rng.randrange(choices)
        if choice == 0:
            children: tuple[ParseTree, ...] = (self.word("Vt"), self.np())
        elif choice == 1:
            children = (self.word("Vt"), self.np(), self.pp())
        elif choice == 2:
            verb = self.word("Vi")
            children = (verb, self.pp()) if self.rng.random() < 0.5 else (verb,)
        else:
            clause = Internal("S", (self.np(), self.vp(depth + 1)))
            children = (self.word("Vs"), Internal("SBAR", (self.word("C"), clause)))
        return Internal("VP", children)

    def sentence(self) -> Internal:
        roll = self.rng.random()
        if roll < 0.15:
            question = Internal("WHNP", (self.word("P"),))
            predicate = Internal("VP", (self.word("Vt"), question))
            return Internal("S", (self.np(), predicate, Leaf("?", "PU")))
        if roll < 0.3:
            predicate = Internal("VCP", (self.word("Vc"), self.np()))
        else:
            predicate = self.vp(0)
        return Internal("S", (self.np(), predicate, Leaf(".", "PU")))


def generate_corpus(
    count: int, seed: Optional[int] = 0, max_depth: int = 2
) -> list[ParseTree]:
    """*count* random trees; the same seed always yields the same corpus.

    Args:
        count: number of sentences.
        seed: random seed.
        max_depth: maximum nesting of embedded clauses.
    """
    if count < 0:
        raise ValueError("count must not be negative")
    generator = _Generator(random.Random(seed), max_depth)
    trees: list[ParseTree] = [generator.sentence() for _ in range(count)]
    logger.debug("generated %d synthetic trees", count)
    return trees
