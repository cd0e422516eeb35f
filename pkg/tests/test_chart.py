"""Test spanparse.chart against brute-force enumeration."""

import numpy as np
import pytest
from generators import (
    LABELS,
    brute_force_best,
    brute_force_full,
    random_chart,
    random_tree,
)

from spanparse.chart import (
    augment_chart,
    cky_decode,
    gold_label_table,
    hamming_delta,
    hinge_loss,
    loss_augmented_decode,
    tree_score,
)
from spanparse.const import EMPTY_LABEL, UNK
from spanparse.errors import (
    EmptyLabelVocab,
    LengthMismatch,
    SpanOutOfRange,
    UnknownLabel,
)
from spanparse.span_model import Chart
from spanparse.treebank import (
    Internal,
    LabeledSpan,
    Leaf,
    Sentence,
    Vocab,
    parse_bracketed,
    tree_to_spans,
    tree_words,
)

VOCAB = Vocab([EMPTY_LABEL, *LABELS])


def labels_of(size: int) -> Vocab:
    return Vocab([EMPTY_LABEL, *LABELS[: size - 1]])


def internal_labels(tree):
    if isinstance(tree, Leaf):
        return []
    return [tree.label] + [
        label for child in tree.children for label in internal_labels(child)
    ]


def gold_chart(tree, labels: Vocab) -> Chart:
    """Chart on which *tree* wins by a wide margin."""
    n = len(tree_words(tree))
    scores = np.full((n + 1, n + 1, len(labels)), -10.0)
    scores[:, :, 0] = 0.0
    for span in tree_to_spans(tree):
        scores[span.i, span.j, labels.index(span.label)] = 100.0
    return Chart(n, scores)


class TestDecode:
    @pytest.mark.parametrize("num_labels", [2, 5])
    @pytest.mark.parametrize("n", range(2, 9))
    def test_matches_brute_force(self, n, num_labels):
        gen = np.random.default_rng(100 * n + num_labels)
        labels = labels_of(num_labels)
        for _ in range(200):
            chart = random_chart(gen, n, num_labels)
            result = cky_decode(chart, labels)
            assert result.score == brute_force_best(chart.scores)

    @pytest.mark.parametrize("n", [1, 2, 3])
    def test_matches_full_enumeration(self, n):
        gen = np.random.default_rng(n)
        for _ in range(20):
            chart = random_chart(gen, n, 3)
            assert cky_decode(chart, labels_of(3)).score == brute_force_full(
                chart.scores
            )

    def test_non_dyadic_close(self):
        gen = np.random.default_rng(11)
        for _ in range(50):
            chart = random_chart(gen, 6, 4, dyadic=False)
            result = cky_decode(chart, labels_of(4))
            assert result.score == pytest.approx(brute_force_best(chart.scores))

    def test_tree_has_no_empty_label(self):
        gen = np.random.default_rng(12)
        for _ in range(200):
            n = int(gen.integers(1, 9))
            result = cky_decode(random_chart(gen, n, 4), labels_of(4))
            assert EMPTY_LABEL not in internal_labels(result.tree)
            assert tree_to_spans(result.tree) == {
                span for span in result.slots if span.label != EMPTY_LABEL
            }
            assert len(result.slots) == 2 * n - 1
            assert len(tree_words(result.tree)) == n

    def test_score_is_tree_score(self):
        gen = np.random.default_rng(13)
        for _ in range(100):
            chart = random_chart(gen, 5, 5)
            result = cky_decode(chart, labels_of(5))
            assert result.score == tree_score(chart, result.tree, labels_of(5))

    def test_root_is_labeled(self):
        chart = Chart(1, np.array([[[0.0, -3.0, -1.0]] * 2] * 2))
        result = cky_decode(chart, labels_of(3))
        assert result.tree == Internal("NP", (Leaf("w0", UNK),))
        assert result.score == -1.0

    def test_ties(self):
        result = cky_decode(Chart.zeros(3, 3), labels_of(3))
        assert result.tree == Internal(
            "S", (Leaf("w0", UNK), Leaf("w1", UNK), Leaf("w2", UNK))
        )
        assert result.slots == (
            LabeledSpan(0, 1, EMPTY_LABEL),
            LabeledSpan(0, 3, "S"),
            LabeledSpan(1, 2, EMPTY_LABEL),
            LabeledSpan(1, 3, EMPTY_LABEL),
            LabeledSpan(2, 3, EMPTY_LABEL),
        )
        assert result.score == 0.0

    def test_recovers_dominant_tree(self, rng):
        for _ in range(200):
            tree = random_tree(rng, unary=0.0)
            sentence = Sentence.from_tree(tree)
            assert cky_decode(gold_chart(tree, VOCAB), VOCAB, sentence).tree == tree

    def test_unary_chain_label_expanded(self):
        labels = Vocab([EMPTY_LABEL, "S⋄VP"])
        chart = Chart(1, np.array([[[0.0, 1.0]] * 2] * 2))
        sentence = Sentence(("run",), ("V",))
        (expected,) = parse_bracketed("(S (VP (V run)))")
        assert cky_decode(chart, labels, sentence).tree == expected

    def test_empty_label_vocab(self):
        with pytest.raises(EmptyLabelVocab):
            cky_decode(Chart.zeros(2, 1), Vocab([EMPTY_LABEL]))

    def test_sentence_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            cky_decode(Chart.zeros(2, 3), labels_of(3), Sentence(("a",)))


class TestLossAugmented:
    def test_matches_brute_force(self, rng):
        gen = np.random.default_rng(21)
        for _ in range(100):
            n = rng.randint(1, 6)
            gold = random_tree(rng, n=n)
            chart = random_chart(gen, n, len(VOCAB))
            table = gold_label_table(gold, VOCAB, n)
            result = loss_augmented_decode(chart, gold, VOCAB)
            assert result.score == brute_force_best(chart.scores, table)

    def test_augment_chart(self, cat_tree):
        labels = Vocab([EMPTY_LABEL, "S", "NP", "VP"])
        chart = Chart.zeros(6, 4)
        augmented = augment_chart(chart, cat_tree, labels)
        assert augmented.scores[0, 6].tolist() == [1.0, 0.0, 1.0, 1.0]
        assert augmented.scores[1, 5].tolist() == [1.0, 1.0, 1.0, 0.0]
        # PP is unknown to the vocabulary so no cell is exempt
        assert augmented.scores[2, 5].tolist() == [1.0, 1.0, 1.0, 1.0]
        assert augmented.scores[1, 3].tolist() == [0.0, 1.0, 1.0, 1.0]

    def test_gold_label_table(self, cat_tree):
        labels = Vocab([EMPTY_LABEL, "S", "NP", "VP"])
        table = gold_label_table(cat_tree, labels, 6)
        assert table[0, 6] == 1
        assert table[3, 5] == 2
        assert table[2, 5] == -1
        assert table[0, 2] == 0
        with pytest.raises(SpanOutOfRange):
            gold_label_table(cat_tree, labels, 5)

    def test_hinge_non_negative(self, rng):
        gen = np.random.default_rng(22)
        for _ in range(200):
            gold = random_tree(rng)
            n = len(tree_words(gold))
            chart = random_chart(gen, n, len(VOCAB), dyadic=False)
            assert hinge_loss(chart, gold, VOCAB) >= 0.0
            augmented = loss_augmented_decode(chart, gold, VOCAB)
            assert augmented.score >= tree_score(chart, gold, VOCAB) - 1e-12

    def test_hinge_zero_on_dominant_gold(self, rng):
        for _ in range(200):
            gold = random_tree(rng, unary=0.0)
            chart = gold_chart(gold, VOCAB)
            assert hinge_loss(chart, gold, VOCAB) == 0.0
            assert loss_augmented_decode(chart, gold, VOCAB).tree == gold

    def test_hinge_ignores_shift_of_shared_cell(self, rng):
        gen = np.random.default_rng(23)
        for _ in range(100):
            gold = random_tree(rng, unary=0.0)
            n = len(tree_words(gold))
            (root,) = [s.label for s in tree_to_spans(gold) if (s.i, s.j) == (0, n)]
            chart = random_chart(gen, n, len(VOCAB))
            cell = (0, n, VOCAB.index(root))
            # a dominant gold root label is shared by the augmented prediction
            chart.scores[cell] += 50.0
            assert loss_augmented_decode(chart, gold, VOCAB).tree.label == root
            before = hinge_loss(chart, gold, VOCAB)
            chart.scores[cell] += 3.25
            assert hinge_loss(chart, gold, VOCAB) == before

    def test_zero_chart_cat_tree(self, cat_tree):
        labels = Vocab([EMPTY_LABEL, "S", "NP", "VP", "PP"])
        # every one of the 11 slots can disagree with the gold bracketing
        assert hinge_loss(Chart.zeros(6, 5), cat_tree, labels) == 11.0


class TestHamming:
    def test_identical(self, rng):
        for _ in range(500):
            spans = tree_to_spans(random_tree(rng))
            assert hamming_delta(spans, spans) == 0

    def test_counts_slots(self):
        pred = [
            LabeledSpan(0, 1, EMPTY_LABEL),
            LabeledSpan(0, 2, "S"),
            LabeledSpan(1, 2, "NP"),
        ]
        gold = [LabeledSpan(0, 2, "S"), LabeledSpan(0, 1, "NP")]
        assert hamming_delta(pred, gold) == 2

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            hamming_delta([LabeledSpan(0, 2, "S")], [LabeledSpan(0, 3, "S")])


class TestTreeScore:
    def test_cat_tree(self, cat_tree):
        labels = Vocab([EMPTY_LABEL, "S", "NP", "VP", "PP"])
        chart = Chart.zeros(6, 5)
        chart.scores[0, 6, 1] = 1.0
        chart.scores[3, 5, 2] = 0.5
        chart.scores[0, 1, 2] = 0.25
        chart.scores[0, 1, 1] = 8.0
        assert tree_score(chart, cat_tree, labels) == 1.75

    def test_unknown_label(self, cat_tree):
        labels = Vocab([EMPTY_LABEL, "S", "NP", "VP"])
        chart = Chart.zeros(6, 4)
        assert tree_score(chart, cat_tree, labels) == 0.0
        with pytest.raises(UnknownLabel):
            tree_score(chart, cat_tree, labels, strict=True)

    def test_length_mismatch(self, cat_tree):
        with pytest.raises(SpanOutOfRange):
            tree_score(Chart.zeros(5, 5), cat_tree, VOCAB)
