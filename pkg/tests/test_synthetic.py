"""Test spanparse.synthetic."""

import pytest

from spanparse.synthetic import LABELS, LEXICON, TAGS, generate_corpus
from spanparse.treebank import (
    compute_stats,
    parse_bracketed,
    tree_tags,
    tree_to_spans,
    tree_words,
    write_bracketed,
)


def test_deterministic():
    assert generate_corpus(30, seed=4) == generate_corpus(30, seed=4)
    assert generate_corpus(30, seed=4) != generate_corpus(30, seed=5)


def test_count():
    assert len(generate_corpus(50)) == 50
    assert generate_corpus(0) == []
    with pytest.raises(ValueError):
        generate_corpus(-1)


def test_covers_every_label():
    stats = compute_stats(generate_corpus(400, seed=2))
    assert set(stats.label_counts) == set(LABELS)


def test_tags_come_from_lexicon():
    known = {TAGS.get(cls, cls) for cls in LEXICON} | {"PU"}
    for tree in generate_corpus(200, seed=6):
        assert set(tree_tags(tree)) <= known
        assert tree_words(tree)[-1] in (".", "?")


def test_round_trips_through_brackets():
    for tree in generate_corpus(100, seed=8):
        assert parse_bracketed(write_bracketed(tree)) == [tree]


def test_tags_determine_tree():
    """A parser that tags perfectly can reach F1 100 on this grammar."""
    seen = {}
    for tree in generate_corpus(500, seed=9):
        key = tree_tags(tree)
        spans = tree_to_spans(tree)
        assert seen.setdefault(key, spans) == spans


def test_max_depth_limits_clauses():
    for tree in generate_corpus(200, seed=3, max_depth=0):
        assert "SBAR" not in compute_stats([tree]).label_counts
