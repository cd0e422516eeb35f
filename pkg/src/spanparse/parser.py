"""Parser facade: vocabularies, parameters and the full forward pass.

Examples:
    >>> from spanparse.parser import Parser
    >>> from spanparse.synthetic import generate_corpus
    >>> parser = Parser.from_treebank(generate_corpus(20, seed=1))
    >>> result = parser.parse(["the", "cat", "sleeps", "."])
    >>> result.tree  # doctest: +SKIP

"""

import logging
from collections.abc import Iterable, Sequence
from concurrent.futures import ThreadPoolExecutor
from typing import NamedTuple, Optional, Union

import numpy as np

from .chart import ScoredTree, cky_decode
from .config import ModelConfig
from .encoder import Encoder
from .span_model import Chart, ChartScores, PosTagger, SpanScorer
from .tensor import Node, Parameters, Tape
from .treebank import (
    ParseTree,
    Sentence,
    Vocab,
    build_label_vocab,
    build_pos_vocab,
    build_word_vocab,
)

logger = logging.getLogger(__name__)

Words = Union[Sentence, Sequence[str]]


class Forward(NamedTuple):
    encoded: Node
    chart: ChartScores
    pos_logits: Node


def _words(sentence: Words) -> tuple[str, ...]:
    if isinstance(sentence, Sentence):
        return sentence.words
    return tuple(sentence)


class Parser:
    """Span-based constituency parser.

    Args:
        config: model shape.
        words: word vocabulary (index 0 unknown word).
        tags: POS vocabulary (index 0 unknown tag).
        labels: collapsed constituent labels (index 0 the empty label).
        params: trained weights; freshly initialized from *seed* when omitted.
        seed: initialization seed.
    """

    def __init__(
        self,
        config: ModelConfig,
        words: Vocab,
        tags: Vocab,
        labels: Vocab,
        params: Optional[Parameters] = None,
        seed: int = 0,
    ) -> None:
        self.config = config
        self.words = words
        self.tags = tags
        self.labels = labels
        self.encoder = Encoder(config.encoder, words)
        self.scorer = SpanScorer(config, labels)
        self.tagger = PosTagger(config.encoder.d_model, tags)
        self.params = self.init_params(seed) if params is None else params

    @classmethod
    def from_treebank(
        cls,
        trees: Sequence[ParseTree],
        config: Optional[ModelConfig] = None,
        seed: int = 0,
    ) -> "Parser":
        """Build vocabularies from training *trees* and initialize weights."""
        config = ModelConfig() if config is None else config
        parser = cls(
            config,
            words=build_word_vocab(trees),
            tags=build_pos_vocab(trees),
            labels=build_label_vocab(trees, config.unary_sep),
            seed=seed,
        )
        logger.info(
            "parser with %d words, %d tags, %d labels, %d weights",
            len(parser.words),
            len(parser.tags),
            len(parser.labels),
            parser.params.size(),
        )
        return parser

    def init_params(self, seed: int) -> Parameters:
        rng = np.random.default_rng(seed)
        params = Parameters()
        self.encoder.init_params(params, rng)
        self.scorer.init_params(params, rng)
        self.tagger.init_params(params, rng)
        return params

    def forward(
        self,
        tape: Tape,
        sentence: Words,
        external: Optional[np.ndarray] = None,
        params: Optional[Parameters] = None,
    ) -> Forward:
        params = self.params if params is None else params
        encoded = self.encoder.encode(tape, params, _words(sentence), external)
        return Forward(
            encoded,
            self.scorer.score(tape, params, encoded),
            self.tagger.logits(tape, params, encoded),
        )

    def chart(self, sentence: Words, external: Optional[np.ndarray] = None) -> Chart:
        return self.forward(Tape(record=False), sentence, external).chart.chart

    def parse(
        self, sentence: Words, external: Optional[np.ndarray] = None
    ) -> ScoredTree:
        words = _words(sentence)
        result = self.forward(Tape(record=False), words, external)
        tags = self.tagger.predict(result.pos_logits.value)
        return cky_decode(
            result.chart.chart,
            self.labels,
            Sentence(words, tags),
            self.config.unary_sep,
        )

    def parse_many(
        self,
        sentences: Iterable[Words],
        vectors: Optional[Sequence[np.ndarray]] = None,
        threads: int = 1,
    ) -> list[ScoredTree]:
        """Parse in parallel; results keep the input order."""
        items = list(sentences)
        externals = [None] * len(items) if vectors is None else list(vectors)
        if threads <= 1 or len(items) < 2:
            return [self.parse(s, e) for s, e in zip(items, externals)]
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(self.parse, items, externals))
