"""Span representations, the span-score chart and the POS head."""

import logging
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .config import ModelConfig
from .const import LAYER_NORM_EPS
from .encoder import Encoder, glorot
from .errors import IndexOutOfRange, ShapeMismatch
from .tensor import (
    Node,
    Parameters,
    Tape,
    add,
    concat_cols,
    layer_norm,
    matmul,
    relu,
    slice_cols,
    sub,
    take_rows,
)
from .treebank import Vocab

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class Chart:
    """Scores s(i, j, l) for 0 <= i < j <= n; the empty-label column is zero."""

    n: int
    scores: np.ndarray

    def __post_init__(self):
        if self.n < 1:
            raise ShapeMismatch("chart needs n >= 1")
        if self.scores.ndim != 3 or self.scores.shape[:2] != (self.n + 1, self.n + 1):
            raise ShapeMismatch(
                f"chart scores {self.scores.shape} do not fit n={self.n}"
            )

    @property
    def num_labels(self) -> int:
        return self.scores.shape[2]

    @classmethod
    def zeros(cls, n: int, num_labels: int) -> "Chart":
        return cls(n, np.zeros((n + 1, n + 1, num_labels)))

    def __getitem__(self, key: tuple[int, int, int]) -> float:
        return float(self.scores[key])


def spans_of(n: int) -> list[tuple[int, int]]:
    """All spans of an n word sentence, ordered by (i, j)."""
    return [(i, j) for i in range(n) for j in range(i + 1, n + 1)]


def _halves(Y: Node) -> tuple[Node, Node]:
    half = Y.shape[1] // 2
    return slice_cols(Y, 0, half), slice_cols(Y, half, Y.shape[1])


def span_vectors(Y: Node, spans: Sequence[tuple[int, int]]) -> Node:
    """Stacked span vectors [fwd_j - fwd_i ; bwd_{j+1} - bwd_{i+1}].

    Rows of *Y* are START, words, STOP. Fencepost t reads the forward half
    of row t and the backward half of row t + 1.
    """
    n = Y.shape[0] - 2
    starts = np.array([i for i, _ in spans], dtype=np.intp)
    ends = np.array([j for _, j in spans], dtype=np.intp)
    if not spans or (starts < 0).any() or (ends > n).any() or (starts >= ends).any():
        raise IndexOutOfRange(f"span outside 0 <= i < j <= {n}")
    forward, backward = _halves(Y)
    return concat_cols(
        sub(take_rows(forward, ends), take_rows(forward, starts)),
        sub(take_rows(backward, ends + 1), take_rows(backward, starts + 1)),
    )


def span_vector(Y: Node, i: int, j: int) -> Node:
    return span_vectors(Y, [(i, j)])


def score_span(
    v: Node,
    m1: Node,
    c1: Node,
    gain: Node,
    bias: Node,
    m2: Node,
    eps: float = LAYER_NORM_EPS,
) -> Node:
    """M_2 relu(LN(M_1 v + c_1)) for every row of *v*; no output bias."""
    return matmul(relu(layer_norm(add(matmul(v, m1), c1), gain, bias, eps)), m2)


def pos_logits(Y: Node, w: Node, b: Node) -> Node:
    """Tag logits for the word rows of *Y* (START and STOP excluded)."""
    n = Y.shape[0] - 2
    return add(matmul(take_rows(Y, np.arange(1, n + 1)), w), b)


class ChartScores(NamedTuple):
    """A chart together with the tape node its cells were read from."""

    chart: Chart
    node: Node
    rows: dict[tuple[int, int], int]

    def weights(self, slots: Iterable[tuple[int, int, int, float]]) -> np.ndarray:
        """Weight matrix selecting (i, j, label index) cells with a coefficient."""
        weights = np.zeros(self.node.shape)
        for i, j, label, coef in slots:
            weights[self.rows[i, j], label] += coef
        return weights


class SpanScorer:
    """Feed-forward label scorer over span vectors.

    Args:
        config: model shape, the scorer reads `d_hidden` and encoder widths.
        labels: label vocabulary with the empty label at index 0.
    """

    def __init__(self, config: ModelConfig, labels: Vocab) -> None:
        self.config = config
        self.labels = labels

    def init_params(self, params: Parameters, rng: np.random.Generator) -> Parameters:
        d_model = self.config.encoder.d_model
        d_hidden = self.config.d_hidden
        params["span.m1"] = glorot(rng, d_model, d_hidden)
        params["span.c1"] = np.zeros((1, d_hidden))
        params["span.ln.gain"] = np.ones((1, d_hidden))
        params["span.ln.bias"] = np.zeros((1, d_hidden))
        params["span.m2"] = glorot(rng, d_hidden, len(self.labels))
        return params

    def score(self, tape: Tape, params: Parameters, Y: Node) -> ChartScores:
        n = Y.shape[0] - 2
        spans = spans_of(n)

        def p(name: str) -> Node:
            return tape.param(name, params[name])

        node = score_span(
            span_vectors(Y, spans),
            p("span.m1"),
            p("span.c1"),
            p("span.ln.gain"),
            p("span.ln.bias"),
            p("span.m2"),
            self.config.encoder.eps,
        )
        scores = np.zeros((n + 1, n + 1, node.shape[1]))
        starts = np.array([i for i, _ in spans], dtype=np.intp)
        ends = np.array([j for _, j in spans], dtype=np.intp)
        scores[starts, ends, :] = node.value
        scores[:, :, 0] = 0.0
        rows = {span: row for row, span in enumerate(spans)}
        return ChartScores(Chart(n, scores), node, rows)


class PosTagger:
    """Linear POS head over encoder rows."""

    def __init__(self, d_model: int, tags: Vocab) -> None:
        self.d_model = d_model
        self.tags = tags

    def init_params(self, params: Parameters, rng: np.random.Generator) -> Parameters:
        params["pos.w"] = glorot(rng, self.d_model, len(self.tags))
        params["pos.b"] = np.zeros((1, len(self.tags)))
        return params

    def logits(self, tape: Tape, params: Parameters, Y: Node) -> Node:
        return pos_logits(
            Y,
            tape.param("pos.w", params["pos.w"]),
            tape.param("pos.b", params["pos.b"]),
        )

    def predict(self, logits: np.ndarray) -> tuple[str, ...]:
        """Best real tag per row; the unknown tag is never predicted."""
        if logits.shape[1] > 1:
            best = logits[:, 1:].argmax(axis=1) + 1
        else:
            best = np.zeros(logits.shape[0], dtype=np.intp)
        return tuple(self.tags.lookup(int(index)) for index in best)


def score_chart(
    words: Sequence[str],
    encoder: Encoder,
    scorer: SpanScorer,
    params: Parameters,
    external: Optional[np.ndarray] = None,
) -> Chart:
    """Chart of a sentence without recording gradients."""
    tape = Tape(record=False)
    Y = encoder.encode(tape, params, words, external)
    return scorer.score(tape, params, Y).chart


def format_chart(chart: Chart, labels: Vocab) -> str:
    """Debug dump: one `i j label score` line per span and label."""
    lines = []
    for i, j in spans_of(chart.n):
        for index, label in enumerate(labels):
            lines.append(f"{i} {j} {label} {chart.scores[i, j, index]:.17g}")
    return "\n".join(lines) + "\n"
