"""Stacked multi-head self-attention encoder.

A sentence of L words becomes an (L+2) x d_model matrix: START row, one row
per word, STOP row. Each layer applies `LayerNorm(x + MultiHead(x))` and then
`LayerNorm(x + FeedForward(x))`.
"""

import logging
import math
from collections.abc import Sequence
from typing import NamedTuple, Optional

import numpy as np

from .config import EncoderConfig
from .const import INIT_EMBEDDING_RANGE
from .errors import ExternalShapeMismatch, SentenceTooLong
from .tensor import (
    Node,
    Parameters,
    Tape,
    add,
    concat_rows,
    layer_norm,
    matmul,
    relu,
    scale,
    softmax_rows,
    take_rows,
    transpose,
)
from .treebank import Vocab

logger = logging.getLogger(__name__)


class HeadParams(NamedTuple):
    wq: Node
    wk: Node
    wv: Node
    wo: Node


def glorot(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    limit = math.sqrt(6.0 / (rows + cols))
    return rng.uniform(-limit, limit, size=(rows, cols))


def single_head(X: Node, head: HeadParams) -> Node:
    """softmax(Q K^T / sqrt(d_head)) V for one head, before its output map."""
    Q = matmul(X, head.wq)
    K = matmul(X, head.wk)
    V = matmul(X, head.wv)
    logits = scale(matmul(Q, transpose(K)), 1.0 / math.sqrt(head.wq.shape[1]))
    return matmul(softmax_rows(logits), V)


def multi_head(X: Node, heads: Sequence[HeadParams]) -> Node:
    """Sum over heads of each head's output mapped back by its own W_O."""
    out: Optional[Node] = None
    for head in heads:
        projected = matmul(single_head(X, head), head.wo)
        out = projected if out is None else add(out, projected)
    if out is None:
        raise ValueError("multi_head needs at least one head")
    return out


def feed_forward(X: Node, w1: Node, b1: Node, w2: Node, b2: Node) -> Node:
    """Position-wise relu network applied to every row."""
    return add(matmul(relu(add(matmul(X, w1), b1)), w2), b2)


class Encoder:
    """Binds an `EncoderConfig` and word vocabulary to parameter names.

    Args:
        config: encoder shape.
        words: word vocabulary, index 0 is the unknown word row.
    """

    def __init__(self, config: EncoderConfig, words: Vocab) -> None:
        self.config = config
        self.words = words

    def init_params(self, params: Parameters, rng: np.random.Generator) -> Parameters:
        c = self.config
        r = INIT_EMBEDDING_RANGE
        params["enc.word_emb"] = rng.uniform(-r, r, size=(len(self.words), c.d_model))
        params["enc.pos_emb"] = rng.uniform(-r, r, size=(c.max_len + 2, c.d_model))
        params["enc.start"] = rng.uniform(-r, r, size=(1, c.d_model))
        params["enc.stop"] = rng.uniform(-r, r, size=(1, c.d_model))
        if c.d_ext:
            params["enc.ext_proj"] = glorot(rng, c.d_ext, c.d_model)
        d_k, d_v = c.d_k // c.h, c.d_v // c.h
        for k in range(c.num_layers):
            prefix = f"enc.layer{k}"
            for i in range(c.h):
                params[f"{prefix}.head{i}.wq"] = glorot(rng, c.d_model, d_k)
                params[f"{prefix}.head{i}.wk"] = glorot(rng, c.d_model, d_k)
                params[f"{prefix}.head{i}.wv"] = glorot(rng, c.d_model, d_v)
                params[f"{prefix}.head{i}.wo"] = glorot(rng, d_v, c.d_model)
            params[f"{prefix}.ff.w1"] = glorot(rng, c.d_model, c.d_ff)
            params[f"{prefix}.ff.b1"] = np.zeros((1, c.d_ff))
            params[f"{prefix}.ff.w2"] = glorot(rng, c.d_ff, c.d_model)
            params[f"{prefix}.ff.b2"] = np.zeros((1, c.d_model))
            for norm in ("ln1", "ln2"):
                params[f"{prefix}.{norm}.gain"] = np.ones((1, c.d_model))
                params[f"{prefix}.{norm}.bias"] = np.zeros((1, c.d_model))
        return params

    def word_ids(self, words: Sequence[str]) -> np.ndarray:
        return np.array([self.words.get(word) for word in words], dtype=np.intp)

    def heads(self, tape: Tape, params: Parameters, layer: int) -> list[HeadParams]:
        prefix = f"enc.layer{layer}"
        return [
            HeadParams(
                *(
                    tape.param(f"{prefix}.head{i}.{w}", params[f"{prefix}.head{i}.{w}"])
                    for w in ("wq", "wk", "wv", "wo")
                )
            )
            for i in range(self.config.h)
        ]

    def embed(
        self,
        tape: Tape,
        params: Parameters,
        words: Sequence[str],
        external: Optional[np.ndarray] = None,
    ) -> Node:
        """START row, word rows and STOP row, each plus its positional row.

        Raises:
            SentenceTooLong: more words than the positional matrix covers.
            ExternalShapeMismatch: *external* is not L x d_ext.
        """
        length = len(words)
        if length > self.config.max_len:
            raise SentenceTooLong(
                f"{length} words exceed max_len={self.config.max_len}"
            )
        if length == 0:
            raise SentenceTooLong("empty sentence")

        def p(name: str) -> Node:
            return tape.param(name, params[name])

        rows = take_rows(p("enc.word_emb"), self.word_ids(words))
        if external is not None:
            ext = np.asarray(external, dtype=np.float64)
            if not self.config.d_ext:
                raise ExternalShapeMismatch("model was built without external vectors")
            if ext.shape != (length, self.config.d_ext):
                raise ExternalShapeMismatch(
                    f"external vectors {ext.shape}, expected"
                    f" {(length, self.config.d_ext)}"
                )
            rows = add(rows, matmul(tape.constant(ext), p("enc.ext_proj")))
        X = concat_rows(p("enc.start"), rows, p("enc.stop"))
        return add(X, take_rows(p("enc.pos_emb"), np.arange(length + 2)))

    def encode(
        self,
        tape: Tape,
        params: Parameters,
        words: Sequence[str],
        external: Optional[np.ndarray] = None,
    ) -> Node:
        X = self.embed(tape, params, words, external)
        eps = self.config.eps
        for k in range(self.config.num_layers):
            prefix = f"enc.layer{k}"

            def p(name: str, prefix: str = prefix) -> Node:
                return tape.param(f"{prefix}.{name}", params[f"{prefix}.{name}"])

            attended = multi_head(X, self.heads(tape, params, k))
            X = layer_norm(add(X, attended), p("ln1.gain"), p("ln1.bias"), eps)
            ff = feed_forward(X, p("ff.w1"), p("ff.b1"), p("ff.w2"), p("ff.b2"))
            X = layer_norm(add(X, ff), p("ln2.gain"), p("ln2.bias"), eps)
        return X
