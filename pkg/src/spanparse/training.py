"""Margin training with the auxiliary POS loss.

The loss of a sentence is

    max(0, max_T [S(T) + Hamming(T, gold)] - S(gold)) + pos_weight * CE(tags)

where the inner max comes from loss-augmented decoding. Its gradient reaches
the chart through the cells of the augmented prediction (+1) and of the gold
tree (-1).
"""

import csv
import logging
import math
import os
import random
import time
from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import NamedTuple, Optional

import msgspec
import numpy as np

from .chart import hamming_delta, loss_augmented_decode, tree_score
from .checkpoint import Checkpoint, EpochRecord, save_checkpoint
from .config import ModelConfig, TrainConfig
from .errors import ConfigError, DivergenceError, EmptyCorpus
from .evalb import EvalReport, evaluate_corpus
from .parser import Parser
from .tensor import Node, Parameters, Tape, cross_entropy, scale, weighted_sum
from .treebank import ParseTree, Sentence, tree_to_spans

logger = logging.getLogger(__name__)

Progress = Callable[[EpochRecord], None]


def total_loss(
    parser: Parser,
    sentence: Sentence,
    gold_tree: ParseTree,
    pos_weight: float = 1.0,
    external: Optional[np.ndarray] = None,
    tape: Optional[Tape] = None,
    params: Optional[Parameters] = None,
) -> Node:
    """Structured hinge loss plus weighted POS cross-entropy, as a 1x1 node.

    Without gold tags in *sentence* the POS term is dropped with a warning.
    """
    tape = Tape() if tape is None else tape
    sep = parser.config.unary_sep
    labels = parser.labels
    result = parser.forward(tape, sentence, external, params)
    scores = result.chart
    chart = scores.chart

    augmented = loss_augmented_decode(chart, gold_tree, labels, sentence, sep)
    margin = augmented.score - tree_score(chart, gold_tree, labels, sep=sep)
    slots = []
    delta = 0
    if margin > 0:
        gold_spans = tree_to_spans(gold_tree, sep)
        delta = hamming_delta(augmented.slots, gold_spans)
        for span in augmented.slots:
            index = labels.index(span.label)
            if index > 0:
                slots.append((span.i, span.j, index, 1.0))
        for span in gold_spans:
            index = labels.get(span.label, -1)
            if index > 0:
                slots.append((span.i, span.j, index, -1.0))
    loss = weighted_sum(scores.node, scores.weights(slots))
    if delta:
        loss = loss + tape.constant(float(delta))

    if sentence.pos_tags is None:
        if pos_weight:
            logger.warning("no gold POS tags, POS loss weight forced to 0")
        return loss
    if pos_weight:
        targets = [parser.tags.get(tag) for tag in sentence.pos_tags]
        loss = loss + scale(cross_entropy(result.pos_logits, targets), pos_weight)
    return loss


class Adam:
    """Adaptive moment estimation updating *params* in place."""

    def __init__(
        self,
        params: Parameters,
        learning_rate: float,
        betas: tuple[float, float],
        eps: float,
    ) -> None:
        self.params = params
        self.learning_rate = learning_rate
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.steps = 0
        self._m = {name: np.zeros_like(value) for name, value in params.items()}
        self._v = {name: np.zeros_like(value) for name, value in params.items()}

    def step(self, grads: dict[str, np.ndarray]) -> None:
        """Apply one update; parameters missing from *grads* get a zero gradient."""
        self.steps += 1
        b1, b2 = self.beta1, self.beta2
        correction1 = 1.0 - b1**self.steps
        correction2 = 1.0 - b2**self.steps
        for name, value in self.params.items():
            grad = grads.get(name)
            m = self._m[name]
            v = self._v[name]
            m *= b1
            v *= b2
            if grad is not None:
                m += (1.0 - b1) * grad
                v += (1.0 - b2) * grad * grad
            value -= (
                self.learning_rate
                * (m / correction1)
                / (np.sqrt(v / correction2) + self.eps)
            )


class Example(NamedTuple):
    sentence: Sentence
    tree: ParseTree
    external: Optional[np.ndarray]


def make_examples(
    trees: Sequence[ParseTree], vectors: Optional[Sequence[np.ndarray]] = None
) -> list[Example]:
    externals = [None] * len(trees) if vectors is None else list(vectors)
    return [
        Example(Sentence.from_tree(tree), tree, external)
        for tree, external in zip(trees, externals)
    ]


def sub_batches(batch: Sequence[Example], max_tokens: int) -> list[list[Example]]:
    """Consecutive groups whose token totals (words + 2 each) fit *max_tokens*."""
    groups: list[list[Example]] = []
    current: list[Example] = []
    used = 0
    for example in batch:
        tokens = len(example.sentence) + 2
        if current and used + tokens > max_tokens:
            groups.append(current)
            current, used = [], 0
        current.append(example)
        used += tokens
    if current:
        groups.append(current)
    return groups


def _trainable(
    examples: Sequence[Example], config: TrainConfig, max_len: int
) -> list[Example]:
    limit = min(config.sub_batch_max_tokens - 2, max_len)
    kept = [example for example in examples if len(example.sentence) <= limit]
    skipped = len(examples) - len(kept)
    if skipped:
        logger.warning("skipping %d training sentences longer than %d", skipped, limit)
    return kept


class _Gradients(NamedTuple):
    loss: float
    grads: dict[str, np.ndarray]


def _sentence_gradients(
    parser: Parser, example: Example, pos_weight: float
) -> _Gradients:
    tape = Tape()
    loss = total_loss(
        parser, example.sentence, example.tree, pos_weight, example.external, tape
    )
    return _Gradients(loss.item(), tape.backward(loss))


def _accumulate(total: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
    for name, grad in grads.items():
        if name in total:
            total[name] += grad
        else:
            total[name] = grad.copy()


def train_step(
    parser: Parser,
    optimizer: Adam,
    batch: Sequence[Example],
    config: TrainConfig,
    pool: Optional[ThreadPoolExecutor] = None,
) -> float:
    """One optimizer step over *batch*; returns the summed loss.

    Sentence gradients are merged in batch order whatever the thread count.

    Raises:
        DivergenceError: the loss or a gradient is not finite.
    """
    grads: dict[str, np.ndarray] = {}
    loss = 0.0
    groups = sub_batches(batch, config.sub_batch_max_tokens)
    logger.debug("batch of %d sentences in %d sub-batches", len(batch), len(groups))

    def compute(example: Example) -> _Gradients:
        return _sentence_gradients(parser, example, config.pos_loss_weight)

    for group in groups:
        results = list(pool.map(compute, group)) if pool else map(compute, group)
        for result in results:
            loss += result.loss
            _accumulate(grads, result.grads)
    if not math.isfinite(loss) or not all(np.isfinite(g).all() for g in grads.values()):
        raise DivergenceError(f"non-finite loss {loss} after {optimizer.steps} steps")
    optimizer.step(grads)
    return loss


def dev_report(
    parser: Parser,
    examples: Sequence[Example],
    threads: int = 1,
) -> EvalReport:
    """Bracket and tagging scores of *parser* on gold *examples*."""
    if not examples:
        return EvalReport()
    parsed = parser.parse_many(
        [example.sentence.words for example in examples],
        [example.external for example in examples],
        threads,
    )
    return evaluate_corpus(
        [result.tree for result in parsed],
        [example.tree for example in examples],
        threads=threads,
    )


def selection_key(record: EpochRecord) -> tuple[float, float, float]:
    """Order in which epochs compete for the kept checkpoint.

    Dev F1 first. Equal F1 falls back to dev tagging accuracy, then to the
    lower training loss.
    """
    return (record.dev_f1, record.dev_pos, -record.train_loss)


def epoch_log_path(checkpoint_path: os.PathLike | str) -> Path:
    """Comma-separated epoch log stored next to the checkpoint."""
    path = Path(checkpoint_path)
    return path.with_name(path.name + ".epochs.csv")


class _EpochLog:
    def __init__(self, path: Optional[Path]) -> None:
        self.path = path
        if path is not None:
            with open(path, "w", encoding="utf-8", newline="") as handle:
                csv.writer(handle).writerow(EpochRecord.__struct_fields__)

    def append(self, record: EpochRecord) -> None:
        if self.path is None:
            return
        with open(self.path, "a", encoding="utf-8", newline="") as handle:
            csv.writer(handle).writerow(msgspec.structs.astuple(record))


def train(
    train_trees: Sequence[ParseTree],
    dev_trees: Sequence[ParseTree],
    config: Optional[TrainConfig] = None,
    model_config: Optional[ModelConfig] = None,
    vectors: Optional[Sequence[np.ndarray]] = None,
    dev_vectors: Optional[Sequence[np.ndarray]] = None,
    parser: Optional[Parser] = None,
    progress: Optional[Progress] = None,
) -> Checkpoint:
    """Train a parser and return the checkpoint of the best epoch.

    Args:
        train_trees: gold training trees.
        dev_trees: gold trees for model selection; the training trees are
            used when empty.
        config: loop settings, `TrainConfig()` by default.
        model_config: shape of a fresh parser built from *train_trees*.
        vectors: external vectors aligned with *train_trees*.
        dev_vectors: external vectors aligned with *dev_trees*.
        parser: continue training this parser instead of a fresh one.
        progress: called with every epoch record.

    Raises:
        EmptyCorpus: no trainable training sentence.
        DivergenceError: the loss became non-finite.
        ConfigError: *vectors* given without *dev_vectors* for a dev set.
    """
    config = TrainConfig() if config is None else config
    if not train_trees:
        raise EmptyCorpus("training corpus is empty")
    if vectors is not None and dev_trees and dev_vectors is None:
        raise ConfigError("training uses external vectors but the dev set has none")
    if parser is None:
        parser = Parser.from_treebank(train_trees, model_config, seed=config.seed)
    examples = _trainable(
        make_examples(train_trees, vectors), config, parser.config.encoder.max_len
    )
    if not examples:
        raise EmptyCorpus("no training sentence fits the sub-batch token budget")
    dev = make_examples(dev_trees, dev_vectors)
    if not dev:
        logger.warning("empty dev set, selecting the model on the training set")
        dev = examples

    optimizer = Adam(
        parser.params,
        config.learning_rate,
        (config.beta1, config.beta2),
        config.adam_eps,
    )
    rng = random.Random(config.seed)
    log_path = None
    if config.checkpoint_path is not None:
        log_path = epoch_log_path(config.checkpoint_path)
    log = _EpochLog(log_path)
    history: list[EpochRecord] = []
    best: Optional[Checkpoint] = None
    best_record: Optional[EpochRecord] = None
    stale = 0
    pool = ThreadPoolExecutor(config.threads) if config.threads > 1 else None
    try:
        for epoch in range(1, config.max_epochs + 1):
            started = time.perf_counter()
            order = list(range(len(examples)))
            rng.shuffle(order)
            epoch_loss = 0.0
            for start in range(0, len(order), config.batch_size):
                batch = [examples[k] for k in order[start : start + config.batch_size]]
                epoch_loss += train_step(parser, optimizer, batch, config, pool)
            report = dev_report(parser, dev, config.threads)
            record = EpochRecord(
                epoch=epoch,
                train_loss=epoch_loss / len(examples),
                dev_f1=report.f1,
                seconds=time.perf_counter() - started,
                dev_pos=report.pos_accuracy,
            )
            history.append(record)
            log.append(record)
            logger.info(record.log_line())
            if progress is not None:
                progress(record)

            improved = best_record is None or (
                selection_key(record) > selection_key(best_record)
            )
            if improved:
                best_record = record
                stale = 0
                best = Checkpoint.from_parser(
                    parser,
                    train_config=config,
                    epoch=epoch,
                    dev_f1=record.dev_f1,
                    dev_pos=record.dev_pos,
                    history=list(history),
                )
                if config.checkpoint_path is not None:
                    save_checkpoint(best, config.checkpoint_path)
            else:
                stale += 1
                if stale >= config.patience:
                    logger.info("no dev improvement for %d epochs, stopping", stale)
                    break
    finally:
        if pool is not None:
            pool.shutdown()

    assert best is not None
    best.history = history
    if config.checkpoint_path is not None:
        save_checkpoint(best, config.checkpoint_path)
    return best
