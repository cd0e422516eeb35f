#!/usr/bin/env python3
# /// script
# requires-python = ">=3.10"
# dependencies = [
#     "spanparse",
# ]
#
# [tool.uv.sources]
# spanparse = { path = "../", editable = true }
# ///
"""Benchmark chart decoding and full sentence parsing.

Usage:
    uv run scripts/benchmark_decode.py
    uv run scripts/benchmark_decode.py --lengths 10 20 40 --labels 30
    uv run scripts/benchmark_decode.py --parse --rounds 5
"""

import argparse
import platform
import sys
import time
from functools import partial
from importlib.metadata import PackageNotFoundError, version

import numpy as np

from spanparse import Chart, Parser, Vocab, cky_decode, generate_corpus
from spanparse.chart import loss_augmented_decode
from spanparse.config import EncoderConfig, ModelConfig
from spanparse.const import EMPTY_LABEL

SEED = 42
LENGTHS = (5, 10, 20, 40)


# ---------------------------------------------------------------------------
# Stats
# ---------------------------------------------------------------------------


def compute_stats(values: list[float]) -> dict[str, float]:
    sv = sorted(values)
    n = len(sv)
    return {
        "count": n,
        "median": sv[n // 2],
        "p90": sv[int(n * 0.9)],
        "max": sv[-1],
        "total": sum(values),
    }


def fmt_secs(value: float) -> str:
    units = [("s ", 1), ("ms", 1e-3), ("us", 1e-6), ("ns", 1e-9)]
    if value == 0:
        return "  0.000ns"
    v = abs(value)
    for suffix, threshold in units:
        if v >= threshold:
            return "%7.3f" % (value / threshold) + suffix
    return "%7.3f" % (value / 1e-9) + "ns"


def runtime_info() -> dict:
    try:
        sv = version("spanparse")
    except PackageNotFoundError:
        sv = "unknown"
    return {
        "python": sys.version.split()[0],
        "platform": platform.platform(),
        "numpy": np.__version__,
        "spanparse": sv,
    }


# ---------------------------------------------------------------------------
# Benchmark
# ---------------------------------------------------------------------------


class Benchmark:
    def __init__(self, lengths: list[int], num_labels: int, rounds: int, seed: int):
        self.lengths = lengths
        self.labels = Vocab([EMPTY_LABEL] + [f"L{k}" for k in range(num_labels)])
        self.rounds = rounds
        self.rng = np.random.default_rng(seed)
        self.summary: dict[str, dict] = {}

    def bench(self, label: str, fn):
        times: list[float] = []
        for _ in range(self.rounds):
            start = time.perf_counter()
            fn()
            times.append(time.perf_counter() - start)
        self.summary[label] = compute_stats(times)

    def random_chart(self, n: int) -> Chart:
        scores = self.rng.normal(size=(n + 1, n + 1, len(self.labels)))
        scores[:, :, 0] = 0.0
        return Chart(n, scores)

    def run_decode(self):
        for n in self.lengths:
            chart = self.random_chart(n)
            gold = cky_decode(self.random_chart(n), self.labels).tree
            self.bench(f"cky_decode n={n}", partial(cky_decode, chart, self.labels))
            self.bench(
                f"loss_augmented n={n}",
                partial(loss_augmented_decode, chart, gold, self.labels),
            )

    def run_parse(self):
        trees = generate_corpus(50, seed=SEED)
        config = ModelConfig(
            encoder=EncoderConfig(d_model=64, d_k=32, d_v=32, h=2, num_layers=2),
            d_hidden=64,
        )
        parser = Parser.from_treebank(trees, config, seed=SEED)
        words = sorted(parser.words.items[1:])
        for n in self.lengths:
            if n > config.encoder.max_len:
                continue
            sentence = [words[k % len(words)] for k in range(n)]
            self.bench(f"parse n={n}", partial(parser.parse, sentence))

    # ── Display ────────────────────────────────────────────────

    COLS = 71

    def display(self):
        print()
        print("=" * self.COLS)
        print("  RESULTS")
        print("=" * self.COLS)
        t = "  %-30s %8s  %10s  %10s  %10s"
        print(t % ("Operation", "Rounds", "Median", "P90", "Max"))
        for label, s in self.summary.items():
            print(
                t
                % (
                    label[:30],
                    s["count"],
                    fmt_secs(s["median"]),
                    fmt_secs(s["p90"]),
                    fmt_secs(s["max"]),
                )
            )
        print("=" * self.COLS)


# ---------------------------------------------------------------------------
# CLI
# ---------------------------------------------------------------------------


def main():
    parser = argparse.ArgumentParser(
        description="Benchmark spanparse chart decoding",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    parser.add_argument("--lengths", type=int, nargs="+", default=list(LENGTHS))
    parser.add_argument("--labels", type=int, default=20, help="Non-empty labels")
    parser.add_argument("--rounds", type=int, default=10, help="Runs per operation")
    parser.add_argument("--parse", action="store_true", help="Also time Parser.parse")
    parser.add_argument("--seed", type=int, default=SEED)
    args = parser.parse_args()

    rt = runtime_info()
    print(f"Lengths:          {args.lengths}")
    print(f"Labels:           {args.labels}")
    print(f"Rounds:           {args.rounds}")
    print(f"Python:           {rt['python']}")
    print(f"Platform:         {rt['platform']}")
    print(f"numpy:            {rt['numpy']}")
    print(f"spanparse:        {rt['spanparse']}")

    bm = Benchmark(args.lengths, args.labels, args.rounds, args.seed)
    bm.run_decode()
    if args.parse:
        bm.run_parse()
    bm.display()


if __name__ == "__main__":
    main()
