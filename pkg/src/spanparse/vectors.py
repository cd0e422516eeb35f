"""External context vector files.

One block per sentence: a header line `n d`, then n lines of d floats.
Blocks follow the sentence order of the matching treebank or input file.
"""

import logging
import os
from collections.abc import Iterable, Sequence

import numpy as np

from .errors import ExternalShapeMismatch, LengthMismatch

logger = logging.getLogger(__name__)


def _header(line: str, lineno: int) -> tuple[int, int]:
    parts = line.split()
    if len(parts) != 2 or not all(part.isdigit() for part in parts):
        raise ExternalShapeMismatch(f"line {lineno}: expected 'n d' header")
    n, d = int(parts[0]), int(parts[1])
    if n < 1 or d < 1:
        raise ExternalShapeMismatch(f"line {lineno}: empty block {n} x {d}")
    return n, d


def read_vectors(path: os.PathLike | str) -> list[np.ndarray]:
    """Read every block of *path* as an n x d float64 matrix.

    Raises:
        ExternalShapeMismatch: malformed header or row, truncated block, or
            a width that differs from the first block.
    """
    blocks: list[np.ndarray] = []
    width = None
    with open(path, encoding="utf-8") as handle:
        try:
            text = handle.read()
        except UnicodeDecodeError as exc:
            message = f"{path}: not UTF-8 at byte {exc.start}"
            raise ExternalShapeMismatch(message) from exc
    lines = [
        (lineno, line)
        for lineno, line in enumerate(text.split("\n"), 1)
        if line.strip()
    ]
    position = 0
    while position < len(lines):
        lineno, line = lines[position]
        n, d = _header(line, lineno)
        if width is None:
            width = d
        elif d != width:
            raise ExternalShapeMismatch(f"line {lineno}: width {d}, file uses {width}")
        rows = lines[position + 1 : position + 1 + n]
        if len(rows) != n:
            raise ExternalShapeMismatch(f"line {lineno}: block of {n} rows truncated")
        try:
            block = np.array([row.split() for _, row in rows], dtype=np.float64)
        except ValueError as exc:
            raise ExternalShapeMismatch(f"line {lineno}: bad vector row") from exc
        if block.shape != (n, d):
            raise ExternalShapeMismatch(f"line {lineno}: rows are not {d} wide")
        blocks.append(block)
        position += 1 + n
    logger.debug("read %d vector blocks from %s", len(blocks), path)
    return blocks


def write_vectors(blocks: Iterable[np.ndarray], path: os.PathLike | str) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for block in blocks:
            block = np.asarray(block, dtype=np.float64)
            n, d = block.shape
            handle.write(f"{n} {d}\n")
            for row in block:
                handle.write(" ".join(repr(float(x)) for x in row) + "\n")


def check_alignment(blocks: Sequence[np.ndarray], lengths: Sequence[int]) -> None:
    """Raise unless there is one block of matching row count per sentence."""
    if len(blocks) != len(lengths):
        raise LengthMismatch(
            f"{len(blocks)} vector blocks for {len(lengths)} sentences"
        )
    for index, (block, length) in enumerate(zip(blocks, lengths)):
        if block.shape[0] != length:
            raise ExternalShapeMismatch(
                f"sentence {index}: {block.shape[0]} vectors for {length} words"
            )
