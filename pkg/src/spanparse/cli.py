"""Command line interface.

Usage:
    spanparse train --train train.mrg --dev dev.mrg --out model.ckpt
    spanparse parse --model model.ckpt --input sentences.txt
    spanparse eval --gold gold.mrg --pred pred.mrg --per-label labels.csv
    spanparse stats --input corpus.mrg
    spanparse split --input corpus.mrg --train 8636 --dev 510
    spanparse compare --gold gold.mrg --system a=a.mrg --system b=b.mrg
    spanparse generate --count 50 --seed 1 --out toy.mrg
    spanparse config --dump-defaults

Primary output goes to standard output, diagnostics to standard error.
Exit codes: 0 success, 1 input/config/model errors, 2 training divergence.
"""

import argparse
import contextlib
import logging
import sys
from collections.abc import Iterator, Sequence
from pathlib import Path
from typing import Optional, TextIO

from .checkpoint import load_checkpoint
from .config import RunConfig, dump_defaults, load_run_config
from .errors import ConfigError, DivergenceError, SpanParseError
from .evalb import (
    compare_systems,
    evaluate_corpus,
    format_comparison,
    format_report,
    write_report_csv,
)
from .span_model import format_chart
from .synthetic import generate_corpus
from .training import train
from .treebank import (
    Sentence,
    compute_stats,
    read_treebank,
    split_corpus,
    write_bracketed,
    write_treebank,
)
from .vectors import check_alignment, read_vectors

logger = logging.getLogger(__name__)

TRAIN_KEYS = tuple(
    name
    for name in RunConfig.model_fields
    if name not in ("ignore_root", "delete_punct")
)
PARSE_KEYS = ("threads",)
EVAL_KEYS = ("threads", "ignore_root", "delete_punct")

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def _add_run_flags(parser: argparse.ArgumentParser, names: Sequence[str]) -> None:
    parser.add_argument("--config", type=Path, help="key = value config file")
    for name in names:
        field = RunConfig.model_fields[name]
        flag = "--" + name.replace("_", "-")
        if field.annotation is bool:
            parser.add_argument(
                flag,
                dest=name,
                action="store_true",
                default=None,
                help=field.description,
            )
        else:
            default = "" if field.default is None else f" (default: {field.default})"
            parser.add_argument(
                flag,
                dest=name,
                default=None,
                metavar=name.upper(),
                help=f"{field.description}{default}",
            )


def _run_config(args: argparse.Namespace, names: Sequence[str]) -> RunConfig:
    overrides = {name: getattr(args, name) for name in names}
    return load_run_config(args.config, overrides)


@contextlib.contextmanager
def _open_input(path: str) -> Iterator[TextIO]:
    if path == "-":
        yield sys.stdin
    else:
        with open(path, encoding="utf-8") as handle:
            yield handle


@contextlib.contextmanager
def _open_output(path: Optional[str]) -> Iterator[TextIO]:
    if path is None or path == "-":
        yield sys.stdout
    else:
        with open(path, "w", encoding="utf-8") as handle:
            yield handle


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_train(args: argparse.Namespace) -> int:
    config = _run_config(args, TRAIN_KEYS)
    if config.train is None or config.out is None:
        raise ConfigError("train needs --train and --out")
    train_trees = read_treebank(config.train)
    dev_trees = read_treebank(config.dev) if config.dev is not None else []
    vectors = dev_vectors = None
    if config.vectors is not None:
        vectors = read_vectors(config.vectors)
        check_alignment(vectors, [len(Sentence.from_tree(t)) for t in train_trees])
        width = vectors[0].shape[1] if vectors else 0
        if config.d_ext == 0:
            config = config.model_copy(update={"d_ext": width})
        elif config.d_ext != width:
            raise ConfigError(f"d_ext = {config.d_ext} but vectors are {width} wide")
        if config.dev_vectors is not None:
            dev_vectors = read_vectors(config.dev_vectors)
            dev_lengths = [len(Sentence.from_tree(t)) for t in dev_trees]
            check_alignment(dev_vectors, dev_lengths)
        elif dev_trees:
            raise ConfigError("--vectors needs --dev-vectors when --dev is given")
    elif config.d_ext:
        raise ConfigError("d_ext is set but no --vectors given")
    logger.info(
        "training on %d trees, selecting on %d dev trees",
        len(train_trees),
        len(dev_trees),
    )

    def progress(record):
        print(record.log_line(), flush=True)

    best = train(
        train_trees,
        dev_trees,
        config.train_config(),
        config.parser_config(),
        vectors=vectors,
        dev_vectors=dev_vectors,
        progress=progress,
    )
    logger.info(
        "best dev F1 %.2f (POS %.2f) at epoch %d, saved to %s",
        best.dev_f1,
        best.dev_pos,
        best.epoch,
        config.out,
    )
    return 0


def cmd_parse(args: argparse.Namespace) -> int:
    config = _run_config(args, PARSE_KEYS)
    parser = load_checkpoint(args.model).parser()
    with _open_input(args.input) as handle:
        sentences = [Sentence.from_line(line) for line in handle if line.strip()]
    vectors = None
    if args.vectors is not None:
        vectors = read_vectors(args.vectors)
        check_alignment(vectors, [len(s) for s in sentences])
    if args.dump_charts is not None:
        with open(args.dump_charts, "w", encoding="utf-8") as dump:
            for index, sentence in enumerate(sentences):
                external = None if vectors is None else vectors[index]
                dump.write(f"# sentence {index}\n")
                chart = parser.chart(sentence, external)
                dump.write(format_chart(chart, parser.labels))
    results = parser.parse_many(sentences, vectors, config.thread_count())
    for result in results:
        print(write_bracketed(result.tree))
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    config = _run_config(args, EVAL_KEYS)
    report = evaluate_corpus(
        read_treebank(args.pred),
        read_treebank(args.gold),
        ignore_root=config.ignore_root,
        delete_punct=config.delete_punct,
        threads=config.thread_count(),
    )
    sys.stdout.write(format_report(report))
    if args.per_label is not None:
        write_report_csv(report, args.per_label)
    return 0


def cmd_stats(args: argparse.Namespace) -> int:
    stats = compute_stats(read_treebank(args.input))
    lines = [
        f"sentences     {stats.sentence_count}",
        f"tokens        {stats.token_count}",
        f"mean length   {stats.mean_length:.2f}",
        f"max length    {stats.max_length}",
        f"constituents  {stats.constituent_count}",
        "",
    ]
    lines.extend(
        f"{label}\t{count}\t{share:.2f}" for label, count, share in stats.shares()
    )
    if args.pos:
        lines.append("")
        lines.extend(
            f"{tag}\t{count}"
            for tag, count in sorted(
                stats.pos_counts.items(), key=lambda item: (-item[1], item[0])
            )
        )
    print("\n".join(lines))
    return 0


def cmd_split(args: argparse.Namespace) -> int:
    corpus = read_treebank(args.input)
    train_trees, dev_trees = split_corpus(
        corpus, args.train_count, args.dev_count, seed=args.seed, shuffle=args.shuffle
    )
    stem = Path(args.input)
    train_out = args.train_out or stem.with_name(stem.name + ".train")
    dev_out = args.dev_out or stem.with_name(stem.name + ".dev")
    write_treebank(train_trees, train_out)
    write_treebank(dev_trees, dev_out)
    logger.info("wrote %d train trees to %s", len(train_trees), train_out)
    logger.info("wrote %d dev trees to %s", len(dev_trees), dev_out)
    return 0


def cmd_compare(args: argparse.Namespace) -> int:
    systems = {}
    for item in args.system:
        name, sep, path = item.partition("=")
        if not sep or not name or not path:
            raise ConfigError(f"--system expects NAME=PATH, got {item!r}")
        systems[name] = read_treebank(path)
    reports = compare_systems(
        read_treebank(args.gold),
        systems,
        ignore_root=args.ignore_root,
        delete_punct=args.delete_punct,
    )
    sys.stdout.write(format_comparison(reports))
    return 0


def cmd_generate(args: argparse.Namespace) -> int:
    trees = generate_corpus(args.count, seed=args.seed, max_depth=args.max_depth)
    with _open_output(args.out) as handle:
        for tree in trees:
            handle.write(write_bracketed(tree) + "\n")
    return 0


def cmd_config(args: argparse.Namespace) -> int:
    if args.dump_defaults:
        sys.stdout.write(dump_defaults())
        return 0
    config = load_run_config(args.config)
    for name, value in config.model_dump().items():
        print(f"{name} = {'' if value is None else value}")
    return 0


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spanparse", description="Span-based constituency parser"
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    parser.add_argument("-q", "--quiet", action="store_true", help="warnings only")
    commands = parser.add_subparsers(dest="command", required=True)

    sub = commands.add_parser("train", help="train a parser")
    _add_run_flags(sub, TRAIN_KEYS)
    sub.set_defaults(func=cmd_train)

    sub = commands.add_parser("parse", help="parse pre-tokenized sentences")
    sub.add_argument("--model", required=True, type=Path, help="checkpoint file")
    sub.add_argument("--input", default="-", help="one sentence per line, - = stdin")
    sub.add_argument("--vectors", type=Path, help="external vectors per sentence")
    sub.add_argument("--dump-charts", type=Path, help="write span score charts")
    _add_run_flags(sub, PARSE_KEYS)
    sub.set_defaults(func=cmd_parse)

    sub = commands.add_parser("eval", help="labeled bracket scores")
    sub.add_argument("--gold", required=True, type=Path)
    sub.add_argument("--pred", required=True, type=Path)
    sub.add_argument("--per-label", type=Path, help="write per-label CSV")
    _add_run_flags(sub, EVAL_KEYS)
    sub.set_defaults(func=cmd_eval)

    sub = commands.add_parser("stats", help="constituent label statistics")
    sub.add_argument("--input", required=True, type=Path)
    sub.add_argument("--pos", action="store_true", help="also list POS tag counts")
    sub.set_defaults(func=cmd_stats)

    sub = commands.add_parser("split", help="tail-cut train/dev split")
    sub.add_argument("--input", required=True, type=Path)
    sub.add_argument("--train", dest="train_count", required=True, type=int)
    sub.add_argument("--dev", dest="dev_count", required=True, type=int)
    sub.add_argument("--seed", type=int, default=None)
    sub.add_argument("--shuffle", action="store_true", help="permute by --seed first")
    sub.add_argument("--train-out", type=Path)
    sub.add_argument("--dev-out", type=Path)
    sub.set_defaults(func=cmd_split)

    sub = commands.add_parser("compare", help="per-label F1 of several systems")
    sub.add_argument("--gold", required=True, type=Path)
    sub.add_argument("--system", action="append", required=True, metavar="NAME=PATH")
    sub.add_argument("--ignore-root", action="store_true")
    sub.add_argument("--delete-punct", action="store_true")
    sub.set_defaults(func=cmd_compare)

    sub = commands.add_parser("generate", help="synthetic treebank")
    sub.add_argument("--count", type=int, default=50)
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--max-depth", type=int, default=2)
    sub.add_argument("--out", default="-")
    sub.set_defaults(func=cmd_generate)

    sub = commands.add_parser("config", help="show configuration")
    sub.add_argument("--config", type=Path)
    sub.add_argument("--dump-defaults", action="store_true")
    sub.set_defaults(func=cmd_config)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.INFO
    if args.verbose:
        level = logging.DEBUG
    elif args.quiet:
        level = logging.WARNING
    logging.basicConfig(level=level, format=LOG_FORMAT, stream=sys.stderr, force=True)
    try:
        return args.func(args)
    except DivergenceError as exc:
        print(f"spanparse: {exc}", file=sys.stderr)
        return 2
    except (SpanParseError, OSError, UnicodeDecodeError) as exc:
        print(f"spanparse: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
