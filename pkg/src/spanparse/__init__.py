from .chart import ScoredTree, cky_decode, hinge_loss, loss_augmented_decode  # noqa
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint  # noqa
from .config import EncoderConfig, ModelConfig, RunConfig, TrainConfig  # noqa
from .evalb import (  # noqa
    EvalReport,
    evaluate_corpus,
    format_report,
    match_brackets,
)
from .parser import Parser  # noqa
from .span_model import Chart  # noqa
from .synthetic import generate_corpus  # noqa
from .training import train  # noqa
from .treebank import (  # noqa
    Internal,
    LabeledSpan,
    Leaf,
    Sentence,
    Vocab,
    parse_bracketed,
    read_treebank,
    tree_to_spans,
    write_bracketed,
    write_treebank,
)
