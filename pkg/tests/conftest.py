import os.path
import random
import shutil
import tempfile

import pytest
from generators import CAT_TREE

from spanparse.config import EncoderConfig, ModelConfig
from spanparse.synthetic import generate_corpus
from spanparse.treebank import parse_bracketed


@pytest.fixture
def tmpdir():
    directory = tempfile.mkdtemp(prefix="spanparse-")
    yield directory
    shutil.rmtree(directory, ignore_errors=True)


@pytest.fixture
def tmpfilename(tmpdir):
    filename = os.path.join(tmpdir, "model.ckpt")
    return filename


@pytest.fixture
def rng():
    return random.Random(1234)


@pytest.fixture
def cat_tree():
    (tree,) = parse_bracketed(CAT_TREE)
    return tree


@pytest.fixture
def toy_corpus():
    return generate_corpus(12, seed=3)


@pytest.fixture
def tiny_config():
    """Smallest model shape that still exercises every component."""
    return ModelConfig(
        encoder=EncoderConfig(
            d_model=8, d_k=4, d_v=4, h=2, num_layers=1, d_ff=8, max_len=12
        ),
        d_hidden=8,
    )
