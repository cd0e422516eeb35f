"""Test spanparse.config module."""

import os
import os.path
from pathlib import Path

import pytest
from pydantic import ValidationError

from spanparse.config import (
    EncoderConfig,
    ModelConfig,
    RunConfig,
    TrainConfig,
    dump_defaults,
    load_run_config,
    read_config_file,
)
from spanparse.const import ADAM_BETAS, ADAM_EPS, UNARY_SEP
from spanparse.errors import ConfigError


def write(tmpdir, text, name="run.conf"):
    path = os.path.join(tmpdir, name)
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(text)
    return path


# ============================================================================
# Model sections
# ============================================================================


class TestEncoderConfig:
    """Test EncoderConfig validation."""

    def test_defaults(self):
        """Defaults describe the reference encoder."""
        config = EncoderConfig()
        assert (config.d_model, config.h, config.num_layers) == (128, 8, 2)
        assert config.eps == 1e-6
        assert config.d_ext == 0

    def test_heads_divide_widths(self):
        with pytest.raises(ValidationError):
            EncoderConfig(d_k=10, h=4)
        with pytest.raises(ValidationError):
            EncoderConfig(d_v=6, d_k=8, h=4)

    def test_even_model_width(self):
        """Span vectors split the encoder row in two halves."""
        with pytest.raises(ValidationError):
            EncoderConfig(d_model=7, d_k=8, d_v=8, h=1)

    @pytest.mark.parametrize("key", ["d_model", "h", "d_ff", "max_len"])
    def test_positive(self, key):
        with pytest.raises(ValidationError):
            EncoderConfig(**{key: 0})

    def test_extra_keys_forbidden(self):
        with pytest.raises(ValidationError):
            EncoderConfig(width=3)

    def test_frozen(self):
        config = EncoderConfig()
        with pytest.raises(ValidationError):
            config.d_model = 4


class TestModelConfig:
    def test_defaults(self):
        config = ModelConfig()
        assert config.d_hidden == 250
        assert config.unary_sep == UNARY_SEP

    def test_json_round_trip(self, tiny_config):
        assert ModelConfig.model_validate_json(tiny_config.model_dump_json()) == (
            tiny_config
        )


class TestTrainConfig:
    def test_adam_defaults(self):
        config = TrainConfig()
        assert (config.beta1, config.beta2) == ADAM_BETAS
        assert config.adam_eps == ADAM_EPS

    def test_sub_batch_budget(self):
        """A sub-batch must hold at least START, one word and STOP."""
        with pytest.raises(ValidationError):
            TrainConfig(sub_batch_max_tokens=2)

    def test_checkpoint_path(self):
        assert TrainConfig(checkpoint_path="a.ckpt").checkpoint_path == Path("a.ckpt")


# ============================================================================
# Config files
# ============================================================================


class TestReadConfigFile:
    """Test read_config_file parsing."""

    def test_values_and_comments(self, tmpdir):
        path = write(tmpdir, "# shape\nd_model = 64\n\nh=4  # heads\n")
        assert read_config_file(path) == {"d_model": "64", "h": "4"}

    def test_missing_equals(self, tmpdir):
        path = write(tmpdir, "d_model = 64\nh 4\n")
        with pytest.raises(ConfigError, match=":2:"):
            read_config_file(path)

    def test_duplicate(self, tmpdir):
        path = write(tmpdir, "h = 4\nh = 8\n")
        with pytest.raises(ConfigError, match="duplicate"):
            read_config_file(path)

    def test_missing_file(self, tmpdir):
        with pytest.raises(FileNotFoundError):
            read_config_file(os.path.join(tmpdir, "absent.conf"))

    def test_not_utf8(self, tmpdir):
        path = os.path.join(tmpdir, "run.conf")
        with open(path, "wb") as handle:
            handle.write(b"h = 4\n# \xff\n")
        with pytest.raises(ConfigError, match="not UTF-8 at byte 8"):
            read_config_file(path)


class TestLoadRunConfig:
    """Test merging files and overrides."""

    def test_defaults(self):
        assert load_run_config() == RunConfig()

    def test_file_values(self, tmpdir):
        path = write(tmpdir, "d_model = 64\nd_k = 32\nd_v = 32\nignore_root = true\n")
        config = load_run_config(path)
        assert config.d_model == 64
        assert config.ignore_root is True

    def test_overrides_win(self, tmpdir):
        path = write(tmpdir, "max_epochs = 10\nseed = 3\n")
        config = load_run_config(path, {"max_epochs": 2, "seed": None})
        assert config.max_epochs == 2
        assert config.seed == 3

    def test_unknown_key(self, tmpdir):
        path = write(tmpdir, "d_modle = 64\n")
        with pytest.raises(ConfigError, match="d_modle"):
            load_run_config(path)

    def test_bad_value(self):
        with pytest.raises(ConfigError, match="learning_rate"):
            load_run_config(overrides={"learning_rate": "fast"})

    def test_derived_sections_validated(self):
        with pytest.raises(ConfigError, match="divisible"):
            load_run_config(overrides={"h": 3})
        with pytest.raises(ConfigError):
            load_run_config(overrides={"max_epochs": 0})

    def test_dump_defaults_round_trip(self, tmpdir):
        text = dump_defaults()
        assert "d_model = 128  # encoder width" in text.splitlines()
        assert load_run_config(write(tmpdir, text)) == RunConfig()


class TestRunConfigSections:
    def test_parser_config(self):
        config = RunConfig(d_model=16, d_k=8, d_v=8, h=2, d_hidden=12)
        model = config.parser_config()
        assert model.encoder.d_model == 16
        assert model.encoder.h == 2
        assert model.d_hidden == 12

    def test_train_config(self):
        config = RunConfig(out=Path("best.ckpt"), threads=3, batch_size=7)
        train = config.train_config()
        assert train.checkpoint_path == Path("best.ckpt")
        assert train.threads == 3
        assert train.batch_size == 7

    def test_thread_count(self):
        assert RunConfig(threads=2).thread_count() == 2
        assert RunConfig(threads=0).thread_count() == (os.cpu_count() or 1)
