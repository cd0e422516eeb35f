"""spanparse configuration models and helpers for config files."""

import os
from pathlib import Path
from typing import Any, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .const import (
    ADAM_BETAS,
    ADAM_EPS,
    DEFAULT_BATCH_SIZE,
    DEFAULT_D_FF,
    DEFAULT_D_HIDDEN,
    DEFAULT_D_KV,
    DEFAULT_D_MODEL,
    DEFAULT_HEADS,
    DEFAULT_LAYERS,
    DEFAULT_LEARNING_RATE,
    DEFAULT_MAX_EPOCHS,
    DEFAULT_MAX_LEN,
    DEFAULT_PATIENCE,
    DEFAULT_POS_WEIGHT,
    DEFAULT_SEED,
    DEFAULT_SUB_BATCH_TOKENS,
    LAYER_NORM_EPS,
    UNARY_SEP,
)
from .errors import ConfigError


class EncoderConfig(BaseModel):
    """Self-attention encoder shape.

    Attributes:
        d_model: feature width of every encoder row
        d_k: total query/key width, split evenly over the heads
        d_v: total value width, split evenly over the heads
        h: number of attention heads
        num_layers: number of stacked attention + feed-forward layers
        d_ff: hidden width of the position-wise feed-forward sublayer
        max_len: longest sentence the positional matrix covers
        d_ext: width of external context vectors, 0 disables them
        eps: layer normalization variance guard
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    d_model: int = Field(DEFAULT_D_MODEL, gt=0, description="encoder width")
    d_k: int = Field(DEFAULT_D_KV, gt=0, description="query/key width over all heads")
    d_v: int = Field(DEFAULT_D_KV, gt=0, description="value width over all heads")
    h: int = Field(DEFAULT_HEADS, gt=0, description="attention heads")
    num_layers: int = Field(DEFAULT_LAYERS, ge=0, description="encoder layers")
    d_ff: int = Field(DEFAULT_D_FF, gt=0, description="feed-forward hidden width")
    max_len: int = Field(DEFAULT_MAX_LEN, gt=0, description="longest sentence")
    d_ext: int = Field(0, ge=0, description="external vector width (0 = none)")
    eps: float = Field(LAYER_NORM_EPS, gt=0, description="layer norm epsilon")

    @model_validator(mode="after")
    def _check_widths(self):
        if self.d_k % self.h or self.d_v % self.h:
            raise ValueError(f"d_k and d_v must be divisible by h={self.h}")
        if self.d_model % 2:
            raise ValueError("d_model must be even")
        return self


class ModelConfig(BaseModel):
    """Full parser shape: encoder plus span scorer."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    encoder: EncoderConfig = EncoderConfig()
    d_hidden: int = Field(DEFAULT_D_HIDDEN, gt=0)
    unary_sep: str = Field(UNARY_SEP, min_length=1)


class TrainConfig(BaseModel):
    """Margin training loop settings."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    max_epochs: int = Field(DEFAULT_MAX_EPOCHS, gt=0, description="epoch limit")
    batch_size: int = Field(
        DEFAULT_BATCH_SIZE, gt=0, description="sentences per optimizer step"
    )
    sub_batch_max_tokens: int = Field(
        DEFAULT_SUB_BATCH_TOKENS, gt=2, description="token budget of a sub-batch"
    )
    learning_rate: float = Field(DEFAULT_LEARNING_RATE, gt=0, description="step size")
    pos_loss_weight: float = Field(
        DEFAULT_POS_WEIGHT, ge=0, description="weight of the POS auxiliary loss"
    )
    seed: int = Field(DEFAULT_SEED, description="seed for init and shuffling")
    patience: int = Field(DEFAULT_PATIENCE, gt=0, description="early stopping epochs")
    beta1: float = Field(ADAM_BETAS[0], gt=0, lt=1, description="Adam beta1")
    beta2: float = Field(ADAM_BETAS[1], gt=0, lt=1, description="Adam beta2")
    adam_eps: float = Field(ADAM_EPS, gt=0, description="Adam epsilon")
    threads: int = Field(1, gt=0, description="parallel loss computations")
    checkpoint_path: Optional[Path] = Field(None, description="best model file")


class RunConfig(BaseModel):
    """Flat union of everything a command can be configured with.

    Read from `key = value` files with `read_config_file` and overridden by
    command line flags.
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    # encoder
    d_model: int = Field(DEFAULT_D_MODEL, description="encoder width")
    d_k: int = Field(DEFAULT_D_KV, description="query/key width over all heads")
    d_v: int = Field(DEFAULT_D_KV, description="value width over all heads")
    h: int = Field(DEFAULT_HEADS, description="attention heads")
    num_layers: int = Field(DEFAULT_LAYERS, description="encoder layers")
    d_ff: int = Field(DEFAULT_D_FF, description="feed-forward hidden width")
    max_len: int = Field(DEFAULT_MAX_LEN, description="longest sentence")
    d_ext: int = Field(0, description="external vector width (0 = none)")
    eps: float = Field(LAYER_NORM_EPS, description="layer norm epsilon")
    # scorer
    d_hidden: int = Field(DEFAULT_D_HIDDEN, description="span scorer hidden width")
    unary_sep: str = Field(UNARY_SEP, description="unary chain label separator")
    # training
    max_epochs: int = Field(DEFAULT_MAX_EPOCHS, description="epoch limit")
    batch_size: int = Field(DEFAULT_BATCH_SIZE, description="sentences per step")
    sub_batch_max_tokens: int = Field(
        DEFAULT_SUB_BATCH_TOKENS, description="token budget of a sub-batch"
    )
    learning_rate: float = Field(DEFAULT_LEARNING_RATE, description="step size")
    pos_loss_weight: float = Field(DEFAULT_POS_WEIGHT, description="POS loss weight")
    seed: int = Field(DEFAULT_SEED, description="seed for init and shuffling")
    patience: int = Field(DEFAULT_PATIENCE, description="early stopping epochs")
    beta1: float = Field(ADAM_BETAS[0], description="Adam beta1")
    beta2: float = Field(ADAM_BETAS[1], description="Adam beta2")
    adam_eps: float = Field(ADAM_EPS, description="Adam epsilon")
    # files and modes
    train: Optional[Path] = Field(None, description="training treebank")
    dev: Optional[Path] = Field(None, description="development treebank")
    vectors: Optional[Path] = Field(None, description="external vectors for train")
    dev_vectors: Optional[Path] = Field(None, description="external vectors for dev")
    out: Optional[Path] = Field(None, description="checkpoint to write")
    threads: int = Field(0, ge=0, description="parallelism, 0 = machine, 1 = exact")
    ignore_root: bool = Field(False, description="evaluation skips root spans")
    delete_punct: bool = Field(False, description="evaluation deletes punctuation")

    def thread_count(self) -> int:
        return self.threads or os.cpu_count() or 1

    def encoder_config(self) -> EncoderConfig:
        return _build(EncoderConfig, self)

    def parser_config(self) -> ModelConfig:
        return _build(
            ModelConfig,
            {
                "encoder": self.encoder_config(),
                "d_hidden": self.d_hidden,
                "unary_sep": self.unary_sep,
            },
        )

    def train_config(self) -> TrainConfig:
        values = {
            name: getattr(self, name)
            for name in TrainConfig.model_fields
            if name in RunConfig.model_fields
        }
        values["threads"] = self.thread_count()
        values["checkpoint_path"] = self.out
        return _build(TrainConfig, values)


def _build(model_class: type[BaseModel], source: Any) -> Any:
    if isinstance(source, BaseModel):
        source = {name: getattr(source, name) for name in model_class.model_fields}
    try:
        return model_class.model_validate(source)
    except ValidationError as exc:
        raise ConfigError(_describe(exc)) from exc


def _describe(exc: ValidationError) -> str:
    parts = []
    for error in exc.errors():
        key = ".".join(str(loc) for loc in error["loc"]) or "config"
        parts.append(f"{key}: {error['msg']}")
    return "; ".join(parts)


def read_config_file(path: os.PathLike | str) -> dict[str, str]:
    """Read `key = value` lines, `#` starts a comment.

    Raises:
        ConfigError: on a line without `=`, a key given twice, or a file that
            is not UTF-8.
    """
    values: dict[str, str] = {}
    with open(path, encoding="utf-8") as handle:
        try:
            lines = handle.read().split("\n")
        except UnicodeDecodeError as exc:
            raise ConfigError(f"{path}: not UTF-8 at byte {exc.start}") from exc
        for lineno, raw in enumerate(lines, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            key = key.strip()
            if not sep or not key:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            if key in values:
                raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
            values[key] = value.strip()
    return values


def load_run_config(
    path: os.PathLike | str | None = None, overrides: dict[str, Any] | None = None
) -> RunConfig:
    """Merge a config file with overrides (overrides win) into a RunConfig."""
    values: dict[str, Any] = {}
    if path is not None:
        values.update({k: v for k, v in read_config_file(path).items() if v != ""})
    if overrides:
        values.update({k: v for k, v in overrides.items() if v is not None})
    unknown = sorted(set(values) - set(RunConfig.model_fields))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    config = _build(RunConfig, values)
    # validate the derived sections early, so errors name the offending key
    config.parser_config()
    config.train_config()
    return config


def dump_defaults() -> str:
    """Render every RunConfig default as a config file."""
    lines = []
    for name, field in RunConfig.model_fields.items():
        default = field.default
        value = "" if default is None else str(default)
        lines.append(f"{name} = {value}  # {field.description}")
    return "\n".join(lines) + "\n"
