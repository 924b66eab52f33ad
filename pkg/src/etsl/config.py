"""Run configuration: a flat ``key = value`` file merged with CLI overrides."""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any, Mapping, get_type_hints

from .data import DEFAULT_MAX_SOURCE, FeatureConfig
from .errors import ConfigError
from .model import VARIANTS, ModelConfig
from .training import TrainConfig
from .vocab import Tokenizer


@dataclass
class RunConfig:
    variant: str = "p2t-t"
    # model
    d_model: int = 1024
    heads: int = 8
    encoder_layers: int = 6
    decoder_layers: int = 6
    ff_dim: int = 2048
    dropout: float = 0.1
    max_source_len: int | None = None  # None -> 1600 (p2t-t) / 540 (gnn-t)
    max_target_len: int = 256
    gnn_out_dim: int = 16
    include_self: bool = True
    # training
    learning_rate: float = 5e-5
    beta1: float = 0.9
    beta2: float = 0.98
    adam_eps: float = 1e-8
    plateau_factor: float = 0.7
    plateau_patience: int = 7
    min_learning_rate: float = 1e-6
    batch_size: int | None = None  # None -> 4 (p2t-t) / 16 (gnn-t)
    max_epochs: int = 1000
    seed: int = 0
    dev_metric: str = "bleu4"
    grad_clip: float = 0.0
    threads: int = 1
    # preprocessing
    coord_count: int = 3
    normalize_p2t: bool = True
    normalize_gnn: bool = True
    degenerate_policy: str = "strict"
    pool_window: int = 3
    # tokenizer
    lowercase: bool = True
    turkish_casing: bool = True
    strip_punct: bool = False

    def source_len(self) -> int:
        return self.max_source_len or DEFAULT_MAX_SOURCE[self.variant]

    def model_config(self, vocab_size: int) -> ModelConfig:
        return ModelConfig(
            vocab_size=vocab_size, d_model=self.d_model, heads=self.heads,
            encoder_layers=self.encoder_layers, decoder_layers=self.decoder_layers,
            ff_dim=self.ff_dim, dropout=self.dropout,
            max_source_len=self.source_len(), max_target_len=self.max_target_len,
        )

    def train_config(self) -> TrainConfig:
        names = {f.name for f in fields(TrainConfig)}
        return TrainConfig(**{k: v for k, v in dataclasses.asdict(self).items() if k in names})

    def feature_config(self) -> FeatureConfig:
        names = {f.name for f in fields(FeatureConfig)}
        return FeatureConfig(**{k: v for k, v in dataclasses.asdict(self).items() if k in names})

    def tokenizer(self) -> Tokenizer:
        return Tokenizer(self.lowercase, self.turkish_casing, self.strip_punct)

    def validate(self) -> None:
        if self.variant not in VARIANTS:
            raise ConfigError(f"variant must be one of {VARIANTS}")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        if self.gnn_out_dim < 1:
            raise ConfigError("gnn_out_dim must be >= 1")
        self.model_config(vocab_size=8).validate()
        self.train_config().validate()
        self.feature_config().validate()

    def resolved_text(self) -> str:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name == "max_source_len" and v is None:
                v = self.source_len()
            if f.name == "batch_size" and v is None:
                v = self.train_config().batch_for(self.variant)
            lines.append(f"{f.name} = {_render(v)}")
        return "\n".join(lines) + "\n"


def _render(v: Any) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    return "none" if v is None else str(v)


def _coerce(name: str, raw: str, typ: Any) -> Any:
    s = raw.strip()
    text = str(typ)
    if "None" in text and s.lower() in ("none", ""):
        return None
    try:
        if "bool" in text:
            if s.lower() in ("true", "yes", "1", "on"):
                return True
            if s.lower() in ("false", "no", "0", "off"):
                return False
            raise ValueError(s)
        if "int" in text:
            return int(s)
        if "float" in text:
            return float(s)
    except ValueError:
        raise ConfigError(f"{name}: cannot parse {raw!r} as {text}") from None
    return s


def parse_config_text(text: str) -> dict[str, str]:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {lineno}: expected 'key = value'")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def build_run_config(path: str | os.PathLike | None = None,
                     overrides: Mapping[str, Any] | None = None) -> RunConfig:
    """Load ``path`` (if given), apply ``overrides`` (None values skipped), validate."""
    hints = get_type_hints(RunConfig)
    values: dict[str, Any] = {}
    raw = parse_config_text(Path(path).read_text(encoding="utf-8")) if path else {}
    for key, val in raw.items():
        if key not in hints:
            raise ConfigError(f"unknown config key {key!r}")
        values[key] = _coerce(key, val, hints[key])
    for key, val in (overrides or {}).items():
        if val is None:
            continue
        if key not in hints:
            raise ConfigError(f"unknown config key {key!r}")
        values[key] = _coerce(key, val, hints[key]) if isinstance(val, str) else val
    cfg = RunConfig(**values)
    cfg.validate()
    return cfg
