"""Clip -> model input tensors for either variant, plus padding/batching."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np
import torch

from .errors import ConfigError
from .landmarks import ClipSample
from .preprocess import POLICIES, clip_feature_matrix, clip_node_features, frames_of
from .skeleton import temporal_pool
from .vocab import EOS, PAD, Vocabulary

log = logging.getLogger(__name__)

DEFAULT_MAX_SOURCE = {"p2t-t": 1600, "gnn-t": 540}


@dataclass
class FeatureConfig:
    coord_count: int = 3
    normalize_p2t: bool = True
    normalize_gnn: bool = True
    degenerate_policy: str = "strict"
    pool_window: int = 3

    def validate(self) -> None:
        if self.coord_count not in (2, 3):
            raise ConfigError(f"coord_count must be 2 or 3, got {self.coord_count}")
        if self.degenerate_policy not in POLICIES:
            raise ConfigError(f"degenerate_policy must be one of {POLICIES}")
        if self.pool_window < 1:
            raise ConfigError("pool_window must be >= 1")

    def to_dict(self) -> dict:
        return asdict(self)


def clip_features(clip: ClipSample, variant: str, fcfg: FeatureConfig,
                  max_source_len: int | None = None) -> np.ndarray:
    """P2T-T: (T, 53*C) flat vectors. GNN-T: (ceil(T/w), 53, C) pooled node features."""
    normalize = fcfg.normalize_p2t if variant == "p2t-t" else fcfg.normalize_gnn
    frames = frames_of(clip, normalize=normalize, policy=fcfg.degenerate_policy,
                       coord_count=fcfg.coord_count)
    if variant == "p2t-t":
        feats = clip_feature_matrix(frames, fcfg.coord_count)
    elif variant == "gnn-t":
        feats = temporal_pool(clip_node_features(frames, fcfg.coord_count), fcfg.pool_window)
    else:
        raise ConfigError(f"unknown variant {variant!r}")
    if max_source_len is not None and len(feats) > max_source_len:
        log.warning("clip %s: source length %d truncated to %d", clip.clip_id, len(feats), max_source_len)
        feats = feats[:max_source_len]
    return feats


@dataclass
class Example:
    clip_id: str
    features: torch.Tensor
    target: list[int]  # token ids followed by EOS
    reference: list[str]  # tokenized transcript, for scoring


def make_examples(clips: Sequence[ClipSample], vocab: Vocabulary, variant: str, fcfg: FeatureConfig,
                  max_source_len: int, max_target_len: int) -> list[Example]:
    out = []
    for clip in clips:
        feats = torch.as_tensor(clip_features(clip, variant, fcfg, max_source_len), dtype=torch.float32)
        ids = vocab.tokenize(clip.transcript)
        if len(ids) + 1 > max_target_len:
            log.warning("clip %s: target length %d truncated to %d", clip.clip_id, len(ids) + 1, max_target_len)
            ids = ids[: max_target_len - 1]
        out.append(Example(clip.clip_id, feats, ids + [EOS], vocab.tokenizer(clip.transcript)))
    return out


def collate(batch: Sequence[Example]) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    """Pad to (B, S_max, ...) features, (B, S_max) source mask, (B, T_max) targets."""
    s_max = max(len(e.features) for e in batch)
    t_max = max(len(e.target) for e in batch)
    first = batch[0].features
    feats = first.new_zeros((len(batch), s_max, *first.shape[1:]))
    mask = torch.zeros(len(batch), s_max, dtype=torch.bool)
    tgt = torch.full((len(batch), t_max), PAD, dtype=torch.long)
    for i, e in enumerate(batch):
        n = len(e.features)
        feats[i, :n] = e.features
        mask[i, :n] = True
        tgt[i, : len(e.target)] = torch.as_tensor(e.target)
    return feats, mask, tgt
