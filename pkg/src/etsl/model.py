"""Transformer encoder-decoder and the two pose front ends (P2T-T, GNN-T).

The encoder output feeds the decoder's cross-attention directly; there is no
gloss layer. Layers are post-norm as in the original transformer.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Protocol

import torch
from torch import nn

from .errors import ConfigError, SourceTooLong, TargetTooLong
from .landmarks import NUM_POINTS
from .skeleton import GraphConv, SkeletonTopology, build_topology
from .vocab import BOS, EOS, PAD

VARIANTS = ("p2t-t", "gnn-t")


@dataclass
class ModelConfig:
    vocab_size: int
    d_model: int = 1024
    heads: int = 8
    encoder_layers: int = 6
    decoder_layers: int = 6
    ff_dim: int = 2048
    dropout: float = 0.1
    max_source_len: int = 1600
    max_target_len: int = 200

    def validate(self) -> None:
        for name in ("vocab_size", "d_model", "heads", "encoder_layers", "decoder_layers",
                     "ff_dim", "max_source_len", "max_target_len"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.d_model % self.heads:
            raise ConfigError(f"d_model {self.d_model} not divisible by heads {self.heads}")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"dropout {self.dropout} outside [0, 1)")

    def to_dict(self) -> dict:
        return asdict(self)


def init_linear(layer: nn.Linear) -> None:
    bound = 1.0 / math.sqrt(layer.in_features)
    nn.init.uniform_(layer.weight, -bound, bound)
    if layer.bias is not None:
        nn.init.uniform_(layer.bias, -bound, bound)


def sinusoidal_encoding(length: int, d_model: int) -> torch.Tensor:
    pos = torch.arange(length, dtype=torch.float64).unsqueeze(1)
    div = torch.exp(torch.arange(0, d_model, 2, dtype=torch.float64) * (-math.log(10000.0) / d_model))
    pe = torch.zeros(length, d_model, dtype=torch.float64)
    pe[:, 0::2] = torch.sin(pos * div)
    pe[:, 1::2] = torch.cos(pos * div)[:, : d_model // 2]
    return pe


def causal_mask(size: int, device=None) -> torch.Tensor:
    """(size, size) bool, True where query t may attend to key s (s <= t)."""
    return torch.ones(size, size, dtype=torch.bool, device=device).tril()


class MultiHeadAttention(nn.Module):
    def __init__(self, d_model: int, heads: int, dropout: float):
        super().__init__()
        self.heads = heads
        self.d_k = d_model // heads
        self.q = nn.Linear(d_model, d_model)
        self.k = nn.Linear(d_model, d_model)
        self.v = nn.Linear(d_model, d_model)
        self.out = nn.Linear(d_model, d_model)
        self.dropout = nn.Dropout(dropout)
        self.last_weights: torch.Tensor | None = None
        self.keep_weights = False

    def forward(self, query, key, value, mask: torch.Tensor | None = None):
        # mask broadcasts to (B, 1, Tq, Tk); True = attend
        b, tq, _ = query.shape
        tk = key.shape[1]
        q = self.q(query).view(b, tq, self.heads, self.d_k).transpose(1, 2)
        k = self.k(key).view(b, tk, self.heads, self.d_k).transpose(1, 2)
        v = self.v(value).view(b, tk, self.heads, self.d_k).transpose(1, 2)
        scores = q @ k.transpose(-2, -1) / math.sqrt(self.d_k)
        if mask is not None:
            scores = scores.masked_fill(~mask, float("-inf"))
        weights = torch.softmax(scores, dim=-1)
        if self.keep_weights:
            self.last_weights = weights.detach()
        ctx = self.dropout(weights) @ v
        return self.out(ctx.transpose(1, 2).reshape(b, tq, -1))


class FeedForward(nn.Module):
    def __init__(self, d_model: int, ff_dim: int, dropout: float):
        super().__init__()
        self.fc1 = nn.Linear(d_model, ff_dim)
        self.fc2 = nn.Linear(ff_dim, d_model)
        self.dropout = nn.Dropout(dropout)

    def forward(self, x):
        return self.fc2(self.dropout(torch.relu(self.fc1(x))))


class EncoderLayer(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.attn = MultiHeadAttention(cfg.d_model, cfg.heads, cfg.dropout)
        self.ff = FeedForward(cfg.d_model, cfg.ff_dim, cfg.dropout)
        self.norm1 = nn.LayerNorm(cfg.d_model)
        self.norm2 = nn.LayerNorm(cfg.d_model)
        self.drop = nn.Dropout(cfg.dropout)

    def forward(self, x, mask):
        x = self.norm1(x + self.drop(self.attn(x, x, x, mask)))
        return self.norm2(x + self.drop(self.ff(x)))


class DecoderLayer(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.self_attn = MultiHeadAttention(cfg.d_model, cfg.heads, cfg.dropout)
        self.cross_attn = MultiHeadAttention(cfg.d_model, cfg.heads, cfg.dropout)
        self.ff = FeedForward(cfg.d_model, cfg.ff_dim, cfg.dropout)
        self.norm1 = nn.LayerNorm(cfg.d_model)
        self.norm2 = nn.LayerNorm(cfg.d_model)
        self.norm3 = nn.LayerNorm(cfg.d_model)
        self.drop = nn.Dropout(cfg.dropout)

    def forward(self, y, memory, self_mask, cross_mask):
        y = self.norm1(y + self.drop(self.self_attn(y, y, y, self_mask)))
        y = self.norm2(y + self.drop(self.cross_attn(y, memory, memory, cross_mask)))
        return self.norm3(y + self.drop(self.ff(y)))


class Seq2SeqTransformer(nn.Module):
    """Encoder-decoder over pre-embedded source vectors and target token ids."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        cfg.validate()
        self.cfg = cfg
        self.encoder = nn.ModuleList(EncoderLayer(cfg) for _ in range(cfg.encoder_layers))
        self.decoder = nn.ModuleList(DecoderLayer(cfg) for _ in range(cfg.decoder_layers))
        self.embed = nn.Embedding(cfg.vocab_size, cfg.d_model, padding_idx=PAD)
        self.generator = nn.Linear(cfg.d_model, cfg.vocab_size)
        self.drop = nn.Dropout(cfg.dropout)
        self.register_buffer(
            "pe", sinusoidal_encoding(max(cfg.max_source_len, cfg.max_target_len), cfg.d_model).float(),
            persistent=False,
        )
        self.reset_parameters()

    def reset_parameters(self) -> None:
        for m in self.modules():
            if isinstance(m, nn.Linear):
                init_linear(m)
        bound = 1.0 / math.sqrt(self.cfg.d_model)
        with torch.no_grad():
            nn.init.uniform_(self.embed.weight, -bound, bound)
            self.embed.weight[PAD].zero_()

    def _pos(self, length: int, like: torch.Tensor) -> torch.Tensor:
        return self.pe[:length].to(like.dtype)

    def encode(self, source: torch.Tensor, source_mask: torch.Tensor | None = None) -> torch.Tensor:
        """(B, S, d_model) -> memory of the same shape. ``source_mask`` is (B, S), True = real."""
        if source.shape[1] > self.cfg.max_source_len:
            raise SourceTooLong(f"source length {source.shape[1]} > {self.cfg.max_source_len}")
        x = self.drop(source + self._pos(source.shape[1], source))
        mask = None if source_mask is None else source_mask[:, None, None, :]
        for layer in self.encoder:
            x = layer(x, mask)
        return x

    def decode(self, memory: torch.Tensor, source_mask: torch.Tensor | None,
               decoder_input: torch.Tensor) -> torch.Tensor:
        """Logits (B, T, vocab) for decoder input ids (B, T), position t seeing ids <= t."""
        t = decoder_input.shape[1]
        if t > self.cfg.max_target_len:
            raise TargetTooLong(f"target length {t} > {self.cfg.max_target_len}")
        y = self.embed(decoder_input) * math.sqrt(self.cfg.d_model)
        y = self.drop(y + self._pos(t, y))
        keep = (decoder_input != PAD)
        keep[:, 0] = True  # BOS slot is always attendable
        self_mask = causal_mask(t, decoder_input.device)[None, None] & keep[:, None, None, :]
        cross_mask = None if source_mask is None else source_mask[:, None, None, :]
        for layer in self.decoder:
            y = layer(y, memory, self_mask, cross_mask)
        return self.generator(y)


def shift_right(target: torch.Tensor) -> torch.Tensor:
    """Decoder input for teacher forcing: BOS followed by all but the last target id."""
    bos = torch.full_like(target[:, :1], BOS)
    return torch.cat([bos, target[:, :-1]], dim=1)


class P2TFrontend(nn.Module):
    """Flattened normalized landmarks (53 * C) -> d_model."""

    def __init__(self, coord_count: int, d_model: int):
        super().__init__()
        self.proj = nn.Linear(NUM_POINTS * coord_count, d_model)
        init_linear(self.proj)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.proj(x)


class GNNFrontend(nn.Module):
    """Pooled node features (B, T', 53, C) -> graph conv -> flatten -> d_model."""

    def __init__(self, coord_count: int, d_model: int, gnn_out_dim: int = 16,
                 topology: SkeletonTopology | None = None, include_self: bool = True):
        super().__init__()
        self.topology = topology or build_topology()
        self.conv = GraphConv(self.topology, coord_count, gnn_out_dim, include_self)
        self.proj = nn.Linear(NUM_POINTS * gnn_out_dim, d_model)
        init_linear(self.proj)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        h = self.conv(x)
        return self.proj(h.flatten(start_dim=-2))


class SignTranslator(nn.Module):
    """Pose front end + transformer backbone, one of the two variants."""

    def __init__(self, cfg: ModelConfig, variant: str = "p2t-t", coord_count: int = 3,
                 gnn_out_dim: int = 16, include_self: bool = True):
        super().__init__()
        if variant not in VARIANTS:
            raise ConfigError(f"unknown variant {variant!r}")
        self.variant = variant
        self.coord_count = coord_count
        if variant == "p2t-t":
            self.frontend: nn.Module = P2TFrontend(coord_count, cfg.d_model)
        else:
            self.frontend = GNNFrontend(coord_count, cfg.d_model, gnn_out_dim, include_self=include_self)
        self.transformer = Seq2SeqTransformer(cfg)

    @property
    def cfg(self) -> ModelConfig:
        return self.transformer.cfg

    def encode(self, features: torch.Tensor, source_mask: torch.Tensor | None = None) -> torch.Tensor:
        return self.transformer.encode(self.frontend(features), source_mask)

    def decode(self, memory, source_mask, decoder_input):
        return self.transformer.decode(memory, source_mask, decoder_input)

    def forward_teacher_forced(self, features: torch.Tensor, source_mask: torch.Tensor | None,
                               target: torch.Tensor) -> torch.Tensor:
        """Logits (B, T, vocab); row t scores ``target[:, t]`` given ``target[:, :t]``."""
        memory = self.encode(features, source_mask)
        return self.decode(memory, source_mask, shift_right(target))

    forward = forward_teacher_forced


class Decoder(Protocol):
    def encode(self, features: torch.Tensor, source_mask: torch.Tensor | None = None) -> torch.Tensor: ...
    def decode(self, memory, source_mask, decoder_input) -> torch.Tensor: ...


@torch.no_grad()
def greedy_decode(model: Decoder, features: torch.Tensor, max_target_len: int,
                  source_mask: torch.Tensor | None = None) -> list[list[int]]:
    """Argmax decoding from BOS until EOS or ``max_target_len`` tokens.

    ``features`` is batched (B, S, ...). Ties go to the lowest id. Returned
    sequences exclude BOS, EOS and PAD.
    """
    memory = model.encode(features, source_mask)
    b = features.shape[0]
    ids = torch.full((b, 1), BOS, dtype=torch.long, device=features.device)
    done = torch.zeros(b, dtype=torch.bool, device=features.device)
    out: list[list[int]] = [[] for _ in range(b)]
    for _ in range(max_target_len):
        logits = model.decode(memory, source_mask, ids)[:, -1]
        nxt = logits.argmax(dim=-1)  # first maximal index on ties
        for i in range(b):
            if done[i]:
                continue
            tok = int(nxt[i])
            if tok == EOS:
                done[i] = True
            elif tok not in (BOS, PAD):
                out[i].append(tok)
        if bool(done.all()):
            break
        nxt = torch.where(done, torch.full_like(nxt, PAD), nxt)
        ids = torch.cat([ids, nxt[:, None]], dim=1)
    return out
