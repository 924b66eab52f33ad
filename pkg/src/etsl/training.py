"""Teacher-forced training with Adam and a dev-score plateau schedule.

Recipe defaults: Adam(lr=5e-5, betas=(0.9, 0.98)), dropout 0.1, lr x0.7 after
7 epochs without dev improvement, stop once the next decay would go below
1e-6. Batch size 4 for P2T-T and 16 for GNN-T.
"""

from __future__ import annotations

import copy
import io
import logging
import math
import os
import random
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import torch
import torch.nn.functional as F

from .data import Example, FeatureConfig, collate
from .errors import AllPositionsPadded, ConfigError, EmptySplit, NonFiniteLoss
from .metrics import corpus_bleu
from .model import ModelConfig, SignTranslator, greedy_decode
from .vocab import PAD, Vocabulary

log = logging.getLogger(__name__)

DEFAULT_BATCH = {"p2t-t": 4, "gnn-t": 16}
DEV_METRICS = ("bleu4", "dev_loss")
CHECKPOINT_FORMAT = "etsl-checkpoint"


@dataclass
class TrainConfig:
    learning_rate: float = 5e-5
    beta1: float = 0.9
    beta2: float = 0.98
    adam_eps: float = 1e-8
    plateau_factor: float = 0.7
    plateau_patience: int = 7
    min_learning_rate: float = 1e-6
    batch_size: int | None = None  # None -> per-variant default
    max_epochs: int = 1000
    seed: int = 0
    dev_metric: str = "bleu4"
    grad_clip: float = 0.0  # 0 disables clipping
    decode_max_len: int | None = None

    def validate(self) -> None:
        if not 0.0 < self.plateau_factor < 1.0:
            raise ConfigError("plateau_factor must be in (0, 1)")
        if not 0.0 < self.min_learning_rate < self.learning_rate:
            raise ConfigError("need 0 < min_learning_rate < learning_rate")
        if self.batch_size is not None and self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.plateau_patience < 1 or self.max_epochs < 1:
            raise ConfigError("plateau_patience and max_epochs must be >= 1")
        if self.dev_metric not in DEV_METRICS:
            raise ConfigError(f"dev_metric must be one of {DEV_METRICS}")
        if self.grad_clip < 0:
            raise ConfigError("grad_clip must be >= 0")

    def batch_for(self, variant: str) -> int:
        return self.batch_size or DEFAULT_BATCH[variant]


def make_optimizer(params, cfg: TrainConfig) -> torch.optim.Optimizer:
    return torch.optim.Adam(params, lr=cfg.learning_rate, betas=(cfg.beta1, cfg.beta2),
                            eps=cfg.adam_eps, weight_decay=0.0)


@dataclass
class SchedulerState:
    current_lr: float
    best_dev_score: float | None = None
    epochs_since_improvement: int = 0
    stopped: bool = False
    improved: bool = False  # whether the last step was an improvement


def initial_state(cfg: TrainConfig) -> SchedulerState:
    return SchedulerState(current_lr=cfg.learning_rate)


def plateau_step(state: SchedulerState, dev_score: float, cfg: TrainConfig) -> SchedulerState:
    """Advance the schedule by one epoch's dev score.

    Improvement is strict (higher for bleu4, lower for dev_loss). After
    ``plateau_patience`` epochs without one the lr is multiplied by
    ``plateau_factor``; if that product would fall below
    ``min_learning_rate`` the lr is kept and the state is marked stopped.
    """
    if not math.isfinite(dev_score):
        raise ValueError(f"non-finite dev score {dev_score}")
    if state.stopped:
        return replace(state, improved=False)
    best = state.best_dev_score
    if best is None:
        improved = True
    elif cfg.dev_metric == "dev_loss":
        improved = dev_score < best
    else:
        improved = dev_score > best
    if improved:
        return SchedulerState(state.current_lr, dev_score, 0, False, True)
    waited = state.epochs_since_improvement + 1
    lr, stopped = state.current_lr, False
    if waited >= cfg.plateau_patience:
        waited = 0
        new_lr = lr * cfg.plateau_factor
        if new_lr < cfg.min_learning_rate:
            stopped = True
        else:
            lr = new_lr
    return SchedulerState(lr, best, waited, stopped, False)


def cross_entropy_loss(logits: torch.Tensor, target: torch.Tensor,
                       pad_mask: torch.Tensor | None = None) -> torch.Tensor:
    """Mean negative log-likelihood over non-PAD positions.

    ``logits`` (..., V), ``target`` (...). ``pad_mask`` is True where a
    position is padding; by default positions holding PAD are ignored.
    """
    if pad_mask is None:
        pad_mask = target == PAD
    keep = ~pad_mask
    n = int(keep.sum())
    if n == 0:
        raise AllPositionsPadded("every target position is padding")
    logp = F.log_softmax(logits, dim=-1)
    nll = -logp.gather(-1, target.unsqueeze(-1)).squeeze(-1)
    return (nll * keep).sum() / n


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    dev_score: float
    lr: float

    def line(self) -> str:
        return f"{self.epoch}\t{self.train_loss!r}\t{self.dev_score!r}\t{self.lr!r}"


HISTORY_HEADER = "epoch\ttrain_loss\tdev_score\tlr"


def format_history(history: Sequence[EpochRecord]) -> str:
    return "\n".join([HISTORY_HEADER] + [r.line() for r in history]) + "\n"


def parse_history(text: str) -> list[EpochRecord]:
    rows = []
    for line in text.splitlines()[1:]:
        if line.strip():
            e, tl, ds, lr = line.split("\t")
            rows.append(EpochRecord(int(e), float(tl), float(ds), float(lr)))
    return rows


def _to_model(model: SignTranslator, feats, mask, tgt):
    p = next(model.parameters())
    return feats.to(p.device, p.dtype), mask.to(p.device), tgt.to(p.device)


def batches(examples: Sequence[Example], batch_size: int, rng: random.Random | None = None):
    order = list(range(len(examples)))
    if rng is not None:
        rng.shuffle(order)
    for i in range(0, len(order), batch_size):
        yield [examples[j] for j in order[i:i + batch_size]]


@torch.no_grad()
def translate_examples(model: SignTranslator, examples: Sequence[Example], max_len: int,
                       batch_size: int = 16) -> list[list[int]]:
    was_training = model.training
    model.eval()
    out: list[list[int]] = []
    for batch in batches(examples, batch_size):
        feats, mask, _ = _to_model(model, *collate(batch))
        out.extend(greedy_decode(model, feats, max_len, mask))
    model.train(was_training)
    return out


@torch.no_grad()
def dev_loss(model: SignTranslator, examples: Sequence[Example], batch_size: int = 16) -> float:
    was_training = model.training
    model.eval()
    total, count = 0.0, 0
    for batch in batches(examples, batch_size):
        feats, mask, tgt = _to_model(model, *collate(batch))
        logits = model.forward_teacher_forced(feats, mask, tgt)
        n = int((tgt != PAD).sum())
        total += float(cross_entropy_loss(logits, tgt)) * n
        count += n
    model.train(was_training)
    return total / count


def dev_score(model: SignTranslator, vocab: Vocabulary, examples: Sequence[Example],
              cfg: TrainConfig) -> float:
    if cfg.dev_metric == "dev_loss":
        return dev_loss(model, examples)
    max_len = cfg.decode_max_len or model.cfg.max_target_len
    hyps = translate_examples(model, examples, max_len)
    return corpus_bleu([vocab.words(h) for h in hyps], [e.reference for e in examples])[4]


@dataclass
class Checkpoint:
    model_config: ModelConfig
    variant: str
    feature_config: FeatureConfig
    vocab: Vocabulary
    state_dict: dict
    train_state: dict = field(default_factory=dict)
    gnn_out_dim: int = 16
    include_self: bool = True

    def build_model(self) -> SignTranslator:
        model = SignTranslator(self.model_config, self.variant, self.feature_config.coord_count,
                               self.gnn_out_dim, self.include_self)
        model.load_state_dict(self.state_dict)
        model.eval()
        return model

    def to_payload(self) -> dict:
        return {
            "format": CHECKPOINT_FORMAT,
            "version": 1,
            "model_config": self.model_config.to_dict(),
            "variant": self.variant,
            "feature_config": self.feature_config.to_dict(),
            "gnn_out_dim": self.gnn_out_dim,
            "include_self": self.include_self,
            "vocab": self.vocab.to_dict(),
            "state_dict": self.state_dict,
            "train_state": self.train_state,
        }


def make_checkpoint(model: SignTranslator, vocab: Vocabulary, fcfg: FeatureConfig,
                    train_state: dict | None = None) -> Checkpoint:
    gnn_out = model.frontend.conv.weight.shape[1] if model.variant == "gnn-t" else 16
    include_self = model.frontend.conv.include_self if model.variant == "gnn-t" else True
    return Checkpoint(
        model_config=copy.deepcopy(model.cfg),
        variant=model.variant,
        feature_config=copy.deepcopy(fcfg),
        vocab=vocab,
        state_dict={k: v.detach().clone() for k, v in model.state_dict().items()},
        train_state=dict(train_state or {}),
        gnn_out_dim=gnn_out,
        include_self=include_self,
    )


def save_checkpoint(ckpt: Checkpoint, path: str | os.PathLike) -> None:
    # serialize to memory first so a crash never leaves a half-written file
    buf = io.BytesIO()
    torch.save(ckpt.to_payload(), buf)
    tmp = Path(str(path) + ".tmp")
    tmp.write_bytes(buf.getvalue())
    os.replace(tmp, path)


def load_checkpoint(path: str | os.PathLike) -> Checkpoint:
    payload = torch.load(path, map_location="cpu", weights_only=True)
    if payload.get("format") != CHECKPOINT_FORMAT:
        raise ConfigError(f"{path} is not an {CHECKPOINT_FORMAT} file")
    return Checkpoint(
        model_config=ModelConfig(**payload["model_config"]),
        variant=payload["variant"],
        feature_config=FeatureConfig(**payload["feature_config"]),
        vocab=Vocabulary.from_dict(payload["vocab"]),
        state_dict=payload["state_dict"],
        train_state=payload["train_state"],
        gnn_out_dim=payload["gnn_out_dim"],
        include_self=payload["include_self"],
    )


@dataclass
class TrainResult:
    best: Checkpoint
    history: list[EpochRecord]
    state: SchedulerState


def train(model: SignTranslator, vocab: Vocabulary, train_set: Sequence[Example],
          dev_set: Sequence[Example], cfg: TrainConfig, fcfg: FeatureConfig | None = None,
          out_dir: str | os.PathLike | None = None) -> TrainResult:
    """Run epochs until the schedule stops or ``max_epochs`` is reached.

    The best checkpoint (by dev score) is kept in memory and, with
    ``out_dir``, written to ``best.ckpt`` alongside ``history.tsv``.
    """
    cfg.validate()
    if not train_set:
        raise EmptySplit("train split is empty")
    if not dev_set:
        raise EmptySplit("dev split is empty")
    fcfg = fcfg or FeatureConfig()
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)

    torch.manual_seed(cfg.seed)
    rng = random.Random(cfg.seed)
    opt = make_optimizer(model.parameters(), cfg)
    state = initial_state(cfg)
    history: list[EpochRecord] = []
    best: Checkpoint | None = None
    bs = cfg.batch_for(model.variant)

    for epoch in range(1, cfg.max_epochs + 1):
        for group in opt.param_groups:
            group["lr"] = state.current_lr
        model.train()
        total, count = 0.0, 0
        for bi, batch in enumerate(batches(train_set, bs, rng)):
            feats, mask, tgt = _to_model(model, *collate(batch))
            logits = model.forward_teacher_forced(feats, mask, tgt)
            loss = cross_entropy_loss(logits, tgt)
            if not torch.isfinite(loss):
                ids = ", ".join(e.clip_id for e in batch)
                raise NonFiniteLoss(f"epoch {epoch} batch {bi}: loss={float(loss)} lr={state.current_lr} clips=[{ids}]")
            opt.zero_grad()
            loss.backward()
            if cfg.grad_clip > 0:
                torch.nn.utils.clip_grad_norm_(model.parameters(), cfg.grad_clip)
            opt.step()
            n = int((tgt != PAD).sum())
            total += float(loss.detach()) * n
            count += n

        score = dev_score(model, vocab, dev_set, cfg)
        rec = EpochRecord(epoch, total / count, score, state.current_lr)
        history.append(rec)
        state = plateau_step(state, score, cfg)
        log.info("epoch %d loss %.4f dev %s %.4f lr %.3g", epoch, rec.train_loss, cfg.dev_metric, score, rec.lr)

        if state.improved:
            best = make_checkpoint(model, vocab, fcfg, {
                "epoch": epoch,
                "learning_rate": rec.lr,
                "best_dev_score": score,
                "dev_metric": cfg.dev_metric,
            })
            if out is not None:
                save_checkpoint(best, out / "best.ckpt")
        if out is not None:
            (out / "history.tsv").write_text(format_history(history))
        if state.stopped:
            log.info("learning rate floor reached after epoch %d", epoch)
            break

    assert best is not None
    return TrainResult(best, history, state)
