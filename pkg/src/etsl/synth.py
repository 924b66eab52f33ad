"""Deterministic synthetic clips whose hand poses spell out their transcripts.

Every vocabulary word gets its own static two-hand pose. A clip repeats each
of its words' poses for ``frames_per_token`` frames, with optional Gaussian
jitter, on top of a fixed upper body whose shoulders sit one unit apart.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, VocabTooLarge
from .landmarks import (
    NUM_POINTS,
    REGIONS,
    SPLITS,
    ClipSample,
    DatasetManifest,
    LandmarkFrame,
    ManifestEntry,
    save_clip,
    write_manifest,
)

WORDS = (
    "ali", "okula", "gitti", "geldi", "kitap", "okudu", "ders", "öğretmen",
    "soru", "cevap", "yazdı", "sınıf", "türkçe", "cümle", "kelime", "hikâye",
    "şiir", "anlam", "paragraf", "konu", "ödev", "defter", "kalem", "tahta",
    "öğrenci", "bugün", "yarın", "dün", "güzel", "büyük", "küçük", "yeni",
    "eski", "çok", "az", "iyi", "zaman", "yer", "ışık", "ağaç",
    "çiçek", "deniz", "dağ", "ev", "aile", "anne", "baba", "kardeş",
    "arkadaş", "oyun",
)
MAX_VOCAB = len(WORDS)

# base upper body: shoulders one unit apart, arms hanging down
_BODY = np.array([
    [-0.5, 0.0, 0.0],   # left shoulder
    [0.5, 0.0, 0.0],    # right shoulder
    [-0.6, -0.8, 0.0],  # left elbow
    [0.6, -0.8, 0.0],   # right elbow
    [-0.5, -1.5, 0.0],  # left wrist
    [0.5, -1.5, 0.0],   # right wrist
])
_FACE = np.array([
    [0.0, 0.9, 0.1],
    [0.0, 0.75, 0.1],
    [0.0, 0.65, 0.1],
    [-0.1, 0.7, 0.1],
    [0.1, 0.7, 0.1],
])
# shoulder midpoint position in raw coordinates
_ORIGIN = np.array([0.5, 0.4, 0.0])


@dataclass
class SynthConfig:
    seed: int = 1
    n_clips: int = 50
    vocab_size: int = 12
    min_tokens: int = 3
    max_tokens: int = 5
    frames_per_token: int = 6
    noise_std: float = 0.01
    signer_id: str = "synth"
    fps: float = 25.0

    def validate(self) -> None:
        if self.vocab_size > MAX_VOCAB:
            raise VocabTooLarge(f"vocab_size {self.vocab_size} > {MAX_VOCAB} available templates")
        if self.vocab_size < 1 or self.n_clips < 1 or self.frames_per_token < 1:
            raise ConfigError("vocab_size, n_clips and frames_per_token must be >= 1")
        if not 1 <= self.min_tokens <= self.max_tokens:
            raise ConfigError("need 1 <= min_tokens <= max_tokens")
        if self.noise_std < 0:
            raise ConfigError("noise_std must be >= 0")


def token_templates(cfg: SynthConfig) -> np.ndarray:
    """(vocab_size, 53, 3) static pose per word in body-centred units."""
    rng = np.random.default_rng([cfg.seed, 0])
    out = np.zeros((cfg.vocab_size, NUM_POINTS, 3))
    lh, rh = REGIONS["left_hand"], REGIONS["right_hand"]
    for v in range(cfg.vocab_size):
        pose = np.zeros((NUM_POINTS, 3))
        pose[REGIONS["face"].start:REGIONS["face"].stop] = _FACE
        pose[REGIONS["body"].start:REGIONS["body"].stop] = _BODY
        # wrists raised to a word-specific spot, fingers spread around them
        for hand, side in ((lh, -1.0), (rh, 1.0)):
            wrist = np.array([side * 0.4, -0.2, 0.0]) + rng.uniform(-0.35, 0.35, 3) * [1, 1, 0.3]
            pose[hand.start] = wrist
            pose[hand.start + 1:hand.stop] = wrist + rng.uniform(-0.25, 0.25, (20, 3))
        out[v] = pose
    return out


def split_assignment(n: int, seed: int) -> list[str]:
    """75/10/15 train/dev/test by seeded shuffle."""
    n_train = int(round(0.75 * n))
    n_dev = int(round(0.10 * n))
    tags = ["train"] * n_train + ["dev"] * n_dev + ["test"] * (n - n_train - n_dev)
    order = np.random.default_rng([seed, 2]).permutation(n)
    out = [""] * n
    for tag, i in zip(tags, order):
        out[i] = tag
    return out


def generate_clips(cfg: SynthConfig) -> list[ClipSample]:
    cfg.validate()
    templates = token_templates(cfg)
    words = WORDS[: cfg.vocab_size]
    splits = split_assignment(cfg.n_clips, cfg.seed)
    text_rng = np.random.default_rng([cfg.seed, 1])
    clips = []
    for c in range(cfg.n_clips):
        length = int(text_rng.integers(cfg.min_tokens, cfg.max_tokens + 1))
        tokens = text_rng.integers(0, cfg.vocab_size, size=length)
        noise_rng = np.random.default_rng([cfg.seed, 3, c])
        frames = []
        fi = 0
        for t in tokens:
            for _ in range(cfg.frames_per_token):
                pose = templates[t]
                if cfg.noise_std > 0:
                    pose = pose + noise_rng.normal(0.0, cfg.noise_std, pose.shape)
                coords = _ORIGIN + pose
                # same 9-significant-digit grid the file format stores
                coords = np.array([float(f"{v:.9g}") for v in coords.ravel()]).reshape(coords.shape)
                frames.append(LandmarkFrame(fi, coords, np.ones(NUM_POINTS, dtype=bool)))
                fi += 1
        clips.append(ClipSample(
            clip_id=f"synth_{c:04d}",
            signer_id=cfg.signer_id,
            frames=frames,
            transcript=" ".join(words[t] for t in tokens),
            split=splits[c],
            fps=cfg.fps,
        ))
    return clips


def generate(cfg: SynthConfig, out_dir: str | os.PathLike) -> DatasetManifest:
    """Write ``clips/<clip_id>.lmk`` and ``manifest.tsv`` under ``out_dir``."""
    out = Path(out_dir)
    (out / "clips").mkdir(parents=True, exist_ok=True)
    entries = []
    for clip in generate_clips(cfg):
        path = out / "clips" / f"{clip.clip_id}.lmk"
        save_clip(clip, path)
        entries.append(ManifestEntry(clip.clip_id, path, clip.split, clip.transcript))
    write_manifest(entries, out / "manifest.tsv")
    assert all(e.split in SPLITS for e in entries)
    return DatasetManifest(entries)
