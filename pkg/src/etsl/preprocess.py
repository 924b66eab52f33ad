"""Signer-centred, scale-free landmark normalization and P2T-T feature vectors.

Every frame is normalized on its own: the shoulder midpoint becomes the
origin and all coordinates (z included) are divided by the shoulder
distance. Orientation is left untouched.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DegenerateFrame, InvariantViolation, ShouldersNotVisible
from .landmarks import LEFT_SHOULDER, NUM_POINTS, RIGHT_SHOULDER, ClipSample, LandmarkFrame

SHOULDER_EPS = 1e-6
POLICIES = ("strict", "carry-forward")


@dataclass(eq=False)
class NormalizedFrame:
    points: np.ndarray  # (53, 3)
    mask: np.ndarray  # (53,) bool, True where the point was detected

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, NormalizedFrame):
            return NotImplemented
        return np.array_equal(self.points, other.points) and np.array_equal(self.mask, other.mask)


def _check_coord_count(coord_count: int) -> None:
    if coord_count not in (2, 3):
        raise ValueError(f"coord_count must be 2 or 3, got {coord_count}")


def shoulder_transform(
    frame: LandmarkFrame,
    left_shoulder_idx: int = LEFT_SHOULDER,
    right_shoulder_idx: int = RIGHT_SHOULDER,
    coord_count: int = 3,
) -> tuple[np.ndarray, float]:
    """Return ``(midpoint, scale)`` for a frame, or raise if unusable."""
    _check_coord_count(coord_count)
    if not (frame.visible[left_shoulder_idx] and frame.visible[right_shoulder_idx]):
        raise ShouldersNotVisible(f"frame {frame.frame_index}")
    ls = frame.coords[left_shoulder_idx]
    rs = frame.coords[right_shoulder_idx]
    mid = (ls + rs) / 2.0
    diff = (rs - ls)[:coord_count]
    scale = float(np.sqrt(np.dot(diff, diff)))
    if not scale > SHOULDER_EPS:
        raise DegenerateFrame(f"frame {frame.frame_index}: shoulder distance {scale:.3g}")
    return mid, scale


def apply_transform(frame: LandmarkFrame, mid: np.ndarray, scale: float) -> NormalizedFrame:
    return NormalizedFrame((frame.coords - mid) / scale, frame.visible.copy())


def normalize_frame(
    frame: LandmarkFrame,
    left_shoulder_idx: int = LEFT_SHOULDER,
    right_shoulder_idx: int = RIGHT_SHOULDER,
    coord_count: int = 3,
) -> NormalizedFrame:
    """Map every point p to ``(p - shoulder_midpoint) / shoulder_distance``.

    The shoulder distance is measured in the first ``coord_count`` axes
    (x-y only when ``coord_count=2``) but divides all three.
    """
    mid, scale = shoulder_transform(frame, left_shoulder_idx, right_shoulder_idx, coord_count)
    return apply_transform(frame, mid, scale)


def normalize_clip(
    clip: ClipSample,
    policy: str = "strict",
    left_shoulder_idx: int = LEFT_SHOULDER,
    right_shoulder_idx: int = RIGHT_SHOULDER,
    coord_count: int = 3,
) -> list[NormalizedFrame]:
    """Normalize each frame of ``clip``.

    With ``policy="carry-forward"`` a frame whose shoulders are missing or
    coincident reuses the previous frame's midpoint and scale; the first
    frame has no predecessor, so it still raises.
    """
    if policy not in POLICIES:
        raise ValueError(f"unknown degenerate-frame policy {policy!r}")
    out: list[NormalizedFrame] = []
    prev: tuple[np.ndarray, float] | None = None
    for fr in clip.frames:
        try:
            tf = shoulder_transform(fr, left_shoulder_idx, right_shoulder_idx, coord_count)
        except (DegenerateFrame, ShouldersNotVisible):
            if policy == "strict" or prev is None:
                raise
            tf = prev
        out.append(apply_transform(fr, *tf))
        prev = tf
    return out


def normalized_clip(clip: ClipSample, **kwargs) -> ClipSample:
    """Same clip with normalized coordinates, flagged for the ``NORM`` cache header."""
    if clip.normalized:
        return clip
    frames = normalize_clip(clip, **kwargs)
    return ClipSample(
        clip_id=clip.clip_id,
        signer_id=clip.signer_id,
        frames=[
            LandmarkFrame(src.frame_index, nf.points, nf.mask) for src, nf in zip(clip.frames, frames)
        ],
        transcript=clip.transcript,
        split=clip.split,
        fps=clip.fps,
        normalized=True,
    )


def frames_of(clip: ClipSample, normalize: bool = True, **kwargs) -> list[NormalizedFrame]:
    """Frames ready for feature extraction; already-normalized caches pass through."""
    if clip.normalized or not normalize:
        return [NormalizedFrame(f.coords.copy(), f.visible.copy()) for f in clip.frames]
    return normalize_clip(clip, **kwargs)


def node_features(frame: NormalizedFrame, coord_count: int = 3) -> np.ndarray:
    """(53, coord_count) per-node coordinates with undetected points zeroed."""
    _check_coord_count(coord_count)
    pts = frame.points[:, :coord_count].copy()
    pts[~frame.mask] = 0.0
    return pts


def flatten_features(frame: NormalizedFrame, coord_count: int = 3) -> np.ndarray:
    """Flat vector of length ``53 * coord_count`` in canonical point order."""
    return node_features(frame, coord_count).reshape(-1)


def clip_feature_matrix(frames: Sequence[NormalizedFrame], coord_count: int = 3) -> np.ndarray:
    """(T, 53 * coord_count) feature matrix for a whole clip."""
    if not frames:
        raise InvariantViolation("no frames")
    return np.stack([flatten_features(f, coord_count) for f in frames])


def clip_node_features(frames: Sequence[NormalizedFrame], coord_count: int = 3) -> np.ndarray:
    """(T, 53, coord_count) node features for a whole clip."""
    if not frames:
        raise InvariantViolation("no frames")
    out = np.stack([node_features(f, coord_count) for f in frames])
    assert out.shape[1] == NUM_POINTS
    return out
