"""Landmark file format (ETSL-LMK v1), clip data model and dataset manifests.

A frame holds 53 pose points in a fixed order::

    0..4    face / lips   (5)
    5..10   body          (6: shoulders, elbows, wrists)
    11..31  left hand     (21, MediaPipe hand order)
    32..52  right hand    (21, MediaPipe hand order)

Only the slot positions are contractual. ``POINT_NAMES`` documents which
anatomical landmark each slot is expected to hold; producers that pick a
different face/body subset should keep the counts and update the names.
"""

from __future__ import annotations

import io
import logging
import math
import os
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import (
    BadPointCount,
    DuplicateClipId,
    InvariantViolation,
    MalformedHeader,
    MissingLandmarkFile,
    NonFiniteCoordinate,
    NonMonotonicFrameIndex,
    UnknownSplitTag,
)

log = logging.getLogger(__name__)

NUM_POINTS = 53
FORMAT_MAGIC = "ETSL-LMK"
FORMAT_VERSION = "1"
NORM_MARKER = "NORM"
SPLITS = ("train", "dev", "test")

REGIONS: dict[str, range] = {
    "face": range(0, 5),
    "body": range(5, 11),
    "left_hand": range(11, 32),
    "right_hand": range(32, 53),
}

LEFT_SHOULDER = 5
RIGHT_SHOULDER = 6

_HAND_NAMES = [
    "wrist",
    "thumb_cmc", "thumb_mcp", "thumb_ip", "thumb_tip",
    "index_mcp", "index_pip", "index_dip", "index_tip",
    "middle_mcp", "middle_pip", "middle_dip", "middle_tip",
    "ring_mcp", "ring_pip", "ring_dip", "ring_tip",
    "pinky_mcp", "pinky_pip", "pinky_dip", "pinky_tip",
]

POINT_NAMES: tuple[str, ...] = (
    "nose", "upper_lip", "lower_lip", "mouth_left", "mouth_right",
    "left_shoulder", "right_shoulder", "left_elbow", "right_elbow",
    "left_wrist", "right_wrist",
    *(f"left_{n}" for n in _HAND_NAMES),
    *(f"right_{n}" for n in _HAND_NAMES),
)
assert len(POINT_NAMES) == NUM_POINTS


def region_of(point_index: int) -> str:
    for name, idx in REGIONS.items():
        if point_index in idx:
            return name
    raise IndexError(point_index)


@dataclass(eq=False)
class LandmarkFrame:
    """One frame: ``coords`` is (53, 3) float64, ``visible`` is (53,) bool."""

    frame_index: int
    coords: np.ndarray
    visible: np.ndarray

    def __post_init__(self) -> None:
        self.coords = np.asarray(self.coords, dtype=np.float64)
        self.visible = np.asarray(self.visible, dtype=bool)

    def validate(self) -> None:
        if self.frame_index < 0:
            raise InvariantViolation(f"negative frame_index {self.frame_index}")
        if self.coords.shape != (NUM_POINTS, 3) or self.visible.shape != (NUM_POINTS,):
            raise BadPointCount(self.frame_index, len(self.coords))
        if not np.all(np.isfinite(self.coords)):
            raise NonFiniteCoordinate(f"frame {self.frame_index} has a non-finite coordinate")

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, LandmarkFrame):
            return NotImplemented
        return (
            self.frame_index == other.frame_index
            and np.array_equal(self.coords, other.coords)
            and np.array_equal(self.visible, other.visible)
        )


@dataclass(eq=False)
class ClipSample:
    clip_id: str
    signer_id: str
    frames: list[LandmarkFrame]
    transcript: str = ""
    split: str | None = None
    fps: float = 25.0
    normalized: bool = False

    def validate(self) -> None:
        if not self.clip_id or any(c.isspace() for c in self.clip_id):
            raise InvariantViolation(f"bad clip_id {self.clip_id!r}")
        if not self.signer_id or any(c.isspace() for c in self.signer_id):
            raise InvariantViolation(f"bad signer_id {self.signer_id!r}")
        if not (self.fps > 0 and math.isfinite(self.fps)):
            raise InvariantViolation(f"fps must be positive, got {self.fps}")
        if not self.frames:
            raise InvariantViolation(f"clip {self.clip_id} has no frames")
        prev = -1
        for fr in self.frames:
            fr.validate()
            if fr.frame_index <= prev:
                raise NonMonotonicFrameIndex(
                    f"frame_index {fr.frame_index} follows {prev} in clip {self.clip_id}"
                )
            prev = fr.frame_index
        if self.split is not None:
            if self.split not in SPLITS:
                raise UnknownSplitTag(self.split)
            if not self.transcript.strip():
                raise InvariantViolation(f"clip {self.clip_id} has an empty transcript")

    @property
    def num_frames(self) -> int:
        return len(self.frames)

    def coords_array(self) -> np.ndarray:
        """All coordinates stacked as (T, 53, 3)."""
        return np.stack([f.coords for f in self.frames])

    def visible_array(self) -> np.ndarray:
        return np.stack([f.visible for f in self.frames])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ClipSample):
            return NotImplemented
        return (
            self.clip_id == other.clip_id
            and self.signer_id == other.signer_id
            and self.fps == other.fps
            and self.transcript == other.transcript
            and self.split == other.split
            and self.normalized == other.normalized
            and self.frames == other.frames
        )


def _fmt(x: float) -> str:
    return f"{x:.9g}"


def write_clip(clip: ClipSample) -> bytes:
    """Serialize a clip to ETSL-LMK v1 bytes.

    Coordinates are written with 9 significant digits, so values that already
    carry at most 9 significant digits (e.g. anything read back from a file)
    round-trip bit-exactly.
    """
    clip.validate()
    buf = io.StringIO()
    header = [FORMAT_MAGIC, FORMAT_VERSION, clip.clip_id, clip.signer_id, repr(float(clip.fps))]
    if clip.normalized:
        header.append(NORM_MARKER)
    buf.write(" ".join(header) + "\n")
    for fr in clip.frames:
        fi = fr.frame_index
        for p in range(NUM_POINTS):
            x, y, z = fr.coords[p]
            buf.write(f"{fi} {p} {_fmt(x)} {_fmt(y)} {_fmt(z)} {int(fr.visible[p])}\n")
    return buf.getvalue().encode("utf-8")


def _parse_header(line: str, clip_id: str | None) -> tuple[str, str, float, bool]:
    parts = line.split()
    if len(parts) not in (5, 6) or parts[0] != FORMAT_MAGIC:
        raise MalformedHeader(f"expected '{FORMAT_MAGIC} {FORMAT_VERSION} <clip_id> <signer_id> <fps>'")
    if parts[1] != FORMAT_VERSION:
        raise MalformedHeader(f"unsupported version {parts[1]!r}")
    normalized = False
    if len(parts) == 6:
        if parts[5] != NORM_MARKER:
            raise MalformedHeader(f"unexpected header field {parts[5]!r}")
        normalized = True
    if clip_id is not None and parts[2] != clip_id:
        raise MalformedHeader(f"header clip_id {parts[2]!r} does not match {clip_id!r}")
    try:
        fps = float(parts[4])
    except ValueError:
        raise MalformedHeader(f"bad fps {parts[4]!r}") from None
    return parts[2], parts[3], fps, normalized


def parse_clip(
    content: bytes | str,
    clip_id: str | None = None,
    *,
    transcript: str = "",
    split: str | None = None,
) -> ClipSample:
    """Parse ETSL-LMK v1 content.

    The landmark file carries no transcript or split; pass them in (usually
    from the manifest) to get a fully populated sample.
    """
    text = content.decode("utf-8") if isinstance(content, (bytes, bytearray)) else content
    lines = text.splitlines()
    if not lines:
        raise MalformedHeader("empty file")
    cid, signer, fps, normalized = _parse_header(lines[0], clip_id)

    frames: list[LandmarkFrame] = []
    cur_index: int | None = None
    cur_rows: list[tuple[float, float, float]] = []
    cur_vis: list[bool] = []

    def flush() -> None:
        if cur_index is None:
            return
        if len(cur_rows) != NUM_POINTS:
            raise BadPointCount(cur_index, len(cur_rows))
        frames.append(LandmarkFrame(cur_index, np.array(cur_rows), np.array(cur_vis)))

    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        fields = line.split()
        if len(fields) != 6:
            raise InvariantViolation(f"line {lineno}: expected 6 fields, got {len(fields)}")
        try:
            fi, pi = int(fields[0]), int(fields[1])
            x, y, z = float(fields[2]), float(fields[3]), float(fields[4])
        except ValueError:
            raise InvariantViolation(f"line {lineno}: unparsable field") from None
        if fields[5] not in ("0", "1"):
            raise InvariantViolation(f"line {lineno}: visibility must be 0 or 1")
        if fi != cur_index:
            flush()
            if cur_index is not None and fi <= cur_index:
                raise NonMonotonicFrameIndex(f"line {lineno}: frame_index {fi} follows {cur_index}")
            cur_index, cur_rows, cur_vis = fi, [], []
        if pi != len(cur_rows):
            # a skipped or repeated point index means this frame cannot hold 53 ordered points
            if not 0 <= pi < NUM_POINTS:
                raise BadPointCount(fi, pi + 1)
            raise BadPointCount(fi, len(cur_rows))
        if not (math.isfinite(x) and math.isfinite(y) and math.isfinite(z)):
            raise NonFiniteCoordinate(f"line {lineno}: frame {fi} point {pi}")
        cur_rows.append((x, y, z))
        cur_vis.append(fields[5] == "1")
    flush()

    clip = ClipSample(
        clip_id=cid,
        signer_id=signer,
        frames=frames,
        transcript=transcript,
        split=split,
        fps=fps,
        normalized=normalized,
    )
    clip.validate()
    return clip


def read_clip(path: str | os.PathLike, **kwargs) -> ClipSample:
    return parse_clip(Path(path).read_bytes(), **kwargs)


def save_clip(clip: ClipSample, path: str | os.PathLike) -> None:
    Path(path).write_bytes(write_clip(clip))


@dataclass(frozen=True)
class ManifestEntry:
    clip_id: str
    landmark_path: Path
    split: str
    transcript: str


@dataclass
class DatasetManifest:
    entries: list[ManifestEntry] = field(default_factory=list)

    def __post_init__(self) -> None:
        seen: set[str] = set()
        for e in self.entries:
            if e.split not in SPLITS:
                raise UnknownSplitTag(f"clip {e.clip_id}: split {e.split!r}")
            if e.clip_id in seen:
                raise DuplicateClipId(e.clip_id)
            seen.add(e.clip_id)

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[ManifestEntry]:
        return iter(self.entries)

    def split(self, name: str) -> list[ManifestEntry]:
        if name not in SPLITS:
            raise UnknownSplitTag(name)
        return [e for e in self.entries if e.split == name]

    def counts(self) -> dict[str, int]:
        c = Counter(e.split for e in self.entries)
        return {s: c.get(s, 0) for s in SPLITS}

    def get(self, clip_id: str) -> ManifestEntry:
        for e in self.entries:
            if e.clip_id == clip_id:
                return e
        raise KeyError(clip_id)

    def validate_files(self) -> None:
        for e in self.entries:
            if not e.landmark_path.is_file():
                raise MissingLandmarkFile(f"{e.clip_id}: {e.landmark_path}")

    def load_clip(self, entry: ManifestEntry) -> ClipSample:
        if not entry.landmark_path.is_file():
            raise MissingLandmarkFile(f"{entry.clip_id}: {entry.landmark_path}")
        return read_clip(
            entry.landmark_path, clip_id=entry.clip_id, transcript=entry.transcript, split=entry.split
        )

    def load_split(self, name: str) -> list[ClipSample]:
        return [self.load_clip(e) for e in self.split(name)]


def parse_manifest(text: str, base_dir: str | os.PathLike = ".") -> DatasetManifest:
    base = Path(base_dir)
    entries = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.rstrip("\r\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        cols = line.split("\t")
        if len(cols) != 4:
            raise InvariantViolation(f"manifest line {lineno}: expected 4 tab-separated columns")
        clip_id, lmk, split, transcript = cols
        p = Path(lmk)
        entries.append(ManifestEntry(clip_id, p if p.is_absolute() else base / p, split, transcript))
    return DatasetManifest(entries)


def load_manifest(path: str | os.PathLike, validate: bool = False) -> DatasetManifest:
    """Read a TSV manifest. Relative landmark paths resolve against the manifest's directory."""
    path = Path(path)
    manifest = parse_manifest(path.read_text(encoding="utf-8"), base_dir=path.parent)
    if validate:
        manifest.validate_files()
    log.debug("manifest %s: %s", path, manifest.counts())
    return manifest


def format_manifest(entries: Iterable[ManifestEntry], base_dir: str | os.PathLike | None = None) -> str:
    lines = ["# clip_id\tlandmark_path\tsplit\ttranscript"]
    for e in entries:
        p = e.landmark_path
        if base_dir is not None and p.is_absolute():
            try:
                p = p.relative_to(base_dir)
            except ValueError:
                pass
        if "\t" in e.transcript or "\n" in e.transcript:
            raise InvariantViolation(f"transcript of {e.clip_id} contains a tab or newline")
        lines.append(f"{e.clip_id}\t{p.as_posix()}\t{e.split}\t{e.transcript}")
    return "\n".join(lines) + "\n"


def write_manifest(entries: Sequence[ManifestEntry], path: str | os.PathLike) -> None:
    path = Path(path)
    path.write_text(format_manifest(entries, base_dir=path.parent.resolve()), encoding="utf-8")
