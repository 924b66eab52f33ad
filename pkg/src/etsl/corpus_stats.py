"""Dataset vocabulary statistics: totals, singletons, rare words, word-count histogram."""

from __future__ import annotations

import itertools
import math
from collections import Counter
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

from .errors import EmptyCorpus
from .vocab import Tokenizer

RARE_THRESHOLD = 5


@dataclass
class CorpusStats:
    total_words: int
    vocabulary_size: int
    singleton_count: int
    rare_count: int
    per_clip_word_counts: list[int]

    @property
    def singleton_pct(self) -> float:
        return self.singleton_count / self.vocabulary_size if self.vocabulary_size else 0.0

    @property
    def rare_pct(self) -> float:
        return self.rare_count / self.vocabulary_size if self.vocabulary_size else 0.0

    def format(self) -> str:
        rows = [
            ("Total Words", f"{self.total_words}"),
            ("Vocabulary Size", f"{self.vocabulary_size}"),
            ("Singletons", f"{self.singleton_count} ({100 * self.singleton_pct:.0f}%)"),
            (f"Rare Words < {RARE_THRESHOLD}", f"{self.rare_count} ({100 * self.rare_pct:.0f}%)"),
            ("Clips", f"{len(self.per_clip_word_counts)}"),
        ]
        width = max(len(name) for name, _ in rows)
        return "".join(f"{name:<{width}}  {value}\n" for name, value in rows)


def compute_stats(transcripts: Sequence[str], tokenizer: Callable[[str], list[str]] | None = None) -> CorpusStats:
    if not transcripts:
        raise EmptyCorpus("no transcripts")
    tokenizer = tokenizer or Tokenizer()
    counts: Counter = Counter()
    per_clip = []
    for text in transcripts:
        toks = tokenizer(text)
        counts.update(toks)
        per_clip.append(len(toks))
    return CorpusStats(
        total_words=sum(counts.values()),
        vocabulary_size=len(counts),
        singleton_count=sum(1 for c in counts.values() if c == 1),
        rare_count=sum(1 for c in counts.values() if c < RARE_THRESHOLD),
        per_clip_word_counts=per_clip,
    )


@dataclass
class Histogram:
    bins: list[tuple[int, int]]
    mean: float
    std: float

    def format(self) -> str:
        return "".join(f"{start}\t{count}\n" for start, count in self.bins)


def word_count_histogram(per_clip_word_counts: Sequence[int], bin_width: int,
                         min_edge: int | None = None) -> Histogram:
    """Left-closed bins of width ``bin_width`` starting at ``min_edge`` (default: min count).

    Empty bins between the first and last occupied bin are included so the
    rows plot directly. ``std`` is the population standard deviation.
    """
    if not per_clip_word_counts:
        raise EmptyCorpus("no word counts")
    if bin_width < 1:
        raise ValueError("bin_width must be positive")
    counts = list(per_clip_word_counts)
    lo = min(counts) if min_edge is None else min_edge
    if min(counts) < lo:
        raise ValueError(f"min_edge {lo} exceeds smallest count {min(counts)}")
    idx = Counter((c - lo) // bin_width for c in counts)
    bins = [(lo + k * bin_width, idx.get(k, 0)) for k in range(max(idx) + 1)]
    mean = sum(counts) / len(counts)
    std = math.sqrt(sum((c - mean) ** 2 for c in counts) / len(counts))
    return Histogram(bins, mean, std)


# published counts for the full E-TSL transcript set, default tokenizer unknown
ETSL_REFERENCE_COUNTS = {"total_words": 169_356, "vocabulary_size": 6_980, "singleton_count": 4_466, "rare_count": 5_936}


def tokenizer_sweep() -> list[Tokenizer]:
    return [
        Tokenizer(lowercase=lc, turkish=tr, strip_punct=sp)
        for lc, tr, sp in itertools.product((True, False), (True, False), (False, True))
        if lc or not tr  # casing flavour is irrelevant without lowercasing
    ]


def sweep_against(transcripts: Sequence[str], target: dict[str, int],
                  tokenizers: Iterable[Tokenizer] | None = None) -> list[tuple[Tokenizer, CorpusStats, dict[str, int]]]:
    """Stats under each tokenizer setting with deltas to ``target``, closest first."""
    results = []
    for tok in tokenizers or tokenizer_sweep():
        st = compute_stats(transcripts, tok)
        deltas = {k: getattr(st, k) - v for k, v in target.items()}
        results.append((tok, st, deltas))
    results.sort(key=lambda r: sum(abs(d) for d in r[2].values()))
    return results
