"""Corpus BLEU-1..4 and ROUGE-L F1 over whitespace tokens.

BLEU uses clipped n-gram counts pooled over the corpus, one reference per
hypothesis, and no smoothing unless asked for. ROUGE-L is computed per clip
from the longest common subsequence and averaged.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

from .errors import EmptyCorpus, LengthMismatch

Tokens = Sequence[str]


def ngrams(tokens: Tokens, n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def modified_ngram_precision(hyps: Sequence[Tokens], refs: Sequence[Tokens], n: int) -> tuple[int, int]:
    """Clipped n-gram matches and hypothesis n-gram total, summed over clips."""
    if len(hyps) != len(refs):
        raise LengthMismatch(f"{len(hyps)} hypotheses vs {len(refs)} references")
    if n < 1:
        raise ValueError("n must be >= 1")
    matched = total = 0
    for hyp, ref in zip(hyps, refs):
        h, r = ngrams(hyp, n), ngrams(ref, n)
        matched += sum(min(c, r[g]) for g, c in h.items())
        total += max(len(hyp) - n + 1, 0)
    return matched, total


def brevity_penalty(hyp_len: int, ref_len: int) -> float:
    if hyp_len <= 0:
        return 0.0
    if hyp_len >= ref_len:
        return 1.0
    return math.exp(1.0 - ref_len / hyp_len)


def _bleu_from_counts(counts: Sequence[tuple[int, int]], hyp_len: int, ref_len: int,
                      max_n: int, smooth: bool) -> dict[int, float]:
    bp = brevity_penalty(hyp_len, ref_len)
    scores = {}
    log_sum = 0.0
    zero = False
    for k in range(1, max_n + 1):
        m, t = counts[k - 1]
        if smooth and k > 1:
            # add-one on higher orders, diagnostics only
            m, t = m + 1, t + 1
        if m == 0 or t == 0:
            zero = True
        else:
            log_sum += math.log(m / t)
        scores[k] = 0.0 if zero or bp == 0.0 else bp * math.exp(log_sum / k)
    return scores


def corpus_bleu(hyps: Sequence[Tokens], refs: Sequence[Tokens], max_n: int = 4,
                smooth: bool = False) -> dict[int, float]:
    """BLEU-1..max_n with counts and lengths pooled over the corpus."""
    if len(hyps) != len(refs):
        raise LengthMismatch(f"{len(hyps)} hypotheses vs {len(refs)} references")
    if not hyps:
        raise EmptyCorpus("no hypothesis/reference pairs")
    counts = [modified_ngram_precision(hyps, refs, n) for n in range(1, max_n + 1)]
    hyp_len = sum(len(h) for h in hyps)
    ref_len = sum(len(r) for r in refs)
    return _bleu_from_counts(counts, hyp_len, ref_len, max_n, smooth)


def sentence_bleu(hyp: Tokens, ref: Tokens, max_n: int = 4, smooth: bool = False) -> dict[int, float]:
    return corpus_bleu([hyp], [ref], max_n, smooth)


def lcs_length(a: Tokens, b: Tokens) -> int:
    if len(a) < len(b):
        a, b = b, a
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b, start=1):
            cur.append(prev[j - 1] + 1 if x == y else max(prev[j], cur[j - 1]))
        prev = cur
    return prev[-1]


def rouge_l(hyp: Tokens, ref: Tokens) -> tuple[float, float, float]:
    """(precision, recall, f1) of the LCS between ``hyp`` and ``ref``."""
    if not hyp or not ref:
        return 0.0, 0.0, 0.0
    lcs = lcs_length(hyp, ref)
    p, r = lcs / len(hyp), lcs / len(ref)
    if p + r == 0:
        return 0.0, 0.0, 0.0
    return p, r, 2 * p * r / (p + r)


def corpus_rouge_l(hyps: Sequence[Tokens], refs: Sequence[Tokens]) -> float:
    if len(hyps) != len(refs):
        raise LengthMismatch(f"{len(hyps)} hypotheses vs {len(refs)} references")
    if not hyps:
        raise EmptyCorpus("no hypothesis/reference pairs")
    return sum(rouge_l(h, r)[2] for h, r in zip(hyps, refs)) / len(hyps)


@dataclass
class ClipScore:
    clip_id: str
    rouge_l_f1: float
    bleu: dict[int, float]


@dataclass
class EvaluationReport:
    rouge_l_f1: float
    bleu: dict[int, float]
    per_clip: list[ClipScore] = field(default_factory=list)
    hyp_tokens: int = 0
    ref_tokens: int = 0

    def format(self) -> str:
        """Corpus block (x100, 2 decimals) followed by per-clip TSV rows."""
        lines = [f"ROUGE-L\t{100 * self.rouge_l_f1:.2f}"]
        lines += [f"BLEU-{n}\t{100 * self.bleu[n]:.2f}" for n in sorted(self.bleu)]
        lines.append(f"hyp_tokens\t{self.hyp_tokens}")
        lines.append(f"ref_tokens\t{self.ref_tokens}")
        lines.append("")
        ns = sorted(self.bleu)
        lines.append("\t".join(["clip_id", "rouge_l"] + [f"bleu{n}" for n in ns]))
        for c in self.per_clip:
            vals = [f"{100 * c.rouge_l_f1:.2f}"] + [f"{100 * c.bleu[n]:.2f}" for n in ns]
            lines.append("\t".join([c.clip_id] + vals))
        return "\n".join(lines) + "\n"


def evaluate(clip_ids: Sequence[str], hyps: Sequence[Tokens], refs: Sequence[Tokens],
             max_n: int = 4, smooth: bool = False) -> EvaluationReport:
    if not (len(clip_ids) == len(hyps) == len(refs)):
        raise LengthMismatch("clip_ids, hypotheses and references differ in length")
    per_clip = [
        ClipScore(cid, rouge_l(h, r)[2], sentence_bleu(h, r, max_n, smooth))
        for cid, h, r in zip(clip_ids, hyps, refs)
    ]
    return EvaluationReport(
        rouge_l_f1=corpus_rouge_l(hyps, refs),
        bleu=corpus_bleu(hyps, refs, max_n, smooth),
        per_clip=per_clip,
        hyp_tokens=sum(len(h) for h in hyps),
        ref_tokens=sum(len(r) for r in refs),
    )
