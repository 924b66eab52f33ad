"""Regenerate tests/data/metric_oracle.json from first principles.

Independent of ``etsl.metrics``: n-gram matches are counted with plain list
scans, precisions are exact fractions, LCS is found by enumerating every
subsequence of the shorter side. Run from the repo root:

    python tests/oracles/make_metric_oracle.py
"""

import itertools
import json
import math
from fractions import Fraction
from pathlib import Path

PAIRS = [
    ("a b c d", "a b c e"),
    ("the the the", "the cat"),
    ("a", "a b c d"),
    ("", "a b c"),
    ("a b c d e f", "a b c d e f"),
    ("a b c d", "a c b d"),
    ("x y z", "a b c"),
    ("a b c d e f g h i j", "a b c d e f"),
    ("ali okula gitti", "ali okula gitti"),
    ("ali okula gitti", "ali eve gitti"),
    ("ali geldi", "ali okula geldi dün"),
    ("bir iki üç dört beş", "bir iki üç dört"),
    ("a a a a", "a a b b"),
    ("a b a b a b", "a b a b"),
    ("kitap okudu", "kitap okudu"),
    ("c b a", "a b c"),
    ("a b", "a b c d e f g h"),
    ("a b c a b c", "a b c"),
    ("öğretmen ders anlattı sınıfta", "öğretmen sınıfta ders anlattı"),
    ("w1 w2 w3 w4 w5 w6 w7", "w1 w2 x w4 w5 w6 w7"),
    ("a b c d e", "e d c b a"),
    ("the cat sat on the mat", "the cat is on the mat"),
]


def ngram_list(toks, n):
    return [tuple(toks[i:i + n]) for i in range(len(toks) - n + 1)]


def clipped_matches(hyp, ref, n):
    hyp_ng, ref_ng = ngram_list(hyp, n), ngram_list(ref, n)
    matched = 0
    for g in set(hyp_ng):
        matched += min(hyp_ng.count(g), ref_ng.count(g))
    return matched, len(hyp_ng)


def bleu_scores(hyps, refs):
    c = sum(len(h) for h in hyps)
    r = sum(len(x) for x in refs)
    if c == 0:
        bp = 0.0
    elif c >= r:
        bp = 1.0
    else:
        bp = math.exp(1 - r / c)
    precisions = []
    for n in range(1, 5):
        m = t = 0
        for h, ref in zip(hyps, refs):
            mm, tt = clipped_matches(h, ref, n)
            m += mm
            t += tt
        precisions.append(Fraction(m, t) if t else Fraction(0))
    out = {}
    for n in range(1, 5):
        prod = Fraction(1)
        for p in precisions[:n]:
            prod *= p
        out[str(n)] = 0.0 if prod == 0 or bp == 0 else bp * float(prod) ** (1.0 / n)
    return out


def is_subsequence(sub, seq):
    it = iter(seq)
    return all(any(x == y for y in it) for x in sub)


def brute_lcs(a, b):
    short, long_ = (a, b) if len(a) <= len(b) else (b, a)
    for k in range(len(short), 0, -1):
        for idx in itertools.combinations(range(len(short)), k):
            if is_subsequence([short[i] for i in idx], long_):
                return k
    return 0


def rouge(hyp, ref):
    if not hyp or not ref:
        return 0.0, 0.0, 0.0
    lcs = brute_lcs(hyp, ref)
    if lcs == 0:
        return 0.0, 0.0, 0.0
    p, r = Fraction(lcs, len(hyp)), Fraction(lcs, len(ref))
    return float(p), float(r), float(2 * p * r / (p + r))


def main():
    toks = [(h.split(), r.split()) for h, r in PAIRS]
    pairs = []
    for (h, r), (ht, rt) in zip(PAIRS, toks):
        p, rc, f = rouge(ht, rt)
        pairs.append({
            "hyp": h, "ref": r, "lcs": brute_lcs(ht, rt),
            "bleu": bleu_scores([ht], [rt]),
            "rouge_l": {"p": p, "r": rc, "f": f},
        })
    corpus = {
        "bleu": bleu_scores([t[0] for t in toks], [t[1] for t in toks]),
        "rouge_l_f1": sum(x["rouge_l"]["f"] for x in pairs) / len(pairs),
    }
    out = Path(__file__).resolve().parents[1] / "data" / "metric_oracle.json"
    out.write_text(json.dumps({"pairs": pairs, "corpus": corpus}, ensure_ascii=False, indent=1) + "\n")
    print(f"wrote {len(pairs)} pairs to {out}")


if __name__ == "__main__":
    main()
