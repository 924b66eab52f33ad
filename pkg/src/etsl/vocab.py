"""Whitespace tokenizer with Turkish-aware casing, and the token/id vocabulary."""

from __future__ import annotations

import string
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

PAD, BOS, EOS, UNK = 0, 1, 2, 3
SPECIALS = ("<pad>", "<bos>", "<eos>", "<unk>")

# ASCII punctuation plus typographic quotes/dashes common in Turkish transcripts
PUNCTUATION = string.punctuation + "“”‘’«»…–—"


def turkish_lower(text: str) -> str:
    """Lowercase with Turkish dotted/dotless i rules (İ->i, I->ı)."""
    return text.replace("İ", "i").replace("I", "ı").lower()


@dataclass(frozen=True)
class Tokenizer:
    lowercase: bool = True
    turkish: bool = True
    strip_punct: bool = False

    def __call__(self, text: str) -> list[str]:
        return self.split(text)

    def split(self, text: str) -> list[str]:
        if self.lowercase:
            text = turkish_lower(text) if self.turkish else text.lower()
        toks = text.split()
        if self.strip_punct:
            toks = [t.strip(PUNCTUATION) for t in toks]
            toks = [t for t in toks if t]
        return toks


class Vocabulary:
    """Bijective token <-> id map. Ids 0-3 are reserved for PAD/BOS/EOS/UNK."""

    def __init__(self, tokens: Iterable[str] = (), tokenizer: Tokenizer | None = None):
        self.tokenizer = tokenizer or Tokenizer()
        self.itos: list[str] = list(SPECIALS)
        self.stoi: dict[str, int] = {t: i for i, t in enumerate(SPECIALS)}
        for tok in tokens:
            if tok in self.stoi:
                continue
            self.stoi[tok] = len(self.itos)
            self.itos.append(tok)

    @classmethod
    def build(cls, texts: Iterable[str], tokenizer: Tokenizer | None = None,
              min_freq: int = 1) -> "Vocabulary":
        tokenizer = tokenizer or Tokenizer()
        counts = Counter(tok for text in texts for tok in tokenizer(text))
        for s in SPECIALS:
            counts.pop(s, None)
        # frequency first, then lexicographic for a stable id assignment
        ordered = sorted((t for t, c in counts.items() if c >= min_freq), key=lambda t: (-counts[t], t))
        return cls(ordered, tokenizer)

    def __len__(self) -> int:
        return len(self.itos)

    def __contains__(self, token: str) -> bool:
        return token in self.stoi and self.stoi[token] >= len(SPECIALS)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Vocabulary):
            return NotImplemented
        return self.itos == other.itos and self.tokenizer == other.tokenizer

    def token_id(self, token: str) -> int:
        idx = self.stoi.get(token, UNK)
        # literal special strings in text never map to PAD/BOS/EOS
        return UNK if idx < len(SPECIALS) else idx

    def tokenize(self, text: str) -> list[int]:
        return [self.token_id(t) for t in self.tokenizer(text)]

    def words(self, ids: Sequence[int]) -> list[str]:
        """Tokens for ``ids``, dropping PAD/BOS/EOS (UNK is kept as ``<unk>``)."""
        return [self.itos[i] for i in ids if i not in (PAD, BOS, EOS)]

    def detokenize(self, ids: Sequence[int]) -> str:
        return " ".join(self.words(ids))

    def to_dict(self) -> dict:
        return {
            "tokens": self.itos[len(SPECIALS):],
            "tokenizer": {
                "lowercase": self.tokenizer.lowercase,
                "turkish": self.tokenizer.turkish,
                "strip_punct": self.tokenizer.strip_punct,
            },
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Vocabulary":
        return cls(d["tokens"], Tokenizer(**d["tokenizer"]))
