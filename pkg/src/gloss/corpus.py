"""Tokenization, vocabulary construction and sentence encoding."""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

UNK = "<unk>"
UNK_ID = 0

# words may carry internal hyphens/apostrophes; any other non-space symbol is its own token
_TOKEN_RE = re.compile(r"\w+(?:[-']\w+)*|[^\w\s]")


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


@dataclass(frozen=True)
class Vocab:
    tokens: tuple[str, ...]
    counts: dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        if not self.tokens or self.tokens[0] != UNK:
            raise ValueError("vocab must start with the UNK token")
        index = {tok: i for i, tok in enumerate(self.tokens)}
        if len(index) != len(self.tokens):
            raise ValueError("duplicate tokens in vocab")
        object.__setattr__(self, "index", index)

    @property
    def V(self) -> int:
        return len(self.tokens)

    def __len__(self) -> int:
        return len(self.tokens)

    def id_of(self, token: str) -> int:
        return self.index.get(token, UNK_ID)

    def decode(self, ids: Iterable[int]) -> list[str]:
        return [self.tokens[i] for i in ids]


def build_vocab(corpus: Sequence[str], min_count: int = 1) -> Vocab:
    """Count tokens over ``corpus`` and assign ids by descending count.

    Ties are broken lexicographically so the result does not depend on the
    order of the input sentences. Id 0 is reserved for UNK.
    """
    if min_count < 1:
        raise ValueError("min_count must be >= 1")
    counts: Counter[str] = Counter()
    for line in corpus:
        counts.update(tokenize(line))
    if not counts:
        raise ValueError("empty corpus")
    kept = sorted((tok for tok, c in counts.items() if c >= min_count), key=lambda t: (-counts[t], t))
    return Vocab(tokens=(UNK, *kept), counts={tok: counts[tok] for tok in kept})


@dataclass(frozen=True)
class EncodedSentence:
    ids: tuple[int, ...]
    word_set: tuple[int, ...]

    def __len__(self) -> int:
        return len(self.ids)


def encode(sentence: str, vocab: Vocab, L_max: int = 64) -> EncodedSentence:
    if L_max < 1:
        raise ValueError("L_max must be >= 1")
    toks = tokenize(sentence)
    if not toks:
        raise ValueError("empty sentence after tokenization")
    ids = tuple(vocab.id_of(t) for t in toks[:L_max])
    return EncodedSentence(ids=ids, word_set=tuple(sorted(set(ids))))


@dataclass(frozen=True)
class EncodedCorpus:
    sentences: tuple[EncodedSentence, ...]
    raw: tuple[str, ...]

    def __post_init__(self):
        if len(self.sentences) != len(self.raw):
            raise ValueError("sentences and raw lengths differ")
        if not self.sentences:
            raise ValueError("empty corpus")

    def __len__(self) -> int:
        return len(self.sentences)


def encode_corpus(lines: Sequence[str], vocab: Vocab, L_max: int = 64) -> EncodedCorpus:
    return EncodedCorpus(
        sentences=tuple(encode(s, vocab, L_max) for s in lines),
        raw=tuple(lines),
    )


def read_corpus(path: str | Path) -> list[str]:
    """One sentence per line; blank lines are skipped."""
    text = Path(path).read_text(encoding="utf-8")
    return [line.strip() for line in text.split("\n") if line.strip()]
