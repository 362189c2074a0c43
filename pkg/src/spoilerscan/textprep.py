"""Tokenization, frequency-ranked vocabulary, and fixed-length id encoding."""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

__all__ = [
    "PAD_ID",
    "OOV_ID",
    "EncoderConfig",
    "Vocabulary",
    "TokenSequence",
    "normalize",
    "build_vocabulary",
    "encode",
    "encode_nonempty",
]

PAD_ID = 0
OOV_ID = 1

VOCAB_FILE_VERSION = 1


def normalize(text: str) -> list[str]:
    """Lowercase, map every non-alphanumeric character to a space, and split."""
    return "".join(c if c.isalnum() else " " for c in text.lower()).split()


@dataclass(frozen=True)
class EncoderConfig:
    vocab_size: int = 8000  # id space, including the pad and OOV slots
    max_len: int = 600  # tokens per encoded sequence

    def __post_init__(self) -> None:
        if self.vocab_size < 3:
            raise ValueError(f"vocab_size must be >= 3, got {self.vocab_size}")
        if self.max_len < 1:
            raise ValueError(f"max_len must be >= 1, got {self.max_len}")


@dataclass
class Vocabulary:
    """Frequency-ranked word -> id map with reserved pad (0) and OOV (1) ids.

    `words[p]` holds id p + 2; ranking is by descending corpus frequency with
    ties broken by ascending lexicographic order, so identical corpora always
    produce identical vocabularies.
    """

    config: EncoderConfig
    words: list[str]
    _ids: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if len(self.words) > self.config.vocab_size - 2:
            raise ValueError("more words than the id space can hold")
        if len(set(self.words)) != len(self.words):
            raise ValueError("vocabulary words must be unique")
        self._ids = {w: i + 2 for i, w in enumerate(self.words)}

    def id_of(self, word: str) -> int:
        return self._ids.get(word, OOV_ID)

    def __contains__(self, word: str) -> bool:
        return word in self._ids

    def __len__(self) -> int:
        return len(self.words)

    def save(self, path: str | Path) -> None:
        payload = {
            "version": VOCAB_FILE_VERSION,
            "vocab_size": self.config.vocab_size,
            "max_len": self.config.max_len,
            "words": self.words,
        }
        Path(path).write_text(json.dumps(payload), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "Vocabulary":
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        if payload.get("version") != VOCAB_FILE_VERSION:
            raise ValueError(f"unsupported vocabulary file version: {payload.get('version')}")
        config = EncoderConfig(vocab_size=payload["vocab_size"], max_len=payload["max_len"])
        return cls(config=config, words=list(payload["words"]))


def build_vocabulary(token_lists: Iterable[list[str]], config: EncoderConfig) -> Vocabulary:
    """Count token occurrences and keep the top vocab_size - 2 ranked words."""
    counts: Counter[str] = Counter()
    for tokens in token_lists:
        counts.update(tokens)
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    words = [w for w, _ in ranked[: config.vocab_size - 2]]
    return Vocabulary(config=config, words=words)


@dataclass
class TokenSequence:
    """Fixed-length id array; positions at or beyond true_len are padding."""

    ids: np.ndarray  # int64, length exactly max_len
    true_len: int


def encode(vocab: Vocabulary, title: str, sentence: str) -> TokenSequence:
    """Encode title tokens followed by sentence tokens into a padded id array.

    Unknown words map to OOV_ID.  Sequences longer than max_len keep their
    FIRST max_len tokens, so a prepended title is never truncated away.
    """
    max_len = vocab.config.max_len
    tokens = normalize(title) + normalize(sentence)
    tokens = tokens[:max_len]
    ids = np.full(max_len, PAD_ID, dtype=np.int64)
    for i, tok in enumerate(tokens):
        ids[i] = vocab.id_of(tok)
    return TokenSequence(ids=ids, true_len=len(tokens))


def encode_nonempty(vocab: Vocabulary, title: str, sentence: str) -> TokenSequence:
    """Encode, substituting a single OOV token when normalization yields nothing.

    Text like "!!!" normalizes to an empty token list, which the classifier
    cannot score; the documented fallback scores it as one unknown word.
    """
    seq = encode(vocab, title, sentence)
    if seq.true_len == 0:
        seq.ids[0] = OOV_ID
        seq.true_len = 1
    return seq
