"""Subword tokenizers feeding the encoder.

Any tokenizer exposing this module's small interface can back the
pipeline; production runs wrap a pretrained encoder's tokenizer, tests
and desk-scale runs use the deterministic hash tokenizer below.
"""

from __future__ import annotations

import hashlib
import json

PAD_TOKEN = "<pad>"

# entity boundary markers, added to the vocabulary of whichever tokenizer is used
MARKER_TOKENS = {
    "person": ("⟨p⟩", "⟨/p⟩"),
    "time": ("⟨t⟩", "⟨/t⟩"),
    "location": ("⟨l⟩", "⟨/l⟩"),
}
ALL_MARKERS = tuple(tok for pair in MARKER_TOKENS.values() for tok in pair)

CONTINUATION_PREFIX = "##"


class HashTokenizer:
    """Deterministic subword tokenizer with a hashed vocabulary.

    Words are cut into fixed-width character chunks; continuation chunks
    carry the ``##`` prefix. Ids come from a stable content hash, so the
    mapping never depends on corpus order or process state. Id 0 is
    padding; marker tokens get reserved ids.
    """

    def __init__(self, vocab_size: int = 4096, chunk: int = 4, max_len: int = 128):
        if vocab_size <= 2 + len(ALL_MARKERS):
            raise ValueError("vocab_size too small")
        self.vocab_size = vocab_size
        self.chunk = chunk
        self.max_len = max_len
        self._reserved = {PAD_TOKEN: 0}
        for i, tok in enumerate(ALL_MARKERS, start=1):
            self._reserved[tok] = i

    @property
    def pad_id(self) -> int:
        return 0

    def subtokenize(self, word: str) -> list[str]:
        if not word:
            return []
        pieces = [word[i:i + self.chunk] for i in range(0, len(word), self.chunk)]
        return [pieces[0]] + [CONTINUATION_PREFIX + p for p in pieces[1:]]

    def token_id(self, token: str) -> int:
        if token in self._reserved:
            return self._reserved[token]
        n = len(self._reserved)
        digest = hashlib.sha1(token.encode("utf-8")).digest()
        return n + int.from_bytes(digest[:8], "big") % (self.vocab_size - n)

    def join(self, subwords: list[str]) -> str:
        return "".join(s.removeprefix(CONTINUATION_PREFIX) for s in subwords)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fp:
            json.dump({"kind": "hash", "vocab_size": self.vocab_size,
                       "chunk": self.chunk, "max_len": self.max_len}, fp)

    @classmethod
    def load(cls, path) -> "HashTokenizer":
        with open(path, encoding="utf-8") as fp:
            cfg = json.load(fp)
        if cfg.get("kind") != "hash":
            raise ValueError(f"not a hash tokenizer config: {cfg.get('kind')}")
        return cls(vocab_size=cfg["vocab_size"], chunk=cfg["chunk"], max_len=cfg["max_len"])


class WholeWordTokenizer(HashTokenizer):
    """One subword per word; handy for hand-checked graph fixtures."""

    def subtokenize(self, word: str) -> list[str]:
        return [word] if word else []
