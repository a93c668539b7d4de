"""Adapter for pretrained transformer encoders (optional dependency).

Wraps a local or hub model so it satisfies the same surface as the tiny
encoder: marker tokens in the vocabulary, ``subtokenize`` per word, and
per-token states of fixed dimension. Install with the ``hf`` extra.
"""

from __future__ import annotations

import torch
from torch import nn

from .tokenization import ALL_MARKERS


class PretrainedTokenizer:
    """Word-by-word subword tokenization with markers in the vocabulary."""

    def __init__(self, tokenizer, max_len: int = 128):
        self.inner = tokenizer
        self.max_len = max_len
        added = tokenizer.add_tokens(list(ALL_MARKERS), special_tokens=True)
        self.added_markers = added

    @property
    def pad_id(self) -> int:
        return self.inner.pad_token_id or 0

    def subtokenize(self, word: str) -> list[str]:
        return self.inner.tokenize(word)

    def token_id(self, token: str) -> int:
        return self.inner.convert_tokens_to_ids(token)

    def join(self, subwords: list[str]) -> str:
        return self.inner.convert_tokens_to_string(subwords).replace(" ", "")

    def save(self, path) -> None:
        self.inner.save_pretrained(str(path) + ".dir")


class PretrainedEncoder(nn.Module):
    """Per-token hidden states from a pretrained bidirectional encoder."""

    def __init__(self, model, tokenizer: PretrainedTokenizer):
        super().__init__()
        self.model = model
        if tokenizer.added_markers:
            old = model.get_input_embeddings().weight.detach()
            model.resize_token_embeddings(len(tokenizer.inner))
            with torch.no_grad():
                emb = model.get_input_embeddings().weight
                mean = old.mean(dim=0)
                for i in range(tokenizer.added_markers):
                    emb[-(i + 1)] = mean + 0.02 * torch.randn_like(mean)
        self.dim = model.config.hidden_size

    def arch(self) -> dict:
        return {"kind": "pretrained", "name": self.model.config.name_or_path,
                "dim": self.dim}

    def forward(self, ids: torch.Tensor, validity: torch.Tensor) -> torch.Tensor:
        out = self.model(input_ids=ids, attention_mask=validity)
        return out.last_hidden_state * validity[:, :, None].to(out.last_hidden_state.dtype)


def load_pretrained(name_or_path: str, max_len: int = 128):
    try:
        from transformers import AutoModel, AutoTokenizer
    except ImportError as err:
        raise ImportError("pretrained encoders need the 'hf' extra installed") from err
    tokenizer = PretrainedTokenizer(AutoTokenizer.from_pretrained(name_or_path), max_len)
    model = AutoModel.from_pretrained(name_or_path)
    return PretrainedEncoder(model, tokenizer), tokenizer
