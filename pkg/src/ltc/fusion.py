"""Fusion model: masked mean pooling over trajectory tokens, max pooling
over the sentence, concatenation, and a single affine classification head.

The encoder is abstract: anything mapping (token ids, validity) to
per-token states of fixed dimension plugs in. A small trainable
transformer encoder ships for desk-scale runs and CI; pretrained encoders
are wrapped in :mod:`ltc.hf`.
"""

from __future__ import annotations

import hashlib
import json
import shutil
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np
import torch
from torch import nn

from . import taxonomy
from .tokenization import ALL_MARKERS, HashTokenizer


@dataclass
class FusionOutput:
    h1_prime: torch.Tensor  # (B, d) masked mean
    h2: torch.Tensor        # (B, d) max pool over valid tokens
    h_scl: torch.Tensor     # (B, 2d)
    logits: torch.Tensor    # (B, n_labels)


def fuse(states: torch.Tensor, mask: torch.Tensor, validity: torch.Tensor,
         zero_trajectory: bool = False) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    """Pooling arithmetic shared by the model and its fixtures.

    h1' is the mean of mask-selected rows (divisor = number of selected
    rows); h2 is the elementwise max over valid rows. Padding rows never
    enter either pool.
    """
    if states.dim() == 2:
        states, mask, validity = states[None], mask[None], validity[None]
        squeeze = True
    else:
        squeeze = False
    mask = mask.to(states.dtype)
    validity = validity.to(states.dtype)
    if bool(((mask > 0) & (validity == 0)).any()):
        raise ValueError("mask selects padding positions")

    counts = mask.sum(dim=1)
    if bool((counts == 0).any()):
        raise ValueError("all-zero mask; apply the entity fallback before pooling")
    h1 = states * mask[:, :, None]
    h1_prime = h1.sum(dim=1) / counts[:, None]
    if zero_trajectory:
        h1_prime = torch.zeros_like(h1_prime)

    neg = torch.finfo(states.dtype).min
    masked_states = states.masked_fill(validity[:, :, None] == 0, neg)
    h2 = masked_states.max(dim=1).values

    h_scl = torch.cat([h1_prime, h2], dim=1)
    if squeeze:
        return h1_prime[0], h2[0], h_scl[0]
    return h1_prime, h2, h_scl


class TinyEncoder(nn.Module):
    """Small trainable transformer encoder over hashed subword ids."""

    def __init__(self, vocab_size: int = 4096, dim: int = 32, n_layers: int = 2,
                 n_heads: int = 4, max_len: int = 128, dropout: float = 0.1):
        super().__init__()
        self.vocab_size = vocab_size
        self.dim = dim
        self.n_layers = n_layers
        self.n_heads = n_heads
        self.max_len = max_len
        self.dropout = dropout
        self.tok = nn.Embedding(vocab_size, dim, padding_idx=0)
        self.pos = nn.Embedding(max_len, dim)
        layer = nn.TransformerEncoderLayer(
            d_model=dim, nhead=n_heads, dim_feedforward=4 * dim,
            dropout=dropout, batch_first=True, norm_first=True,
        )
        self.layers = nn.TransformerEncoder(layer, num_layers=n_layers,
                                            enable_nested_tensor=False)
        self._init_marker_embeddings()

    def _init_marker_embeddings(self):
        # markers start from the mean of the regular vocabulary plus noise
        with torch.no_grad():
            marker_ids = list(range(1, 1 + len(ALL_MARKERS)))
            others = torch.ones(self.vocab_size, dtype=torch.bool)
            others[0] = False
            for m in marker_ids:
                others[m] = False
            mean = self.tok.weight[others].mean(dim=0)
            for m in marker_ids:
                self.tok.weight[m] = mean + 0.02 * torch.randn_like(mean)

    def arch(self) -> dict:
        return {"kind": "tiny", "vocab_size": self.vocab_size, "dim": self.dim,
                "n_layers": self.n_layers, "n_heads": self.n_heads,
                "max_len": self.max_len, "dropout": self.dropout}

    def forward(self, ids: torch.Tensor, validity: torch.Tensor) -> torch.Tensor:
        positions = torch.arange(ids.shape[1], device=ids.device)[None, :]
        x = self.tok(ids) + self.pos(positions)
        pad = validity == 0
        x = self.layers(x, src_key_padding_mask=pad)
        return x * validity[:, :, None].to(x.dtype)


class FusionClassifier(nn.Module):
    def __init__(self, encoder: nn.Module, n_labels: int = taxonomy.NUM_TYPES,
                 zero_trajectory: bool = False):
        super().__init__()
        self.encoder = encoder
        self.n_labels = n_labels
        self.zero_trajectory = zero_trajectory
        self.classifier = nn.Linear(2 * encoder.dim, n_labels)

    @property
    def dim(self) -> int:
        return self.encoder.dim

    def forward(self, ids: torch.Tensor, mask: torch.Tensor,
                validity: torch.Tensor) -> FusionOutput:
        states = self.encoder(ids, validity)
        h1_prime, h2, h_scl = fuse(states, mask, validity,
                                   zero_trajectory=self.zero_trajectory)
        logits = self.classifier(h_scl)
        return FusionOutput(h1_prime=h1_prime, h2=h2, h_scl=h_scl, logits=logits)


@torch.no_grad()
def predict(model: FusionClassifier, ids, mask, validity) -> tuple[np.ndarray, np.ndarray]:
    """Label ids and probability rows; ties break to the lowest id."""
    model.eval()
    out = model(ids, mask, validity)
    probs = torch.softmax(out.logits, dim=1).cpu().numpy()
    return probs.argmax(axis=1), probs


# ---------------------------------------------------------------------------
# Checkpoints

def config_hash(payload: dict) -> str:
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()[:16]


def save_checkpoint(model: FusionClassifier, tokenizer, path, extra: dict | None = None) -> None:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    arch = model.encoder.arch()
    torch.save({"encoder": model.encoder.state_dict(),
                "classifier": model.classifier.state_dict(),
                "arch": arch}, path / "model.pt")
    tokenizer.save(path / "tokenizer.json")
    with resources.as_file(resources.files("ltc").joinpath("assets/taxonomy.json")) as tax:
        shutil.copy(tax, path / "taxonomy.json")
    manifest = {
        "dim": model.dim,
        "n_labels": model.n_labels,
        "zero_trajectory": model.zero_trajectory,
        "config_hash": config_hash({"arch": arch, "n_labels": model.n_labels}),
    }
    manifest.update(extra or {})
    with open(path / "manifest.json", "w", encoding="utf-8") as fp:
        json.dump(manifest, fp, indent=2, sort_keys=True)


def load_checkpoint(path) -> tuple[FusionClassifier, HashTokenizer, dict]:
    path = Path(path)
    blob = torch.load(path / "model.pt", map_location="cpu", weights_only=True)
    arch = blob["arch"]
    if arch.get("kind") != "tiny":
        raise ValueError(f"unsupported encoder kind in checkpoint: {arch.get('kind')}")
    with open(path / "manifest.json", encoding="utf-8") as fp:
        manifest = json.load(fp)
    encoder = TinyEncoder(**{k: v for k, v in arch.items() if k != "kind"})
    model = FusionClassifier(encoder, n_labels=manifest["n_labels"],
                             zero_trajectory=manifest.get("zero_trajectory", False))
    model.encoder.load_state_dict(blob["encoder"])
    model.classifier.load_state_dict(blob["classifier"])
    tokenizer = HashTokenizer.load(path / "tokenizer.json")
    return model, tokenizer, manifest
