"""Training losses: supervised contrastive, cross-entropy, and their blend.

The contrastive term treats same-label batch mates as positives. For each
anchor with at least one positive, the per-anchor term averages
-log(exp(h_i.h_j / tau) / sum_{k != i} exp(h_i.h_k / tau)) over positives
j; the batch loss averages over contributing anchors (anchors whose class
is unique in the batch are skipped, not NaN'd). Embeddings enter the dot
products un-normalized by default.
"""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass
from typing import Sequence

import torch
import torch.nn.functional as F

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class LossConfig:
    blend: float = 0.7        # weight on the contrastive term
    tau: float = 0.1
    normalize: bool = False   # L2-normalize embeddings before dot products
    average: str = "anchor"   # 'anchor' or 'pair'

    def __post_init__(self):
        if not 0.0 <= self.blend <= 1.0:
            raise ValueError(f"blend weight must be in [0, 1], got {self.blend}")
        if self.tau <= 0:
            raise ValueError(f"tau must be positive, got {self.tau}")
        if self.average not in ("anchor", "pair"):
            raise ValueError(f"average must be 'anchor' or 'pair', got {self.average!r}")


@dataclass(frozen=True)
class BatchLabels:
    labels: tuple[int, ...]
    counts: dict[int, int]

    @classmethod
    def from_labels(cls, labels: Sequence[int]) -> "BatchLabels":
        labels = tuple(int(l) for l in labels)
        return cls(labels=labels, counts=dict(Counter(labels)))


def scl_loss(embeddings: torch.Tensor, labels: torch.Tensor | Sequence[int],
             tau: float, normalize: bool = False, average: str = "anchor") -> torch.Tensor:
    """Supervised contrastive loss over a batch of fused embeddings."""
    if not torch.is_tensor(labels):
        labels = torch.tensor(list(labels), dtype=torch.long, device=embeddings.device)
    n = embeddings.shape[0]
    if n < 2:
        log.warning("scl_loss on a batch of size %d returns 0", n)
        return embeddings.new_zeros(())
    if normalize:
        embeddings = F.normalize(embeddings, dim=1)

    sim = embeddings @ embeddings.T / tau
    self_mask = torch.eye(n, dtype=torch.bool, device=embeddings.device)
    # log of the per-anchor denominator, self excluded
    denom = torch.logsumexp(sim.masked_fill(self_mask, float("-inf")), dim=1)
    log_prob = sim - denom[:, None]

    positive = (labels[:, None] == labels[None, :]) & ~self_mask
    n_pos = positive.sum(dim=1)
    contributing = n_pos > 0
    if not bool(contributing.any()):
        return embeddings.new_zeros(())

    per_pair = -log_prob * positive
    if average == "pair":
        return per_pair.sum() / n_pos.sum()
    per_anchor = per_pair.sum(dim=1)[contributing] / n_pos[contributing]
    return per_anchor.sum() / contributing.sum()


def ce_loss(logits: torch.Tensor, labels: torch.Tensor | Sequence[int]) -> torch.Tensor:
    """Mean multiclass softmax cross-entropy."""
    if not torch.is_tensor(labels):
        labels = torch.tensor(list(labels), dtype=torch.long, device=logits.device)
    return F.cross_entropy(logits, labels)


def combined_loss(l_ce: torch.Tensor, l_scl: torch.Tensor, blend: float) -> torch.Tensor:
    if not 0.0 <= blend <= 1.0:
        raise ValueError(f"blend weight must be in [0, 1], got {blend}")
    return (1.0 - blend) * l_ce + blend * l_scl


def batch_loss(logits: torch.Tensor, embeddings: torch.Tensor,
               labels: torch.Tensor | Sequence[int], config: LossConfig) -> torch.Tensor:
    l_ce = ce_loss(logits, labels)
    if config.blend == 0.0:
        return l_ce
    l_scl = scl_loss(embeddings, labels, config.tau,
                     normalize=config.normalize, average=config.average)
    return combined_loss(l_ce, l_scl, config.blend)
