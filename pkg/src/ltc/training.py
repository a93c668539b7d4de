"""Cross-validated fine-tuning, epoch selection by held-out recall, and
ablation wiring.

All randomness (fold shuffling, init, batch order) flows from the one
seed recorded in the run manifest. Reported fold metrics come from the
epoch with the best weighted recall on the held-out fold; last-epoch
metrics are persisted alongside for transparency about the selection.
"""

from __future__ import annotations

import dataclasses
import logging
import random
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import torch

from . import features
from .dataset import FoldPlan, TrajectorySample, make_folds
from .fusion import FusionClassifier, TinyEncoder, config_hash
from .losses import LossConfig, batch_loss
from .metrics import MetricsReport, confusion_from_predictions, weighted_prf
from .tokenization import HashTokenizer

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class EncoderConfig:
    vocab_size: int = 4096
    dim: int = 32
    n_layers: int = 2
    n_heads: int = 4
    max_len: int = 128
    dropout: float = 0.1
    chunk: int = 4


@dataclass(frozen=True)
class TrainConfig:
    seed: int = 7
    folds: int = 10
    epochs: int = 10          # artifact default; not prescribed upstream
    batch_size: int = 32
    lr: float = 1e-5
    weight_decay: float = 0.01
    loss: LossConfig = field(default_factory=LossConfig)
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    dataset_variant: str = "regular"      # regular | llm-refined
    granularity: str = "type"             # type | category
    ablation: str = "none"                # none | no-mask | no-scl | no-triple
    verb_tags: tuple[str, ...] = ("VERB",)

    def __post_init__(self):
        if self.dataset_variant not in ("regular", "llm-refined"):
            raise ValueError(f"unknown dataset variant {self.dataset_variant!r}")
        if self.granularity not in ("type", "category"):
            raise ValueError(f"unknown granularity {self.granularity!r}")
        if self.ablation not in features.ABLATIONS:
            raise ValueError(f"unknown ablation {self.ablation!r}")

    def effective_loss(self) -> LossConfig:
        if self.ablation == "no-scl":
            return dataclasses.replace(self.loss, blend=0.0)
        return self.loss

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["verb_tags"] = list(self.verb_tags)
        return d

    def hash(self) -> str:
        return config_hash(self.to_dict())


@dataclass
class FoldResult:
    fold: int
    best_epoch: int
    best: MetricsReport
    last: MetricsReport


@dataclass
class CVResult:
    folds: list[FoldResult]
    plan: FoldPlan
    config: TrainConfig

    def aggregate(self) -> dict:
        keys = ("weighted_precision", "weighted_recall", "weighted_f1", "accuracy")
        return {k: float(np.mean([getattr(f.best, k) for f in self.folds])) for k in keys}

    def to_dict(self) -> dict:
        return {
            "config_hash": self.config.hash(),
            "aggregate": self.aggregate(),
            "folds": [
                {"fold": f.fold, "best_epoch": f.best_epoch,
                 "best": f.best.to_dict(), "last": f.last.to_dict()}
                for f in self.folds
            ],
        }


def set_seeds(seed: int) -> None:
    random.seed(seed)
    np.random.seed(seed % (2 ** 32))
    torch.manual_seed(seed)


def build_model(config: TrainConfig) -> FusionClassifier:
    enc = config.encoder
    encoder = TinyEncoder(vocab_size=enc.vocab_size, dim=enc.dim, n_layers=enc.n_layers,
                          n_heads=enc.n_heads, max_len=enc.max_len, dropout=enc.dropout)
    return FusionClassifier(encoder, n_labels=features.n_labels(config.granularity),
                            zero_trajectory=config.ablation == "no-triple")


def build_tokenizer(config: TrainConfig) -> HashTokenizer:
    return HashTokenizer(vocab_size=config.encoder.vocab_size,
                         chunk=config.encoder.chunk, max_len=config.encoder.max_len)


def encode_for_run(samples, tokenizer, config: TrainConfig) -> list[features.EncodedSample]:
    return features.encode_corpus(
        samples, tokenizer, variant=config.dataset_variant, ablation=config.ablation,
        verb_tags=frozenset(config.verb_tags), granularity=config.granularity,
    )


def evaluate(model: FusionClassifier, encoded, config: TrainConfig,
             batch_size: int = 64) -> MetricsReport:
    model.eval()
    gold, pred = [], []
    with torch.no_grad():
        for i in range(0, len(encoded), batch_size):
            chunk = encoded[i:i + batch_size]
            ids, mask, validity, labels = features.collate(chunk)
            out = model(ids, mask, validity)
            pred.extend(out.logits.argmax(dim=1).tolist())
            gold.extend(labels.tolist())
    cm = confusion_from_predictions(np.array(gold), np.array(pred),
                                    features.n_labels(config.granularity))
    return weighted_prf(cm, features.label_names(config.granularity))


def train_epochs(model: FusionClassifier, train_enc, eval_enc, config: TrainConfig,
                 rng: random.Random) -> list[MetricsReport]:
    """Train for the configured epochs, evaluating after each one."""
    loss_cfg = config.effective_loss()
    optimizer = torch.optim.AdamW(model.parameters(), lr=config.lr,
                                  weight_decay=config.weight_decay)
    reports = []
    order = list(range(len(train_enc)))
    for epoch in range(config.epochs):
        model.train()
        rng.shuffle(order)
        for i in range(0, len(order), config.batch_size):
            batch = [train_enc[j] for j in order[i:i + config.batch_size]]
            ids, mask, validity, labels = features.collate(batch)
            out = model(ids, mask, validity)
            loss = batch_loss(out.logits, out.h_scl, labels, loss_cfg)
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
        reports.append(evaluate(model, eval_enc, config))
        log.info("epoch %d: eval weighted recall %.4f", epoch, reports[-1].weighted_recall)
    return reports


def run_cv(samples: list[TrajectorySample], config: TrainConfig,
           plan: Optional[FoldPlan] = None) -> CVResult:
    """k-fold cross-validation; every fold trains a fresh model."""
    if plan is None:
        plan = make_folds(samples, config.folds, config.seed)
    tokenizer = build_tokenizer(config)
    encoded = {e.sample_id: e for e in encode_for_run(samples, tokenizer, config)}

    results = []
    for fold in range(plan.k):
        t0 = time.time()
        eval_ids = set(plan.fold_ids(fold))
        train_enc = [encoded[s.id] for s in samples if s.id not in eval_ids]
        eval_enc = [encoded[s.id] for s in samples if s.id in eval_ids]
        if not eval_enc:
            log.warning("fold %d is empty; skipping", fold)
            continue
        set_seeds(config.seed * 1000 + fold)
        model = build_model(config)
        rng = random.Random(config.seed * 1000 + fold)
        reports = train_epochs(model, train_enc, eval_enc, config, rng)
        best_epoch = max(range(len(reports)), key=lambda e: (reports[e].weighted_recall, -e))
        results.append(FoldResult(fold=fold, best_epoch=best_epoch,
                                  best=reports[best_epoch], last=reports[-1]))
        log.info("fold %d done in %.1fs (best epoch %d, recall %.4f)",
                 fold, time.time() - t0, best_epoch, reports[best_epoch].weighted_recall)
    return CVResult(folds=results, plan=plan, config=config)


def train_full(samples: list[TrajectorySample], config: TrainConfig
               ) -> tuple[FusionClassifier, HashTokenizer, MetricsReport]:
    """Fit one model on all labeled samples (the deployable artifact)."""
    tokenizer = build_tokenizer(config)
    encoded = encode_for_run(samples, tokenizer, config)
    set_seeds(config.seed)
    model = build_model(config)
    rng = random.Random(config.seed)
    reports = train_epochs(model, encoded, encoded, config, rng)
    return model, tokenizer, reports[-1]
