"""Sample preprocessing: alignment, graph, mask, and encoder ids.

Pure per-sample functions; batching pads to the longest sequence in the
batch. The no-mask ablation swaps the trajectory-subgraph mask for the
entity-only mask and changes nothing else.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Optional, Sequence

import torch

from . import taxonomy
from .dataset import TrajectorySample
from .syntax_graph import (DEFAULT_VERB_TAGS, TrajectorySubgraph, build_graph,
                           entity_verb_paths, make_mask, tokenize_with_markers)

ABLATIONS = ("none", "no-mask", "no-scl", "no-triple")


@dataclass(frozen=True)
class EncodedSample:
    sample_id: str
    token_ids: tuple[int, ...]
    mask: tuple[int, ...]
    label_id: Optional[int]
    fallback: bool


def label_mapper(granularity: str) -> Callable[[str], int]:
    if granularity == "type":
        return taxonomy.type_id
    if granularity == "category":
        return lambda name: taxonomy.category_id(taxonomy.category_of(name))
    raise ValueError(f"unknown granularity {granularity!r}")


def n_labels(granularity: str) -> int:
    return taxonomy.NUM_TYPES if granularity == "type" else taxonomy.NUM_CATEGORIES


def label_names(granularity: str) -> list[str]:
    return list(taxonomy.TYPE_NAMES if granularity == "type" else taxonomy.CATEGORY_NAMES)


def entity_only_subgraph(graph) -> TrajectorySubgraph:
    """Mask support restricted to the triple tokens (no-mask ablation)."""
    all_entity = frozenset().union(*graph.entity_nodes.values())
    return TrajectorySubgraph(
        nodes=all_entity,
        edges={e for e in graph.edges() if e[0] in all_entity and e[1] in all_entity},
        path_nodes_per_entity={k: frozenset() for k in graph.entity_nodes},
        fallback=False,
    )


def encode_sample(sample: TrajectorySample, tokenizer, variant: str = "regular",
                  ablation: str = "none", verb_tags=DEFAULT_VERB_TAGS,
                  granularity: str = "type") -> EncodedSample:
    if ablation not in ABLATIONS:
        raise ValueError(f"unknown ablation {ablation!r}")
    view = sample.active_view(variant)
    alignment = tokenize_with_markers(view, tokenizer)
    graph = build_graph(view, alignment, verb_tags=verb_tags)
    if ablation == "no-mask":
        subgraph = entity_only_subgraph(graph)
    else:
        subgraph = entity_verb_paths(graph)
    mask = make_mask(subgraph, alignment, len(alignment))
    ids = tuple(tokenizer.token_id(t) for t in alignment.tokens)
    label_id = None
    if sample.label is not None:
        label_id = label_mapper(granularity)(sample.label)
    return EncodedSample(
        sample_id=sample.id,
        token_ids=ids,
        mask=tuple(mask),
        label_id=label_id,
        fallback=subgraph.fallback,
    )


def encode_corpus(samples: Iterable[TrajectorySample], tokenizer, **kwargs) -> list[EncodedSample]:
    return [encode_sample(s, tokenizer, **kwargs) for s in samples]


def collate(batch: Sequence[EncodedSample], pad_id: int = 0,
            device=None) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor, Optional[torch.Tensor]]:
    """Pad to the batch maximum; returns (ids, mask, validity, labels)."""
    width = max(len(e.token_ids) for e in batch)
    ids = torch.full((len(batch), width), pad_id, dtype=torch.long)
    mask = torch.zeros((len(batch), width), dtype=torch.long)
    validity = torch.zeros((len(batch), width), dtype=torch.long)
    for i, e in enumerate(batch):
        L = len(e.token_ids)
        ids[i, :L] = torch.tensor(e.token_ids, dtype=torch.long)
        mask[i, :L] = torch.tensor(e.mask, dtype=torch.long)
        validity[i, :L] = 1
    labels = None
    if all(e.label_id is not None for e in batch):
        labels = torch.tensor([e.label_id for e in batch], dtype=torch.long)
    if device is not None:
        ids, mask, validity = ids.to(device), mask.to(device), validity.to(device)
        labels = labels.to(device) if labels is not None else None
    return ids, mask, validity, labels
