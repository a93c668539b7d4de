"""Sentence graph over encoder subword tokens and the trajectory mask.

The graph carries two edge kinds: dependency edges lifted from the word
parse onto first subwords, and star edges tying each word's first subword
to its continuation subwords (entity boundary markers hang off the same
star mechanism). Traversal is undirected. The trajectory subgraph is the
union of all minimal-length paths from each triple entity to its nearest
verb node(s); its token positions become the binary mask consumed by the
fusion model.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Optional

from .dataset import SampleView, TrajectorySample, align_spans_to_words
from .tokenization import MARKER_TOKENS

DEFAULT_VERB_TAGS = frozenset({"VERB"})  # main-verb tags only; AUX excluded

ENTITY_KINDS = ("person", "time", "location")


class GraphError(ValueError):
    pass


class TruncationError(GraphError):
    """Raised when truncation would cut an entity or marker token."""


@dataclass
class TokenAlignment:
    tokens: list[str]                         # encoder tokens, markers included
    word_to_subwords: dict[int, list[int]]    # word index -> subword positions
    marker_positions: dict[str, tuple[int, int]]  # entity kind -> (open, close)
    entity_words: dict[str, list[int]]        # entity kind -> word indices

    def entity_subwords(self, kind: str) -> list[int]:
        return [p for w in self.entity_words[kind] for p in self.word_to_subwords[w]]

    def all_entity_subwords(self) -> set[int]:
        return {p for kind in self.entity_words for p in self.entity_subwords(kind)}

    def entity_anchor(self, kind: str) -> int:
        """First subword of the entity's first word."""
        return self.word_to_subwords[self.entity_words[kind][0]][0]

    def __len__(self) -> int:
        return len(self.tokens)


def tokenize_with_markers(sample: TrajectorySample | SampleView, tokenizer,
                          variant: str = "regular") -> TokenAlignment:
    """Tokenize into subwords, wrapping each triple entity in marker tokens.

    Markers are excluded from the word mapping; their positions are
    recorded separately. If the sequence exceeds the tokenizer's maximum
    length, the tail is dropped only when no entity or marker token falls
    in it; otherwise a TruncationError is raised.
    """
    view = sample.active_view(variant) if isinstance(sample, TrajectorySample) else sample
    if not view.sentence.strip() or not view.parse:
        raise GraphError(f"sample {view.id}: empty sentence or missing parse")

    entity_words = align_spans_to_words(view)
    opens = {words[0]: kind for kind, words in entity_words.items()}
    closes = {words[-1]: kind for kind, words in entity_words.items()}

    tokens: list[str] = []
    word_to_subwords: dict[int, list[int]] = {}
    marker_positions: dict[str, list[int]] = {k: [None, None] for k in entity_words}

    for word in view.parse:
        kind = opens.get(word.index)
        if kind is not None:
            marker_positions[kind][0] = len(tokens)
            tokens.append(MARKER_TOKENS[kind][0])
        pieces = tokenizer.subtokenize(word.form)
        if not pieces:
            raise GraphError(f"sample {view.id}: word {word.index} tokenized to nothing")
        word_to_subwords[word.index] = list(range(len(tokens), len(tokens) + len(pieces)))
        tokens.extend(pieces)
        kind = closes.get(word.index)
        if kind is not None:
            marker_positions[kind][1] = len(tokens)
            tokens.append(MARKER_TOKENS[kind][1])

    max_len = getattr(tokenizer, "max_len", None)
    if max_len is not None and len(tokens) > max_len:
        protected = {p for ps in marker_positions.values() for p in ps}
        protected |= {p for k in entity_words for w in entity_words[k]
                      for p in word_to_subwords[w]}
        if any(p >= max_len for p in protected):
            raise TruncationError(
                f"sample {view.id}: sequence of {len(tokens)} exceeds max_len={max_len} "
                "and truncation would cut an entity"
            )
        tokens = tokens[:max_len]
        word_to_subwords = {w: ps for w, ps in word_to_subwords.items()
                            if all(p < max_len for p in ps)}

    return TokenAlignment(
        tokens=tokens,
        word_to_subwords=word_to_subwords,
        marker_positions={k: (v[0], v[1]) for k, v in marker_positions.items()},
        entity_words=entity_words,
    )


@dataclass
class SentenceGraph:
    n_tokens: int
    dep_edges: set[tuple[int, int]]
    subword_edges: set[tuple[int, int]]
    marker_edges: set[tuple[int, int]]
    entity_nodes: dict[str, frozenset[int]]
    verb_nodes: frozenset[int]
    nodes: frozenset[int]
    _adj: Optional[dict[int, list[int]]] = field(default=None, repr=False)

    def edges(self) -> set[tuple[int, int]]:
        return self.dep_edges | self.subword_edges | self.marker_edges

    def adjacency(self) -> dict[int, list[int]]:
        if self._adj is None:
            adj: dict[int, list[int]] = {n: [] for n in self.nodes}
            for u, v in sorted(self.edges()):
                adj[u].append(v)
                adj[v].append(u)
            self._adj = adj
        return self._adj


def _edge(u: int, v: int) -> tuple[int, int]:
    return (u, v) if u < v else (v, u)


def build_graph(sample: TrajectorySample | SampleView, alignment: TokenAlignment,
                verb_tags: Iterable[str] = DEFAULT_VERB_TAGS,
                variant: str = "regular") -> SentenceGraph:
    """Lift the word-level dependency parse onto encoder token positions."""
    view = sample.active_view(variant) if isinstance(sample, TrajectorySample) else sample
    verb_tags = frozenset(verb_tags)

    first = {w: ps[0] for w, ps in alignment.word_to_subwords.items()}

    dep_edges: set[tuple[int, int]] = set()
    for word in view.parse:
        if word.head != word.index and word.index in first and word.head in first:
            dep_edges.add(_edge(first[word.index], first[word.head]))

    subword_edges: set[tuple[int, int]] = set()
    for w, ps in alignment.word_to_subwords.items():
        for cont in ps[1:]:
            subword_edges.add(_edge(ps[0], cont))

    marker_edges: set[tuple[int, int]] = set()
    for kind, (onode, cnode) in alignment.marker_positions.items():
        anchor = alignment.entity_anchor(kind)
        for m in (onode, cnode):
            if m is not None:
                marker_edges.add(_edge(m, anchor))

    entity_nodes = {kind: frozenset(alignment.entity_subwords(kind))
                    for kind in alignment.entity_words}
    verb_nodes = frozenset(
        first[word.index] for word in view.parse
        if word.pos in verb_tags and word.index in first
    )

    nodes = set()
    for ps in alignment.word_to_subwords.values():
        nodes.update(ps)
    for onode, cnode in alignment.marker_positions.values():
        nodes.update(p for p in (onode, cnode) if p is not None)

    return SentenceGraph(
        n_tokens=len(alignment),
        dep_edges=dep_edges,
        subword_edges=subword_edges,
        marker_edges=marker_edges,
        entity_nodes=entity_nodes,
        verb_nodes=verb_nodes,
        nodes=frozenset(nodes),
    )


@dataclass
class TrajectorySubgraph:
    nodes: frozenset[int]
    edges: set[tuple[int, int]]
    path_nodes_per_entity: dict[str, frozenset[int]]
    fallback: bool = False


def _bfs(adj: dict[int, list[int]], sources: Iterable[int]) -> dict[int, int]:
    dist = {s: 0 for s in sources}
    queue = deque(dist)
    while queue:
        u = queue.popleft()
        for v in adj[u]:
            if v not in dist:
                dist[v] = dist[u] + 1
                queue.append(v)
    return dist


def entity_verb_paths(graph: SentenceGraph) -> TrajectorySubgraph:
    """Union of all minimal-length entity-to-nearest-verb paths.

    Per entity, the minimum is global over (entity node, verb node)
    pairs; every path achieving it contributes its nodes, so equidistant
    nearest verbs and tied routes are all kept. If there is no verb, or
    some entity cannot reach any verb, the subgraph degrades to the
    entity nodes alone with ``fallback=True``.
    """
    adj = graph.adjacency()
    all_entity = frozenset().union(*graph.entity_nodes.values())

    def fallback() -> TrajectorySubgraph:
        return TrajectorySubgraph(
            nodes=all_entity,
            edges={e for e in graph.edges() if e[0] in all_entity and e[1] in all_entity},
            path_nodes_per_entity={k: frozenset() for k in graph.entity_nodes},
            fallback=True,
        )

    if not graph.verb_nodes:
        return fallback()

    path_nodes: dict[str, frozenset[int]] = {}
    for kind, sources in graph.entity_nodes.items():
        dist_e = _bfs(adj, sources)
        reachable = [v for v in graph.verb_nodes if v in dist_e]
        if not reachable:
            return fallback()
        best = min(dist_e[v] for v in reachable)
        nodes: set[int] = set()
        for verb in (v for v in reachable if dist_e[v] == best):
            dist_v = _bfs(adj, [verb])
            nodes.update(u for u, de in dist_e.items()
                         if u in dist_v and de + dist_v[u] == best)
        path_nodes[kind] = frozenset(nodes)

    union = set().union(*path_nodes.values()) | all_entity
    edges = {e for e in graph.edges() if e[0] in union and e[1] in union}
    return TrajectorySubgraph(
        nodes=frozenset(union),
        edges=edges,
        path_nodes_per_entity=path_nodes,
        fallback=False,
    )


def make_mask(subgraph: TrajectorySubgraph, alignment: TokenAlignment,
              padded_length: int) -> list[int]:
    """Binary mask over encoder positions: 1 on subgraph tokens, with
    marker tokens inheriting the bit of their entity's first subword."""
    if padded_length < len(alignment):
        raise GraphError(f"padded_length {padded_length} < token count {len(alignment)}")
    bits = [0] * padded_length
    for n in subgraph.nodes:
        bits[n] = 1
    for kind, (onode, cnode) in alignment.marker_positions.items():
        inherited = bits[alignment.entity_anchor(kind)]
        for m in (onode, cnode):
            if m is not None:
                bits[m] = inherited
    return bits


# ---------------------------------------------------------------------------
# Distance diagnostics

def entity_word_ranges(alignment: TokenAlignment) -> dict[str, tuple[int, int]]:
    return {k: (min(ws), max(ws)) for k, ws in alignment.entity_words.items()}


def mean_pairwise_sentence_distance(alignment: TokenAlignment) -> float:
    """Mean number of words separating the three entity mentions."""
    ranges = entity_word_ranges(alignment)
    kinds = sorted(ranges)
    gaps = []
    for i in range(len(kinds)):
        for j in range(i + 1, len(kinds)):
            (a1, b1), (a2, b2) = ranges[kinds[i]], ranges[kinds[j]]
            if a1 > a2:
                (a1, b1), (a2, b2) = (a2, b2), (a1, b1)
            gaps.append(max(0, a2 - b1 - 1))
    return sum(gaps) / len(gaps)


def mean_pairwise_graph_distance(graph: SentenceGraph) -> float:
    """Mean shortest-path length between the three entity node sets."""
    adj = graph.adjacency()
    kinds = sorted(graph.entity_nodes)
    dists = []
    for i in range(len(kinds)):
        dist = _bfs(adj, graph.entity_nodes[kinds[i]])
        for j in range(i + 1, len(kinds)):
            targets = [dist[n] for n in graph.entity_nodes[kinds[j]] if n in dist]
            if not targets:
                raise GraphError(f"entities {kinds[i]} and {kinds[j]} are disconnected")
            dists.append(min(targets))
    return sum(dists) / len(dists)


# ---------------------------------------------------------------------------
# Debug export

def to_dot(graph: SentenceGraph, alignment: TokenAlignment,
           subgraph: Optional[TrajectorySubgraph] = None) -> str:
    """Graphviz rendering; entity nodes red, other subgraph nodes orange."""
    entity = set().union(*graph.entity_nodes.values())
    on_path = set(subgraph.nodes) - entity if subgraph is not None else set()
    lines = ["graph sentence {", "  node [style=filled, fillcolor=white];"]
    for n in sorted(graph.nodes):
        label = alignment.tokens[n].replace('"', r'\"')
        color = "red" if n in entity else "orange" if n in on_path else "white"
        lines.append(f'  n{n} [label="{label}", fillcolor={color}];')
    styles = [(graph.dep_edges, "solid"), (graph.subword_edges, "dashed"),
              (graph.marker_edges, "dotted")]
    for edges, style in styles:
        for u, v in sorted(edges):
            lines.append(f"  n{u} -- n{v} [style={style}];")
    lines.append("}")
    return "\n".join(lines) + "\n"
