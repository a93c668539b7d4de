import random

import pytest

from helpers import ROOT, fig_sample, flute_sample, make_sample, moved_sample
from ltc.dataset import SampleView
from ltc.syntax_graph import (GraphError, TruncationError, build_graph,
                              entity_verb_paths, make_mask,
                              mean_pairwise_graph_distance,
                              mean_pairwise_sentence_distance, to_dot,
                              tokenize_with_markers)
from ltc.tokenization import MARKER_TOKENS, HashTokenizer, WholeWordTokenizer
from oracles import oracle_entity_path_nodes

WW = WholeWordTokenizer()


def analyze(sample, tokenizer=WW):
    alignment = tokenize_with_markers(sample, tokenizer)
    graph = build_graph(sample, alignment)
    return alignment, graph


# ---------------------------------------------------------------------------
# tokenize_with_markers

def test_marker_placement_wraps_entities():
    alignment, _ = analyze(moved_sample())
    toks = alignment.tokens
    p_open, p_close = MARKER_TOKENS["person"]
    l_open, l_close = MARKER_TOKENS["location"]
    t_open, t_close = MARKER_TOKENS["time"]
    assert toks.index(p_open) + 1 == toks.index("He")
    assert toks.index("He") + 1 == toks.index(p_close)
    assert toks.index(l_open) + 1 == toks.index("Paris")
    assert toks.index(t_open) + 1 == toks.index("1905")
    assert toks.index("1905") + 1 == toks.index(t_close)
    assert len(alignment.marker_positions) == 3
    # six marker tokens in total
    assert sum(1 for t in toks if t in (p_open, p_close, l_open, l_close, t_open, t_close)) == 6


def test_multiword_entity_wrapped_as_a_whole():
    alignment, _ = analyze(flute_sample())
    toks = alignment.tokens
    t_open, t_close = MARKER_TOKENS["time"]
    assert toks[toks.index(t_open) + 1:toks.index(t_close)] == ["From", "1946", "to", "1948"]


def test_subword_split_word_maps_to_three_positions():
    words = [
        ("Rebennack", "PROPN", 1, "nsubj"),
        ("performed", "VERB", ROOT, "root"),
        ("in", "ADP", 3, "case"),
        ("Orleans", "PROPN", 1, "obl"),
        ("in", "ADP", 5, "case"),
        ("1970", "NUM", 1, "obl"),
    ]
    sample = make_sample("reb", words, [0], [5], [3])
    tok = HashTokenizer(chunk=4)
    # chunk width 4: Rebe + ##nnac + ##k
    assert tok.subtokenize("Rebennack") == ["Rebe", "##nnac", "##k"]
    alignment = tokenize_with_markers(sample, tok)
    assert len(alignment.word_to_subwords[0]) == 3


def test_subword_concatenation_reproduces_sentence():
    sample = fig_sample()
    tok = HashTokenizer(chunk=3)
    alignment = tokenize_with_markers(sample, tok)
    rebuilt = "".join(
        tok.join([alignment.tokens[p] for p in alignment.word_to_subwords[w]])
        for w in sorted(alignment.word_to_subwords)
    )
    assert rebuilt == sample.sentence.replace(" ", "")


def test_empty_sentence_is_an_error():
    sample = moved_sample()
    empty = SampleView(sample.id, "", sample.triple, ())
    with pytest.raises(GraphError):
        tokenize_with_markers(empty, WW)


def test_truncation_never_cuts_an_entity():
    sample = fig_sample()
    with pytest.raises(TruncationError):
        tokenize_with_markers(sample, WholeWordTokenizer(max_len=10))


def test_tail_truncation_allowed_when_entities_fit():
    # entities early in the sentence; trailing punctuation can drop
    words = [
        ("He", "PRON", 1, "nsubj"),
        ("sang", "VERB", ROOT, "root"),
        ("in", "ADP", 3, "case"),
        ("Rome", "PROPN", 1, "obl"),
        ("in", "ADP", 5, "case"),
        ("1901", "NUM", 1, "obl"),
        ("with", "ADP", 7, "case"),
        ("joy", "NOUN", 1, "obl"),
        (".", "PUNCT", 1, "punct"),
    ]
    sample = make_sample("trunc", words, [0], [5], [3])
    alignment = tokenize_with_markers(sample, WholeWordTokenizer(max_len=13))
    assert len(alignment.tokens) == 13
    assert 8 not in alignment.word_to_subwords  # '.' fell off


# ---------------------------------------------------------------------------
# build_graph

def test_moved_fixture_graph_shape():
    sample = moved_sample()
    alignment, graph = analyze(sample)
    assert len(graph.dep_edges) == 6      # 7 words, single root
    assert len(graph.subword_edges) == 0  # whole-word tokenizer: no splits
    assert len(graph.marker_edges) == 6
    verbs = {alignment.tokens[v] for v in graph.verb_nodes}
    assert verbs == {"moved"}


def test_split_word_squares_with_star_edges():
    words = [
        ("Montparnasse", "PROPN", 1, "nsubj"),
        ("hosted", "VERB", ROOT, "root"),
        ("Vera", "PROPN", 1, "obj"),
        ("in", "ADP", 4, "case"),
        ("Paris", "PROPN", 1, "obl"),
        ("in", "ADP", 6, "case"),
        ("1925", "NUM", 1, "obl"),
    ]
    sample = make_sample("star", words, [2], [6], [4])
    tok = HashTokenizer(chunk=4)
    alignment = tokenize_with_markers(sample, tok)
    graph = build_graph(sample, alignment)
    k = len(alignment.word_to_subwords[0])
    assert k == 3  # Mont + ##parn + ##asse
    star = [e for e in graph.subword_edges
            if alignment.word_to_subwords[0][0] in e]
    assert len(star) == k - 1


def test_single_root_graph_is_connected():
    sample = fig_sample()
    alignment, graph = analyze(sample, HashTokenizer(chunk=4))
    adj = graph.adjacency()
    seen = {next(iter(graph.nodes))}
    stack = list(seen)
    while stack:
        u = stack.pop()
        for v in adj[u]:
            if v not in seen:
                seen.add(v)
                stack.append(v)
    assert seen == set(graph.nodes)


def test_dep_and_subword_edges_disjoint():
    sample = fig_sample()
    _, graph = analyze(sample, HashTokenizer(chunk=3))
    assert not (graph.dep_edges & graph.subword_edges)
    assert not (graph.dep_edges & graph.marker_edges)


# ---------------------------------------------------------------------------
# entity_verb_paths

def token_set(alignment, nodes):
    return {alignment.tokens[n] for n in nodes}


def test_moved_fixture_paths():
    sample = moved_sample()
    alignment, graph = analyze(sample)
    sub = entity_verb_paths(graph)
    assert not sub.fallback
    paths = {k: token_set(alignment, v) for k, v in sub.path_nodes_per_entity.items()}
    assert paths["person"] == {"He", "moved"}
    assert paths["location"] == {"Paris", "moved"}
    assert paths["time"] == {"1905", "moved"}
    assert token_set(alignment, sub.nodes) == {"He", "moved", "Paris", "1905"}


def test_no_verb_falls_back_to_entity_nodes():
    sample = flute_sample()  # copular sentence: no VERB tag
    alignment, graph = analyze(sample)
    assert not graph.verb_nodes
    sub = entity_verb_paths(graph)
    assert sub.fallback
    assert sub.nodes == frozenset().union(*graph.entity_nodes.values())


def test_equidistant_verbs_both_contribute():
    # person hangs between two verbs at equal distance through 'and'
    words = [
        ("Anna", "PROPN", 1, "nsubj"),
        ("sang", "VERB", ROOT, "root"),
        ("and", "CCONJ", 3, "cc"),
        ("danced", "VERB", 1, "conj"),
        ("in", "ADP", 5, "case"),
        ("Graz", "PROPN", 1, "obl"),
        ("in", "ADP", 7, "case"),
        ("1910", "NUM", 1, "obl"),
    ]
    sample = make_sample("tie", words, [0], [7], [5])
    alignment, graph = analyze(sample)
    # rewire: put the person equidistant from both verbs via a shared parent
    sub = entity_verb_paths(graph)
    # sanity through the oracle: implementation must match exhaustive enumeration
    adj = graph.adjacency()
    for kind, nodes in graph.entity_nodes.items():
        expected = oracle_entity_path_nodes(adj, sorted(nodes), sorted(graph.verb_nodes))
        assert sub.path_nodes_per_entity[kind] == frozenset(expected), kind


def test_tie_through_synthetic_graph():
    # e -- x -- v1 and e -- x -- v2: both shortest paths must contribute
    words = [
        ("v1", "VERB", 1, "advcl"),
        ("x", "NOUN", ROOT, "root"),
        ("v2", "VERB", 1, "advcl"),
        ("e", "PROPN", 1, "nsubj"),
        ("t", "NUM", 1, "obl"),
        ("l", "PROPN", 1, "obl"),
    ]
    sample = make_sample("synth-tie", words, [3], [4], [5])
    alignment, graph = analyze(sample)
    sub = entity_verb_paths(graph)
    person_path = token_set(alignment, sub.path_nodes_per_entity["person"])
    assert person_path == {"e", "x", "v1", "v2"}


def test_entity_nodes_always_in_subgraph():
    for sample in (fig_sample(), moved_sample(), flute_sample()):
        alignment, graph = analyze(sample, HashTokenizer(chunk=4))
        sub = entity_verb_paths(graph)
        assert frozenset().union(*graph.entity_nodes.values()) <= sub.nodes


def test_oracle_equivalence_on_random_trees():
    from gen import random_tree_sample
    rng = random.Random(20260810)
    checked_fallbacks = 0
    for trial in range(200):
        n = rng.randrange(4, 13)
        sample = random_tree_sample(rng, n)
        alignment, graph = analyze(sample)
        sub = entity_verb_paths(graph)
        adj = graph.adjacency()
        if not graph.verb_nodes:
            assert sub.fallback
            checked_fallbacks += 1
            continue
        for kind, nodes in graph.entity_nodes.items():
            expected = oracle_entity_path_nodes(adj, sorted(nodes), sorted(graph.verb_nodes))
            assert sub.path_nodes_per_entity[kind] == frozenset(expected), \
                f"trial {trial} entity {kind}"
    assert checked_fallbacks > 0


def test_subword_edges_never_lengthen_entity_verb_distance():
    # distances with subword stars must not exceed whole-word distances
    from ltc.syntax_graph import _bfs
    for chunk in (2, 3):
        sample = fig_sample()
        a_ww, g_ww = analyze(sample, WholeWordTokenizer())
        a_sw, g_sw = analyze(sample, HashTokenizer(chunk=chunk))
        for kind in ("person", "time", "location"):
            d_ww = _bfs(g_ww.adjacency(), g_ww.entity_nodes[kind])
            d_sw = _bfs(g_sw.adjacency(), g_sw.entity_nodes[kind])
            best_ww = min(d_ww[v] for v in g_ww.verb_nodes)
            best_sw = min(d_sw[v] for v in g_sw.verb_nodes)
            assert best_sw <= best_ww


# ---------------------------------------------------------------------------
# make_mask

def test_mask_definition_with_padding():
    sample = moved_sample()
    alignment, graph = analyze(sample)
    sub = entity_verb_paths(graph)
    mask = make_mask(sub, alignment, padded_length=len(alignment) + 3)
    assert len(mask) == len(alignment) + 3
    assert mask[-3:] == [0, 0, 0]
    for n in sub.nodes:
        assert mask[n] == 1


def test_markers_inherit_entity_bit():
    sample = moved_sample()
    alignment, graph = analyze(sample)
    sub = entity_verb_paths(graph)
    mask = make_mask(sub, alignment, len(alignment))
    for kind, (o, c) in alignment.marker_positions.items():
        assert mask[o] == 1 and mask[c] == 1


def test_fallback_mask_is_entities_and_markers_only():
    sample = flute_sample()
    alignment, graph = analyze(sample)
    sub = entity_verb_paths(graph)
    mask = make_mask(sub, alignment, len(alignment))
    expect = set().union(*graph.entity_nodes.values())
    expect |= {p for pair in alignment.marker_positions.values() for p in pair}
    assert {i for i, b in enumerate(mask) if b} == expect


def test_mask_idempotent_and_deterministic():
    sample = fig_sample()
    alignment, graph = analyze(sample)
    sub = entity_verb_paths(graph)
    m1 = make_mask(sub, alignment, 64)
    m2 = make_mask(sub, alignment, 64)
    assert m1 == m2


def test_mask_rejects_short_padding():
    sample = moved_sample()
    alignment, graph = analyze(sample)
    sub = entity_verb_paths(graph)
    with pytest.raises(GraphError):
        make_mask(sub, alignment, len(alignment) - 1)


# ---------------------------------------------------------------------------
# Distance witness and DOT export

def test_entity_scatter_versus_graph_proximity():
    sample = fig_sample()
    alignment, graph = analyze(sample)
    sent = mean_pairwise_sentence_distance(alignment)
    graph_d = mean_pairwise_graph_distance(graph)
    assert sent == pytest.approx(25 / 3)    # 8.33 words apart on average
    assert graph_d <= 3.0
    assert graph_d < sent


def test_dot_export_highlights_subgraph():
    sample = moved_sample()
    alignment, graph = analyze(sample)
    sub = entity_verb_paths(graph)
    dot = to_dot(graph, alignment, sub)
    assert dot.startswith("graph sentence {")
    assert "fillcolor=red" in dot      # entity nodes
    assert "fillcolor=orange" in dot   # the verb on the path
    assert dot.count(" -- ") == len(graph.edges())
