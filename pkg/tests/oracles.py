"""Independent oracles the implementation is checked against.

Everything here recomputes expected values from first principles:
exhaustive path enumeration, direct loss-term summation, finite
differences. None of it shares code with the package internals.
"""

from __future__ import annotations

import math
from itertools import combinations


def _bfs_dist(adj, source):
    dist = {source: 0}
    frontier = [source]
    while frontier:
        nxt = []
        for u in frontier:
            for v in adj[u]:
                if v not in dist:
                    dist[v] = dist[u] + 1
                    nxt.append(v)
        frontier = nxt
    return dist


def enumerate_shortest_paths(adj, start, goal):
    """Every shortest start->goal path, fully enumerated."""
    dist = _bfs_dist(adj, start)
    if goal not in dist:
        return []
    dist_goal = _bfs_dist(adj, goal)
    target = dist[goal]
    paths = []

    def walk(node, acc):
        if node == goal:
            paths.append(list(acc))
            return
        for v in adj[node]:
            if dist.get(v) == dist[node] + 1 and v in dist_goal \
                    and dist[node] + 1 + dist_goal[v] == target:
                acc.append(v)
                walk(v, acc)
                acc.pop()

    walk(start, [start])
    return paths


def oracle_entity_path_nodes(adj, entity_nodes, verb_nodes):
    """Union of node sets of all globally minimal entity-to-verb paths.

    Returns None when no (entity node, verb) pair is connected.
    """
    best = None
    all_paths = []
    for e in entity_nodes:
        for v in verb_nodes:
            for path in enumerate_shortest_paths(adj, e, v):
                if best is None or len(path) < best:
                    best = len(path)
                all_paths.append(path)
    if best is None:
        return None
    nodes = set()
    for path in all_paths:
        if len(path) == best:
            nodes.update(path)
    return nodes


def oracle_scl(vectors, labels, tau, average="anchor"):
    """Direct term-by-term supervised contrastive loss."""
    n = len(vectors)
    dot = lambda a, b: sum(x * y for x, y in zip(a, b))
    e = [[math.exp(dot(vectors[i], vectors[j]) / tau) for j in range(n)] for i in range(n)]
    anchor_terms = []
    pair_terms = []
    for i in range(n):
        positives = [j for j in range(n) if j != i and labels[j] == labels[i]]
        if not positives:
            continue
        denom = sum(e[i][k] for k in range(n) if k != i)
        terms = [-math.log(e[i][j] / denom) for j in positives]
        anchor_terms.append(sum(terms) / len(terms))
        pair_terms.extend(terms)
    if not anchor_terms:
        return 0.0
    if average == "pair":
        return sum(pair_terms) / len(pair_terms)
    return sum(anchor_terms) / len(anchor_terms)


def oracle_ce(logits_rows, gold):
    """Mean negative log softmax probability of the gold class."""
    total = 0.0
    for row, g in zip(logits_rows, gold):
        m = max(row)
        denom = sum(math.exp(x - m) for x in row)
        total += -(row[g] - m - math.log(denom))
    return total / len(gold)


def mean_pairwise_gap(positions):
    """Mean count of items strictly between position pairs."""
    gaps = [max(0, abs(a - b) - 1) for a, b in combinations(positions, 2)]
    return sum(gaps) / len(gaps)
