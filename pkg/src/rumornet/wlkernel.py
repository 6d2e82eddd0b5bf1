"""Weisfeiler-Lehman subtree kernel over propagation structures.

At each refinement round a node's label becomes a canonical encoding of
(own label, sorted multiset of neighbor labels); the kernel is the sum
over rounds of the dot product of the two graphs' label histograms.
Canonicalization uses a shared compression table keyed on the exact
(label, neighbors) tuple, so there are no hash or delimiter collisions
and values are deterministic.
"""

from __future__ import annotations

import math
import sys
from collections import Counter
from dataclasses import dataclass, field

from .events import Event
from .windows import assign_windows

LABELINGS = ("depth", "uniform")


@dataclass(frozen=True)
class LabeledGraph:
    """Simple undirected graph with one label per node."""

    nodes: tuple[str, ...]
    edges: frozenset[tuple[str, str]]  # pairs stored sorted
    labels: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if not self.nodes:
            raise ValueError("LabeledGraph: empty graph")
        node_set = set(self.nodes)
        for u, v in self.edges:
            if u not in node_set or v not in node_set:
                raise ValueError(f"LabeledGraph: edge ({u}, {v}) references unknown node")
        missing = node_set - set(self.labels)
        if missing:
            raise ValueError(f"LabeledGraph: nodes without labels: {sorted(missing)[:3]}")

    def adjacency(self) -> dict[str, list[str]]:
        adj: dict[str, list[str]] = {n: [] for n in self.nodes}
        for u, v in self.edges:
            adj[u].append(v)
            adj[v].append(u)
        return adj


def make_graph(nodes, edges, labels) -> LabeledGraph:
    normalized = frozenset(tuple(sorted((u, v))) for u, v in edges)
    return LabeledGraph(nodes=tuple(nodes), edges=normalized, labels=dict(labels))


def event_to_graph(event: Event, labeling: str = "depth") -> LabeledGraph:
    """Propagation tree as an undirected graph, labeled by node depth
    (or uniformly)."""
    if labeling not in LABELINGS:
        raise ValueError(f"labeling must be one of {LABELINGS}, got {labeling!r}")
    depths = event.depths()
    nodes = [p.post_id for p in event.posts]
    edges = [(p.parent_id, p.post_id) for p in event.posts if p.parent_id is not None]
    if labeling == "depth":
        labels = {n: str(depths[n]) for n in nodes}
    else:
        labels = {n: "0" for n in nodes}
    return make_graph(nodes, edges, labels)


def _round_histograms(
    g1: LabeledGraph, g2: LabeledGraph, iterations: int
) -> list[tuple[Counter, Counter]]:
    """Per-round label histograms under a shared compression table."""
    compress: dict = {}

    def compact(key) -> int:
        if key not in compress:
            compress[key] = len(compress)
        return compress[key]

    adj1, adj2 = g1.adjacency(), g2.adjacency()
    labels1 = {n: compact(("init", g1.labels[n])) for n in g1.nodes}
    labels2 = {n: compact(("init", g2.labels[n])) for n in g2.nodes}
    rounds = [(Counter(labels1.values()), Counter(labels2.values()))]
    for _ in range(iterations):
        new1 = {
            n: compact((labels1[n], tuple(sorted(labels1[m] for m in adj1[n]))))
            for n in g1.nodes
        }
        new2 = {
            n: compact((labels2[n], tuple(sorted(labels2[m] for m in adj2[n]))))
            for n in g2.nodes
        }
        labels1, labels2 = new1, new2
        rounds.append((Counter(labels1.values()), Counter(labels2.values())))
    return rounds


def wl_kernel(g1: LabeledGraph, g2: LabeledGraph, iterations: int = 3) -> float:
    """Raw subtree kernel: sum over rounds 0..iterations of histogram
    dot products."""
    if iterations < 0:
        raise ValueError(f"iterations must be >= 0, got {iterations}")
    value = 0.0
    for h1, h2 in _round_histograms(g1, g2, iterations):
        for label, count in h1.items():
            value += count * h2.get(label, 0)
    return value


def normalized_similarity(g1: LabeledGraph, g2: LabeledGraph, iterations: int = 3) -> float:
    """k(g1,g2) / sqrt(k(g1,g1) k(g2,g2)), in [0, 1]."""
    k12 = wl_kernel(g1, g2, iterations)
    k11 = wl_kernel(g1, g1, iterations)
    k22 = wl_kernel(g2, g2, iterations)
    return k12 / math.sqrt(k11 * k22)


def _cumulative_graph(event: Event, window_of: dict[str, int], upto: int) -> LabeledGraph:
    kept = [p for p in event.posts if window_of[p.post_id] <= upto]
    depths = event.depths()
    nodes = [p.post_id for p in kept]
    kept_set = set(nodes)
    edges = [
        (p.parent_id, p.post_id)
        for p in kept
        if p.parent_id is not None and p.parent_id in kept_set
    ]
    return make_graph(nodes, edges, {n: str(depths[n]) for n in nodes})


def similarity_trace(
    event_a: Event,
    event_b: Event,
    unit_seconds: float,
    iterations: int = 3,
    labeling: str = "depth",
) -> list[float]:
    """Per-window similarity of the two evolving trees.

    Entry t compares the cumulative trees through window t; one final
    entry compares the complete trees. Trace length is the larger
    occupied-window count plus one.
    """
    wa = assign_windows(event_a, unit_seconds, max_windows=sys.maxsize)
    wb = assign_windows(event_b, unit_seconds, max_windows=sys.maxsize)
    last = max(max(wa.values()), max(wb.values()))
    ga_full = event_to_graph(event_a, labeling)
    gb_full = event_to_graph(event_b, labeling)
    trace = []
    for t in range(1, last + 1):
        ga = _cumulative_graph(event_a, wa, t)
        gb = _cumulative_graph(event_b, wb, t)
        trace.append(normalized_similarity(ga, gb, iterations))
    trace.append(normalized_similarity(ga_full, gb_full, iterations))
    return trace


def knn_predict(
    train: list[tuple[LabeledGraph, int]],
    test_graphs: list[LabeledGraph],
    iterations: int = 3,
) -> list[int]:
    """1-nearest-neighbor labels under normalized WL similarity.

    Ties go to the earliest training example, keeping results
    deterministic.
    """
    if not train:
        raise ValueError("knn_predict: empty training set")
    self_train = [wl_kernel(g, g, iterations) for g, _ in train]
    out = []
    for g in test_graphs:
        self_g = wl_kernel(g, g, iterations)
        best_sim = -1.0
        best_label = train[0][1]
        for (tg, label), k_tt in zip(train, self_train):
            sim = wl_kernel(g, tg, iterations) / math.sqrt(self_g * k_tt)
            if sim > best_sim:
                best_sim = sim
                best_label = label
        out.append(best_label)
    return out
