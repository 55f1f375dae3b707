"""Weighted co-activity graphs over reviewer accounts.

Edge weight between two accounts is the number of products both reviewed.
Densities are exact ``Fraction`` values; the global minimum cut is a
deterministic Stoer-Wagner run over a fixed (sorted) node order.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from math import comb
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .corpus import Corpus, CorpusError

UNKNOWN = "unknown"


class Graph:
    """Undirected weighted graph with integer weights and no self-loops."""

    def __init__(
        self,
        nodes: Iterable[str] = (),
        edges: Iterable[tuple[str, str, int]] = (),
        *,
        product_id: str | None = None,
        labels: Mapping[str, str] | None = None,
    ):
        self.nodes: tuple[str, ...] = tuple(sorted(set(nodes)))
        self.product_id = product_id
        adj: dict[str, dict[str, int]] = {u: {} for u in self.nodes}
        for u, v, w in edges:
            if u == v:
                raise ValueError(f"self-loop on {u!r}")
            if w < 1 or int(w) != w:
                raise ValueError(f"edge ({u!r}, {v!r}) needs a positive integer weight, got {w!r}")
            if u not in adj or v not in adj:
                raise ValueError(f"edge ({u!r}, {v!r}) references a node outside the graph")
            adj[u][v] = adj[v][u] = int(w)
        self._adj = adj
        self.labels: dict[str, str] = {u: (labels or {}).get(u, UNKNOWN) for u in self.nodes}

    def __len__(self) -> int:
        return len(self.nodes)

    def __contains__(self, node: object) -> bool:
        return node in self._adj

    def __repr__(self) -> str:
        return f"Graph(n={len(self.nodes)}, m={self.edge_count()}, product_id={self.product_id!r})"

    def neighbors(self, u: str) -> Mapping[str, int]:
        return self._adj[u]

    def weight(self, u: str, v: str) -> int:
        return self._adj[u].get(v, 0)

    def weighted_degree(self, u: str) -> int:
        return sum(self._adj[u].values())

    def edges(self) -> list[tuple[str, str, int]]:
        return [(u, v, w) for u in self.nodes for v, w in sorted(self._adj[u].items()) if u < v]

    def edge_count(self) -> int:
        return sum(len(nb) for nb in self._adj.values()) // 2

    def subgraph(self, nodes: Iterable[str]) -> "Graph":
        keep = set(nodes)
        missing = keep - self._adj.keys()
        if missing:
            raise ValueError(f"nodes not in graph: {sorted(missing)[:5]}")
        edges = [(u, v, w) for u, v, w in self.edges() if u in keep and v in keep]
        return Graph(keep, edges, product_id=self.product_id, labels={u: self.labels[u] for u in keep})

    def connected_components(self) -> list[tuple[str, ...]]:
        """Components as sorted node tuples, ordered by their smallest node."""
        seen: set[str] = set()
        out = []
        for start in self.nodes:
            if start in seen:
                continue
            stack, comp = [start], []
            seen.add(start)
            while stack:
                u = stack.pop()
                comp.append(u)
                for v in self._adj[u]:
                    if v not in seen:
                        seen.add(v)
                        stack.append(v)
            out.append(tuple(sorted(comp)))
        return out

    def weight_matrix(self) -> np.ndarray:
        index = {u: i for i, u in enumerate(self.nodes)}
        m = np.zeros((len(self.nodes), len(self.nodes)), dtype=np.int64)
        for u, v, w in self.edges():
            m[index[u], index[v]] = m[index[v], index[u]] = w
        return m

    def write_edgelist(self, path: str | Path) -> None:
        """Write ``u v w`` lines plus a ``<path>.labels`` sidecar of ``node label``."""
        path = Path(path)
        with open(path, "w", encoding="utf-8") as fh:
            for u, v, w in self.edges():
                fh.write(f"{u} {v} {w}\n")
        with open(path.with_name(path.name + ".labels"), "w", encoding="utf-8") as fh:
            for u in self.nodes:
                fh.write(f"{u} {self.labels[u]}\n")

    @classmethod
    def read_edgelist(cls, path: str | Path) -> "Graph":
        path = Path(path)
        edges = []
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    u, v, w = line.split()
                    edges.append((u, v, int(w)))
        labels: dict[str, str] = {}
        sidecar = path.with_name(path.name + ".labels")
        if sidecar.exists():
            with open(sidecar, encoding="utf-8") as fh:
                for line in fh:
                    if line.strip():
                        u, label = line.split(maxsplit=1)
                        labels[u] = label.strip()
        nodes = set(labels) | {u for u, _, _ in edges} | {v for _, v, _ in edges}
        return cls(nodes, edges, labels=labels)


def _co_review_edges(corpus: Corpus, nodes: set[str], skip_product: str | None = None) -> list[tuple[str, str, int]]:
    # Counting by product keeps the cost at sum(|reviewers|^2) instead of |nodes|^2 set intersections.
    counts: dict[tuple[str, str], int] = defaultdict(int)
    for product in sorted(corpus.products):
        if product == skip_product:
            continue
        present = [a for a in corpus.reviewers_of(product) if a in nodes]
        for u, v in combinations(present, 2):
            counts[(u, v)] += 1
    return [(u, v, w) for (u, v), w in sorted(counts.items())]


def build_co_activity_graph(corpus: Corpus, product_id: str, *, count_self: bool = True) -> Graph:
    """Co-activity graph of one product's reviewers.

    With ``count_self`` (the default) the product itself is one of the
    co-reviewed products, so every pair of its reviewers is joined with
    weight >= 1. Passing ``count_self=False`` counts only the *other*
    products a pair has in common; pairs sharing nothing else get no edge.
    """
    if product_id not in corpus.products:
        raise CorpusError(f"unknown product {product_id!r}")
    nodes = set(corpus.reviewers_of(product_id))
    edges = _co_review_edges(corpus, nodes, skip_product=None if count_self else product_id)
    return Graph(nodes, edges, product_id=product_id, labels=corpus.attributions)


def build_union_graph(corpus: Corpus, product_ids: Iterable[str]) -> Graph:
    """Deduplicated co-activity graph over every reviewer of ``product_ids``."""
    product_ids = set(product_ids)
    unknown = product_ids - corpus.products
    if unknown:
        raise CorpusError(f"unknown products: {', '.join(sorted(unknown)[:5])}")
    nodes = {a for p in product_ids for a in corpus.reviewers_of(p)}
    return Graph(nodes, _co_review_edges(corpus, nodes), labels=corpus.attributions)


def triangle_count(g: Graph) -> int:
    order = {u: i for i, u in enumerate(g.nodes)}
    total = 0
    for u in g.nodes:
        higher = {v for v in g.neighbors(u) if order[v] > order[u]}
        for v in higher:
            total += sum(1 for x in g.neighbors(v) if x in higher and order[x] > order[v])
    return total


def triangle_density(g: Graph) -> Fraction:
    n = len(g)
    if n < 3:
        return Fraction(0)
    return Fraction(triangle_count(g), comb(n, 3))


def edge_density(g: Graph) -> Fraction:
    n = len(g)
    if n < 2:
        return Fraction(0)
    return Fraction(g.edge_count(), comb(n, 2))


@dataclass(frozen=True)
class Cut:
    side_a: frozenset[str]
    side_b: frozenset[str]
    weight: int


def cut_weight(g: Graph, side: Iterable[str]) -> int:
    side = set(side)
    return sum(w for u, v, w in g.edges() if (u in side) != (v in side))


def min_cut(g: Graph) -> Cut:
    """Global minimum weighted cut.

    Disconnected graphs get a weight-0 cut that separates the component
    holding the smallest node from everything else. Among equal-weight cuts
    the first one Stoer-Wagner meets under sorted node order wins.
    """
    n = len(g)
    if n < 2:
        raise ValueError("min_cut needs at least 2 nodes")
    everything = frozenset(g.nodes)
    comps = g.connected_components()
    if len(comps) > 1:
        first = frozenset(comps[0])
        return Cut(first, everything - first, 0)

    w = g.weight_matrix()
    members: list[list[int]] = [[i] for i in range(n)]
    active = list(range(n))
    best_weight: int | None = None
    best_side: list[int] = []
    while len(active) > 1:
        k = len(active)
        sub = w[np.ix_(active, active)]
        attach = sub[0].copy()
        used = np.zeros(k, dtype=bool)
        used[0] = True
        prev, last = 0, 0
        for _ in range(k - 1):
            masked = np.where(used, -1, attach)
            nxt = int(np.argmax(masked))
            used[nxt] = True
            prev, last = last, nxt
            phase_weight = int(attach[nxt])
            attach += sub[nxt]
        s, t = active[prev], active[last]
        if best_weight is None or phase_weight < best_weight:
            best_weight = phase_weight
            best_side = list(members[t])
        members[s].extend(members[t])
        w[s, :] += w[t, :]
        w[:, s] += w[:, t]
        w[s, s] = 0
        active.remove(t)

    side_a = frozenset(g.nodes[i] for i in best_side)
    return Cut(side_a, everything - side_a, int(best_weight))
