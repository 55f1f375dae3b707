"""Greedy densest-subgraph peeling baseline (triangles per node)."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import comb

from .corpus import Corpus
from .graph import Graph, build_co_activity_graph, triangle_count
from .mcdense import DensityConfig, FraudComponent, Partition, component_sort_key, partition_from_components


@dataclass(frozen=True)
class PeelTrace:
    initial_density: Fraction
    steps: tuple[tuple[str, Fraction], ...]
    best_index: int
    best_density: Fraction

    def best_nodes(self, g: Graph) -> frozenset[str]:
        removed = {node for node, _ in self.steps[: self.best_index]}
        return frozenset(u for u in g.nodes if u not in removed)


def _tri_density(triangles: int, n: int) -> Fraction:
    return Fraction(triangles, comb(n, 3)) if n >= 3 else Fraction(0)


def peel(g: Graph) -> PeelTrace:
    """Remove the least-connected node (minimum weighted degree, ties by id) until nothing is left.

    ``best_index`` counts how many nodes were removed before the densest
    prefix. Prefixes tied on triangles-per-node are separated by triangle
    density (two disjoint equal cliques: one clique beats their union); a
    remaining tie goes to the earliest, largest prefix.
    """
    nbrs = {u: set(g.neighbors(u)) for u in g.nodes}
    degree = {u: g.weighted_degree(u) for u in g.nodes}
    triangles = triangle_count(g)
    n = len(g)
    initial = Fraction(triangles, n) if n else Fraction(0)
    best_index, best = 0, (initial, _tri_density(triangles, n))
    steps = []
    alive = set(g.nodes)
    while alive:
        v = min(alive, key=lambda u: (degree[u], u))
        nv = nbrs[v]
        triangles -= sum(len(nbrs[a] & nv) for a in nv) // 2
        for a in nv:
            nbrs[a].discard(v)
            degree[a] -= g.weight(a, v)
        alive.discard(v)
        del nbrs[v]
        density = Fraction(triangles, len(alive)) if alive else Fraction(0)
        steps.append((v, density))
        key = (density, _tri_density(triangles, len(alive)))
        if key > best:
            best_index, best = len(steps), key
    return PeelTrace(initial, tuple(steps), best_index, best[0])


def densest_subgraph(g: Graph) -> frozenset[str]:
    if len(g) < 1:
        raise ValueError("densest_subgraph needs a non-empty graph")
    return peel(g).best_nodes(g)


def dsg_components(g: Graph, eta: int = 5) -> list[frozenset[str]]:
    found = []
    rest = g
    while len(rest):
        dense = densest_subgraph(rest)
        if len(dense) < eta:
            break
        found.append(dense)
        rest = rest.subgraph(set(rest.nodes) - dense)
    return found


def dsg_partition(corpus: Corpus, product_id: str, cfg: DensityConfig | None = None) -> Partition:
    """DSG counterpart of :func:`rankfraud.mcdense.partition_product` on the same graph."""
    cfg = cfg or DensityConfig()
    g = build_co_activity_graph(corpus, product_id, count_self=cfg.count_self)
    components = sorted(
        (FraudComponent.from_graph(g.subgraph(nodes)) for nodes in dsg_components(g, cfg.eta)),
        key=component_sort_key,
    )
    return partition_from_components(g.nodes, components, product_id)
