"""Min-cut based dense component detection.

A product's co-activity graph is split recursively along its global minimum
weighted cut for as long as both halves are strictly denser (in triangles)
than the whole and the whole is still sparser than ``tau``. Whatever stops
splitting is emitted as one component, presumed to belong to one worker.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable

from .corpus import Corpus
from .graph import Graph, build_co_activity_graph, edge_density, min_cut, triangle_density


def _exact(x) -> Fraction:
    # Fraction(0.5) is exact, but Fraction(0.1) is not what a user typing 0.1 means.
    return x if isinstance(x, Fraction) else Fraction(str(x))


@dataclass(frozen=True)
class DensityConfig:
    eta: int = 5
    tau: Fraction = Fraction(1, 2)
    count_self: bool = False
    split_disconnected: bool = True

    def __post_init__(self) -> None:
        object.__setattr__(self, "tau", _exact(self.tau))
        if int(self.eta) != self.eta or self.eta < 2:
            raise ValueError(f"eta must be an integer >= 2, got {self.eta!r}")
        if not 0 < self.tau <= 1:
            raise ValueError(f"tau must lie in (0, 1], got {self.tau}")


@dataclass(frozen=True)
class FraudComponent:
    accounts: frozenset[str]
    triangle_density: Fraction
    edge_density: Fraction
    product_id: str | None = None

    @classmethod
    def from_graph(cls, g: Graph) -> "FraudComponent":
        return cls(frozenset(g.nodes), triangle_density(g), edge_density(g), g.product_id)

    def __len__(self) -> int:
        return len(self.accounts)

    def to_dict(self) -> dict:
        return {
            "accounts": sorted(self.accounts),
            "size": len(self.accounts),
            "triangle_density": float(self.triangle_density),
            "triangle_density_exact": str(self.triangle_density),
            "edge_density": float(self.edge_density),
            "edge_density_exact": str(self.edge_density),
        }


@dataclass(frozen=True)
class Partition:
    product_id: str
    components: tuple[FraudComponent, ...]
    honest: frozenset[str] = field(default_factory=frozenset)

    def covered_accounts(self) -> set[str]:
        return set().union(*(c.accounts for c in self.components))


def component_sort_key(c: FraudComponent):
    return (-c.triangle_density, -len(c.accounts), min(c.accounts))


def mcdense(g: Graph, cfg: DensityConfig | None = None) -> list[FraudComponent]:
    """Run the recursive split on ``g`` and return the emitted components.

    With ``cfg.split_disconnected`` a graph made of several connected pieces
    is first broken into those pieces and each is handled on its own, so an
    isolated reviewer (density 0) cannot veto the split of everything else.
    """
    cfg = cfg or DensityConfig()
    out: list[FraudComponent] = []
    stack = [g]
    while stack:
        cur = stack.pop()
        if len(cur) < cfg.eta:
            continue
        if cfg.split_disconnected:
            pieces = cur.connected_components()
            if len(pieces) > 1:
                stack.extend(cur.subgraph(p) for p in reversed(pieces))
                continue
        cut = min_cut(cur)
        g1, g2 = cur.subgraph(cut.side_a), cur.subgraph(cut.side_b)
        rho = triangle_density(cur)
        if triangle_density(g1) > rho and triangle_density(g2) > rho and rho < cfg.tau:
            stack.extend((g2, g1))
        else:
            out.append(FraudComponent.from_graph(cur))
    return out


def partition_product(corpus: Corpus, product_id: str, cfg: DensityConfig | None = None) -> Partition:
    cfg = cfg or DensityConfig()
    g = build_co_activity_graph(corpus, product_id, count_self=cfg.count_self)
    components = sorted(mcdense(g, cfg), key=component_sort_key)
    return partition_from_components(g.nodes, components, product_id)


def partition_from_components(
    reviewers: Iterable[str], components: Iterable[FraudComponent], product_id: str
) -> Partition:
    components = tuple(components)
    claimed: set[str] = set()
    for c in components:
        if claimed & c.accounts:
            raise ValueError("components overlap")
        claimed |= c.accounts
    return Partition(product_id, components, frozenset(set(reviewers) - claimed))


def suspicious_components(p: Partition, min_density) -> list[FraudComponent]:
    min_density = _exact(min_density)
    return [c for c in p.components if c.triangle_density >= min_density]
