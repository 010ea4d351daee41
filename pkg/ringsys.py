"""
Ring perception.

``all_cycles`` lists every simple cycle once, rotated so the smallest vertex
comes first and the smaller of its two ring neighbours second.
``non_nested_rings`` keeps only the rings that are not envelopes of shorter
ones: a cycle is dropped when all of its edges already belong to strictly
shorter cycles.  On fused systems this leaves the individual rings and drops
the perimeters.  ``ring_adjacency`` counts, per ring, how many other rings it
shares at least one bond with; Splitting merges rings in ascending order of
that count.

Cycle enumeration is exhaustive, so a budget guards against dense graphs.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import StrEnum
from functools import cached_property
from typing import Sequence

import networkx as nx

from errors import BudgetExceeded
from molgraph import BondKey, MolecularGraph, pair

DEFAULT_CYCLE_BUDGET = 100_000

_log = logging.getLogger(__name__)


class Orientation(StrEnum):
    CLOCKWISE = "clockwise"
    TRAVERSAL = "traversal-order"


def canonical_rotation(cycle: Sequence[int]) -> tuple[int, ...]:
    """Rotate/reflect *cycle* to start at its smallest vertex, heading to the smaller neighbour."""
    start = cycle.index(min(cycle))
    rotated = tuple(cycle[start:]) + tuple(cycle[:start])
    if len(rotated) > 2 and rotated[-1] < rotated[1]:
        rotated = (rotated[0],) + tuple(reversed(rotated[1:]))
    return rotated


@dataclass(frozen=True)
class Ring:
    """A cycle stored in traversal order; ``bonds[i]`` joins ``vertices[i]`` to the next vertex."""

    vertices: tuple[int, ...]
    orientation: Orientation = Orientation.TRAVERSAL

    def __post_init__(self) -> None:
        if len(self.vertices) < 3:
            raise ValueError(f"A ring needs at least 3 vertices, got {self.vertices}")
        if len(set(self.vertices)) != len(self.vertices):
            raise ValueError(f"Ring repeats a vertex: {self.vertices}")

    @property
    def size(self) -> int:
        return len(self.vertices)

    @cached_property
    def bonds(self) -> tuple[BondKey, ...]:
        n = len(self.vertices)
        return tuple((self.vertices[i], self.vertices[(i + 1) % n]) for i in range(n))

    @cached_property
    def vertex_set(self) -> frozenset[int]:
        return frozenset(self.vertices)

    @cached_property
    def edge_set(self) -> frozenset[BondKey]:
        return frozenset(pair(u, v) for u, v in self.bonds)

    @cached_property
    def sort_key(self) -> tuple[int, tuple[int, ...]]:
        return (len(self.vertices), canonical_rotation(self.vertices))

    def bond_leaving(self, v: int) -> BondKey:
        """The ring bond that exits *v* in this ring's orientation."""
        return self.bonds[self.vertices.index(v)]


@dataclass(frozen=True)
class RingAdjacency:
    gamma: dict[int, int]
    neighbors: dict[int, frozenset[int]]


# ── enumeration ──────────────────────────────────────────────────────────────

def all_cycles(g: MolecularGraph, budget: int = DEFAULT_CYCLE_BUDGET) -> list[Ring]:
    """Every simple cycle of *g* once, sorted by (length, canonical sequence)."""
    seen: set[tuple[int, ...]] = set()
    for count, cycle in enumerate(nx.simple_cycles(g.to_networkx()), start=1):
        if count > budget:
            raise BudgetExceeded(f"More than {budget} cycles; raise --budget to continue")
        seen.add(canonical_rotation(cycle))
    rings = sorted((Ring(c) for c in seen), key=lambda r: r.sort_key)
    _log.debug("Enumerated %d cycles over %d atoms", len(rings), len(g.atoms))
    return rings


def signed_area(points: Sequence[tuple[float, float]]) -> float:
    n = len(points)
    return 0.5 * sum(
        points[i][0] * points[(i + 1) % n][1] - points[(i + 1) % n][0] * points[i][1]
        for i in range(n)
    )


def orient_cycle(g: MolecularGraph, vertices: Sequence[int]) -> Ring:
    """Clockwise when every vertex has coordinates, traversal order otherwise."""
    canon = canonical_rotation(vertices)
    coords = [g.atoms[v].coords for v in canon]
    if all(c is not None for c in coords):
        area = signed_area(coords)  # type: ignore[arg-type]
        if area > 0:
            return Ring((canon[0],) + tuple(reversed(canon[1:])), Orientation.CLOCKWISE)
        if area < 0:
            return Ring(canon, Orientation.CLOCKWISE)
    return Ring(canon, Orientation.TRAVERSAL)


def non_nested_rings(g: MolecularGraph, budget: int = DEFAULT_CYCLE_BUDGET) -> list[Ring]:
    """Cycles that are not covered by the edges of strictly shorter cycles, oriented."""
    kept: list[Ring] = []
    shorter: set[BondKey] = set()
    same_length: set[BondKey] = set()
    length = 0
    for ring in all_cycles(g, budget):
        if ring.size != length:
            shorter |= same_length
            same_length = set()
            length = ring.size
        if not ring.edge_set <= shorter:
            kept.append(ring)
        same_length |= ring.edge_set
    return [orient_cycle(g, ring.vertices) for ring in kept]


def ring_adjacency(rings: Sequence[Ring]) -> RingAdjacency:
    """γ per ring: the number of other rings sharing at least one bond with it."""
    if len({r.edge_set for r in rings}) != len(rings):
        raise ValueError("ring_adjacency needs pairwise distinct rings")
    neighbors: dict[int, set[int]] = {i: set() for i in range(len(rings))}
    for i in range(len(rings)):
        for j in range(i + 1, len(rings)):
            if rings[i].edge_set & rings[j].edge_set:
                neighbors[i].add(j)
                neighbors[j].add(i)
    return RingAdjacency(
        gamma={i: len(n) for i, n in neighbors.items()},
        neighbors={i: frozenset(n) for i, n in neighbors.items()},
    )


def is_acyclic(g: MolecularGraph) -> bool:
    if not g.atoms:
        return True
    return nx.is_forest(g.to_networkx())
