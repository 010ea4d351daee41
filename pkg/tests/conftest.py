"""
Shared fixtures and helpers for the RFL codec test suite.
"""

import random
from collections.abc import Iterable, Sequence
from pathlib import Path

import networkx as nx
import pytest

from molgraph import BondOrder, MolecularGraph, load_mgf

FIXTURES_DIR = Path(__file__).parent / "fixtures"

# reference encodings of the fixture molecules
TRICYCLIC_FULL = (
    "O=C-[Sa:0]-C-[Sa:2][ea]C-C=[conn]C-C=C-[conn]C=[ea]N-[conn]C=C-C-C-[ea]"
    "[ref:15][Sb:1][ref:14]-C=C-C=C-[ea]2,0,1;1,0,4;3,1,0;[END]"
)
TRICYCLIC_TOKENS = TRICYCLIC_FULL.replace("[ea]2,0,1;1,0,4;3,1,0;", "")
NAPHTHALENE_FULL = "[Sa:1][ea]C=C-C=C-C=C-[ea][ref:5][Sb:0][ref:6]-C=C-C=C-[ea][END]"
BENZENE_FULL = "[Sa:0][ea]C=C-C=C-C=C-[ea][END]"
BENZENE_TOKENS = "[Sa:0][ea]C=C-C=C-C=C-[END]"
CHAIN_FULL = "C-C(=O)-C-N[ea][END]"


def load_fixture(name: str) -> MolecularGraph:
    return load_mgf(FIXTURES_DIR / name)


def graph_from_edges(labels: Sequence[str] | str, edges: Iterable[tuple[int, ...]]) -> MolecularGraph:
    """Atoms 0..n-1 labelled from *labels*; edges are (u, v) or (u, v, order)."""
    g = MolecularGraph()
    for label in labels:
        g.add_atom(label)
    for u, v, *rest in edges:
        g.add_bond(u, v, BondOrder(rest[0]) if rest else BondOrder.SINGLE)
    return g


def cycle_graph(size: int, label: str = "C") -> MolecularGraph:
    return graph_from_edges([label] * size, [(i, (i + 1) % size) for i in range(size)])


def chain_graph(size: int, label: str = "C") -> MolecularGraph:
    return graph_from_edges([label] * size, [(i, i + 1) for i in range(size - 1)])


def fuse_ring(g: MolecularGraph, u: int, v: int, size: int, label: str = "C") -> list[int]:
    """Grow a ring of *size* onto the existing bond u-v; returns its vertices u..v."""
    path = [u] + [g.add_atom(label) for _ in range(size - 2)] + [v]
    for a, b in zip(path, path[1:]):
        g.add_bond(a, b)
    return path


def acene(n_rings: int) -> MolecularGraph:
    """Linearly fused hexagons: naphthalene for 2, anthracene for 3."""
    g = cycle_graph(6)
    u, v = 3, 4
    for _ in range(n_rings - 1):
        path = fuse_ring(g, u, v, 6)
        u, v = path[2], path[3]
    return g


def spiro_graph() -> MolecularGraph:
    """Two pentagons sharing vertex 0, with a methyl on each ring."""
    g = cycle_graph(5)
    ring = [0] + [g.add_atom("C") for _ in range(4)]
    for a, b in zip(ring, ring[1:] + ring[:1]):
        g.add_bond(a, b)
    for anchor in (2, 7):
        methyl = g.add_atom("CH3")
        g.add_bond(anchor, methyl)
    return g


def prism_graph(n: int) -> MolecularGraph:
    """Two n-gons joined rung by rung: prismane for 3, cubane for 4."""
    edges = [(i, (i + 1) % n) for i in range(n)]
    edges += [(n + i, n + (i + 1) % n) for i in range(n)]
    edges += [(i, n + i) for i in range(n)]
    return graph_from_edges("C" * (2 * n), edges)


def bridged_bicycle(bridge: int) -> MolecularGraph:
    """Bridgeheads 0 and 1 joined by three bridges of *bridge* atoms each.

    1 gives bicyclo[1.1.1]pentane, 2 bicyclo[2.2.2]octane.
    """
    g = graph_from_edges("CC", [])
    for _ in range(3):
        previous = 0
        for _ in range(bridge):
            v = g.add_atom("C")
            g.add_bond(previous, v)
            previous = v
        g.add_bond(previous, 1)
    return g


def triptycene_core() -> MolecularGraph:
    """Bicyclo[2.2.2]octane with a hexagon fused onto each bridge."""
    g = bridged_bicycle(2)
    for u, v in ((2, 3), (4, 5), (6, 7)):
        fuse_ring(g, u, v, 6)
    return g


def paraphenylene_ring(n_rings: int) -> MolecularGraph:
    """Hexagons linked para to para into one macrocycle."""
    g = MolecularGraph()
    for _ in range(n_rings):
        ring = [g.add_atom("C") for _ in range(6)]
        for a, b in zip(ring, ring[1:] + ring[:1]):
            g.add_bond(a, b)
    for i in range(n_rings):
        g.add_bond(6 * i + 3, 6 * ((i + 1) % n_rings))
    return g


def deep_caterpillar(length: int) -> MolecularGraph:
    """A spine 0..length-1 with one leaf per spine atom; the leaf ids come after the spine.

    Every spine atom's next neighbour has the smaller id, so the skeleton
    text nests one branch per spine atom.
    """
    g = chain_graph(length)
    for v in range(length - 1):
        g.add_bond(v, g.add_atom("O"))
    return g


def from_networkx(graph: nx.Graph, label: str = "C") -> MolecularGraph:
    g = MolecularGraph()
    mapping = {node: i for i, node in enumerate(sorted(graph.nodes))}
    for node in sorted(graph.nodes):
        g.add_atom(label, atom_id=mapping[node])
    for a, b in sorted(graph.edges):
        g.add_bond(mapping[a], mapping[b])
    return g


def random_connected_graph(seed: int, max_nodes: int = 10, max_edges: int = 14) -> MolecularGraph:
    """A connected simple graph: random spanning tree plus random extra edges."""
    rng = random.Random(seed)
    n = rng.randint(1, max_nodes)
    graph = nx.Graph()
    graph.add_nodes_from(range(n))
    for v in range(1, n):
        graph.add_edge(v, rng.randrange(v))
    extra = rng.randint(0, max(0, max_edges - graph.number_of_edges()))
    candidates = [(a, b) for a in range(n) for b in range(a + 1, n) if not graph.has_edge(a, b)]
    rng.shuffle(candidates)
    graph.add_edges_from(candidates[:extra])
    return from_networkx(graph)


def random_molecule(seed: int, max_nodes: int = 7, max_edges: int = 9) -> MolecularGraph:
    """``random_connected_graph`` with random C/N/O labels and single/double bonds."""
    rng = random.Random(seed ^ 0x5EED)
    shape = random_connected_graph(seed, max_nodes, max_edges)
    g = MolecularGraph()
    for v in sorted(shape.atoms):
        g.add_atom(rng.choice("CCCNO"), atom_id=v)
    for u, v in sorted(shape.bonds):
        g.add_bond(u, v, BondOrder(rng.choice((1, 1, 2))))
    return g


def shuffled(g: MolecularGraph, rng: random.Random | int) -> MolecularGraph:
    """*g* with its atom ids permuted at random; *rng* may be a seed."""
    if isinstance(rng, int):
        rng = random.Random(rng)
    ids = sorted(g.atoms)
    targets = ids[:]
    rng.shuffle(targets)
    return g.relabeled(dict(zip(ids, targets)))


@pytest.fixture
def tricyclic() -> MolecularGraph:
    return load_fixture("tricyclic.mgf")


@pytest.fixture
def benzene() -> MolecularGraph:
    return load_fixture("benzene.mgf")


@pytest.fixture
def naphthalene() -> MolecularGraph:
    return load_fixture("naphthalene.mgf")


@pytest.fixture
def chain() -> MolecularGraph:
    return load_fixture("chain.mgf")


@pytest.fixture
def log_dir(tmp_path, monkeypatch):
    """Point RFL_LOG_DIR at a scratch directory."""
    path = tmp_path / "logs"
    monkeypatch.setenv("RFL_LOG_DIR", str(path))
    return path
