"""
Molecular graph model shared by every other module.

A molecule is a simple labelled graph: atoms carry an opaque label from the
vocabulary ("C", "OEt", ...) and optional 2D coordinates, bonds carry an
order.  Bonds are stored once per unordered vertex pair but remember the
direction they were added in, because serialization cares about it.
Structural comparisons (``isomorphic``, ``canonical_form``) ignore direction,
coordinates and the SuperAtom/SuperBond markers.

Public API
----------
BondOrder, Atom, Bond, MolecularGraph
add_atom(g, label, coords=None) -> int
add_bond(g, src, dst, order=BondOrder.SINGLE) -> BondKey
isomorphic(g1, g2) -> bool
canonical_form(g) -> str
read_mgf(text, source) / write_mgf(g) / load_mgf(path) / save_mgf(g, path)

MGF
---
One record per line::

    mgf 1
    # comment
    a <id> <label> [<x> <y>]
    b <from> <to> <order>

Atoms must be declared before the bonds that use them.
"""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field
from enum import IntEnum
from pathlib import Path

import networkx as nx
from networkx.algorithms.isomorphism import categorical_edge_match, categorical_node_match

from config import Vocabulary, load_vocabulary
from errors import DuplicateAtom, DuplicateBond, MgfParseError, SelfLoop, UnknownVertex

BondKey = tuple[int, int]
Coords = tuple[float, float]

SUPER_ATOM_LABEL = "[Sa]"
MGF_HEADER = "mgf 1"

_log = logging.getLogger(__name__)


class BondOrder(IntEnum):
    SINGLE = 1
    DOUBLE = 2
    TRIPLE = 3

    @property
    def symbol(self) -> str:
        return _ORDER_SYMBOLS[self]

    @classmethod
    def from_symbol(cls, symbol: str) -> BondOrder:
        for order, sym in _ORDER_SYMBOLS.items():
            if sym == symbol:
                return order
        raise ValueError(f"Unknown bond symbol {symbol!r}")


_ORDER_SYMBOLS = {BondOrder.SINGLE: "-", BondOrder.DOUBLE: "=", BondOrder.TRIPLE: "#"}


def pair(u: int, v: int) -> BondKey:
    """Undirected key of the bond between *u* and *v*."""
    return (u, v) if u < v else (v, u)


@dataclass(frozen=True)
class Atom:
    id: int
    label: str
    coords: Coords | None = None


@dataclass(frozen=True)
class Bond:
    src: int
    dst: int
    order: BondOrder = BondOrder.SINGLE
    is_super: bool = False

    @property
    def key(self) -> BondKey:
        return (self.src, self.dst)

    @property
    def pair(self) -> BondKey:
        return pair(self.src, self.dst)

    def other(self, v: int) -> int:
        if v == self.src:
            return self.dst
        if v == self.dst:
            return self.src
        raise UnknownVertex(f"Vertex {v} is not an endpoint of bond {self.key}")


@dataclass
class MolecularGraph:
    """Mutable simple graph.  ``bonds`` is keyed by the undirected pair."""

    atoms: dict[int, Atom] = field(default_factory=dict)
    bonds: dict[BondKey, Bond] = field(default_factory=dict)
    super_atoms: set[int] = field(default_factory=set)
    super_bonds: set[BondKey] = field(default_factory=set)
    _adjacency: dict[int, set[int]] = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self) -> None:
        self._adjacency = {v: set() for v in self.atoms}
        for key, bond in self.bonds.items():
            if key != bond.pair:
                raise ValueError(f"Bond stored under {key} but joins {bond.pair}")
            for v in key:
                if v not in self._adjacency:
                    raise UnknownVertex(f"Bond {bond.key} references unknown vertex {v}")
            self._adjacency[bond.src].add(bond.dst)
            self._adjacency[bond.dst].add(bond.src)

    def __len__(self) -> int:
        return len(self.atoms)

    # ── construction ─────────────────────────────────────────────────────────

    @property
    def max_id(self) -> int:
        return max(self.atoms, default=-1)

    def add_atom(self, label: str, coords: Coords | None = None, *, atom_id: int | None = None) -> int:
        if atom_id is None:
            atom_id = self.max_id + 1
        elif atom_id in self.atoms:
            raise DuplicateAtom(f"Atom id {atom_id} already exists")
        elif atom_id < 0:
            raise ValueError(f"Atom ids must be non-negative, got {atom_id}")
        self.atoms[atom_id] = Atom(atom_id, label, coords)
        self._adjacency[atom_id] = set()
        return atom_id

    def add_bond(
        self,
        src: int,
        dst: int,
        order: BondOrder = BondOrder.SINGLE,
        *,
        is_super: bool = False,
    ) -> BondKey:
        for v in (src, dst):
            if v not in self.atoms:
                raise UnknownVertex(f"Unknown vertex {v}")
        if src == dst:
            raise SelfLoop(f"Bond from {src} to itself")
        key = pair(src, dst)
        if key in self.bonds:
            raise DuplicateBond(f"Vertices {src} and {dst} are already bonded")
        self.bonds[key] = Bond(src, dst, BondOrder(order), is_super)
        self._adjacency[src].add(dst)
        self._adjacency[dst].add(src)
        if is_super:
            self.super_bonds.add(key)
        return (src, dst)

    def remove_bond(self, u: int, v: int) -> Bond:
        key = pair(u, v)
        bond = self.bonds.pop(key, None)
        if bond is None:
            raise KeyError(f"No bond between {u} and {v}")
        self._adjacency[u].discard(v)
        self._adjacency[v].discard(u)
        self.super_bonds.discard(key)
        return bond

    def remove_atom(self, v: int) -> Atom:
        if v not in self.atoms:
            raise UnknownVertex(f"Unknown vertex {v}")
        for u in list(self._adjacency[v]):
            self.remove_bond(u, v)
        del self._adjacency[v]
        self.super_atoms.discard(v)
        return self.atoms.pop(v)

    def set_super(self, u: int, v: int, flag: bool = True) -> None:
        """Set or clear the SuperBond marker on an existing bond."""
        key = pair(u, v)
        bond = self.bonds[key]
        self.bonds[key] = Bond(bond.src, bond.dst, bond.order, flag)
        if flag:
            self.super_bonds.add(key)
        else:
            self.super_bonds.discard(key)

    # ── queries ──────────────────────────────────────────────────────────────

    def bond(self, u: int, v: int) -> Bond | None:
        return self.bonds.get(pair(u, v))

    def has_bond(self, u: int, v: int) -> bool:
        return pair(u, v) in self.bonds

    def neighbors(self, v: int) -> frozenset[int]:
        return frozenset(self._adjacency[v])

    def degree(self, v: int) -> int:
        return len(self._adjacency[v])

    def bonds_of(self, v: int) -> list[Bond]:
        return [self.bonds[pair(v, u)] for u in sorted(self._adjacency[v])]

    def is_super_atom(self, v: int) -> bool:
        return v in self.super_atoms

    def copy(self) -> MolecularGraph:
        return MolecularGraph(
            atoms=dict(self.atoms),
            bonds=dict(self.bonds),
            super_atoms=set(self.super_atoms),
            super_bonds=set(self.super_bonds),
        )

    def relabeled(self, mapping: dict[int, int]) -> MolecularGraph:
        """Copy with every vertex id replaced through *mapping* (a bijection)."""
        if len(set(mapping.values())) != len(mapping) or set(mapping) != set(self.atoms):
            raise ValueError("Relabeling must be a bijection over the graph's vertices")
        out = MolecularGraph()
        for v in sorted(self.atoms, key=mapping.__getitem__):
            atom = self.atoms[v]
            out.add_atom(atom.label, atom.coords, atom_id=mapping[v])
        for bond in self.bonds.values():
            out.add_bond(mapping[bond.src], mapping[bond.dst], bond.order, is_super=bond.is_super)
        out.super_atoms = {mapping[v] for v in self.super_atoms}
        return out

    def components(self) -> list[set[int]]:
        """Vertex sets of the connected components, ordered by smallest id."""
        return sorted(nx.connected_components(self.to_networkx()), key=min)

    def to_networkx(self) -> nx.Graph:
        graph = nx.Graph()
        for atom in self.atoms.values():
            graph.add_node(atom.id, label=atom.label)
        for bond in self.bonds.values():
            graph.add_edge(bond.src, bond.dst, order=int(bond.order))
        return graph


def add_atom(g: MolecularGraph, label: str, coords: Coords | None = None) -> int:
    return g.add_atom(label, coords)


def add_bond(g: MolecularGraph, src: int, dst: int, order: BondOrder = BondOrder.SINGLE) -> BondKey:
    return g.add_bond(src, dst, order)


# ── structural comparison ────────────────────────────────────────────────────

_LABEL_MATCH = categorical_node_match("label", None)
_ORDER_MATCH = categorical_edge_match("order", None)


def isomorphic(g1: MolecularGraph, g2: MolecularGraph) -> bool:
    """True when a label- and order-preserving vertex bijection exists."""
    if len(g1.atoms) != len(g2.atoms) or len(g1.bonds) != len(g2.bonds):
        return False
    if Counter(a.label for a in g1.atoms.values()) != Counter(a.label for a in g2.atoms.values()):
        return False
    if Counter(b.order for b in g1.bonds.values()) != Counter(b.order for b in g2.bonds.values()):
        return False
    return nx.is_isomorphic(
        g1.to_networkx(), g2.to_networkx(), node_match=_LABEL_MATCH, edge_match=_ORDER_MATCH
    )


def _refine(g: MolecularGraph, colors: dict[int, int]) -> dict[int, int]:
    classes = len(set(colors.values()))
    while True:
        signatures = {
            v: (
                colors[v],
                tuple(sorted((int(g.bonds[pair(v, u)].order), colors[u]) for u in g.neighbors(v))),
            )
            for v in g.atoms
        }
        ranks = {sig: i for i, sig in enumerate(sorted(set(signatures.values())))}
        refined = {v: ranks[signatures[v]] for v in g.atoms}
        if len(ranks) == classes:
            return refined
        colors, classes = refined, len(ranks)


_Certificate = tuple[tuple[str, ...], tuple[tuple[int, int, int], ...]]


def _certificate(g: MolecularGraph, order: list[int]) -> _Certificate:
    index = {v: i for i, v in enumerate(order)}
    labels = tuple(g.atoms[v].label for v in order)
    edges = tuple(sorted(
        (*pair(index[b.src], index[b.dst]), int(b.order)) for b in g.bonds.values()
    ))
    return labels, edges


class _CanonicalSearch:
    """Individualization-refinement over the colour classes of *g*.

    Two leaves with equal certificates give an automorphism.  At each node a
    child that an automorphism fixing the node's individualized vertices maps
    onto an explored sibling has an identical subtree, so it is skipped.
    """

    def __init__(self, g: MolecularGraph):
        self.g = g
        self.seen: dict[_Certificate, list[int]] = {}
        self.best: _Certificate | None = None
        self.generators: list[dict[int, int]] = []
        self.leaves = 0

    def run(self, colors: dict[int, int]) -> _Certificate:
        self._visit(colors, ())
        assert self.best is not None
        _log.debug("Canonical search: %d leaves, %d automorphisms", self.leaves, len(self.generators))
        return self.best

    def _leaf(self, order: list[int]) -> None:
        self.leaves += 1
        cert = _certificate(self.g, order)
        known = self.seen.get(cert)
        if known is not None:
            automorphism = dict(zip(known, order))
            if any(u != v for u, v in automorphism.items()):
                self.generators.append(automorphism)
            return
        self.seen[cert] = order
        if self.best is None or cert < self.best:
            self.best = cert

    def _orbit(self, v: int, fixed: tuple[int, ...]) -> set[int]:
        generators = [gen for gen in self.generators if all(gen[p] == p for p in fixed)]
        orbit = {v}
        frontier = [v]
        while frontier:
            x = frontier.pop()
            for gen in generators:
                y = gen[x]
                if y not in orbit:
                    orbit.add(y)
                    frontier.append(y)
        return orbit

    def _visit(self, colors: dict[int, int], fixed: tuple[int, ...]) -> None:
        colors = _refine(self.g, colors)
        cells: dict[int, list[int]] = {}
        for v, c in colors.items():
            cells.setdefault(c, []).append(v)
        ambiguous = [c for c in sorted(cells) if len(cells[c]) > 1]
        if not ambiguous:
            self._leaf(sorted(self.g.atoms, key=colors.__getitem__))
            return
        target = ambiguous[0]
        explored: list[int] = []
        for v in sorted(cells[target]):
            if explored and not self._orbit(v, fixed).isdisjoint(explored):
                continue
            split = {u: 2 * c + (1 if c == target and u != v else 0) for u, c in colors.items()}
            self._visit(split, fixed + (v,))
            explored.append(v)


def _label_colors(g: MolecularGraph) -> dict[int, int]:
    label_rank = {label: i for i, label in enumerate(sorted({a.label for a in g.atoms.values()}))}
    return {v: label_rank[a.label] for v, a in g.atoms.items()}


def canonical_form(g: MolecularGraph) -> str:
    """Deterministic string equal for two graphs iff they are isomorphic."""
    if not g.atoms:
        return "mgfc1||"
    labels, edges = _CanonicalSearch(g).run(_label_colors(g))
    return "mgfc1|{}|{}".format(",".join(labels), ",".join(f"{i}-{j}:{o}" for i, j, o in edges))


# ── MGF ──────────────────────────────────────────────────────────────────────

def _read_atom(g: MolecularGraph, fields: list[str], vocab: Vocabulary) -> None:
    if len(fields) not in (3, 5):
        raise ValueError("atom record needs 'a <id> <label> [<x> <y>]'")
    atom_id = int(fields[1])
    label = fields[2]
    if label not in vocab:
        raise ValueError(f"label {label!r} is not in the vocabulary")
    coords = (float(fields[3]), float(fields[4])) if len(fields) == 5 else None
    g.add_atom(label, coords, atom_id=atom_id)


def _read_bond(g: MolecularGraph, fields: list[str]) -> None:
    if len(fields) != 4:
        raise ValueError("bond record needs 'b <from> <to> <order>'")
    order = int(fields[3])
    if order not in (1, 2, 3):
        raise ValueError(f"bond order must be 1, 2 or 3, got {order}")
    g.add_bond(int(fields[1]), int(fields[2]), BondOrder(order))


def read_mgf(text: str, source: str = "<string>", *, vocabulary: Vocabulary | None = None) -> MolecularGraph:
    """Parse MGF text.  Every error names *source* and the offending line."""
    vocab = vocabulary or load_vocabulary()
    g = MolecularGraph()
    header_seen = False
    lineno = 0
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split()
        if not header_seen:
            if " ".join(fields) != MGF_HEADER:
                raise MgfParseError(f"expected header {MGF_HEADER!r}", source, lineno)
            header_seen = True
            continue
        try:
            if fields[0] == "a":
                _read_atom(g, fields, vocab)
            elif fields[0] == "b":
                _read_bond(g, fields)
            else:
                raise ValueError(f"unknown record type {fields[0]!r}")
        except ValueError as exc:
            raise MgfParseError(str(exc), source, lineno) from exc
    if not header_seen:
        raise MgfParseError(f"missing header {MGF_HEADER!r}", source, max(lineno, 1))
    return g


def write_mgf(g: MolecularGraph) -> str:
    lines = [MGF_HEADER]
    for v in sorted(g.atoms):
        atom = g.atoms[v]
        if atom.coords is None:
            lines.append(f"a {v} {atom.label}")
        else:
            lines.append(f"a {v} {atom.label} {atom.coords[0]!r} {atom.coords[1]!r}")
    for key in sorted(g.bonds):
        bond = g.bonds[key]
        lines.append(f"b {bond.src} {bond.dst} {int(bond.order)}")
    return "\n".join(lines) + "\n"


def load_mgf(path: str | Path, *, vocabulary: Vocabulary | None = None) -> MolecularGraph:
    path = Path(path)
    return read_mgf(path.read_text(encoding="utf-8"), str(path), vocabulary=vocabulary)


def save_mgf(g: MolecularGraph, path: str | Path) -> None:
    Path(path).write_text(write_mgf(g), encoding="utf-8", newline="\n")
    _log.debug("Wrote %d atoms / %d bonds to %s", len(g.atoms), len(g.bonds), path)
