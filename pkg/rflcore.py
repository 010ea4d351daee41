"""
Splitting a molecule into Ring-Free form, and Restoring it.

Splitting repeatedly perceives the non-nested rings of the working graph,
picks the ring with the fewest bond-sharing neighbours (ties: first in ring
order) and merges it away:

* a ring with no neighbours becomes a SuperAtom, a fresh ``[Sa]`` vertex
  that takes over every bond that used to attach to the ring;
* a ring with neighbours keeps only the bonds it shares with them.  One
  shared bond is marked as its SuperBond and the SuperBond's first vertex
  (its *tail*) takes over the ring's external bonds.  When every bond is
  shared (cubane faces, bridged bicycles) all bonds but the SuperBond go,
  and the next perception pass sees the neighbours without them.

The ring whose merge deletes a SuperBond's edge is that SuperBond's host;
restoring the host re-creates the edge.  A SuperBond edge no later merge
deletes stays in the skeleton and has no host.

Each external bond that is moved gets a ``BranchLink`` recording which ring
vertex it really belongs to.  A bond already routed through an earlier
SuperBond ("hanging" off its tail) is moved again without a new link when
the ring that deletes that SuperBond's edge is merged; the existing link
and the host chain are enough to put it back.

Restoring walks the rings in reverse merge order and undoes each merge.
Links are found through ``carrier``, the bond of the final structure that
holds the attachment, so restoration does not depend on vertex ids
surviving unchanged; text decoding relies on that.

Public API
----------
split(g, budget=...) -> SplitResult
restore(sr, step_callback=None) -> MolecularGraph
verify_roundtrip(g, budget=...) -> bool
super_bond_hosts(sr) -> dict[int, int]
original_atom_ids(sr) -> set[int]
"""

from __future__ import annotations

import itertools
import logging
from collections.abc import Callable
from dataclasses import dataclass, field, replace
from typing import Literal, NamedTuple

from errors import DanglingBranch, LeftoverBranch, MalformedGraph, UnknownSuper
from molgraph import SUPER_ATOM_LABEL, BondKey, BondOrder, MolecularGraph, isomorphic, pair
from ringsys import DEFAULT_CYCLE_BUDGET, Ring, non_nested_rings, ring_adjacency

SKELETON = -1

RingKind = Literal["super_atom", "super_bond"]

_log = logging.getLogger(__name__)


class BondRef(NamedTuple):
    """A bond of the final structure: ``section`` is a ring index or SKELETON."""

    section: int
    bond: BondKey


@dataclass(frozen=True)
class BranchLink:
    skeleton_bond: BondKey
    ring_bond: BondKey
    ring_index: int
    carrier: BondRef

    @property
    def tail(self) -> int:
        return self.skeleton_bond[0]

    @property
    def anchor(self) -> int:
        return self.ring_bond[0]


@dataclass
class StoredRing:
    """A merged ring: its atoms and bonds as they were at merge time."""

    ring: Ring
    graph: MolecularGraph
    kind: RingKind


@dataclass(frozen=True)
class MergeStep:
    rings: tuple[Ring, ...]
    gamma: tuple[int, ...]
    chosen: int
    kind: RingKind
    replacement: int | BondKey
    links: tuple[BranchLink, ...]

    @property
    def ring(self) -> Ring:
        return self.rings[self.chosen]


@dataclass
class SplitResult:
    skeleton: MolecularGraph
    rings: list[StoredRing] = field(default_factory=list)
    branches: list[BranchLink] = field(default_factory=list)
    super_atoms: list[tuple[int, int]] = field(default_factory=list)
    super_bonds: list[tuple[BondKey, int]] = field(default_factory=list)
    # SuperBond ring -> ring whose merge deleted its edge; absent when the edge is a skeleton bond
    hosts: dict[int, int] = field(default_factory=dict)
    steps: list[MergeStep] = field(default_factory=list, compare=False, repr=False)

    def super_atom_of(self, ring_index: int) -> int | None:
        for vertex, index in self.super_atoms:
            if index == ring_index:
                return vertex
        return None

    def super_bond_of(self, ring_index: int) -> BondKey | None:
        for key, index in self.super_bonds:
            if index == ring_index:
                return key
        return None


# ── splitting ────────────────────────────────────────────────────────────────

@dataclass
class _PendingLink:
    skeleton_bond: BondKey
    ring_bond: BondKey
    ring_index: int
    ident: int


class _Splitter:
    def __init__(self, g: MolecularGraph, budget: int):
        if g.super_atoms or g.super_bonds:
            raise MalformedGraph("Input already carries SuperAtom/SuperBond markers")
        self.work = g.copy()
        self.input_atoms = len(g.atoms)
        self.budget = budget
        self.next_id = g.max_id + 1
        self._counter = itertools.count()
        self.ident: dict[BondKey, int] = {key: next(self._counter) for key in self.work.bonds}
        self.final: dict[int, BondRef] = {}
        # pair -> {vertex the bond hangs on: SuperBond ring that put it there}
        self.hanging: dict[BondKey, dict[int, int]] = {}
        self.sb_pairs: dict[int, BondKey] = {}
        self.hosted: set[int] = set()
        self.pending: list[_PendingLink] = []
        self.raw_steps: list[tuple[tuple[Ring, ...], tuple[int, ...], int, RingKind, int | BondKey, list[int]]] = []
        self.result = SplitResult(skeleton=self.work)

    def run(self) -> SplitResult:
        limit = 4 * (len(self.work.bonds) + 1)
        while rings := non_nested_rings(self.work, self.budget):
            if len(self.result.rings) >= limit:
                raise MalformedGraph(f"Splitting did not converge after {limit} merges")
            self._merge(rings)

        for key in self.work.bonds:
            self.final[self.ident[key]] = BondRef(SKELETON, key)
        try:
            links = [
                BranchLink(p.skeleton_bond, p.ring_bond, p.ring_index, self.final[p.ident])
                for p in self.pending
            ]
        except KeyError as exc:
            raise MalformedGraph("A branch bond vanished during splitting") from exc
        self.result.branches = links
        self.result.steps = [
            MergeStep(rings, gamma, chosen, kind, replacement, tuple(links[i] for i in positions))
            for rings, gamma, chosen, kind, replacement, positions in self.raw_steps
        ]
        _log.debug(
            "Split %d atoms into %d rings, %d links, skeleton of %d atoms",
            self.input_atoms, len(self.result.rings), len(links), len(self.work.atoms),
        )
        return self.result

    def _ring_graph(self, ring: Ring) -> MolecularGraph:
        sub = MolecularGraph()
        for v in ring.vertices:
            atom = self.work.atoms[v]
            sub.add_atom(atom.label, atom.coords, atom_id=v)
            if v in self.work.super_atoms:
                sub.super_atoms.add(v)
        for u, v in ring.bonds:
            bond = self.work.bond(u, v)
            if bond is None:
                raise MalformedGraph(f"Ring bond ({u}, {v}) is missing")
            sub.add_bond(u, v, bond.order, is_super=bond.is_super)
        return sub

    def _choose_super_bond(self, rings: list[Ring], pick: int, gamma: dict[int, int], neighbors: frozenset[int]) -> BondKey:
        top = max(gamma[j] for j in neighbors)
        candidates = sorted(
            key
            for j in neighbors if gamma[j] == top
            for key in rings[pick].edge_set & rings[j].edge_set
        )
        fresh = [key for key in candidates if key not in self.work.super_bonds]
        return (fresh or candidates)[0]

    def _merge(self, rings: list[Ring]) -> None:
        adjacency = ring_adjacency(rings)
        pick = min(range(len(rings)), key=lambda i: (adjacency.gamma[i], i))
        ring = rings[pick]
        index = len(self.result.rings)
        kind: RingKind = "super_atom" if adjacency.gamma[pick] == 0 else "super_bond"

        others = [r for i, r in enumerate(rings) if i != pick]
        shared_vertices = frozenset().union(*(r.vertex_set for r in others))
        shared_edges = frozenset().union(*(r.edge_set for r in others))
        # endpoints of a SuperBond edge outside this ring must stay put
        pinned = {v for key in self.work.super_bonds if key not in ring.edge_set for v in key}
        exclusive = [v for v in ring.vertices if v not in shared_vertices and v not in pinned]
        exclusive_set = set(exclusive)
        sb: BondKey | None = None
        if kind == "super_atom":
            removed = ring.edge_set
        else:
            sb = self._choose_super_bond(rings, pick, adjacency.gamma, adjacency.neighbors[pick])
            removed = ring.edge_set - shared_edges
            if not removed:
                # every bond is shared (cages, bridged bicycles): keep only the SuperBond
                removed = ring.edge_set - {sb}
                _log.debug("Ring %s shares all its bonds; deleting all but %s", ring.vertices, sb)
        hosts_now = {c for c, key in self.sb_pairs.items() if key in removed and c not in self.hosted}

        self.result.rings.append(StoredRing(ring, self._ring_graph(ring), kind))

        moves: list[tuple[BondKey, int, int]] = []  # (pair, tail, vertex it leaves)
        positions: list[int] = []
        for w in ring.vertices:
            for z in sorted(self.work.neighbors(w)):
                if z in ring.vertex_set:
                    continue
                key = pair(z, w)
                carrier = self.hanging.get(key, {}).get(w)
                if carrier is not None:
                    if carrier in hosts_now:
                        moves.append((key, z, w))
                    elif w in exclusive_set:
                        raise MalformedGraph(f"Bond {key} hangs on a vertex that is being removed")
                    continue
                if w in exclusive_set:
                    positions.append(len(self.pending))
                    self.pending.append(_PendingLink((z, w), ring.bond_leaving(w), index, self.ident[key]))
                    moves.append((key, z, w))

        detached = [(key, z, w, self.work.bonds[key].order, self.ident.pop(key)) for key, z, w in moves]
        for key, _, _ in moves:
            self.work.remove_bond(*key)
        for key in removed:
            self.final[self.ident.pop(key)] = BondRef(index, key)
            self.work.remove_bond(*key)
            self.hanging.pop(key, None)
        for v in exclusive:
            if self.work.degree(v):
                raise MalformedGraph(f"Vertex {v} still has bonds after its ring was merged")
            self.work.remove_atom(v)
        if kind == "super_bond":
            for v in ring.vertices:
                if v in self.work.atoms and not self.work.degree(v):
                    self.work.remove_atom(v)
        for c in hosts_now:
            self.result.hosts[c] = index
        self.hosted |= hosts_now

        if kind == "super_atom":
            target = self.next_id
            self.next_id += 1
            self.work.add_atom(SUPER_ATOM_LABEL, atom_id=target)
            self.work.super_atoms.add(target)
            self.result.super_atoms.append((target, index))
            for a in ring.vertices:
                if a not in exclusive_set:
                    self.work.add_bond(a, target, BondOrder.SINGLE)
                    self.ident[pair(a, target)] = next(self._counter)
            replacement: int | BondKey = target
        else:
            assert sb is not None
            self.work.set_super(*sb)
            self.sb_pairs[index] = sb
            self.result.super_bonds.append((sb, index))
            target = sb[0]
            replacement = sb

        for key, z, w, order, ident in detached:
            new_key = pair(z, target)
            if new_key in self.work.bonds:
                raise MalformedGraph(f"Moving bond {key} onto {target} would duplicate a bond")
            self.work.add_bond(z, target, order)
            self.ident[new_key] = ident
            hangs = self.hanging.pop(key, {})
            hangs.pop(w, None)
            if kind == "super_bond":
                hangs[target] = index
            if hangs:
                self.hanging[new_key] = hangs

        self.raw_steps.append((
            tuple(rings), tuple(adjacency.gamma[i] for i in range(len(rings))),
            pick, kind, replacement, positions,
        ))
        _log.debug(
            "Merged ring %s (gamma=%d) as %s %s; %d moved, %d new links",
            ring.vertices, adjacency.gamma[pick], kind, replacement, len(moves), len(positions),
        )


def split(g: MolecularGraph, *, budget: int = DEFAULT_CYCLE_BUDGET) -> SplitResult:
    """Decompose *g* into skeleton, stored rings and branch links."""
    return _Splitter(g, budget).run()


# ── restoring ────────────────────────────────────────────────────────────────

def super_bond_hosts(sr: SplitResult) -> dict[int, int]:
    """Map each SuperBond ring to the later ring whose restoration re-creates its edge.

    SuperBonds whose edge stayed in the skeleton have no entry.
    """
    return dict(sr.hosts)


StepCallback = Callable[[int, int], None]


class _Restorer:
    """Undo merges one ring at a time.

    With ``learn_tails`` the links' ``skeleton_bond`` tails are unknown and
    get recorded in ``tails`` as links are consumed.
    """

    def __init__(self, sr: SplitResult, *, learn_tails: bool = False):
        self.sr = sr
        self.learn_tails = learn_tails
        self.graph = sr.skeleton.copy()
        self.ident: dict[BondKey, BondRef] = {key: BondRef(SKELETON, key) for key in self.graph.bonds}
        self.where: dict[BondRef, BondKey] = {ref: key for key, ref in self.ident.items()}
        self.links = sr.branches
        self.consumed = [False] * len(self.links)
        self.tails: list[int | None] = [None] * len(self.links)
        self.by_carrier: dict[BondRef, list[int]] = {}
        for i, link in enumerate(self.links):
            if not 0 <= link.ring_index < len(sr.rings):
                raise UnknownSuper(f"Branch link points at missing ring {link.ring_index}")
            self.by_carrier.setdefault(link.carrier, []).append(i)
        self.sa_of = {k: v for v, k in sr.super_atoms}
        self.sb_of = {k: key for key, k in sr.super_bonds}
        for k in range(len(sr.rings)):
            if (k in self.sa_of) == (k in self.sb_of):
                raise UnknownSuper(f"Ring {k} must be referenced by exactly one SuperAtom or SuperBond")
        self.hosts = super_bond_hosts(sr)
        for m, key in self.sb_of.items():
            host = self.hosts.get(m)
            if host is None:
                if key not in sr.skeleton.bonds:
                    raise UnknownSuper(f"SuperBond edge {key} of ring {m} is neither in the skeleton nor re-created by a ring")
            elif not m < host < len(sr.rings) or key not in sr.rings[host].ring.edge_set:
                raise UnknownSuper(f"Ring {host} cannot re-create the SuperBond edge {key} of ring {m}")
        stray = sorted(set(self.hosts) - set(self.sb_of))
        if stray:
            raise UnknownSuper(f"Host entries for ring(s) {stray}, which have no SuperBond")

    # ── bookkeeping ──────────────────────────────────────────────────────────

    def _chain_target(self, m: int, k: int) -> int | None:
        x = m
        while x in self.sb_of:
            host = self.hosts.get(x)
            if host is None:
                return None
            if host == k:
                return x
            if host > k:
                return None
            x = host
        return None

    def _detach(self, key: BondKey) -> tuple[BondOrder, BondRef]:
        bond = self.graph.remove_bond(*key)
        ref = self.ident.pop(key)
        del self.where[ref]
        return bond.order, ref

    def _attach(self, u: int, v: int, order: BondOrder, ref: BondRef) -> None:
        key = pair(u, v)
        if key in self.graph.bonds:
            raise DanglingBranch(f"Reattaching onto ({u}, {v}) would duplicate a bond")
        self.graph.add_bond(u, v, order)
        self.ident[key] = ref
        self.where[ref] = key

    def _consume(self, idx: int, z: int, k: int) -> int:
        link = self.links[idx]
        if link.anchor not in self.sr.rings[k].ring.vertex_set:
            raise DanglingBranch(f"Anchor {link.anchor} of a branch link is not on ring {k}")
        if not self.learn_tails and z != link.tail:
            raise DanglingBranch(
                f"Branch link expects tail {link.tail} but its bond ends at {z}"
            )
        self.consumed[idx] = True
        self.tails[idx] = z
        return link.anchor

    def _direct(self, ref: BondRef, k: int) -> int | None:
        for idx in self.by_carrier.get(ref, ()):
            if not self.consumed[idx] and self.links[idx].ring_index == k:
                return idx
        return None

    def _chained(self, ref: BondRef, k: int) -> int | None:
        for idx in self.by_carrier.get(ref, ()):
            if not self.consumed[idx]:
                m = self._chain_target(self.links[idx].ring_index, k)
                if m is not None:
                    return m
        return None

    def _add_ring(self, k: int) -> None:
        stored = self.sr.rings[k].graph
        for v in self.sr.rings[k].ring.vertices:
            if v not in self.graph.atoms:
                atom = stored.atoms[v]
                self.graph.add_atom(atom.label, atom.coords, atom_id=v)
                if v in stored.super_atoms:
                    self.graph.super_atoms.add(v)
        for u, v in self.sr.rings[k].ring.bonds:
            if not self.graph.has_bond(u, v):
                bond = stored.bond(u, v)
                if bond is None:
                    raise UnknownSuper(f"Stored ring {k} lacks its bond ({u}, {v})")
                self._attach(bond.src, bond.dst, bond.order, BondRef(k, pair(u, v)))

    # ── one ring ─────────────────────────────────────────────────────────────

    def _restore_super_atom(self, k: int) -> None:
        sa = self.sa_of[k]
        if sa not in self.graph.atoms:
            raise UnknownSuper(f"SuperAtom {sa} of ring {k} is not in the structure")
        ring_vertices = self.sr.rings[k].ring.vertex_set
        moves: list[tuple[int, int, BondOrder, BondRef]] = []
        tethers: list[BondKey] = []
        for z in sorted(self.graph.neighbors(sa)):
            key = pair(z, sa)
            if z in ring_vertices:
                tethers.append(key)
                continue
            ref = self.ident[key]
            idx = self._direct(ref, k)
            if idx is not None:
                target = self._consume(idx, z, k)
            else:
                m = self._chained(ref, k)
                if m is None:
                    raise DanglingBranch(f"Bond {key} on SuperAtom {sa} has no branch link")
                target = self.sb_of[m][0]
            moves.append((z, target, self.graph.bonds[key].order, ref))
        for z, _, _, _ in moves:
            self._detach(pair(z, sa))
        for key in tethers:
            self._detach(key)
        self.graph.remove_atom(sa)
        self._add_ring(k)
        for z, target, order, ref in moves:
            self._attach(z, target, order, ref)

    def _restore_super_bond(self, k: int) -> None:
        sb = self.sb_of[k]
        if not self.graph.has_bond(*sb):
            raise UnknownSuper(f"SuperBond {sb} of ring {k} is not in the structure")
        tail = sb[0]
        moves: list[tuple[int, int, BondOrder, BondRef]] = []
        taken: set[BondRef] = set()
        for idx, link in enumerate(self.links):
            if self.consumed[idx] or link.carrier in taken:
                continue
            key = self.where.get(link.carrier)
            if link.ring_index == k:
                if key is None or tail not in key:
                    raise DanglingBranch(f"Branch link of ring {k} is not attached to SuperBond tail {tail}")
                z = key[0] if key[1] == tail else key[1]
                target = self._consume(idx, z, k)
            else:
                m = self._chain_target(link.ring_index, k)
                if m is None or key is None or tail not in key:
                    continue
                z = key[0] if key[1] == tail else key[1]
                target = self.sb_of[m][0]
                if z == target:
                    continue
            taken.add(link.carrier)
            moves.append((z, target, self.graph.bonds[key].order, link.carrier))
        for z, _, _, _ in moves:
            self._detach(pair(z, tail))
        self._add_ring(k)
        for z, target, order, ref in moves:
            self._attach(z, target, order, ref)

    def run(self, step_callback: StepCallback | None = None) -> MolecularGraph:
        for k in reversed(range(len(self.sr.rings))):
            if k in self.sa_of:
                self._restore_super_atom(k)
            else:
                self._restore_super_bond(k)
            remaining = self.consumed.count(False)
            _log.debug("Restored ring %d; %d branch links left", k, remaining)
            if step_callback is not None:
                step_callback(k, remaining)
        leftover = self.consumed.count(False)
        if leftover:
            raise LeftoverBranch(f"{leftover} branch link(s) were never consumed")

        out = MolecularGraph()
        for v in sorted(self.graph.atoms):
            atom = self.graph.atoms[v]
            if atom.label == SUPER_ATOM_LABEL or v in self.graph.super_atoms:
                raise UnknownSuper(f"SuperAtom {v} survived restoration")
            out.add_atom(atom.label, atom.coords, atom_id=v)
        for key in sorted(self.graph.bonds):
            bond = self.graph.bonds[key]
            out.add_bond(bond.src, bond.dst, bond.order)
        return out


def restore(sr: SplitResult, *, step_callback: StepCallback | None = None) -> MolecularGraph:
    """Rebuild the molecule; *step_callback* gets ``(ring_index, links_left)`` after each ring."""
    return _Restorer(sr).run(step_callback)


def learn_tails(sr: SplitResult) -> SplitResult:
    """Fill in the tail vertex of every branch link by replaying restoration."""
    restorer = _Restorer(sr, learn_tails=True)
    restorer.run()
    branches = [
        replace(link, skeleton_bond=(tail, link.anchor))
        for link, tail in zip(sr.branches, restorer.tails)
    ]
    return replace(sr, branches=branches)


def verify_roundtrip(g: MolecularGraph, *, budget: int = DEFAULT_CYCLE_BUDGET) -> bool:
    return isomorphic(g, restore(split(g, budget=budget)))


def original_atom_ids(sr: SplitResult) -> set[int]:
    """Atom ids of the molecule *sr* came from, read off the stored parts."""
    supers = {v for v, _ in sr.super_atoms}
    ids = set(sr.skeleton.atoms) - supers
    for stored in sr.rings:
        ids |= stored.ring.vertex_set - supers
    return ids
