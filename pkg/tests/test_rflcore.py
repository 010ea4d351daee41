"""
Tests for Splitting and Restoring.
"""

from dataclasses import replace

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from config import CorpusSpec
from corpus import generate_sample
from errors import DanglingBranch, LeftoverBranch, MalformedGraph, UnknownSuper
from molgraph import SUPER_ATOM_LABEL, MolecularGraph, isomorphic
from ringsys import is_acyclic
from rflcore import (
    SKELETON,
    BondRef,
    SplitResult,
    learn_tails,
    original_atom_ids,
    restore,
    split,
    super_bond_hosts,
    verify_roundtrip,
)
from tests.conftest import (
    acene,
    bridged_bicycle,
    chain_graph,
    cycle_graph,
    fuse_ring,
    graph_from_edges,
    paraphenylene_ring,
    prism_graph,
    random_connected_graph,
    spiro_graph,
    triptycene_core,
)


# ── helpers ──────────────────────────────────────────────────────────────────

def link_pairs(links):
    return {(link.skeleton_bond, link.ring_bond) for link in links}


def with_methyls(g: MolecularGraph, anchors) -> MolecularGraph:
    g = g.copy()
    for anchor in anchors:
        g.add_bond(anchor, g.add_atom("CH3"))
    return g


def phenanthrene() -> MolecularGraph:
    g = cycle_graph(6)
    path = fuse_ring(g, 3, 4, 6)
    fuse_ring(g, path[1], path[2], 6)
    return g


def biphenyl() -> MolecularGraph:
    g = cycle_graph(6)
    other = [g.add_atom("C") for _ in range(6)]
    for a, b in zip(other, other[1:] + other[:1]):
        g.add_bond(a, b)
    g.add_bond(0, other[0])
    return g


def steroid_like() -> MolecularGraph:
    g = cycle_graph(6)
    b = fuse_ring(g, 3, 4, 6)
    c = fuse_ring(g, b[1], b[2], 6)
    fuse_ring(g, c[2], c[3], 5)
    return g


def k4() -> MolecularGraph:
    return graph_from_edges("CCCC", [(a, b) for a in range(4) for b in range(a + 1, 4)])


MOLECULES = {
    "benzene": cycle_graph(6),
    "naphthalene": acene(2),
    "anthracene": acene(3),
    "tetracene": acene(4),
    "phenanthrene": phenanthrene(),
    "steroid": steroid_like(),
    "biphenyl": biphenyl(),
    "spiro": spiro_graph(),
    "cyclopropane": cycle_graph(3),
    "anthracene_decorated": with_methyls(acene(3), [0, 2, 4, 7, 9, 11]),
    "phenanthrene_decorated": with_methyls(phenanthrene(), [0, 3, 6, 7, 12]),
    "steroid_decorated": with_methyls(steroid_like(), [1, 4, 8, 9, 13, 15]),
    "disconnected": graph_from_edges(
        "CCCCCCOCN", [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 0), (6, 7), (7, 8)]
    ),
}


# ── three-ring molecule ──────────────────────────────────────────────────────

def test_tricyclic_merge_steps(tricyclic):
    sr = split(tricyclic)
    r1, r2, r3 = (0, 5, 4, 3, 2, 1), (9, 13, 12, 11, 10), (10, 11, 17, 16, 15, 14)
    first, second, third = sr.steps

    assert [r.vertices for r in first.rings] == [r2, r1, r3]
    assert first.gamma == (1, 0, 1)
    assert first.ring.vertices == r1
    assert first.kind == "super_atom"
    assert first.replacement == 18
    assert link_pairs(first.links) == {((7, 2), (2, 1)), ((8, 5), (5, 4))}

    assert [r.vertices for r in second.rings] == [r2, r3]
    assert second.gamma == (1, 1)
    assert second.ring.vertices == r2
    assert second.kind == "super_bond"
    assert second.replacement == (10, 11)
    assert link_pairs(second.links) == {((8, 9), (9, 13))}

    assert [r.vertices for r in third.rings] == [r3]
    assert third.gamma == (0,)
    assert third.replacement == 19
    assert third.links == ()


def test_tricyclic_split_result(tricyclic):
    sr = split(tricyclic)
    assert sr.super_atoms == [(18, 0), (19, 2)]
    assert sr.super_bonds == [((10, 11), 1)]
    assert [s.kind for s in sr.rings] == ["super_atom", "super_bond", "super_atom"]
    assert link_pairs(sr.branches) == {((7, 2), (2, 1)), ((8, 5), (5, 4)), ((8, 9), (9, 13))}
    assert all(link.tail == link.skeleton_bond[0] and link.anchor == link.ring_bond[0] for link in sr.branches)
    assert sorted(sr.skeleton.atoms) == [6, 7, 8, 18, 19]
    assert set(sr.skeleton.bonds) == {(6, 7), (7, 18), (8, 18), (8, 19)}
    assert sr.skeleton.atoms[18].label == SUPER_ATOM_LABEL
    assert super_bond_hosts(sr) == {1: 2}


def test_tricyclic_restore_consumes_links_ring_by_ring(tricyclic):
    sr = split(tricyclic)
    seen = []
    restored = restore(sr, step_callback=lambda k, left: seen.append((k, left)))
    assert seen == [(2, 3), (1, 2), (0, 0)]
    assert isomorphic(restored, tricyclic)
    assert set(restored.bonds) == set(tricyclic.bonds)
    assert restored.atoms == tricyclic.atoms


def test_tricyclic_carriers(tricyclic):
    sr = split(tricyclic)
    carriers = {link.ring_bond: link.carrier for link in sr.branches}
    assert carriers[(2, 1)] == BondRef(SKELETON, (7, 18))
    assert carriers[(5, 4)] == BondRef(SKELETON, (8, 18))
    assert carriers[(9, 13)] == BondRef(SKELETON, (8, 19))


# ── trivial shapes ───────────────────────────────────────────────────────────

def test_acyclic_molecule_is_its_own_skeleton(chain):
    sr = split(chain)
    assert sr.skeleton == chain
    assert sr.rings == [] and sr.branches == [] and sr.super_atoms == [] and sr.super_bonds == []


def test_single_ring_becomes_one_super_atom(benzene):
    sr = split(benzene)
    assert list(sr.skeleton.atoms) == [6]
    assert sr.skeleton.bonds == {}
    assert sr.skeleton.super_atoms == {6}
    assert sr.branches == []


def test_restore_without_rings_returns_skeleton():
    g = chain_graph(4)
    assert restore(SplitResult(skeleton=g)) == g


def test_single_atom_round_trip():
    assert verify_roundtrip(graph_from_edges("C", []))


def test_empty_graph_round_trip():
    assert verify_roundtrip(MolecularGraph())


def test_naphthalene_super_bond_hosted_by_second_ring(naphthalene):
    sr = split(naphthalene)
    assert sr.super_bonds == [((4, 5), 0)]
    assert sr.super_atoms == [(10, 1)]
    assert super_bond_hosts(sr) == {0: 1}


def test_anthracene_middle_ring_merges_second():
    sr = split(acene(3))
    assert [s.ring.vertices for s in sr.rings] == [(0, 1, 2, 3, 4, 5), (3, 4, 9, 8, 7, 6), (7, 8, 13, 12, 11, 10)]
    assert [s.kind for s in sr.rings] == ["super_bond", "super_bond", "super_atom"]
    assert super_bond_hosts(sr) == {0: 1, 1: 2}


def test_spiro_rings_become_tethered_super_atoms():
    g = spiro_graph()
    sr = split(g)
    assert [s.kind for s in sr.rings] == ["super_atom", "super_atom"]
    assert is_acyclic(sr.skeleton)
    assert isomorphic(restore(sr), g)


# ── round trips ──────────────────────────────────────────────────────────────

@pytest.mark.parametrize("name", sorted(MOLECULES))
def test_round_trip(name):
    g = MOLECULES[name]
    sr = split(g)
    assert is_acyclic(sr.skeleton)
    assert original_atom_ids(sr) == set(g.atoms)
    assert isomorphic(restore(sr), g)


@pytest.mark.parametrize("name", sorted(MOLECULES))
def test_each_merge_takes_minimum_gamma(name):
    for step in split(MOLECULES[name]).steps:
        assert step.gamma[step.chosen] == min(step.gamma)


def test_conservation_for_isolated_rings():
    g = with_methyls(biphenyl(), [3, 9])
    sr = split(g)
    ring_atoms = sum(s.ring.size for s in sr.rings)
    assert len(g.atoms) == len(sr.skeleton.atoms) - len(sr.super_atoms) + ring_atoms
    ring_bonds = sum(len(s.ring.bonds) for s in sr.rings)
    assert len(g.bonds) == len(sr.skeleton.bonds) + ring_bonds


def test_learn_tails_recovers_tails(tricyclic):
    sr = split(tricyclic)
    blanked = replace(sr, branches=[replace(link, skeleton_bond=(-1, link.anchor)) for link in sr.branches])
    assert learn_tails(blanked).branches == sr.branches


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), level=st.integers(1, 5), index=st.integers(0, 999))
def test_generated_molecules_round_trip(seed, level, index):
    g, _ = generate_sample(CorpusSpec(seed=seed, count_per_level=1), level, index)
    sr = split(g)
    assert is_acyclic(sr.skeleton)
    assert isomorphic(restore(sr), g)


# ── bridged cages ────────────────────────────────────────────────────────────

CAGES = {
    "k4": k4(),
    "bicyclo111": bridged_bicycle(1),
    "bicyclo222": bridged_bicycle(2),
    "prismane": prism_graph(3),
    "cubane": prism_graph(4),
    "triptycene": triptycene_core(),
    "paraphenylene3": paraphenylene_ring(3),
    "paraphenylene4": paraphenylene_ring(4),
}


@pytest.mark.parametrize("name", sorted(CAGES))
def test_cage_round_trip(name):
    g = CAGES[name]
    sr = split(g)
    assert is_acyclic(sr.skeleton)
    assert original_atom_ids(sr) == set(g.atoms)
    assert isomorphic(restore(sr), g)


@pytest.mark.parametrize("name", sorted(CAGES))
def test_cage_merges_take_minimum_gamma(name):
    for step in split(CAGES[name]).steps:
        assert step.gamma[step.chosen] == min(step.gamma)


def test_bicyclopentane_keeps_super_bond_in_skeleton():
    sr = split(bridged_bicycle(1))
    assert [s.ring.vertices for s in sr.rings] == [(0, 2, 1, 3)]
    assert sr.super_bonds == [((0, 2), 0)]
    assert super_bond_hosts(sr) == {}
    assert set(sr.skeleton.bonds) == {(0, 2), (0, 4), (1, 4)}
    assert sr.skeleton.bonds[(0, 2)].is_super
    assert 3 not in sr.skeleton.atoms


def test_k4_super_bond_is_hosted_by_last_triangle():
    sr = split(k4())
    assert [s.kind for s in sr.rings] == ["super_bond", "super_atom"]
    assert sr.super_bonds == [((0, 1), 0)]
    assert super_bond_hosts(sr) == {0: 1}


def test_random_graphs_round_trip():
    for seed in range(1000):
        g = random_connected_graph(seed)
        sr = split(g)
        assert is_acyclic(sr.skeleton), f"seed {seed}"
        assert isomorphic(restore(sr), g), f"seed {seed}"


def test_skeleton_super_bond_must_stay_in_skeleton():
    sr = split(bridged_bicycle(1))
    skeleton = sr.skeleton.copy()
    skeleton.remove_bond(0, 2)
    with pytest.raises(UnknownSuper):
        restore(replace(sr, skeleton=skeleton))


def test_host_must_contain_super_bond_edge():
    sr = split(acene(3))
    with pytest.raises(UnknownSuper):
        restore(replace(sr, hosts={0: 2, 1: 2}))
    with pytest.raises(UnknownSuper):
        restore(replace(sr, hosts={0: 0, 1: 2}))


# ── failures ─────────────────────────────────────────────────────────────────

def test_split_rejects_marked_input(benzene):
    marked = benzene.copy()
    marked.set_super(0, 1)
    with pytest.raises(MalformedGraph):
        split(marked)


def test_missing_link_is_dangling(tricyclic):
    sr = split(tricyclic)
    broken = replace(sr, branches=[l for l in sr.branches if l.ring_bond != (9, 13)])
    with pytest.raises(DanglingBranch):
        restore(broken)


def test_extra_link_is_left_over(tricyclic):
    sr = split(tricyclic)
    with pytest.raises(LeftoverBranch):
        restore(replace(sr, branches=sr.branches + [sr.branches[0]]))


def test_unreferenced_ring_is_unknown_super(tricyclic):
    sr = split(tricyclic)
    with pytest.raises(UnknownSuper):
        restore(replace(sr, super_atoms=sr.super_atoms[1:]))


def test_link_to_missing_ring_is_unknown_super(tricyclic):
    sr = split(tricyclic)
    bad = replace(sr.branches[0], ring_index=7)
    with pytest.raises(UnknownSuper):
        restore(replace(sr, branches=[bad] + sr.branches[1:]))
