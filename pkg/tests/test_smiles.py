"""
Tests for the SMILES subset importer.
"""

import pytest

from errors import SmilesParseError, UnsupportedFeature
from molgraph import BondOrder, isomorphic
from rflcore import verify_roundtrip
from smiles_import import import_smiles_subset
from tests.conftest import acene, chain_graph, cycle_graph, graph_from_edges


# ── accepted input ───────────────────────────────────────────────────────────

def test_linear_chain():
    assert isomorphic(import_smiles_subset("CCCC"), chain_graph(4))


def test_branches_and_bond_orders(chain):
    g = import_smiles_subset("CC(=O)CN")
    assert isomorphic(g, chain)
    assert g.bond(1, 2).order is BondOrder.DOUBLE


def test_triple_bond():
    g = import_smiles_subset("C#N")
    assert g.bond(0, 1).order is BondOrder.TRIPLE
    assert [a.label for a in g.atoms.values()] == ["C", "N"]


def test_two_letter_halogens():
    g = import_smiles_subset("ClCBr")
    assert [a.label for a in g.atoms.values()] == ["Cl", "C", "Br"]


def test_ring_closure():
    assert isomorphic(import_smiles_subset("C1CCCCC1"), cycle_graph(6))


def test_kekule_benzene(benzene):
    assert isomorphic(import_smiles_subset("C1=CC=CC=C1"), benzene)


def test_ring_closure_bond_symbol_on_either_side():
    a = import_smiles_subset("C=1CCCCC1")
    b = import_smiles_subset("C1CCCCC=1")
    assert a.bond(0, 5).order is BondOrder.DOUBLE
    assert b.bond(0, 5).order is BondOrder.DOUBLE


def test_fused_rings():
    assert isomorphic(import_smiles_subset("C1CCC2CCCCC2C1"), acene(2))


def test_ring_digit_can_be_reused():
    g = import_smiles_subset("C1CC1C1CC1")
    expected = graph_from_edges("CCCCCC", [(0, 1), (1, 2), (2, 0), (2, 3), (3, 4), (4, 5), (5, 3)])
    assert isomorphic(g, expected)


def test_imported_molecule_round_trips():
    assert verify_roundtrip(import_smiles_subset("OC(=O)C1=CC=C2C=CC=CC2=C1"))


# ── rejected input ───────────────────────────────────────────────────────────

@pytest.mark.parametrize(
    "text, position",
    [
        ("c1ccccc1", 0),
        ("C[NH3+]", 1),
        ("C/C=C/C", 1),
        ("C[C@H](O)N", 1),
        ("C%12CC%12", 1),
        ("CC.CC", 2),
        ("C1CC0", 4),
    ],
)
def test_unsupported_features(text, position):
    with pytest.raises(UnsupportedFeature) as exc_info:
        import_smiles_subset(text)
    assert exc_info.value.position == position


@pytest.mark.parametrize(
    "text, position",
    [
        ("", 0),
        ("=C", 0),
        ("C==C", 2),
        ("1CC", 0),
        ("C11", 2),
        ("C=1CC#1", 6),
        ("C12CC12", 6),
        ("(C)C", 0),
        ("C)C", 1),
        ("C(=)C", 3),
        ("C()C", 2),
        ("C(C", 3),
        ("CC=", 3),
        ("C1CC2CC", 1),
        ("CX", 1),
    ],
)
def test_parse_errors(text, position):
    with pytest.raises(SmilesParseError) as exc_info:
        import_smiles_subset(text)
    assert exc_info.value.position == position
