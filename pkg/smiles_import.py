"""
Import of a bounded SMILES subset.

Supported: organic-subset element symbols (B C N O P S F Cl Br I), branches,
ring-closure digits 1-9 and the bond symbols ``-``, ``=``, ``#``.  Anything
that needs chemistry beyond a labelled graph (aromatic lowercase atoms,
bracket atoms with charges or isotopes, stereo marks, ``%nn`` closures,
disconnected parts) is rejected with ``UnsupportedFeature`` rather than
guessed at.
"""

from __future__ import annotations

from config import Vocabulary, load_vocabulary
from errors import SmilesParseError, UnsupportedFeature
from molgraph import BondOrder, MolecularGraph

_TWO_LETTER = ("Cl", "Br")
_ONE_LETTER = frozenset("BCNOPSFI")
_UNSUPPORTED = {
    "[": "bracket atoms (charges, isotopes, explicit hydrogens)",
    "/": "stereo bonds",
    "\\": "stereo bonds",
    "@": "stereo centres",
    "%": "two-digit ring closures",
    ":": "aromatic bonds",
    "*": "wildcard atoms",
    ".": "disconnected structures",
    "$": "quadruple bonds",
    "0": "ring closure 0",
}


def import_smiles_subset(s: str, vocabulary: Vocabulary | None = None) -> MolecularGraph:
    vocab = vocabulary or load_vocabulary()
    g = MolecularGraph()
    previous: int | None = None
    pending: BondOrder | None = None
    branches: list[tuple[int, int]] = []  # (atom before '(', atom count at '(')
    open_rings: dict[str, tuple[int, BondOrder | None, int]] = {}
    i = 0
    while i < len(s):
        ch = s[i]
        symbol = next((t for t in _TWO_LETTER if s.startswith(t, i)), None)
        if symbol is None and ch in _ONE_LETTER:
            symbol = ch
        if symbol is not None:
            if symbol not in vocab:
                raise SmilesParseError(f"element {symbol} is not in the vocabulary", i)
            v = g.add_atom(symbol)
            if previous is not None:
                g.add_bond(previous, v, pending or BondOrder.SINGLE)
            elif pending is not None:
                raise SmilesParseError("bond symbol before the first atom", i)
            previous, pending = v, None
            i += len(symbol)
            continue

        if ch in _UNSUPPORTED:
            raise UnsupportedFeature(f"SMILES {_UNSUPPORTED[ch]} are outside the supported subset", i)
        if ch.islower() and ch in "bcnops":
            raise UnsupportedFeature("aromatic (lowercase) atoms are outside the supported subset", i)
        if ch in "-=#":
            if previous is None or pending is not None:
                raise SmilesParseError(f"misplaced bond symbol {ch!r}", i)
            pending = BondOrder.from_symbol(ch)
        elif ch.isdigit():
            if previous is None:
                raise SmilesParseError("ring closure before any atom", i)
            if ch in open_rings:
                partner, order, _ = open_rings.pop(ch)
                if partner == previous:
                    raise SmilesParseError(f"ring closure {ch} closes onto its own atom", i)
                if order is not None and pending is not None and order != pending:
                    raise SmilesParseError(f"ring closure {ch} has conflicting bond symbols", i)
                if g.has_bond(partner, previous):
                    raise SmilesParseError(f"ring closure {ch} duplicates an existing bond", i)
                g.add_bond(partner, previous, pending or order or BondOrder.SINGLE)
            else:
                open_rings[ch] = (previous, pending, i)
            pending = None
        elif ch == "(":
            if previous is None or pending is not None:
                raise SmilesParseError("branch must follow an atom", i)
            branches.append((previous, len(g.atoms)))
        elif ch == ")":
            if not branches:
                raise SmilesParseError("unbalanced ')'", i)
            if pending is not None:
                raise SmilesParseError("branch ends with a dangling bond", i)
            previous, atoms_at_open = branches.pop()
            if len(g.atoms) == atoms_at_open:
                raise SmilesParseError("empty branch", i)
        else:
            raise SmilesParseError(f"unexpected character {ch!r}", i)
        i += 1

    if not g.atoms:
        raise SmilesParseError("no atoms", 0)
    if pending is not None:
        raise SmilesParseError("dangling bond at end of input", len(s))
    if branches:
        raise SmilesParseError("unclosed branch", len(s))
    if open_rings:
        digit, (_, _, position) = min(open_rings.items(), key=lambda kv: kv[1][2])
        raise SmilesParseError(f"ring closure {digit} is never closed", position)
    return g
