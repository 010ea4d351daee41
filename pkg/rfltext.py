"""
RFL text: tokens, documents, emission and parsing.

A document is a single line with no whitespace::

    <skeleton> ([ea] <ring section>)* ([ea] <branch table>)? [END]

Skeleton
    Depth-first walk of the skeleton from the smallest vertex id, children in
    ascending id order.  Every child except the last goes in parentheses.
    Bond orders are always written (``-``, ``=``, ``#``); components are
    joined with ``.``.  SuperAtoms appear as ``[Sa:k]`` where ``k`` is the
    ring section that replaces them.  A SuperBond edge that no later ring
    deletes stays a skeleton bond and is written ``[Sb:m]``; its order is
    read from ring ``m``'s section.

Ring section
    The ring's atoms in stored orientation, each followed by the bond to the
    next atom; the last bond closes back onto the first atom.  A ring bond
    that some branch link anchors on is followed by one ``[conn]`` per link.
    A bond whose restoration re-creates the SuperBond of ring ``m`` is written
    ``[Sb:m]`` instead of its order.

Atoms are numbered by first appearance across the whole document; later
appearances of the same atom are written ``[ref:n]``.

Branch table (full mode only)
    ``s,r,i;`` per branch link: ``s`` is the document bond index (skeleton
    bonds in emission order, then ring-section bonds in order), ``r`` the
    ring section and ``i`` the bond index inside it.  Tokens mode omits the
    table; the same triples can travel in a ``.branch`` sidecar, one
    ``s r i`` line per link.
"""

from __future__ import annotations

import logging
import re
from collections import Counter
from dataclasses import dataclass, field
from enum import StrEnum

from config import Vocabulary, load_vocabulary
from errors import (
    BranchArityMismatch,
    FileFormatError,
    GrammarError,
    LexError,
    MalformedGraph,
    ReservedTokenMisuse,
    UnresolvedSuperRef,
)
from molgraph import SUPER_ATOM_LABEL, BondKey, BondOrder, MolecularGraph, pair
from ringsys import Orientation, Ring
from rflcore import SKELETON, BondRef, BranchLink, SplitResult, StoredRing, learn_tails, super_bond_hosts

BranchEntry = tuple[int, int, int]

_log = logging.getLogger(__name__)


class TokenKind(StrEnum):
    ATOM = "atom"
    BOND = "bond"
    BRANCH_OPEN = "branch_open"
    BRANCH_CLOSE = "branch_close"
    SUPER_ATOM = "super_atom"
    SUPER_BOND = "super_bond"
    EA = "ea"
    CONN = "conn"
    END = "end"
    REF = "ref"
    DOT = "dot"


class Mode(StrEnum):
    TOKENS = "tokens"
    FULL = "full"


EA = "[ea]"
CONN = "[conn]"
END = "[END]"

_ATOM_LIKE = frozenset({TokenKind.ATOM, TokenKind.SUPER_ATOM, TokenKind.REF})


@dataclass(frozen=True)
class Token:
    kind: TokenKind
    text: str
    position: int = field(default=-1, compare=False)

    @property
    def index(self) -> int:
        """The number inside ``[Sa:k]``, ``[Sb:k]`` or ``[ref:n]``."""
        return int(self.text[self.text.index(":") + 1:-1])

    @property
    def order(self) -> BondOrder:
        return BondOrder.from_symbol(self.text)


@dataclass
class RflDocument:
    skeleton_tokens: list[Token]
    ring_sections: list[list[Token]]
    branch_table: list[BranchEntry]
    mode: Mode

    def serialize(self) -> str:
        parts = [t.text for t in self.skeleton_tokens]
        for section in self.ring_sections:
            parts.append(EA)
            parts.extend(t.text for t in section)
        if self.mode is Mode.FULL:
            parts.append(EA)
            parts.extend(f"{s},{r},{i};" for s, r, i in self.branch_table)
        parts.append(END)
        return "".join(parts)

    @property
    def conn_count(self) -> int:
        return sum(1 for section in self.ring_sections for t in section if t.kind is TokenKind.CONN)


# ── lexing ───────────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class _Lexeme:
    kind: str  # a TokenKind value, or "number" / "comma" / "semi" inside the branch table
    text: str
    position: int


_INDEXED_RE = re.compile(r"\[(Sa|Sb|ref):(0|[1-9][0-9]*)\]")
_INDEXED_KINDS = {"Sa": TokenKind.SUPER_ATOM, "Sb": TokenKind.SUPER_BOND, "ref": TokenKind.REF}
_SINGLE = {
    "(": TokenKind.BRANCH_OPEN, ")": TokenKind.BRANCH_CLOSE, ".": TokenKind.DOT,
    "-": TokenKind.BOND, "=": TokenKind.BOND, "#": TokenKind.BOND,
}
_FIXED = {EA: TokenKind.EA, CONN: TokenKind.CONN, END: TokenKind.END}


def _labels_by_initial(vocab: Vocabulary) -> dict[str, tuple[str, ...]]:
    table: dict[str, list[str]] = {}
    for label in vocab.labels_longest_first:
        table.setdefault(label[0], []).append(label)
    return {k: tuple(v) for k, v in table.items()}


def _lex(text: str, vocab: Vocabulary) -> list[_Lexeme]:
    labels = _labels_by_initial(vocab)
    out: list[_Lexeme] = []
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == "[":
            close = text.find("]", i)
            if close < 0:
                raise LexError("unterminated bracket token", i)
            body = text[i:close + 1]
            if body in _FIXED:
                out.append(_Lexeme(_FIXED[body], body, i))
            elif (match := _INDEXED_RE.fullmatch(body)) is not None:
                out.append(_Lexeme(_INDEXED_KINDS[match.group(1)], body, i))
            elif body in ("[Sa]", "[Sb]"):
                raise ReservedTokenMisuse(f"{body} must carry a ring index, e.g. {body[:-1]}:0]", i)
            else:
                raise LexError(f"unknown bracket token {body!r}", i)
            i = close + 1
        elif ch in _SINGLE:
            out.append(_Lexeme(_SINGLE[ch], ch, i))
            i += 1
        elif ch.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            out.append(_Lexeme("number", text[i:j], i))
            i = j
        elif ch == ",":
            out.append(_Lexeme("comma", ch, i))
            i += 1
        elif ch == ";":
            out.append(_Lexeme("semi", ch, i))
            i += 1
        else:
            for label in labels.get(ch, ()):
                if text.startswith(label, i):
                    out.append(_Lexeme(TokenKind.ATOM, label, i))
                    i += len(label)
                    break
            else:
                raise LexError(f"no vocabulary label matches {text[i:i + 8]!r}", i)
    return out


def token_texts(text: str, vocabulary: Vocabulary | None = None) -> list[str]:
    """Surface strings of *text*'s tokens, for exact-match comparison."""
    return [lx.text for lx in _lex(_strip_newline(text), vocabulary or load_vocabulary())]


def _strip_newline(text: str) -> str:
    return text[:-1] if text.endswith("\n") else text


# ── parsing ──────────────────────────────────────────────────────────────────

class _SkeletonParser:
    """skeleton := ε | chain ('.' chain)* ; chain := atom branch* (bond chain)? ;
    branch := '(' bond chain ')' ; bond := '-' | '=' | '#' | [Sb:k]+

    Branch nesting is tracked with a counter, so depth is bounded by the
    input length only.
    """

    def __init__(self, lexemes: list[_Lexeme], end_position: int):
        self.lexemes = lexemes
        self.end_position = end_position
        self.i = 0

    def _peek(self) -> _Lexeme | None:
        return self.lexemes[self.i] if self.i < len(self.lexemes) else None

    def _at(self, *kinds: str) -> bool:
        lx = self._peek()
        return lx is not None and lx.kind in kinds

    def _position(self) -> int:
        lx = self._peek()
        return lx.position if lx is not None else self.end_position

    def _fail(self, what: str, expected: set[str]) -> GrammarError:
        lx = self._peek()
        found = repr(lx.text) if lx is not None else "end of skeleton"
        return GrammarError(f"{what}, found {found}", self._position(), frozenset(expected))

    def _atom(self) -> None:
        if not self._at(TokenKind.ATOM, TokenKind.SUPER_ATOM):
            lx = self._peek()
            if lx is not None and lx.kind == TokenKind.SUPER_BOND:
                raise ReservedTokenMisuse("[Sb:k] stands for a bond and cannot take the place of an atom", lx.position)
            raise self._fail("expected an atom in the skeleton", {"atom", "[Sa:k]"})
        self.i += 1

    def _bond(self) -> None:
        if self._at(TokenKind.BOND):
            self.i += 1
            return
        if not self._at(TokenKind.SUPER_BOND):
            raise self._fail("expected a bond", {"-", "=", "#", "[Sb:k]"})
        while self._at(TokenKind.SUPER_BOND):
            self.i += 1

    def _chain(self) -> None:
        depth = 0
        while True:
            self._atom()
            if self._at(TokenKind.BRANCH_OPEN):
                self.i += 1
                self._bond()
                depth += 1
                continue
            if self._at(TokenKind.BOND, TokenKind.SUPER_BOND):
                self._bond()
                continue
            # the current chain is over: close branches until one continues
            while True:
                if depth == 0:
                    return
                if not self._at(TokenKind.BRANCH_CLOSE):
                    raise self._fail("unclosed branch", {")"})
                self.i += 1
                depth -= 1
                if self._at(TokenKind.BRANCH_OPEN):
                    self.i += 1
                    self._bond()
                    depth += 1
                    break
                if self._at(TokenKind.BOND, TokenKind.SUPER_BOND):
                    self._bond()
                    break

    def parse(self) -> None:
        if not self.lexemes:
            return
        self._chain()
        while self._at(TokenKind.DOT):
            self.i += 1
            self._chain()
        lx = self._peek()
        if lx is not None:
            if lx.kind == TokenKind.CONN:
                raise GrammarError("[conn] may only follow a ring bond", lx.position, frozenset({"bond", "(", ")", ".", "[ea]", "[END]"}))
            raise self._fail("unexpected token in the skeleton", {"bond", "(", ")", ".", "[ea]", "[END]"})


def _check_ring_section(lexemes: list[_Lexeme], start: int, atoms_before: int) -> int:
    """Validate one ring section; returns the number of new atoms it introduces."""
    if not lexemes:
        raise GrammarError("empty ring section", start, frozenset({"atom", "[Sa:k]", "[ref:n]"}))
    new_atoms = 0
    seen_refs: set[int] = set()
    i = 0
    n_atoms = 0
    while i < len(lexemes):
        lx = lexemes[i]
        if lx.kind not in _ATOM_LIKE:
            raise GrammarError(f"expected a ring atom, found {lx.text!r}", lx.position, frozenset({"atom", "[Sa:k]", "[ref:n]"}))
        if lx.kind == TokenKind.REF:
            number = int(lx.text[5:-1])
            if number >= atoms_before + new_atoms:
                raise GrammarError(f"[ref:{number}] points past the atoms seen so far", lx.position)
            if number in seen_refs:
                raise GrammarError(f"atom {number} appears twice in one ring", lx.position)
            seen_refs.add(number)
        else:
            seen_refs.add(atoms_before + new_atoms)
            new_atoms += 1
        n_atoms += 1
        i += 1
        if i >= len(lexemes):
            raise GrammarError("ring section must end with the closing bond", lx.position + len(lx.text), frozenset({"bond", "[Sb:k]"}))
        lx = lexemes[i]
        if lx.kind == TokenKind.BOND:
            i += 1
        elif lx.kind == TokenKind.SUPER_BOND:
            while i < len(lexemes) and lexemes[i].kind == TokenKind.SUPER_BOND:
                i += 1
        else:
            raise GrammarError(f"expected a ring bond, found {lx.text!r}", lx.position, frozenset({"bond", "[Sb:k]"}))
        while i < len(lexemes) and lexemes[i].kind == TokenKind.CONN:
            i += 1
    if n_atoms < 3:
        raise GrammarError("a ring section needs at least three atoms", start)
    return new_atoms


def _parse_table(lexemes: list[_Lexeme], end_position: int) -> list[BranchEntry]:
    entries: list[BranchEntry] = []
    expected = ("number", "comma", "number", "comma", "number", "semi")
    i = 0
    while i < len(lexemes):
        values = []
        for want in expected:
            if i >= len(lexemes):
                raise GrammarError("truncated branch table entry", end_position, frozenset({want}))
            lx = lexemes[i]
            if lx.kind != want:
                raise GrammarError(f"bad branch table entry near {lx.text!r}", lx.position, frozenset({want}))
            if want == "number":
                values.append(int(lx.text))
            i += 1
        entries.append((values[0], values[1], values[2]))
    return entries


def parse(text: str, vocabulary: Vocabulary | None = None) -> RflDocument:
    """Tokenize and validate *text*.  One trailing LF is allowed."""
    text = _strip_newline(text)
    lexemes = _lex(text, vocabulary or load_vocabulary())

    end_at = next((i for i, lx in enumerate(lexemes) if lx.kind == TokenKind.END), None)
    if end_at is None:
        raise GrammarError("document must end with [END]", len(text), frozenset({END}))
    if end_at != len(lexemes) - 1:
        raise GrammarError("unexpected input after [END]", lexemes[end_at + 1].position, frozenset({"end of input"}))
    end_position = lexemes[end_at].position

    sections: list[list[_Lexeme]] = [[]]
    starts = [0]
    for lx in lexemes[:end_at]:
        if lx.kind == TokenKind.EA:
            sections.append([])
            starts.append(lx.position + len(lx.text))
        else:
            sections[-1].append(lx)

    table_kinds = {"number", "comma", "semi"}
    mode = Mode.TOKENS
    table: list[BranchEntry] = []
    if len(sections) > 1 and all(lx.kind in table_kinds for lx in sections[-1]):
        mode = Mode.FULL
        table = _parse_table(sections.pop(), end_position)
        starts.pop()
    for section in sections:
        for lx in section:
            if lx.kind in table_kinds:
                raise GrammarError(f"unexpected {lx.text!r} outside the branch table", lx.position)

    skeleton = sections[0]
    next_start = starts[1] - len(EA) if len(starts) > 1 else end_position
    _SkeletonParser(skeleton, next_start).parse()

    atoms = sum(1 for lx in skeleton if lx.kind in (TokenKind.ATOM, TokenKind.SUPER_ATOM))
    for section, start in zip(sections[1:], starts[1:]):
        atoms += _check_ring_section(section, start, atoms)

    def to_tokens(chunk: list[_Lexeme]) -> list[Token]:
        return [Token(TokenKind(lx.kind), lx.text, lx.position) for lx in chunk]

    return RflDocument(
        skeleton_tokens=to_tokens(skeleton),
        ring_sections=[to_tokens(s) for s in sections[1:]],
        branch_table=table,
        mode=mode,
    )


# ── emission ─────────────────────────────────────────────────────────────────

class _Emitter:
    def __init__(self, sr: SplitResult, conn: bool):
        self.sr = sr
        self.conn = conn
        self.numbers: dict[int, int] = {}
        self.doc_bonds: dict[BondRef, int] = {}
        self.sa_ring = {v: k for v, k in sr.super_atoms}
        self.hosts = super_bond_hosts(sr)
        # SuperBond edges that survive as skeleton bonds, written [Sb:m] in the skeleton
        self.resident: dict[BondKey, list[int]] = {}
        for key, m in sorted(sr.super_bonds, key=lambda t: t[1]):
            if m not in self.hosts:
                self.resident.setdefault(key, []).append(m)

    def _atom(self, v: int, label: str) -> Token:
        if v in self.numbers:
            return Token(TokenKind.REF, f"[ref:{self.numbers[v]}]")
        self.numbers[v] = len(self.numbers)
        if v in self.sa_ring:
            return Token(TokenKind.SUPER_ATOM, f"[Sa:{self.sa_ring[v]}]")
        return Token(TokenKind.ATOM, label)

    def _bond_index(self, ref: BondRef) -> None:
        self.doc_bonds[ref] = len(self.doc_bonds)

    def _skeleton_bond(self, u: int, v: int) -> list[Token]:
        key = pair(u, v)
        if key in self.resident:
            return [Token(TokenKind.SUPER_BOND, f"[Sb:{m}]") for m in self.resident[key]]
        return [Token(TokenKind.BOND, self.sr.skeleton.bonds[key].order.symbol)]

    def skeleton(self) -> list[Token]:
        g = self.sr.skeleton
        tokens: list[Token] = []
        visited: set[int] = set()
        close = Token(TokenKind.BRANCH_CLOSE, ")")

        for root in sorted(g.atoms):
            if root in visited:
                continue
            if tokens:
                tokens.append(Token(TokenKind.DOT, "."))
            # (vertex, parent, wrapped in parentheses), or None for a pending ")"
            stack: list[tuple[int, int | None, bool] | None] = [(root, None, False)]
            while stack:
                item = stack.pop()
                if item is None:
                    tokens.append(close)
                    continue
                v, parent, wrapped = item
                if v in visited:
                    raise MalformedGraph(f"Skeleton has a cycle through {parent} and {v}")
                if parent is not None:
                    if wrapped:
                        tokens.append(Token(TokenKind.BRANCH_OPEN, "("))
                    tokens.extend(self._skeleton_bond(parent, v))
                    self._bond_index(BondRef(SKELETON, pair(parent, v)))
                visited.add(v)
                tokens.append(self._atom(v, g.atoms[v].label))
                children = sorted(u for u in g.neighbors(v) if u != parent)
                for n in reversed(range(len(children))):
                    wrapped = n < len(children) - 1
                    if wrapped:
                        stack.append(None)
                    stack.append((children[n], v, wrapped))
        return tokens

    def sections(self) -> list[list[Token]]:
        stacked: dict[tuple[int, BondKey], list[int]] = {}
        for key, m in self.sr.super_bonds:
            if m in self.hosts:
                stacked.setdefault((self.hosts[m], key), []).append(m)
        conns = Counter(
            (link.ring_index, self.sr.rings[link.ring_index].ring.bonds.index(link.ring_bond))
            for link in self.sr.branches
        ) if self.conn else Counter()

        out = []
        for j, stored in enumerate(self.sr.rings):
            tokens: list[Token] = []
            for i, (u, v) in enumerate(stored.ring.bonds):
                tokens.append(self._atom(u, stored.graph.atoms[u].label))
                refs = sorted(stacked.get((j, pair(u, v)), ()))
                if refs:
                    tokens.extend(Token(TokenKind.SUPER_BOND, f"[Sb:{m}]") for m in refs)
                else:
                    tokens.append(Token(TokenKind.BOND, stored.graph.bond(u, v).order.symbol))
                self._bond_index(BondRef(j, pair(u, v)))
                tokens.extend(Token(TokenKind.CONN, CONN) for _ in range(conns[(j, i)]))
            out.append(tokens)
        return out

    def table(self) -> list[BranchEntry]:
        return [
            (
                self.doc_bonds[link.carrier],
                link.ring_index,
                self.sr.rings[link.ring_index].ring.bonds.index(link.ring_bond),
            )
            for link in self.sr.branches
        ]


def build_document(sr: SplitResult, mode: Mode = Mode.FULL, *, conn: bool = True) -> RflDocument:
    if not conn and mode is Mode.FULL:
        raise ValueError("Full-mode documents always carry [conn] markers")
    emitter = _Emitter(sr, conn)
    skeleton = emitter.skeleton()
    sections = emitter.sections()
    table = emitter.table() if mode is Mode.FULL else []
    return RflDocument(skeleton, sections, table, mode)


def emit(sr: SplitResult, mode: Mode = Mode.FULL, *, conn: bool = True) -> str:
    """Serialize *sr* as one RFL line (no trailing newline)."""
    return build_document(sr, Mode(mode), conn=conn).serialize()


def branch_entries(sr: SplitResult) -> list[BranchEntry]:
    """The branch table triples, e.g. for a tokens-mode sidecar."""
    emitter = _Emitter(sr, conn=True)
    emitter.skeleton()
    emitter.sections()
    return emitter.table()


# ── decoding ─────────────────────────────────────────────────────────────────

class _Decoder:
    def __init__(self, doc: RflDocument):
        self.doc = doc
        self.n_rings = len(doc.ring_sections)
        self.labels: list[str] = []
        self.sa_vertex: dict[int, int] = {}
        self.doc_bonds: list[BondRef] = []
        # skeleton bonds written as [Sb:m]; their order comes from ring m's section
        self.resident: list[tuple[int, int, list[int]]] = []

    def _new_atom(self, tok: Token) -> int:
        v = len(self.labels)
        if tok.kind is TokenKind.SUPER_ATOM:
            k = tok.index
            if k >= self.n_rings:
                raise UnresolvedSuperRef(f"{tok.text} but the document has {self.n_rings} ring section(s)")
            if k in self.sa_vertex:
                raise UnresolvedSuperRef(f"{tok.text} appears more than once")
            self.sa_vertex[k] = v
            self.labels.append(SUPER_ATOM_LABEL)
        else:
            self.labels.append(tok.text)
        return v

    def skeleton(self) -> MolecularGraph:
        g = MolecularGraph()
        previous: int | None = None
        stack: list[int | None] = []
        order: BondOrder | None = None
        supers: list[int] = []
        for tok in self.doc.skeleton_tokens:
            if tok.kind in (TokenKind.ATOM, TokenKind.SUPER_ATOM):
                v = self._new_atom(tok)
                g.add_atom(self.labels[v], atom_id=v)
                if tok.kind is TokenKind.SUPER_ATOM:
                    g.super_atoms.add(v)
                if previous is not None and (order is not None or supers):
                    if supers:
                        self.resident.append((previous, v, supers))
                    else:
                        g.add_bond(previous, v, order)
                    self.doc_bonds.append(BondRef(SKELETON, pair(previous, v)))
                previous, order, supers = v, None, []
            elif tok.kind is TokenKind.BOND:
                order = tok.order
            elif tok.kind is TokenKind.SUPER_BOND:
                supers.append(tok.index)
            elif tok.kind is TokenKind.BRANCH_OPEN:
                stack.append(previous)
            elif tok.kind is TokenKind.BRANCH_CLOSE:
                previous = stack.pop()
            elif tok.kind is TokenKind.DOT:
                previous = None
        return g

    def rings(self) -> list[tuple[Ring, list[BondOrder | list[int]], list[int]]]:
        parsed = []
        for section in self.doc.ring_sections:
            vertices: list[int] = []
            slots: list[BondOrder | list[int]] = []
            conns: list[int] = []
            for tok in section:
                if tok.kind is TokenKind.REF:
                    vertices.append(tok.index)
                elif tok.kind in (TokenKind.ATOM, TokenKind.SUPER_ATOM):
                    vertices.append(self._new_atom(tok))
                elif tok.kind is TokenKind.BOND:
                    slots.append(tok.order)
                    conns.append(0)
                elif tok.kind is TokenKind.SUPER_BOND:
                    if len(slots) < len(vertices):
                        slots.append([])
                        conns.append(0)
                    slots[-1].append(tok.index)  # type: ignore[union-attr]
                elif tok.kind is TokenKind.CONN:
                    conns[-1] += 1
            parsed.append((Ring(tuple(vertices), Orientation.TRAVERSAL), slots, conns))
        for j, (ring, _, _) in enumerate(parsed):
            self.doc_bonds.extend(BondRef(j, pair(u, v)) for u, v in ring.bonds)
        return parsed


def to_split_result(doc: RflDocument, sidecar: list[BranchEntry] | None = None) -> SplitResult:
    """Rebuild the SplitResult that *doc* was emitted from (atoms renumbered in document order)."""
    decoder = _Decoder(doc)
    skeleton = decoder.skeleton()
    parsed = decoder.rings()

    super_bonds: list[tuple[BondKey, int]] = []
    declared_host: dict[int, int] = {}
    orders: dict[BondKey, BondOrder] = {}
    for j, (ring, slots, _) in enumerate(parsed):
        for (u, v), slot in zip(ring.bonds, slots):
            if isinstance(slot, BondOrder):
                known = orders.setdefault(pair(u, v), slot)
                if known != slot:
                    raise MalformedGraph(f"Bond ({u}, {v}) is written with two different orders")
                continue
            for m in slot:
                if m >= j:
                    raise UnresolvedSuperRef(f"[Sb:{m}] inside ring section {j} must refer to an earlier ring")
                if m in declared_host:
                    raise UnresolvedSuperRef(f"[Sb:{m}] appears more than once")
                declared_host[m] = j
                super_bonds.append((pair(u, v), m))

    in_skeleton: set[int] = set()
    for u, v, refs in decoder.resident:
        order = orders.get(pair(u, v))
        if order is None:
            raise UnresolvedSuperRef(f"No ring section gives the order of skeleton SuperBond ({u}, {v})")
        skeleton.add_bond(u, v, order, is_super=True)
        for m in refs:
            if m >= len(parsed):
                raise UnresolvedSuperRef(f"[Sb:{m}] but the document has {len(parsed)} ring section(s)")
            if m in declared_host or m in in_skeleton:
                raise UnresolvedSuperRef(f"[Sb:{m}] appears more than once")
            if pair(u, v) not in parsed[m][0].edge_set:
                raise UnresolvedSuperRef(f"[Sb:{m}] marks skeleton bond ({u}, {v}), which is not on ring {m}")
            in_skeleton.add(m)
            super_bonds.append((pair(u, v), m))

    referenced = set(decoder.sa_vertex) | set(declared_host) | in_skeleton
    for k in range(len(parsed)):
        if k in decoder.sa_vertex and (k in declared_host or k in in_skeleton):
            raise UnresolvedSuperRef(f"Ring {k} is referenced both as [Sa:{k}] and [Sb:{k}]")
    missing = sorted(set(range(len(parsed))) - referenced)
    if missing:
        raise UnresolvedSuperRef(f"Ring section(s) {missing} are never referenced by [Sa:k] or [Sb:k]")

    rings: list[StoredRing] = []
    for j, (ring, slots, _) in enumerate(parsed):
        graph = MolecularGraph()
        for v in ring.vertices:
            graph.add_atom(decoder.labels[v], atom_id=v)
            if decoder.labels[v] == SUPER_ATOM_LABEL:
                graph.super_atoms.add(v)
        for (u, v), slot in zip(ring.bonds, slots):
            key = pair(u, v)
            order = slot if isinstance(slot, BondOrder) else orders.get(key)
            if order is None:
                raise UnresolvedSuperRef(f"No ring section gives the order of SuperBond edge {key}")
            flagged = any(k == key and m < j for k, m in super_bonds)
            graph.add_bond(u, v, order, is_super=flagged)
        kind = "super_atom" if j in decoder.sa_vertex else "super_bond"
        rings.append(StoredRing(ring, graph, kind))

    if doc.mode is Mode.FULL:
        entries = doc.branch_table
    else:
        entries = sidecar or []

    counts: Counter[tuple[int, int]] = Counter()
    links: list[BranchLink] = []
    for s, r, i in entries:
        if not 0 <= s < len(decoder.doc_bonds):
            raise BranchArityMismatch(f"Branch entry names bond {s} but the document has {len(decoder.doc_bonds)}")
        if not 0 <= r < len(rings) or not 0 <= i < len(rings[r].ring.bonds):
            raise BranchArityMismatch(f"Branch entry names ring bond {r}/{i}, which does not exist")
        ring_bond = rings[r].ring.bonds[i]
        links.append(BranchLink((-1, ring_bond[0]), ring_bond, r, decoder.doc_bonds[s]))
        counts[(r, i)] += 1
    markers = Counter({
        (j, i): n for j, (_, _, conns) in enumerate(parsed) for i, n in enumerate(conns) if n
    })
    if counts != markers:
        if doc.mode is Mode.TOKENS and sidecar is None:
            raise BranchArityMismatch(
                f"Tokens-mode document has {sum(markers.values())} [conn] marker(s); "
                "a .branch sidecar is needed to decode it"
            )
        raise BranchArityMismatch(
            f"{sum(counts.values())} branch entries do not match the {sum(markers.values())} [conn] marker(s)"
        )

    sr = SplitResult(
        skeleton=skeleton,
        rings=rings,
        branches=links,
        super_atoms=sorted(((v, k) for k, v in decoder.sa_vertex.items()), key=lambda t: t[1]),
        super_bonds=sorted(super_bonds, key=lambda t: t[1]),
        hosts=declared_host,
    )
    for m, j in declared_host.items():
        if sr.super_bond_of(m) in skeleton.bonds:
            raise UnresolvedSuperRef(f"[Sb:{m}] is placed in ring section {j} but its edge is already a skeleton bond")
    if links:
        sr = learn_tails(sr)
    return sr


# ── sidecar ──────────────────────────────────────────────────────────────────

def write_sidecar(entries: list[BranchEntry]) -> str:
    return "".join(f"{s} {r} {i}\n" for s, r, i in entries)


def read_sidecar(text: str, source: str = "<sidecar>") -> list[BranchEntry]:
    entries: list[BranchEntry] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        fields = line.split()
        if len(fields) != 3 or not all(f.isdigit() for f in fields):
            raise FileFormatError("expected 's_idx r_ring r_idx'", source, lineno)
        entries.append((int(fields[0]), int(fields[1]), int(fields[2])))
    return entries
