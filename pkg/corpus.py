"""
Random molecule corpora stratified by structural complexity.

Every sample draws from its own numpy generator seeded with
``[seed, level, index]``, so a corpus is byte-identical for equal specs no
matter how many worker processes build it.

One attempt plans a molecule around a target complexity drawn uniformly
from the level's interval:

1. zero or more cata-condensed ring systems (each new ring is fused onto a
   perimeter bond whose two ends belong to a single ring so far);
2. single bonds joining the systems into one component;
3. tree atoms, two complexity points each, filling what is left.

Attempts that land outside the interval or exceed ``max_atoms`` are thrown
away; ``max_attempts`` failures in a row raise ``GenerationStall``.

Public API
----------
generate_sample(spec, level, index, vocabulary=None) -> (MolecularGraph, ComplexityReport)
generate_corpus(spec, out_dir, jobs=1, vocabulary=None) -> CorpusManifest
"""

from __future__ import annotations

import logging
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from config import MANIFEST_FILENAME, CorpusManifest, CorpusSpec, ManifestSample, Vocabulary, load_vocabulary
from errors import GenerationStall
from metrics import ComplexityReport, complexity, quantile_edges
from molgraph import BondKey, BondOrder, MolecularGraph, pair, write_mgf

RING_SIZES = (3, 4, 5, 6, 7)
RING_SIZE_WEIGHTS = (0.02, 0.03, 0.35, 0.55, 0.05)
# used when the atom envelope forces more complexity per atom
COMPACT_RING_WEIGHTS = (0.0, 0.1, 0.6, 0.3, 0.0)
MAX_VALENCE = 4

_log = logging.getLogger(__name__)


def sample_id(level: int, index: int) -> str:
    return f"L{level}_{index:05d}"


def _draw(rng: np.random.Generator, table: dict[str, float]) -> str:
    labels = sorted(table)
    weights = np.array([table[label] for label in labels], dtype=float)
    return labels[int(rng.choice(len(labels), p=weights / weights.sum()))]


# ── planning ─────────────────────────────────────────────────────────────────

@dataclass
class _Plan:
    """Skeleton of a molecule before labels are assigned."""

    n: int = 0
    bonds: dict[BondKey, BondOrder] = field(default_factory=dict)
    ring_vertices: set[int] = field(default_factory=set)
    valence: Counter[int] = field(default_factory=Counter)
    degree: Counter[int] = field(default_factory=Counter)

    def atom(self) -> int:
        self.n += 1
        return self.n - 1

    def bond(self, u: int, v: int, order: BondOrder = BondOrder.SINGLE) -> None:
        self.bonds[pair(u, v)] = order
        for w in (u, v):
            self.valence[w] += int(order)
            self.degree[w] += 1

    def open_vertices(self, among: list[int] | range | None = None) -> list[int]:
        pool = range(self.n) if among is None else among
        return [v for v in pool if self.valence[v] < MAX_VALENCE]

    def raise_order(self, key: BondKey, order: BondOrder) -> bool:
        extra = int(order) - int(self.bonds[key])
        if extra <= 0 or any(self.valence[w] + extra > MAX_VALENCE for w in key):
            return False
        self.bonds[key] = order
        for w in key:
            self.valence[w] += extra
        return True


def _ring_size(rng: np.random.Generator, compact: bool) -> int:
    weights = np.array(COMPACT_RING_WEIGHTS if compact else RING_SIZE_WEIGHTS)
    return RING_SIZES[int(rng.choice(len(RING_SIZES), p=weights / weights.sum()))]


def _ring_system(plan: _Plan, rng: np.random.Generator, max_rings: int, room: int, compact: bool) -> tuple[list[int], int]:
    """Add a fused ring system costing at most *room*; returns (vertices, cost)."""
    size = _ring_size(rng, compact)
    if 2 * size + 12 > room:
        size = 5
    if 2 * size + 12 > room:
        return [], 0
    first = [plan.atom() for _ in range(size)]
    for i, v in enumerate(first):
        plan.bond(v, first[(i + 1) % size])
    rings = [first]
    cost = 2 * size + 12
    system_degree: Counter[int] = Counter({v: 2 for v in first})
    fusable: set[BondKey] = {pair(first[i], first[(i + 1) % size]) for i in range(size)}

    wanted = int(rng.integers(1, max_rings + 1))
    while len(rings) < wanted:
        size = _ring_size(rng, compact)
        if cost + 2 * size + 9 > room:
            break
        candidates = sorted(k for k in fusable if system_degree[k[0]] == 2 and system_degree[k[1]] == 2)
        if not candidates:
            break
        u, v = candidates[int(rng.integers(len(candidates)))]
        fusable.discard((u, v))
        path = [u] + [plan.atom() for _ in range(size - 2)] + [v]
        for a, b in zip(path, path[1:]):
            plan.bond(a, b)
            fusable.add(pair(a, b))
        system_degree[u] += 1
        system_degree[v] += 1
        for w in path[1:-1]:
            system_degree[w] = 2
        rings.append(path)
        cost += 2 * size + 9

    for ring in rings:
        edges = [pair(ring[i], ring[(i + 1) % len(ring)]) for i in range(len(ring))]
        if len(ring) >= 5 and rng.random() < 0.5:
            plan.raise_order(edges[int(rng.integers(len(edges)))], BondOrder.DOUBLE)
    members = sorted({v for ring in rings for v in ring})
    plan.ring_vertices.update(members)
    return members, cost


def _attempt(
    rng: np.random.Generator, lo: int, hi: int, spec: CorpusSpec, vocab: Vocabulary
) -> MolecularGraph | None:
    target = int(rng.integers(lo, hi + 1))
    plan = _Plan()
    systems: list[list[int]] = []
    spent = 0
    while True:
        room = target - spent - len(systems)
        crowded = plan.n + max(room, 0) // 2 > spec.max_atoms
        if room < 22:
            break
        keep_going = 0.85 if not systems else 0.5
        if not crowded and rng.random() > keep_going:
            break
        members, cost = _ring_system(plan, rng, spec.max_rings_fused, room, crowded)
        if not members:
            break
        systems.append(members)
        spent += cost

    for members in systems[1:]:
        host = plan.open_vertices(range(members[0]))
        guest = plan.open_vertices(members)
        if not host or not guest:
            return None
        plan.bond(host[int(rng.integers(len(host)))], guest[int(rng.integers(len(guest)))])

    if systems:
        remaining = target - spent - (len(systems) - 1)
        if remaining < 0:
            return None
        tree_atoms = remaining // 2
    else:
        tree_atoms = max(1, (target + 1) // 2)
        plan.atom()
        tree_atoms -= 1
    if plan.n + tree_atoms > spec.max_atoms:
        return None

    for _ in range(tree_atoms):
        open_vertices = plan.open_vertices()
        if not open_vertices:
            return None
        parent = open_vertices[int(rng.integers(len(open_vertices)))]
        child = plan.atom()
        plan.bond(parent, child)
        roll = rng.random()
        if roll < 0.03:
            plan.raise_order(pair(parent, child), BondOrder.TRIPLE)
        elif roll < 0.12:
            plan.raise_order(pair(parent, child), BondOrder.DOUBLE)

    return _labelled(plan, rng, vocab)


def _labelled(plan: _Plan, rng: np.random.Generator, vocab: Vocabulary) -> MolecularGraph:
    weights = vocab.generator
    g = MolecularGraph()
    for v in range(plan.n):
        if v in plan.ring_vertices:
            table = weights.ring
        elif plan.degree[v] <= 1 and plan.valence[v] <= 1 and plan.n > 1 and rng.random() < 0.5:
            table = weights.terminal
        else:
            table = weights.chain
        g.add_atom(_draw(rng, table), atom_id=v)
    for (u, v), order in plan.bonds.items():
        g.add_bond(u, v, order)
    return g


# ── sampling ─────────────────────────────────────────────────────────────────

def generate_sample(
    spec: CorpusSpec, level: int, index: int, vocabulary: Vocabulary | None = None
) -> tuple[MolecularGraph, ComplexityReport]:
    """Sample *index* of 1-based *level*; deterministic in (seed, level, index)."""
    vocab = vocabulary or load_vocabulary()
    lo, hi = spec.levels[level - 1]
    rng = np.random.default_rng([spec.seed, level, index])
    rejected: Counter[str] = Counter()
    for _ in range(spec.max_attempts):
        g = _attempt(rng, lo, hi, spec, vocab)
        if g is None:
            rejected["plan"] += 1
            continue
        if len(g.atoms) > spec.max_atoms:
            rejected["atoms"] += 1
            continue
        report = complexity(g)
        if not lo <= report.complexity <= hi:
            rejected["complexity"] += 1
            continue
        if rejected:
            _log.debug("%s: accepted after %s", sample_id(level, index), dict(rejected))
        return g, report
    raise GenerationStall(
        f"Level {level} [{lo}, {hi}]: {spec.max_attempts} consecutive rejections "
        f"for sample {index} ({dict(rejected)})"
    )


def _generate_job(job: tuple[CorpusSpec, int, int, Vocabulary]) -> tuple[str, str, ComplexityReport]:
    spec, level, index, vocab = job
    g, report = generate_sample(spec, level, index, vocab)
    return sample_id(level, index), write_mgf(g), report


def generate_corpus(
    spec: CorpusSpec,
    out_dir: str | Path,
    *,
    jobs: int = 1,
    vocabulary: Vocabulary | None = None,
) -> CorpusManifest:
    """Write ``<id>.mgf`` per sample plus ``manifest.json`` into *out_dir*."""
    vocab = vocabulary or load_vocabulary()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    work = [
        (spec, level, index, vocab)
        for level in range(1, len(spec.levels) + 1)
        for index in range(spec.count_per_level)
    ]
    _log.info("Generating %d molecules over %d levels into %s", len(work), len(spec.levels), out)
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_generate_job, work, chunksize=8))
    else:
        results = [_generate_job(job) for job in work]

    samples: list[ManifestSample] = []
    for (_, level, _, _), (sid, text, report) in zip(work, results):
        (out / f"{sid}.mgf").write_text(text, encoding="utf-8", newline="\n")
        samples.append(ManifestSample(id=sid, file=f"{sid}.mgf", complexity=report.complexity, level=level))

    edges = list(quantile_edges([s.complexity for s in samples], len(spec.levels))) if samples else []
    manifest = CorpusManifest(spec=spec, level_edges=edges, samples=samples)
    (out / MANIFEST_FILENAME).write_text(manifest.model_dump_json(indent=2) + "\n", encoding="utf-8", newline="\n")
    _log.info("Corpus written: %d samples, level edges %s", len(samples), edges)
    return manifest
