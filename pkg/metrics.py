"""
Structural complexity and recognition metrics.

Complexity counts atoms, bonds and rings, with every ring weighted as much
as the atoms plus bonds of a benzene ring::

    complexity = n_atom + n_bond + 12 * n_ring

Levels are 1-based bins over complexity; ``edges`` are the lower bounds of
levels 2, 3, ...

Evaluation files hold one sample per line, ``<id>\\t<payload>``.  The payload
is an RFL document, or an MGF graph with ``|`` in place of its line breaks.
EM compares token sequences (RFL) or whitespace-normalised records (MGF);
Struct-EM also accepts predictions that decode to an isomorphic graph.
Unparseable predictions count as misses.

Public API
----------
complexity(g, edges=DEFAULT_LEVEL_EDGES) -> ComplexityReport
level_for(value, edges) -> int
quantile_edges(values, levels=5) -> tuple[int, ...]
evaluate(pred_path, gold_path, fmt, levels=None, jobs=1) -> EvalResult
format_report(result) -> str
"""

from __future__ import annotations

import bisect
import logging
from collections.abc import Iterable, Mapping
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal

import numpy as np

from errors import FileFormatError, IdMismatch
from molgraph import MolecularGraph, isomorphic, read_mgf, write_mgf
from ringsys import DEFAULT_CYCLE_BUDGET, non_nested_rings
from rflcore import restore
from rfltext import parse, to_split_result, token_texts

RING_WEIGHT = 12
DEFAULT_LEVEL_EDGES: tuple[int, ...] = (41, 81, 131, 201)
MGF_LINE_SEPARATOR = "|"

EvalFormat = Literal["rfl", "mgf"]

_log = logging.getLogger(__name__)


# ── complexity ───────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class ComplexityReport:
    n_atom: int
    n_bond: int
    n_ring: int
    complexity: int
    level: int

    @property
    def plain(self) -> int:
        """Atoms plus bonds, without the ring weight."""
        return self.n_atom + self.n_bond


def level_for(value: int, edges: Iterable[int] = DEFAULT_LEVEL_EDGES) -> int:
    return bisect.bisect_right(list(edges), value) + 1


def complexity(
    g: MolecularGraph,
    edges: Iterable[int] = DEFAULT_LEVEL_EDGES,
    *,
    budget: int = DEFAULT_CYCLE_BUDGET,
) -> ComplexityReport:
    n_atom = len(g.atoms)
    n_bond = len(g.bonds)
    n_ring = len(non_nested_rings(g, budget))
    value = n_atom + n_bond + RING_WEIGHT * n_ring
    return ComplexityReport(n_atom, n_bond, n_ring, value, level_for(value, edges))


def quantile_edges(values: Iterable[int], levels: int = 5) -> tuple[int, ...]:
    """Level edges that split *values* into *levels* bins of similar size.

    Edges are rounded up and forced strictly ascending, so heavily tied
    corpora may get slightly uneven bins.
    """
    data = np.asarray(list(values), dtype=float)
    if data.size == 0:
        raise ValueError("Cannot compute level edges from an empty corpus")
    if levels < 1:
        raise ValueError("levels must be positive")
    raw = np.ceil(np.quantile(data, np.arange(1, levels) / levels))
    edges: list[int] = []
    for edge in raw.astype(int).tolist():
        edges.append(max(edge, edges[-1] + 1) if edges else edge)
    return tuple(edges)


# ── evaluation ───────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class SampleScore:
    id: str
    em: bool
    struct: bool


@dataclass(frozen=True)
class LevelScore:
    level: int
    count: int
    em: float
    struct_em: float


@dataclass
class EvalResult:
    em: float
    struct_em: float
    per_sample: list[SampleScore] = field(default_factory=list)
    by_level: dict[int, LevelScore] = field(default_factory=dict)


def mgf_to_line(g: MolecularGraph) -> str:
    return MGF_LINE_SEPARATOR.join(write_mgf(g).splitlines())


def mgf_from_line(payload: str) -> MolecularGraph:
    return read_mgf(payload.replace(MGF_LINE_SEPARATOR, "\n"), "<payload>")


def _normalized_mgf(payload: str) -> list[str]:
    return [" ".join(rec.split()) for rec in payload.split(MGF_LINE_SEPARATOR) if rec.strip()]


def _decode(payload: str, fmt: EvalFormat) -> MolecularGraph:
    if fmt == "mgf":
        return mgf_from_line(payload)
    return restore(to_split_result(parse(payload)))


def _exact(pred: str, gold: str, fmt: EvalFormat) -> bool:
    if fmt == "mgf":
        return _normalized_mgf(pred) == _normalized_mgf(gold)
    try:
        return token_texts(pred) == token_texts(gold)
    except ValueError:
        return False


def score_sample(sample_id: str, pred: str, gold: str, fmt: EvalFormat) -> SampleScore:
    """EM and Struct-EM flags for one sample; never raises on bad predictions."""
    if not pred.strip():
        _log.warning("Sample %s: empty prediction", sample_id)
        return SampleScore(sample_id, False, False)
    em = _exact(pred, gold, fmt)
    if em:
        return SampleScore(sample_id, True, True)
    try:
        predicted = _decode(pred, fmt)
    except (ValueError, RecursionError) as exc:
        _log.warning("Sample %s: prediction does not decode: %s", sample_id, exc)
        return SampleScore(sample_id, False, False)
    try:
        reference = _decode(gold, fmt)
    except (ValueError, RecursionError) as exc:
        _log.warning("Sample %s: gold does not decode: %s", sample_id, exc)
        return SampleScore(sample_id, False, False)
    return SampleScore(sample_id, False, isomorphic(predicted, reference))


def read_samples(path: str | Path, *, bare_ids: bool = False) -> dict[str, str]:
    """``id -> payload`` from an evaluation file, in file order.

    With *bare_ids* a line holding only an id (no tab) is read as an empty
    payload; prediction files use this for samples the model left blank.
    """
    path = Path(path)
    samples: dict[str, str] = {}
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not raw.strip():
            continue
        if "\t" in raw:
            sample_id, payload = raw.split("\t", 1)
        elif bare_ids:
            sample_id, payload = raw, ""
        else:
            raise FileFormatError("expected '<id>\\t<payload>'", str(path), lineno)
        sample_id = sample_id.strip()
        if not sample_id:
            raise FileFormatError("empty sample id", str(path), lineno)
        if sample_id in samples:
            raise FileFormatError(f"duplicate sample id {sample_id!r}", str(path), lineno)
        samples[sample_id] = payload.strip()
    return samples


def _fraction(flags: list[bool]) -> float:
    return sum(flags) / len(flags) if flags else 0.0


def evaluate(
    pred_path: str | Path,
    gold_path: str | Path,
    fmt: EvalFormat = "rfl",
    *,
    levels: Mapping[str, int] | None = None,
    jobs: int = 1,
) -> EvalResult:
    """Score a prediction file against a gold file with the same sample ids."""
    if fmt not in ("rfl", "mgf"):
        raise ValueError(f"Unknown evaluation format {fmt!r}")
    pred = read_samples(pred_path, bare_ids=True)
    gold = read_samples(gold_path)
    if pred.keys() != gold.keys():
        only_pred = sorted(pred.keys() - gold.keys())
        only_gold = sorted(gold.keys() - pred.keys())
        raise IdMismatch(
            f"Sample ids differ: {len(only_pred)} only in predictions {only_pred[:5]}, "
            f"{len(only_gold)} only in gold {only_gold[:5]}"
        )

    ids = sorted(gold)
    args = (list(ids), [pred[i] for i in ids], [gold[i] for i in ids], [fmt] * len(ids))
    if jobs > 1 and len(ids) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            scores = list(pool.map(score_sample, *args, chunksize=16))
    else:
        scores = list(map(score_sample, *args))

    result = EvalResult(
        em=_fraction([s.em for s in scores]),
        struct_em=_fraction([s.struct for s in scores]),
        per_sample=scores,
    )
    if levels is not None:
        grouped: dict[int, list[SampleScore]] = {}
        for s in scores:
            level = levels.get(s.id)
            if level is None:
                _log.warning("Sample %s has no level in the manifest", s.id)
                continue
            grouped.setdefault(level, []).append(s)
        result.by_level = {
            level: LevelScore(
                level,
                len(group),
                _fraction([s.em for s in group]),
                _fraction([s.struct for s in group]),
            )
            for level, group in sorted(grouped.items())
        }
    _log.info("Evaluated %d samples: EM %.4f, Struct-EM %.4f", len(scores), result.em, result.struct_em)
    return result


def format_report(result: EvalResult) -> str:
    """Human-readable table followed by ``metric<TAB>value`` lines."""
    rows = [("all", len(result.per_sample), result.em, result.struct_em)]
    rows += [(str(s.level), s.count, s.em, s.struct_em) for s in result.by_level.values()]
    lines = [f"{'level':<6} {'samples':>7} {'EM':>8} {'Struct-EM':>10}"]
    lines += [f"{name:<6} {count:>7} {em:>8.4f} {struct:>10.4f}" for name, count, em, struct in rows]
    lines.append("")
    lines.append(f"samples\t{len(result.per_sample)}")
    lines.append(f"em\t{result.em:.6f}")
    lines.append(f"struct_em\t{result.struct_em:.6f}")
    for s in result.by_level.values():
        lines.append(f"em_level{s.level}\t{s.em:.6f}")
        lines.append(f"struct_em_level{s.level}\t{s.struct_em:.6f}")
    return "\n".join(lines) + "\n"
