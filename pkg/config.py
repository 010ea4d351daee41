"""
Configuration schemas for the RFL codec.

Three JSON documents drive the codec besides the molecules themselves:

``vocab/rfl_vocab.json``
    The atom/group label vocabulary the tokenizer matches against (longest
    match wins) plus the label weights the corpus generator draws from.
    ``$RFL_VOCAB`` points at a replacement file.

``CorpusSpec``
    Parameters for ``gen-corpus``: how many molecules per level, the
    complexity interval of each level, the seed and the size envelope.

``manifest.json``
    Written next to a generated corpus.  Lists every sample with its
    complexity and level so evaluation can be broken down per level.

Vocabulary schema version 1.0
-----------------------------

{
    "vocab_version": "1.0",
    "atoms": ["C", "N", "O", "CH3", "OEt", ...],
    "generator": {
        "ring": {"C": 0.86, "N": 0.1, "O": 0.04},
        "chain": {"C": 0.8, "N": 0.1, "O": 0.1},
        "terminal": {"CH3": 0.4, "OH": 0.3, "Cl": 0.3}
    }
}
"""

from __future__ import annotations

import json
import logging
import os
import re
from functools import lru_cache
from pathlib import Path

from pydantic import BaseModel, Field, PrivateAttr, field_validator, model_validator

VOCAB_ENV = "RFL_VOCAB"
DEFAULT_VOCAB_PATH = Path(__file__).parent / "vocab" / "rfl_vocab.json"
CURRENT_VOCAB_VERSION = (1, 0)  # (major, minor) supported by this build

MANIFEST_FILENAME = "manifest.json"
CURRENT_MANIFEST_VERSION = "1.0"

RESERVED_SURFACES = frozenset({"[ea]", "[conn]", "[Sa]", "[Sb]", "[END]"})
FORBIDDEN_LABEL_CHARS = frozenset("[]()=#-.;,:|")

DEFAULT_LEVELS: tuple[tuple[int, int], ...] = (
    (9, 40), (41, 80), (81, 130), (131, 200), (201, 300),
)

_log = logging.getLogger(__name__)


def _check_version(v: str, current: tuple[int, int], what: str) -> str:
    try:
        major, minor = (int(x) for x in v.split("."))
    except ValueError:
        raise ValueError(f"Invalid {what} {v!r}, expected 'major.minor' (e.g. '1.0')")
    cur_major, cur_minor = current
    if major > cur_major:
        raise ValueError(
            f"{what} {v!r} requires a newer codec "
            f"(this build supports up to version {cur_major}.x)"
        )
    if major == cur_major and minor > cur_minor:
        _log.warning(
            "%s %s is newer than this build supports (%d.%d); unknown keys are ignored.",
            what, v, cur_major, cur_minor,
        )
    return v


# ── vocabulary ───────────────────────────────────────────────────────────────

class GeneratorLabels(BaseModel):
    """Label weights used by the corpus generator, per atom position."""

    ring: dict[str, float] = Field(default_factory=lambda: {"C": 1.0})
    chain: dict[str, float] = Field(default_factory=lambda: {"C": 1.0})
    terminal: dict[str, float] = Field(default_factory=lambda: {"C": 1.0})

    @field_validator("ring", "chain", "terminal")
    @classmethod
    def _positive_weights(cls, v: dict[str, float]) -> dict[str, float]:
        if not v:
            raise ValueError("Weight table must not be empty")
        if any(w <= 0 for w in v.values()):
            raise ValueError("Label weights must be positive")
        return v


class Vocabulary(BaseModel):
    """Parsed contents of a vocabulary file."""

    vocab_version: str
    atoms: list[str]
    generator: GeneratorLabels = Field(default_factory=GeneratorLabels)

    _label_set: frozenset[str] = PrivateAttr(default=frozenset())
    _longest_first: tuple[str, ...] = PrivateAttr(default=())

    @field_validator("vocab_version")
    @classmethod
    def _version(cls, v: str) -> str:
        return _check_version(v, CURRENT_VOCAB_VERSION, "vocab_version")

    @field_validator("atoms")
    @classmethod
    def _labels(cls, v: list[str]) -> list[str]:
        if not v:
            raise ValueError("Vocabulary must list at least one atom label")
        seen: set[str] = set()
        for label in v:
            problem = label_problem(label)
            if problem:
                raise ValueError(f"Bad atom label {label!r}: {problem}")
            if label in seen:
                raise ValueError(f"Duplicate atom label: {label!r}")
            seen.add(label)
        return v

    @model_validator(mode="after")
    def _generator_labels_known(self) -> Vocabulary:
        known = set(self.atoms)
        for table in (self.generator.ring, self.generator.chain, self.generator.terminal):
            unknown = sorted(set(table) - known)
            if unknown:
                raise ValueError(f"Generator labels missing from atoms: {', '.join(unknown)}")
        return self

    def model_post_init(self, __context: object) -> None:
        self._label_set = frozenset(self.atoms)
        self._longest_first = tuple(sorted(self.atoms, key=lambda s: (-len(s), s)))

    @property
    def labels_longest_first(self) -> tuple[str, ...]:
        return self._longest_first

    def __contains__(self, label: object) -> bool:
        return label in self._label_set


def label_problem(label: str) -> str | None:
    """Return why *label* cannot be an atom label, or None if it can."""
    if not label:
        return "empty"
    if label in RESERVED_SURFACES:
        return "reserved token"
    if label[0].isdigit():
        return "starts with a digit"
    if any(ch.isspace() for ch in label):
        return "contains whitespace"
    bad = sorted(set(label) & FORBIDDEN_LABEL_CHARS)
    if bad:
        return f"contains {' '.join(bad)}"
    return None


def parse_vocabulary(data: bytes | str) -> Vocabulary:
    """Parse raw JSON into a Vocabulary.

    Raises ``pydantic.ValidationError`` if the data is invalid.
    Raises ``json.JSONDecodeError`` if the bytes are not valid JSON.
    """
    return Vocabulary.model_validate(json.loads(data))


def resolve_vocab_path(path: str | Path | None = None) -> Path:
    if path is not None:
        return Path(path)
    env = os.environ.get(VOCAB_ENV)
    if env:
        return Path(env)
    return DEFAULT_VOCAB_PATH


@lru_cache(maxsize=8)
def _load_cached(resolved: Path) -> Vocabulary:
    _log.debug("Loading vocabulary from %s", resolved)
    return parse_vocabulary(resolved.read_bytes())


def load_vocabulary(path: str | Path | None = None) -> Vocabulary:
    """Load the vocabulary from *path*, ``$RFL_VOCAB`` or the bundled default."""
    return _load_cached(resolve_vocab_path(path).resolve())


# ── corpus generation ────────────────────────────────────────────────────────

class CorpusSpec(BaseModel):
    """Parameters of one ``gen-corpus`` run."""

    count_per_level: int = Field(default=10, ge=0)
    levels: list[tuple[int, int]] = Field(default_factory=lambda: list(DEFAULT_LEVELS))
    seed: int = Field(default=0, ge=0, lt=2**64)
    max_rings_fused: int = Field(default=4, ge=1, le=8)
    max_atoms: int = Field(default=60, ge=1)
    max_attempts: int = Field(default=5000, ge=1)

    @field_validator("levels")
    @classmethod
    def _ascending(cls, v: list[tuple[int, int]]) -> list[tuple[int, int]]:
        if not v:
            raise ValueError("At least one complexity level is required")
        previous_hi = -1
        for lo, hi in v:
            if lo < 0 or hi < lo:
                raise ValueError(f"Bad complexity interval [{lo}, {hi}]")
            if lo <= previous_hi:
                raise ValueError(
                    f"Complexity intervals must be ascending and non-overlapping "
                    f"([{lo}, {hi}] starts at or before {previous_hi})"
                )
            previous_hi = hi
        return v


class ManifestSample(BaseModel):
    id: str
    file: str
    complexity: int
    level: int


class CorpusManifest(BaseModel):
    """Parsed contents of a corpus ``manifest.json``."""

    manifest_version: str = CURRENT_MANIFEST_VERSION
    spec: CorpusSpec
    level_edges: list[int] = Field(default_factory=list)
    samples: list[ManifestSample] = Field(default_factory=list)

    @field_validator("manifest_version")
    @classmethod
    def _version(cls, v: str) -> str:
        major, minor = (int(x) for x in CURRENT_MANIFEST_VERSION.split("."))
        return _check_version(v, (major, minor), "manifest_version")

    @model_validator(mode="after")
    def _unique_ids(self) -> CorpusManifest:
        seen: set[str] = set()
        for sample in self.samples:
            if sample.id in seen:
                raise ValueError(f"Duplicate sample id: {sample.id!r}")
            seen.add(sample.id)
        return self

    def level_map(self) -> dict[str, int]:
        return {s.id: s.level for s in self.samples}


def load_manifest(path: str | Path) -> CorpusManifest:
    return CorpusManifest.model_validate(json.loads(Path(path).read_bytes()))


# ── flag parsing ─────────────────────────────────────────────────────────────

_INTERVAL_RE = re.compile(r"^\s*(\d+)\s*-\s*(\d+)\s*$")


def parse_levels(text: str) -> list[tuple[int, int]]:
    """Parse ``--levels``: either ``"lo-hi,lo-hi,..."`` or a level count.

    A bare count ``N`` takes the first N default intervals when N is at most
    five, otherwise splits the default span evenly into N intervals.
    """
    text = text.strip()
    if text.isdigit():
        n = int(text)
        if n <= 0:
            raise ValueError("Level count must be positive")
        if n <= len(DEFAULT_LEVELS):
            return list(DEFAULT_LEVELS[:n])
        lo, hi = DEFAULT_LEVELS[0][0], DEFAULT_LEVELS[-1][1]
        width = (hi - lo + 1) / n
        bounds = [lo + round(i * width) for i in range(n + 1)]
        return [(bounds[i], bounds[i + 1] - 1) for i in range(n)]
    levels = []
    for part in text.split(","):
        match = _INTERVAL_RE.match(part)
        if not match:
            raise ValueError(f"Bad level interval {part!r}, expected 'lo-hi'")
        levels.append((int(match.group(1)), int(match.group(2))))
    return levels


def parse_bins(text: str) -> tuple[int, ...]:
    """Parse ``--bins`` into strictly ascending integer level edges."""
    try:
        edges = tuple(int(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise ValueError(f"Bad bin edges {text!r}, expected comma-separated integers")
    if not edges:
        raise ValueError("At least one bin edge is required")
    if any(b <= a for a, b in zip(edges, edges[1:])):
        raise ValueError(f"Bin edges must be strictly ascending: {text!r}")
    return edges
