"""
Tests for vocabulary loading, corpus parameters, manifests and flag parsing.
"""

import json

import pytest
from pydantic import ValidationError

from config import (
    DEFAULT_LEVELS,
    CorpusManifest,
    CorpusSpec,
    ManifestSample,
    label_problem,
    load_vocabulary,
    parse_bins,
    parse_levels,
    parse_vocabulary,
)
from rfltext import token_texts


def vocab_json(**overrides) -> str:
    data = {"vocab_version": "1.0", "atoms": ["C", "N", "Xy"]}
    data.update(overrides)
    return json.dumps(data)


# ── vocabulary ───────────────────────────────────────────────────────────────

def test_bundled_vocabulary():
    vocab = load_vocabulary()
    assert "C" in vocab and "CH3" in vocab and "Cl" in vocab
    assert "[Sa]" not in vocab
    assert vocab.labels_longest_first[0] == "COOEt"
    assert load_vocabulary() is vocab


def test_vocabulary_from_environment(tmp_path, monkeypatch):
    path = tmp_path / "vocab.json"
    path.write_text(vocab_json(), encoding="utf-8")
    monkeypatch.setenv("RFL_VOCAB", str(path))
    vocab = load_vocabulary()
    assert vocab.atoms == ["C", "N", "Xy"]
    assert token_texts("Xy-C[END]", vocab) == ["Xy", "-", "C", "[END]"]


@pytest.mark.parametrize(
    "label, problem",
    [
        ("", "empty"),
        ("[ea]", "reserved token"),
        ("2C", "starts with a digit"),
        ("C H", "contains whitespace"),
        ("C=O", "contains ="),
        ("C", None),
        ("COOEt", None),
    ],
)
def test_label_problem(label, problem):
    assert label_problem(label) == problem


@pytest.mark.parametrize(
    "overrides",
    [
        {"atoms": []},
        {"atoms": ["C", "C"]},
        {"atoms": ["C", "[END]"]},
        {"vocab_version": "2.0"},
        {"vocab_version": "one"},
        {"generator": {"ring": {"Q": 1.0}}},
        {"generator": {"ring": {"C": 0.0}}},
    ],
)
def test_bad_vocabularies(overrides):
    with pytest.raises(ValidationError):
        parse_vocabulary(vocab_json(**overrides))


def test_newer_minor_version_is_accepted(caplog):
    vocab = parse_vocabulary(vocab_json(vocab_version="1.7"))
    assert vocab.vocab_version == "1.7"
    assert "newer than this build" in caplog.text


# ── corpus parameters ────────────────────────────────────────────────────────

def test_corpus_spec_defaults():
    spec = CorpusSpec()
    assert spec.levels == list(DEFAULT_LEVELS)
    assert spec.count_per_level == 10


@pytest.mark.parametrize(
    "fields",
    [
        {"levels": []},
        {"levels": [(10, 5)]},
        {"levels": [(0, 10), (10, 20)]},
        {"levels": [(20, 30), (0, 10)]},
        {"count_per_level": -1},
        {"seed": -1},
        {"max_rings_fused": 0},
    ],
)
def test_bad_corpus_specs(fields):
    with pytest.raises(ValidationError):
        CorpusSpec.model_validate(fields)


def test_manifest_rejects_duplicate_ids():
    sample = ManifestSample(id="L1_00000", file="L1_00000.mgf", complexity=12, level=1)
    with pytest.raises(ValidationError):
        CorpusManifest(spec=CorpusSpec(), samples=[sample, sample])


def test_manifest_level_map():
    samples = [
        ManifestSample(id="L1_00000", file="L1_00000.mgf", complexity=12, level=1),
        ManifestSample(id="L2_00000", file="L2_00000.mgf", complexity=50, level=2),
    ]
    assert CorpusManifest(spec=CorpusSpec(), samples=samples).level_map() == {"L1_00000": 1, "L2_00000": 2}


# ── flags ────────────────────────────────────────────────────────────────────

def test_parse_levels():
    assert parse_levels("9-40, 41-80") == [(9, 40), (41, 80)]
    assert parse_levels("3") == list(DEFAULT_LEVELS[:3])
    assert parse_levels("10") == [
        (9, 37), (38, 66), (67, 96), (97, 125), (126, 154),
        (155, 183), (184, 212), (213, 242), (243, 271), (272, 300),
    ]


@pytest.mark.parametrize("text", ["0", "9-", "a-b", "9-40;41-80"])
def test_parse_levels_errors(text):
    with pytest.raises(ValueError):
        parse_levels(text)


def test_parse_bins():
    assert parse_bins("41,81,131,201") == (41, 81, 131, 201)
    for bad in ("", "41,x", "41,41"):
        with pytest.raises(ValueError):
            parse_bins(bad)
