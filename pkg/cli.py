"""
Command-line surface of the RFL codec.

    encode      .mgf (or SMILES with --smiles) -> RFL document
    decode      RFL document [+ .branch sidecar] -> .mgf
    roundtrip   check split/emit/parse/restore on a file or directory (alias: verify)
    complexity  complexity report for one molecule
    eval        EM / Struct-EM of a prediction file against a gold file
    gen-corpus  complexity-stratified random corpus

Exit codes: 0 ok, 1 round-trip failures, 2 bad input, 3 budget exhausted,
4 branch bookkeeping errors.  Every error is reported as one ``error: ...``
line on stderr.
"""

from __future__ import annotations

import argparse
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from config import CorpusSpec, load_manifest, parse_bins, parse_levels
from corpus import generate_corpus
from errors import RflError, exit_code_for
from metrics import DEFAULT_LEVEL_EDGES, complexity, evaluate, format_report
from molgraph import MolecularGraph, isomorphic, load_mgf, write_mgf
from ringsys import DEFAULT_CYCLE_BUDGET
from rflcore import restore, split
from rfltext import Mode, branch_entries, emit, parse, read_sidecar, to_split_result, write_sidecar
from smiles_import import import_smiles_subset

_log = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rflcodec", description="Ring-Free Language codec for molecular graphs")
    parser.add_argument("-v", "--verbose", action="store_true", help="Log debug output to stderr")
    subparsers = parser.add_subparsers(dest="command", required=True)

    encode = subparsers.add_parser("encode", help="Serialize a molecule as an RFL document")
    encode.add_argument("input", help="Path to an .mgf file, or a SMILES string with --smiles")
    encode.add_argument("-o", "--output", help="Write the document here instead of stdout")
    encode.add_argument("--smiles", action="store_true", help="Treat INPUT as a SMILES string")
    encode.add_argument("--mode", choices=[m.value for m in Mode], default=Mode.FULL.value)
    encode.add_argument("--sidecar", help="Tokens mode: write the branch table to this .branch file")
    encode.add_argument("--no-conn", action="store_true", help="Tokens mode: omit [conn] markers")
    encode.add_argument("--budget", type=int, default=DEFAULT_CYCLE_BUDGET, help="Cycle enumeration budget")
    encode.set_defaults(func=cmd_encode)

    decode = subparsers.add_parser("decode", help="Restore a molecule from an RFL document")
    decode.add_argument("input", help="Path to an .rfl file")
    decode.add_argument("-o", "--output", help="Write the .mgf here instead of stdout")
    decode.add_argument("--sidecar", help="Branch table for a tokens-mode document")
    decode.set_defaults(func=cmd_decode)

    roundtrip = subparsers.add_parser("roundtrip", aliases=["verify"], help="Check lossless round trips")
    roundtrip.add_argument("path", help="An .mgf file or a directory of them")
    roundtrip.add_argument("--jobs", type=int, default=1)
    roundtrip.add_argument("--budget", type=int, default=DEFAULT_CYCLE_BUDGET)
    roundtrip.set_defaults(func=cmd_roundtrip)

    comp = subparsers.add_parser("complexity", help="Structural complexity of a molecule")
    comp.add_argument("input", help="Path to an .mgf file, or a SMILES string with --smiles")
    comp.add_argument("--bins", help="Comma-separated level edges, e.g. 41,81,131,201")
    comp.add_argument("--smiles", action="store_true", help="Treat INPUT as a SMILES string")
    comp.add_argument("--budget", type=int, default=DEFAULT_CYCLE_BUDGET)
    comp.set_defaults(func=cmd_complexity)

    ev = subparsers.add_parser("eval", help="Score predictions against gold")
    ev.add_argument("pred", help="Prediction file, one '<id>\\t<payload>' per line")
    ev.add_argument("gold", help="Gold file in the same format")
    ev.add_argument("--format", choices=["rfl", "mgf"], default="rfl")
    ev.add_argument("--manifest", help="Corpus manifest.json for a per-level breakdown")
    ev.add_argument("--jobs", type=int, default=1)
    ev.set_defaults(func=cmd_eval)

    gen = subparsers.add_parser("gen-corpus", help="Generate a complexity-stratified corpus")
    gen.add_argument("out", help="Output directory")
    gen.add_argument("--count", type=int, default=10, help="Molecules per level")
    gen.add_argument("--levels", help="'lo-hi,lo-hi,...' or a level count")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--max-rings-fused", type=int, default=4)
    gen.add_argument("--max-atoms", type=int, default=60)
    gen.add_argument("--max-attempts", type=int, default=5000)
    gen.add_argument("--jobs", type=int, default=1)
    gen.set_defaults(func=cmd_gen_corpus)
    return parser


def _read_molecule(source: str, smiles: bool) -> MolecularGraph:
    if smiles:
        return import_smiles_subset(source.strip())
    return load_mgf(source)


def _write_output(text: str, output: str | None) -> None:
    if output:
        Path(output).write_text(text, encoding="utf-8", newline="\n")
        _log.info("Wrote %s", output)
    else:
        sys.stdout.write(text)


# ── commands ─────────────────────────────────────────────────────────────────

def cmd_encode(args: argparse.Namespace) -> int:
    mode = Mode(args.mode)
    if args.sidecar and mode is not Mode.TOKENS:
        raise ValueError("--sidecar only applies to --mode tokens")
    g = _read_molecule(args.input, args.smiles)
    sr = split(g, budget=args.budget)
    text = emit(sr, mode, conn=not args.no_conn)
    _write_output(text + "\n", args.output)
    if args.sidecar:
        Path(args.sidecar).write_text(write_sidecar(branch_entries(sr)), encoding="utf-8", newline="\n")
    _log.info("Encoded %d atoms into %d ring section(s), %d branch link(s)", len(g.atoms), len(sr.rings), len(sr.branches))
    return 0


def cmd_decode(args: argparse.Namespace) -> int:
    doc = parse(Path(args.input).read_text(encoding="utf-8"))
    sidecar = None
    if args.sidecar:
        if doc.mode is Mode.FULL:
            _log.warning("Ignoring --sidecar %s: %s is a full-mode document with its own branch table", args.sidecar, args.input)
        else:
            sidecar = read_sidecar(Path(args.sidecar).read_text(encoding="utf-8"), args.sidecar)
    g = restore(to_split_result(doc, sidecar))
    _write_output(write_mgf(g), args.output)
    return 0


def roundtrip_file(path: Path, budget: int = DEFAULT_CYCLE_BUDGET) -> str | None:
    """None when *path* survives every round trip, else the reason it does not."""
    try:
        g = load_mgf(path)
        sr = split(g, budget=budget)
        if not isomorphic(g, restore(sr)):
            return "restored graph is not isomorphic to the input"
        text = emit(sr, Mode.FULL)
        decoded = to_split_result(parse(text))
        if not isomorphic(g, restore(decoded)):
            return "decoded document does not restore the input"
        if emit(decoded, Mode.FULL) != text:
            return "re-emitting the decoded document changes the text"
    except (RflError, ValueError) as exc:
        return f"{type(exc).__name__}: {exc}"
    return None


def cmd_roundtrip(args: argparse.Namespace) -> int:
    root = Path(args.path)
    if not root.exists():
        raise FileNotFoundError(f"No such file or directory: {root}")
    files = sorted(root.glob("*.mgf")) if root.is_dir() else [root]
    if not files:
        raise ValueError(f"No .mgf files in {root}")
    budgets = [args.budget] * len(files)
    if args.jobs > 1 and len(files) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            reasons = list(pool.map(roundtrip_file, files, budgets, chunksize=8))
    else:
        reasons = list(map(roundtrip_file, files, budgets))

    failures = 0
    for path, reason in zip(files, reasons):
        if reason is None:
            print(f"ok {path.name}")
        else:
            failures += 1
            print(f"FAIL {path.name}: {reason}")
    _log.info("Round trip: %d of %d file(s) failed", failures, len(files))
    return 1 if failures else 0


def cmd_complexity(args: argparse.Namespace) -> int:
    edges = parse_bins(args.bins) if args.bins else DEFAULT_LEVEL_EDGES
    report = complexity(_read_molecule(args.input, args.smiles), edges, budget=args.budget)
    print(f"n_atom\t{report.n_atom}")
    print(f"n_bond\t{report.n_bond}")
    print(f"n_ring\t{report.n_ring}")
    print(f"complexity\t{report.complexity}")
    print(f"plain\t{report.plain}")
    print(f"level\t{report.level}")
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    levels = load_manifest(args.manifest).level_map() if args.manifest else None
    result = evaluate(args.pred, args.gold, args.format, levels=levels, jobs=args.jobs)
    sys.stdout.write(format_report(result))
    return 0


def cmd_gen_corpus(args: argparse.Namespace) -> int:
    fields: dict[str, object] = {
        "count_per_level": args.count,
        "seed": args.seed,
        "max_rings_fused": args.max_rings_fused,
        "max_atoms": args.max_atoms,
        "max_attempts": args.max_attempts,
    }
    if args.levels:
        fields["levels"] = parse_levels(args.levels)
    spec = CorpusSpec.model_validate(fields)
    manifest = generate_corpus(spec, args.out, jobs=args.jobs)
    print(f"Wrote {len(manifest.samples)} molecule(s) over {len(spec.levels)} level(s) to {args.out}")
    print(f"level_edges\t{','.join(str(e) for e in manifest.level_edges)}")
    return 0


# ── dispatch ─────────────────────────────────────────────────────────────────

def _one_line(exc: BaseException) -> str:
    return "; ".join(line.strip() for line in str(exc).splitlines() if line.strip()) or type(exc).__name__


def run(args: argparse.Namespace) -> int:
    try:
        return args.func(args)
    except RflError as exc:
        print(f"error: {_one_line(exc)}", file=sys.stderr)
        _log.debug("%s failed", args.command, exc_info=True)
        return exit_code_for(exc)
    except (ValueError, OSError) as exc:
        print(f"error: {_one_line(exc)}", file=sys.stderr)
        _log.debug("%s failed", args.command, exc_info=True)
        return 2


def main(argv: list[str] | None = None) -> int:
    return run(build_parser().parse_args(argv))
