"""Command-line entry point: ``tracerecon <subcommand> ...``.

Exit codes: 0 success; 1 regression diff or failed verification; 2 malformed
input, unknown record kind or bad usage; 3 empty anchor; 4 no decision event.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Sequence

from tracerecon import __version__
from tracerecon.adapters import AdapterId, ingest, load_replit_manifest
from tracerecon.adapters.generic_jsonl import MappingConfig
from tracerecon.errors import (
    EmptyAnchor,
    IoFailure,
    MalformedInput,
    NoDecisionEvent,
    TraceReconError,
    UnknownPattern,
    UnknownRecordKind,
)
from tracerecon.feasibility import FeasibilityReport, build_report, emit_report
from tracerecon.harness import pinned_files, regenerate_all, verify, write_atomic, write_checksums
from tracerecon.matrix import aggregate, load_columns, render_outputs
from tracerecon.model import FragmentsFile
from tracerecon.pipeline import DEFAULT_STATE_MUTATION_REGEX, PipelineConfig, assemble_chain, detect_boundaries, order_fragments
from tracerecon.provenance import PATTERNS, build_graph, load_jsonld, query, serialize_jsonld

EXIT_DIFF = 1
EXIT_MALFORMED = 2
EXIT_EMPTY = 3
EXIT_NO_DECISION = 4

ADAPTER_CHOICES = [a.value for a in AdapterId] + ["none"]


def _bool(text: str) -> bool:
    lowered = text.lower()
    if lowered in ("true", "1", "yes"):
        return True
    if lowered in ("false", "0", "no"):
        return False
    raise argparse.ArgumentTypeError(f"expected true or false, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tracerecon", description="Reconstruct decision evidence from agent traces.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="normalize a native anchor file into fragments.json")
    p.add_argument("--adapter", required=True, choices=ADAPTER_CHOICES, help="'none' loads a pre-built fragment manifest")
    p.add_argument("--input", required=True)
    p.add_argument("--mapping", help="mapping config JSON (generic_jsonl only)")
    p.add_argument("--out", required=True)
    p.add_argument("--anchor-id")
    p.add_argument("--regime")

    p = sub.add_parser("reconstruct", help="classify a fragments file; writes feasibility.json and trace.jsonld")
    p.add_argument("--fragments", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--within-stack-tier", type=int, default=1)
    p.add_argument("--state-mutation-regex", default=DEFAULT_STATE_MUTATION_REGEX)
    p.add_argument("--single-agent", type=_bool, default=True)

    p = sub.add_parser("matrix", help="aggregate per-anchor reports into the cross-regime matrix and summary tables")
    p.add_argument("--reports", required=True, help="directory holding <regime>/feasibility.json")
    p.add_argument("--columns", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--check", metavar="BASELINE_DIR", help="exit 1 if any output differs from this directory")

    p = sub.add_parser("query", help="run a canned evidence query over a trace.jsonld")
    p.add_argument("--graph", required=True)
    p.add_argument("--pattern", required=True, help=f"one of {', '.join(PATTERNS)}")

    p = sub.add_parser("checksums", help="print shasum-compatible SHA-256 lines")
    p.add_argument("paths", nargs="*", help="files to hash (default: every pinned file)")
    p.add_argument("--root", default=".")
    p.add_argument("--out", help="write to this file instead of stdout")

    p = sub.add_parser("verify", help="check the committed tree against MANIFEST.json and checksums.txt")
    p.add_argument("--root", default=".")

    p = sub.add_parser("regen", help="replay every anchor, rebuild the matrix, compare and verify")
    p.add_argument("--root", default=".")
    p.add_argument("--bless", action="store_true", help="accept the outputs as the new baseline and rewrite hashes")
    p.add_argument("--jobs", type=int)
    return parser


class _Context:
    def __init__(self, cwd: Path) -> None:
        self.cwd = cwd

    def path(self, value: str) -> Path:
        path = Path(value)
        return path if path.is_absolute() else self.cwd / path

    def read(self, value: str) -> bytes:
        try:
            return self.path(value).read_bytes()
        except OSError as exc:
            raise IoFailure(f"cannot read {value}: {exc}") from exc


def cmd_ingest(args: argparse.Namespace, ctx: _Context) -> int:
    raw = ctx.read(args.input)
    if args.adapter == "none":
        loaded = load_replit_manifest(raw)
        result = FragmentsFile(
            anchor_id=args.anchor_id or loaded.anchor_id,
            regime=args.regime or loaded.regime,
            adapter=loaded.adapter,
            fragments=loaded.fragments,
        )
    else:
        mapping = MappingConfig.from_bytes(ctx.read(args.mapping)) if args.mapping else None
        result = ingest(args.adapter, raw, mapping, anchor_id=args.anchor_id, regime=args.regime)
    write_atomic(ctx.path(args.out), result.to_bytes())
    return 0


def cmd_reconstruct(args: argparse.Namespace, ctx: _Context) -> int:
    config = PipelineConfig(
        single_agent=args.single_agent,
        within_stack_tier=args.within_stack_tier,
        state_mutation_regex=args.state_mutation_regex,
    )
    loaded = FragmentsFile.from_bytes(ctx.read(args.fragments))
    ordered = order_fragments(loaded.fragments)
    chain = assemble_chain(ordered, config)
    units = detect_boundaries(ordered, chain, config)
    report = build_report(loaded.anchor_id, loaded.regime, loaded.adapter, units, ordered, chain, config)
    per_unit = report.unit_findings or {units[0].unit_id: report.findings}
    graph = build_graph(units, loaded.fragments, per_unit, loaded.anchor_id)
    out_dir = ctx.path(args.out_dir)
    write_atomic(out_dir / "feasibility.json", emit_report(report))
    write_atomic(out_dir / "trace.jsonld", serialize_jsonld(graph))
    return 0


def cmd_matrix(args: argparse.Namespace, ctx: _Context) -> int:
    columns = load_columns(ctx.read(args.columns))
    reports_dir = ctx.path(args.reports)
    reports = [FeasibilityReport.from_bytes(p.read_bytes()) for p in sorted(reports_dir.glob("*/feasibility.json"))]
    rendered = render_outputs(aggregate(reports, columns))
    out_dir = ctx.path(args.out)
    for name, data in rendered.items():
        write_atomic(out_dir / name, data)
    if args.check is None:
        return 0
    baseline = ctx.path(args.check)
    differing = [n for n, data in rendered.items() if not (baseline / n).is_file() or (baseline / n).read_bytes() != data]
    for name in differing:
        print(f"differs from baseline: {name}")
    return EXIT_DIFF if differing else 0


def cmd_query(args: argparse.Namespace, ctx: _Context) -> int:
    graph = load_jsonld(ctx.read(args.graph))
    for node in query(graph, args.pattern):
        print(node)
    return 0


def cmd_checksums(args: argparse.Namespace, ctx: _Context) -> int:
    root = ctx.path(args.root)
    paths = args.paths or pinned_files(root)
    data = write_checksums(paths, root)
    if args.out:
        write_atomic(ctx.path(args.out), data)
    else:
        sys.stdout.write(data.decode("utf-8"))
    return 0


def cmd_verify(args: argparse.Namespace, ctx: _Context) -> int:
    report = verify(ctx.path(args.root))
    for line in report.lines():
        print(line)
    return 0 if report.ok else EXIT_DIFF


def cmd_regen(args: argparse.Namespace, ctx: _Context) -> int:
    report = regenerate_all(ctx.path(args.root), lambda argv, cwd: main(argv, cwd=cwd), bless=args.bless, jobs=args.jobs)
    for line in report.lines():
        print(line)
    return 0 if report.ok else EXIT_DIFF


COMMANDS = {
    "ingest": cmd_ingest,
    "reconstruct": cmd_reconstruct,
    "matrix": cmd_matrix,
    "query": cmd_query,
    "checksums": cmd_checksums,
    "verify": cmd_verify,
    "regen": cmd_regen,
}


def main(argv: Sequence[str] | None = None, cwd: str | Path | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    ctx = _Context(Path(cwd) if cwd is not None else Path.cwd())
    try:
        return COMMANDS[args.command](args, ctx)
    except (MalformedInput, UnknownRecordKind, UnknownPattern) as exc:
        code = EXIT_MALFORMED
        message = str(exc)
    except EmptyAnchor as exc:
        code, message = EXIT_EMPTY, str(exc)
    except NoDecisionEvent as exc:
        code, message = EXIT_NO_DECISION, str(exc)
    except (NotImplementedError, ValueError) as exc:
        code, message = EXIT_MALFORMED, str(exc)
    except TraceReconError as exc:
        code, message = EXIT_DIFF, f"{type(exc).__name__}: {exc}"
    print(f"tracerecon {args.command}: {message}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
