"""Checksums, origin-manifest verification and full-corpus regeneration."""

from __future__ import annotations

import difflib
import hashlib
import os
import re
import shlex
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable, Iterable, Sequence

from tracerecon.errors import IoFailure, MalformedInput, TraceReconError
from tracerecon.feasibility import FeasibilityReport
from tracerecon.matrix import aggregate, load_columns, render_outputs
from tracerecon.model import canonical_json, load_json

MANIFEST = "MANIFEST.json"
CHECKSUMS = "checksums.txt"
PINNED_DIRS = ("fixtures", "out", "baseline")
MATRIX_FILES = ("table2.md", "table3.md", "partition.json")
HASH_FIELDS = ("anchor_input", "fragments", "feasibility", "trace_jsonld")
ANCHOR_KINDS = ("worked_example", "public_record_reconstruction")
_HEX64 = re.compile(r"^[0-9a-f]{64}$")


def sha256_file(path: Path) -> str:
    digest = hashlib.sha256()
    try:
        with path.open("rb") as handle:
            for chunk in iter(lambda: handle.read(1 << 16), b""):
                digest.update(chunk)
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    return digest.hexdigest()


def write_atomic(path: Path, data: bytes) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_name(path.name + ".tmp")
        tmp.write_bytes(data)
        os.replace(tmp, path)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def _relpath(path: Path, root: Path) -> str:
    path = path if path.is_absolute() else root / path
    return path.resolve().relative_to(root.resolve()).as_posix()


def write_checksums(paths: Iterable[str | Path], root: str | Path = ".") -> bytes:
    """shasum-compatible lines ``<sha256>  <relpath>``, sorted by path."""
    root = Path(root)
    lines = []
    for rel in sorted({_relpath(Path(p), root) for p in paths}):
        lines.append(f"{sha256_file(root / rel)}  {rel}\n")
    return "".join(lines).encode("utf-8")


def parse_checksums(raw: bytes) -> dict[str, str]:
    entries = {}
    for number, line in enumerate(raw.decode("utf-8", errors="replace").splitlines(), 1):
        if not line.strip():
            continue
        digest, sep, rel = line.partition("  ")
        if not sep or not _HEX64.match(digest):
            raise MalformedInput(f"{CHECKSUMS} line {number} is not '<sha256>  <path>'")
        entries[rel.lstrip("*")] = digest
    return entries


def pinned_files(root: Path) -> list[str]:
    """Every file under the committed trees plus the manifest."""
    found = [MANIFEST] if (root / MANIFEST).is_file() else []
    for name in PINNED_DIRS:
        base = root / name
        if base.is_dir():
            found.extend(p.relative_to(root).as_posix() for p in base.rglob("*") if p.is_file())
    return sorted(found)


# -- origin manifest -------------------------------------------------------


@dataclass
class AnchorEntry:
    anchor_id: str
    regime: str
    adapter: str
    source_path: str
    anchor_kind: str
    date: str
    cli_invocation: str
    out_dir: str
    sample_count: int = 1
    sha256: dict[str, str] = field(default_factory=dict)

    def outputs(self) -> dict[str, str]:
        return {
            "anchor_input": self.source_path,
            "fragments": f"{self.out_dir}/fragments.json",
            "feasibility": f"{self.out_dir}/feasibility.json",
            "trace_jsonld": f"{self.out_dir}/trace.jsonld",
        }

    def to_dict(self) -> dict[str, Any]:
        return {
            "anchor_id": self.anchor_id,
            "regime": self.regime,
            "adapter": self.adapter,
            "source_path": self.source_path,
            "anchor_kind": self.anchor_kind,
            "date": self.date,
            "sample_count": self.sample_count,
            "cli_invocation": self.cli_invocation,
            "out_dir": self.out_dir,
            "sha256": {k: self.sha256.get(k, "") for k in HASH_FIELDS},
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "AnchorEntry":
        try:
            entry = cls(
                anchor_id=data["anchor_id"],
                regime=data["regime"],
                adapter=data["adapter"],
                source_path=data["source_path"],
                anchor_kind=data["anchor_kind"],
                date=data["date"],
                cli_invocation=data["cli_invocation"],
                out_dir=data.get("out_dir", f"out/{data['regime']}"),
                sample_count=int(data.get("sample_count", 1)),
                sha256=dict(data.get("sha256") or {}),
            )
        except KeyError as exc:
            raise MalformedInput(f"manifest entry lacks {exc.args[0]!r}") from exc
        if entry.anchor_kind not in ANCHOR_KINDS:
            raise MalformedInput(f"{entry.anchor_id}: anchor_kind must be one of {ANCHOR_KINDS}")
        return entry


@dataclass
class OriginManifest:
    anchors: list[AnchorEntry]
    columns_path: str = "fixtures/columns.json"
    generated_at: str | None = None

    def to_bytes(self) -> bytes:
        return canonical_json(
            {
                "anchors": [a.to_dict() for a in self.anchors],
                "columns": self.columns_path,
                "generated_at": self.generated_at,
            }
        )

    @classmethod
    def from_bytes(cls, raw: bytes) -> "OriginManifest":
        document = load_json(raw, MANIFEST)
        if not isinstance(document, dict) or not isinstance(document.get("anchors"), list):
            raise MalformedInput(f"{MANIFEST} needs an 'anchors' list")
        return cls(
            anchors=[AnchorEntry.from_dict(a) for a in document["anchors"]],
            columns_path=document.get("columns", "fixtures/columns.json"),
            generated_at=document.get("generated_at"),
        )

    @classmethod
    def load(cls, root: Path) -> "OriginManifest":
        try:
            raw = (root / MANIFEST).read_bytes()
        except OSError as exc:
            raise IoFailure(f"cannot read {root / MANIFEST}: {exc}") from exc
        return cls.from_bytes(raw)


def build_timestamp() -> str | None:
    """UTC instant from SOURCE_DATE_EPOCH, or None when unset."""
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    if not epoch:
        return None
    instant = datetime.fromtimestamp(int(epoch), tz=timezone.utc)
    return instant.strftime("%Y-%m-%dT%H:%M:%SZ")


# -- verification -------------------------------------------------------------


@dataclass
class VerifyReport:
    status: dict[str, str]  # relpath -> ok | mismatch | missing
    problems: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.problems and all(s == "ok" for s in self.status.values())

    def failures(self) -> dict[str, str]:
        return {p: s for p, s in self.status.items() if s != "ok"}

    def lines(self) -> list[str]:
        out = [f"{status:<8} {path}" for path, status in sorted(self.status.items())]
        out.extend(f"error    {p}" for p in self.problems)
        ok_count = sum(1 for s in self.status.values() if s == "ok")
        out.append(f"{ok_count}/{len(self.status)} files ok")
        return out


def verify(root: str | Path = ".") -> VerifyReport:
    """Recompute every pinned hash from checksums.txt and the manifest."""
    root = Path(root)
    expected: dict[str, set[str]] = {}
    problems = []
    try:
        for rel, digest in parse_checksums((root / CHECKSUMS).read_bytes()).items():
            expected.setdefault(rel, set()).add(digest)
    except OSError:
        problems.append(f"{CHECKSUMS} is missing")
    except MalformedInput as exc:
        problems.append(str(exc))
    try:
        manifest = OriginManifest.load(root)
    except TraceReconError as exc:
        problems.append(f"{MANIFEST} unreadable: {exc}")
    else:
        if len(manifest.anchors) != 8:
            problems.append(f"{MANIFEST} lists {len(manifest.anchors)} anchors, expected 8")
        for entry in manifest.anchors:
            for key, rel in entry.outputs().items():
                digest = entry.sha256.get(key, "")
                if not _HEX64.match(digest):
                    problems.append(f"{entry.anchor_id}: sha256.{key} is not 64 lowercase hex characters")
                    continue
                expected.setdefault(rel, set()).add(digest)

    status = {}
    for rel in sorted(expected):
        path = root / rel
        if not path.is_file():
            status[rel] = "missing"
            continue
        actual = sha256_file(path)
        status[rel] = "ok" if expected[rel] == {actual} else "mismatch"
    return VerifyReport(status, problems)


# -- regeneration -------------------------------------------------------------


Runner = Callable[[Sequence[str], Path], int]


def split_invocation(invocation: str) -> list[list[str]]:
    """Split a manifest invocation on ``&&`` into argv lists without the program name."""
    commands: list[list[str]] = [[]]
    for token in shlex.split(invocation):
        if token == "&&":
            commands.append([])
        else:
            commands[-1].append(token)
    argvs = []
    for argv in commands:
        if not argv or argv[0] != "tracerecon":
            raise MalformedInput(f"invocation segment must start with 'tracerecon': {argv}")
        argvs.append(argv[1:])
    return argvs


@dataclass
class RegenReport:
    failures: dict[str, str] = field(default_factory=dict)  # anchor id / stage -> message
    changed: list[str] = field(default_factory=list)
    baseline_diff: list[str] = field(default_factory=list)
    verification: VerifyReport | None = None
    blessed: bool = False

    @property
    def ok(self) -> bool:
        verified = self.verification is None or self.verification.ok
        return not self.failures and not self.baseline_diff and verified

    def lines(self) -> list[str]:
        out = [f"FAILED {name}: {message}" for name, message in self.failures.items()]
        out.extend(self.baseline_diff)
        out.append(f"{len(self.changed)} files changed")
        out.extend(f"  changed {p}" for p in self.changed)
        if self.blessed:
            out.append("baseline, manifest hashes and checksums rewritten")
        if self.verification is not None:
            out.append("verify: " + ("ok" if self.verification.ok else "FAILED"))
            out.extend("  " + line for line in self.verification.lines() if not line.startswith("ok "))
        return out


def _snapshot(root: Path, rels: Iterable[str]) -> dict[str, str | None]:
    return {rel: sha256_file(root / rel) if (root / rel).is_file() else None for rel in rels}


def _run_anchor(entry: AnchorEntry, root: Path, runner: Runner) -> FeasibilityReport:
    if not (root / entry.source_path).is_file():
        raise IoFailure(f"anchor input {entry.source_path} is missing")
    for argv in split_invocation(entry.cli_invocation):
        code = runner(argv, root)
        if code != 0:
            raise TraceReconError(f"'tracerecon {' '.join(argv[:1])}' exited {code}")
    return FeasibilityReport.from_bytes((root / entry.out_dir / "feasibility.json").read_bytes())


def regenerate_all(root: str | Path, runner: Runner, *, bless: bool = False, jobs: int | None = None) -> RegenReport:
    """Replay every manifest invocation, rebuild the matrix, compare with the baseline, verify.

    ``runner(argv, cwd)`` executes one CLI command and returns its exit code.
    """
    root = Path(root)
    report = RegenReport()
    manifest = OriginManifest.load(root)
    outputs = [rel for e in manifest.anchors for k, rel in e.outputs().items() if k != "anchor_input"]
    outputs += [f"out/{name}" for name in MATRIX_FILES]
    before = _snapshot(root, outputs)

    reports: list[FeasibilityReport] = []
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        futures = [(e, pool.submit(_run_anchor, e, root, runner)) for e in manifest.anchors]
        for entry, future in futures:
            try:
                reports.append(future.result())
            except TraceReconError as exc:
                report.failures[entry.anchor_id] = str(exc)

    try:
        summary = aggregate(reports, load_columns((root / manifest.columns_path).read_bytes()))
    except (TraceReconError, OSError, ValueError) as exc:
        report.failures["matrix"] = f"{type(exc).__name__}: {exc}"
        return report
    rendered = render_outputs(summary)
    for name, data in rendered.items():
        write_atomic(root / "out" / name, data)

    after = _snapshot(root, outputs)
    report.changed = [rel for rel in outputs if before[rel] != after[rel]]

    for name, data in rendered.items():
        baseline = root / "baseline" / name
        if bless:
            write_atomic(baseline, data)
            continue
        current = baseline.read_bytes() if baseline.is_file() else b""
        if current != data:
            diff = difflib.unified_diff(
                current.decode("utf-8", errors="replace").splitlines(),
                data.decode("utf-8").splitlines(),
                f"baseline/{name}",
                f"out/{name}",
                lineterm="",
            )
            report.baseline_diff.extend(diff)

    if bless:
        for entry in manifest.anchors:
            entry.sha256 = {k: sha256_file(root / rel) for k, rel in entry.outputs().items()}
        manifest.generated_at = build_timestamp() or manifest.generated_at
        write_atomic(root / MANIFEST, manifest.to_bytes())
        write_atomic(root / CHECKSUMS, write_checksums(pinned_files(root), root))
        report.blessed = True

    report.verification = verify(root)
    return report

