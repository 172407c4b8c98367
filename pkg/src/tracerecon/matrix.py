"""Cross-regime matrix: per-property counts, mean, CV, gap partition, Markdown tables."""

from __future__ import annotations

import math
from dataclasses import dataclass
from decimal import Decimal
from enum import Enum
from fractions import Fraction
from typing import Any, Mapping, Sequence

from tracerecon.errors import DuplicateColumn, MalformedInput, MissingColumn
from tracerecon.feasibility import FeasibilityReport
from tracerecon.model import Category, PropertyClass, canonical_json, load_json, round_half_away, score_of

VENDOR_COUNT = 6
UNDEFINED_CV = "undefined (zero mean)"


class GapClass(str, Enum):
    REGIME_INDEPENDENT = "regime_independent"
    REGIME_DEPENDENT = "regime_dependent"
    MIXED = "mixed"
    UNCLASSIFIED = "unclassified"


@dataclass(frozen=True)
class Column:
    regime: str
    label: str
    vendor: bool = True


def load_columns(raw: bytes) -> list[Column]:
    """Parse a columns file: ``{"columns": [{"regime", "label", "vendor"}, ...]}``."""
    document = load_json(raw, "columns file")
    entries = document.get("columns") if isinstance(document, dict) else None
    if not isinstance(entries, list):
        raise MalformedInput("columns file needs a 'columns' list")
    columns = []
    for entry in entries:
        if not isinstance(entry, dict) or "regime" not in entry:
            raise MalformedInput("each column needs a 'regime'")
        columns.append(Column(str(entry["regime"]), str(entry.get("label", entry["regime"])), bool(entry.get("vendor", True))))
    return columns


@dataclass(frozen=True)
class PropertyStats:
    counts: Mapping[Category, int]
    mean: Fraction
    cv: float | None  # None when the mean is zero

    @property
    def mean_text(self) -> str:
        return f"{round_half_away(self.mean, 2):.2f}"

    @property
    def cv_text(self) -> str:
        if self.cv is None:
            return UNDEFINED_CV
        return f"{round_half_away(Fraction(self.cv), 2):.2f}"


@dataclass(frozen=True)
class MatrixSummary:
    columns: tuple[Column, ...]
    cells: Mapping[PropertyClass, Mapping[str, Category]]
    completeness: Mapping[str, Decimal]
    stats: Mapping[PropertyClass, PropertyStats]
    partition: Mapping[PropertyClass, GapClass]

    def vendor_columns(self) -> list[Column]:
        return [c for c in self.columns if c.vendor]

    def sample_count(self, prop: PropertyClass, regime: str) -> int:
        return 1 if regime in self.cells[prop] else 0


def population_cv(scores: Sequence[Fraction | float]) -> float | None:
    """Population standard deviation over the mean; None when the mean is zero."""
    values = [Fraction(s) for s in scores]
    mean = sum(values, Fraction(0)) / len(values)
    if mean == 0:
        return None
    variance = sum(((v - mean) ** 2 for v in values), Fraction(0)) / len(values)
    return math.sqrt(variance) / float(mean)


def partition(categories: Sequence[Category]) -> GapClass:
    """Classify one property from its six vendor-column categories."""
    if len(categories) != VENDOR_COUNT:
        raise ValueError(f"partition needs {VENDOR_COUNT} categories, got {len(categories)}")
    counts = {c: 0 for c in Category}
    for category in categories:
        counts[Category(category)] += 1
    if counts[Category.STRUCTURALLY_UNFILLABLE] + counts[Category.OPAQUE] >= 4:
        return GapClass.REGIME_INDEPENDENT
    if counts[Category.FULLY_FILLABLE] == 5:
        if counts[Category.PARTIALLY_FILLABLE] == 1:
            return GapClass.MIXED
        if counts[Category.STRUCTURALLY_UNFILLABLE] == 1:
            return GapClass.REGIME_DEPENDENT
    if VENDOR_COUNT - max(counts.values()) >= 2:
        return GapClass.REGIME_DEPENDENT
    return GapClass.UNCLASSIFIED


def aggregate(reports: Sequence[FeasibilityReport], columns: Sequence[Column]) -> MatrixSummary:
    declared: dict[str, Column] = {}
    for column in columns:
        if column.regime in declared:
            raise DuplicateColumn(f"column {column.regime!r} declared twice")
        declared[column.regime] = column
    vendors = [c.regime for c in columns if c.vendor]
    if len(vendors) != VENDOR_COUNT:
        raise ValueError(f"expected {VENDOR_COUNT} vendor columns, got {len(vendors)}")

    by_regime: dict[str, FeasibilityReport] = {}
    for report in reports:
        if report.regime in by_regime:
            raise DuplicateColumn(f"two reports for regime {report.regime!r}")
        if report.regime not in declared:
            raise MalformedInput(f"report for undeclared regime {report.regime!r}")
        by_regime[report.regime] = report
    missing = [r for r in declared if r not in by_regime]
    if missing:
        raise MissingColumn(f"no report for column(s): {', '.join(missing)}")

    cells = {prop: {r: by_regime[r].category_of(prop) for r in declared} for prop in PropertyClass}
    stats = {}
    gaps = {}
    for prop in PropertyClass:
        row = [cells[prop][r] for r in vendors]
        scores = [Fraction(score_of(c)) for c in row]
        stats[prop] = PropertyStats(
            counts={c: row.count(c) for c in Category},
            mean=sum(scores, Fraction(0)) / VENDOR_COUNT,
            cv=population_cv(scores),
        )
        gaps[prop] = partition(row)
    return MatrixSummary(
        columns=tuple(columns),
        cells=cells,
        completeness={r: by_regime[r].completeness_pct for r in declared},
        stats=stats,
        partition=gaps,
    )


def _row(cells: Sequence[str]) -> str:
    return "| " + " | ".join(cells) + " |"


def render_table2(summary: MatrixSummary) -> str:
    labels = [c.label for c in summary.columns]
    lines = [_row(["Property", *labels]), _row(["---", *(":---:" for _ in labels)])]
    for prop in PropertyClass:
        lines.append(_row([prop.label, *(summary.cells[prop][c.regime].code for c in summary.columns)]))
    lines.append(_row(["strict-gov. completeness pct", *(f"{summary.completeness[c.regime]:.1f}" for c in summary.columns)]))
    return "\n".join(lines) + "\n"


def render_table3(summary: MatrixSummary) -> str:
    header = ["Property", "F", "P", "S", "O", "Mean (vendor regimes only)", "CV across regimes"]
    lines = [_row(header), _row(["---", *(":---:" for _ in header[1:])])]
    for prop in PropertyClass:
        stats = summary.stats[prop]
        counts = [str(stats.counts[c]) for c in Category]
        lines.append(_row([prop.label, *counts, stats.mean_text, stats.cv_text]))
    return "\n".join(lines) + "\n"


def render_tables(summary: MatrixSummary) -> tuple[str, str]:
    return render_table2(summary), render_table3(summary)


def partition_document(summary: MatrixSummary) -> dict[str, Any]:
    classes: dict[str, list[str]] = {g.value: [] for g in GapClass}
    for prop in PropertyClass:
        classes[summary.partition[prop].value].append(prop.value)
    return {
        "by_property": {p.value: summary.partition[p].value for p in PropertyClass},
        "classes": classes,
        "vendor_columns": [c.regime for c in summary.vendor_columns()],
    }


def render_outputs(summary: MatrixSummary) -> dict[str, bytes]:
    """The three matrix files keyed by file name."""
    table2, table3 = render_tables(summary)
    return {
        "table2.md": table2.encode("utf-8"),
        "table3.md": table3.encode("utf-8"),
        "partition.json": canonical_json(partition_document(summary)),
    }
