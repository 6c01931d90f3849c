"""Result tables: per-noise sections of binned mean IoUs with bold markers."""
from __future__ import annotations

import csv
import io as _io
import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .evaluate import DEFAULT_ALPHA, EvalBin, bin_scores, mark_best


@dataclass(frozen=True)
class ReportCell:
    method: str
    mean_iou: float
    bold: bool


@dataclass(frozen=True)
class ReportRow:
    lo: float
    hi: float
    n: int
    cells: tuple[ReportCell, ...]

    def __post_init__(self) -> None:
        if not self.cells:
            raise ValueError("a report row needs at least one method cell")
        if not any(c.bold for c in self.cells):
            raise ValueError("every report row must bold at least one method")
        if self.n < 1:
            raise ValueError("row record count must be >= 1")

    @property
    def label(self) -> str:
        return f"{self.lo:g}-{self.hi:g}"


@dataclass(frozen=True)
class ReportSection:
    noise_kind: str
    methods: tuple[str, ...]
    rows: tuple[ReportRow, ...]

    def __post_init__(self) -> None:
        for row in self.rows:
            if tuple(c.method for c in row.cells) != self.methods:
                raise ValueError("all rows must share the section's method columns")


@dataclass(frozen=True)
class ReportTable:
    sections: tuple[ReportSection, ...]


def build_section(noise_kind: str, bins: Sequence[EvalBin],
                  method_names: Sequence[str],
                  alpha: float = DEFAULT_ALPHA) -> ReportSection:
    """Aggregate evaluated bins into one table section; empty bins are skipped."""
    rows = []
    for b in bins:
        if not b.records:
            continue
        scores = bin_scores(b, method_names)
        bold = mark_best(scores, alpha)
        cells = tuple(
            ReportCell(method=nm, mean_iou=float(np.mean(scores[nm])), bold=nm in bold)
            for nm in method_names
        )
        rows.append(ReportRow(lo=b.lo, hi=b.hi, n=len(b.records), cells=cells))
    return ReportSection(noise_kind=noise_kind, methods=tuple(method_names), rows=tuple(rows))


def render_text(table: ReportTable) -> str:
    """Aligned text table; bold cells are wrapped in asterisks."""
    lines: list[str] = []
    for section in table.sections:
        cols = ["Input IoU", "n", *section.methods]
        body = [
            [row.label, str(row.n)]
            + [f"*{c.mean_iou:.3f}*" if c.bold else f"{c.mean_iou:.3f}" for c in row.cells]
            for row in section.rows
        ]
        widths = [max(len(r[i]) for r in [cols, *body]) for i in range(len(cols))]
        lines.append(f"== {section.noise_kind} ==")
        lines.append("  ".join(c.ljust(w) for c, w in zip(cols, widths)))
        for r in body:
            lines.append("  ".join(c.ljust(w) for c, w in zip(r, widths)))
        lines.append("")
    return "\n".join(lines)


def render_csv(table: ReportTable) -> str:
    """Long-format CSV: one line per (noise kind, bin, method)."""
    buf = _io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["noise_kind", "bin_lo", "bin_hi", "n", "method", "mean_iou", "bold"])
    for section in table.sections:
        for row in section.rows:
            for cell in row.cells:
                writer.writerow([
                    section.noise_kind, repr(row.lo), repr(row.hi), row.n,
                    cell.method, f"{cell.mean_iou:.6f}", int(cell.bold),
                ])
    return buf.getvalue()


def table_to_jsonable(table: ReportTable) -> list[dict]:
    return [
        {
            "noise_kind": section.noise_kind,
            "bins": [
                {
                    "lo": row.lo,
                    "hi": row.hi,
                    "n": row.n,
                    "methods": [
                        {"name": c.method, "mean_iou": round(c.mean_iou, 6), "bold": c.bold}
                        for c in row.cells
                    ],
                }
                for row in section.rows
            ],
        }
        for section in table.sections
    ]


def table_from_jsonable(data: Sequence[dict]) -> ReportTable:
    sections = []
    for sec in data:
        rows = []
        methods: tuple[str, ...] | None = None
        for b in sec["bins"]:
            cells = tuple(
                ReportCell(method=m["name"], mean_iou=float(m["mean_iou"]), bold=bool(m["bold"]))
                for m in b["methods"]
            )
            if methods is None:
                methods = tuple(c.method for c in cells)
            rows.append(ReportRow(lo=float(b["lo"]), hi=float(b["hi"]), n=int(b["n"]), cells=cells))
        if methods is None:
            raise ValueError(f"report section {sec.get('noise_kind')!r} has no bins")
        sections.append(ReportSection(noise_kind=sec["noise_kind"], methods=methods, rows=tuple(rows)))
    return ReportTable(sections=tuple(sections))


def render_json(table: ReportTable) -> str:
    return json.dumps(table_to_jsonable(table), indent=2) + "\n"
