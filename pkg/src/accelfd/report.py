"""CSV and text-table rendering of study reports."""

from __future__ import annotations

import io
import math

from .study import Row, StudyReport

CSV_COLUMNS = ("h", "error_sup", "observed_order", "wall_ms")


def _num(x) -> str:
    if x is None:
        return "nan"
    if isinstance(x, str):
        return x
    if math.isnan(x):
        return "nan"
    return repr(float(x))


def _cells(row: Row, deterministic: bool) -> list[str]:
    cells = [_num(row.h), _num(row.error), _num(row.order) if row.order != "" else ""]
    if not deterministic:
        cells.append(f"{row.wall_ms:.3f}")
    return cells


def render_csv(report: StudyReport, deterministic: bool = False) -> str:
    cols = CSV_COLUMNS[:3] if deterministic else CSV_COLUMNS
    lines = [",".join(cols)]
    lines += [",".join(_cells(r, deterministic)) for r in report.rows]
    return "\n".join(lines) + "\n"


def render_table(report: StudyReport, deterministic: bool = False) -> str:
    cols = list(CSV_COLUMNS[:3] if deterministic else CSV_COLUMNS)
    body = []
    for r in report.rows:
        cells = [f"{r.h:.6g}", "failed" if r.error is None else f"{r.error:.6e}",
                 r.order if isinstance(r.order, str) else f"{r.order:.4f}"]
        if not deterministic:
            cells.append(f"{r.wall_ms:.1f}")
        body.append(cells)
    out = io.StringIO()
    if body:
        widths = [max(len(c) for c in col) for col in zip(cols, *body)]
        out.write("  ".join(c.rjust(w) for c, w in zip(cols, widths)).rstrip() + "\n")
    for cells in body:
        out.write("  ".join(c.rjust(w) for c, w in zip(cells, widths)).rstrip() + "\n")
    for r in report.rows:
        if r.note:
            out.write(f"h={r.h:.6g}: {r.note}\n")
    for line in report.flags:
        out.write(f"flag  {line}\n")
    for line in report.notes:
        out.write(f"note  {line}\n")
    for v in report.verdicts:
        out.write(f"{'PASS' if v.passed else 'FAIL'}  {v.name}" + (f": {v.detail}" if v.detail else "") + "\n")
    return out.getvalue()


def emit_report(report: StudyReport, fmt: str = "csv", path: str | None = None,
                deterministic: bool = False) -> str:
    """Render ``report``; write it to ``path`` when given.  Returns the text."""
    if fmt == "csv":
        text = render_csv(report, deterministic)
    elif fmt in ("table", "text-table"):
        text = render_table(report, deterministic)
    else:
        raise ValueError(f"unknown format {fmt!r}")
    if path is not None:
        with open(path, "w", encoding="ascii", newline="\n") as fh:
            fh.write(text)
    return text
