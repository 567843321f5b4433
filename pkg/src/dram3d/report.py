"""Byte-stable text, CSV and JSON rendering of reports and tables.

Every float is emitted at 6 significant digits; JSON carries the same
rounded value that the CSV prints.
"""

from __future__ import annotations

import csv
import io
import json
import math
from typing import Any, Iterable, Mapping, Sequence


def fmt(x: Any) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        if not math.isfinite(x):
            raise ValueError(f"non-finite value {x!r} in report")
        return f"{x:.6g}"
    return str(x)


def rounded(x: Any) -> Any:
    if isinstance(x, float):
        return float(fmt(x))
    if isinstance(x, Mapping):
        return {k: rounded(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [rounded(v) for v in x]
    return x


def to_json(obj: Any) -> str:
    return json.dumps(rounded(obj), indent=2) + "\n"


def to_csv(columns: Sequence[str], rows: Iterable[Mapping[str, Any]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([fmt(row.get(c)) for c in columns])
    return buf.getvalue()


def text_table(columns: Sequence[str], rows: Iterable[Mapping[str, Any]]) -> str:
    cells = [list(columns)] + [[fmt(r.get(c)) or "-" for c in columns] for r in rows]
    widths = [max(len(row[i]) for row in cells) for i in range(len(columns))]
    lines = []
    for k, row in enumerate(cells):
        lines.append("  ".join(c.rjust(w) if i else c.ljust(w)
                               for i, (c, w) in enumerate(zip(row, widths))).rstrip())
        if k == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def transpose(columns: Sequence[str], rows: Sequence[Mapping[str, Any]],
              key: str) -> tuple[list[str], list[dict[str, Any]]]:
    """Metrics as rows, one column per input row labelled by ``key``."""
    labels = [str(r[key]) for r in rows]
    out = []
    for c in columns:
        if c == key:
            continue
        out.append({"metric": c, **{lab: r.get(c) for lab, r in zip(labels, rows)}})
    return ["metric", *labels], out
