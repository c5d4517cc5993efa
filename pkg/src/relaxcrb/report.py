"""Report tables and their CSV/JSON serialization.

CSV files start with a ``#schema=1`` comment line followed by a header whose
cells read ``name[unit]`` (bare ``name`` for unitless columns).  Floats are
written with ``repr`` so they round-trip exactly.  Missing values are empty
cells in CSV and ``null`` in JSON.
"""

from __future__ import annotations

import csv
import io
import json
import math
import numbers
import re
from dataclasses import dataclass, field
from pathlib import Path

SCHEMA_VERSION = 1
_HEADER_RE = re.compile(r"^(?P<name>[^\[]+)(\[(?P<unit>[^\]]*)\])?$")


@dataclass
class ReportTable:
    name: str
    columns: list[str]
    units: list[str] = field(default_factory=list)
    rows: list[list] = field(default_factory=list)

    def __post_init__(self):
        if not self.units:
            self.units = [""] * len(self.columns)
        if len(self.units) != len(self.columns):
            raise ValueError("units and columns differ in length")

    def add(self, **values) -> None:
        unknown = set(values) - set(self.columns)
        if unknown:
            raise KeyError(f"unknown columns {sorted(unknown)}")
        row = []
        for col in self.columns:
            v = values.get(col)
            if v is None or isinstance(v, str):
                pass
            elif isinstance(v, numbers.Integral):
                v = int(v)
            else:
                v = float(v)
                if not math.isfinite(v):
                    raise ValueError(f"non-finite value in column {col!r}")
            row.append(v)
        self.rows.append(row)

    def column(self, name: str) -> list:
        i = self.columns.index(name)
        return [r[i] for r in self.rows]

    def records(self) -> list[dict]:
        return [dict(zip(self.columns, r)) for r in self.rows]

    def header(self) -> list[str]:
        return [f"{c}[{u}]" if u else c for c, u in zip(self.columns, self.units)]

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"#schema={SCHEMA_VERSION}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.header())
        for r in self.rows:
            w.writerow(["" if v is None else repr(v) if isinstance(v, float) else v for v in r])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "columns": self.columns,
            "units": self.units,
            "rows": self.records(),
        }


def _cell(text: str):
    if text == "":
        return None
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def read_csv(text: str, name: str = "") -> ReportTable:
    """Inverse of ``ReportTable.to_csv``."""
    lines = text.splitlines()
    if not lines or lines[0].strip() != f"#schema={SCHEMA_VERSION}":
        raise ValueError("missing or unsupported schema tag")
    reader = csv.reader(lines[1:])
    header = next(reader)
    columns, units = [], []
    for h in header:
        m = _HEADER_RE.match(h)
        columns.append(m.group("name"))
        units.append(m.group("unit") or "")
    rows = [[_cell(c) for c in r] for r in reader]
    return ReportTable(name, columns, units, rows)


def tables_to_json(command: str, tables: list[ReportTable]) -> str:
    doc = {
        "schema": SCHEMA_VERSION,
        "command": command,
        "tables": [t.to_dict() for t in tables],
    }
    return json.dumps(doc, indent=2, allow_nan=False) + "\n"


def write_reports(
    command: str, tables: list[ReportTable], out: Path | None, fmt: str = "csv"
) -> dict[str, str]:
    """Serialize tables; returns {file name: content}.

    With ``out`` set the files are written there (``<command>_<table>.csv``
    per table, or one ``<command>.json``).
    """
    if fmt == "json":
        files = {f"{command}.json": tables_to_json(command, tables)}
    elif fmt == "csv":
        files = {f"{command}_{t.name}.csv": t.to_csv() for t in tables}
    else:
        raise ValueError(f"unknown format {fmt!r}")
    if out is not None:
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        for fname, content in files.items():
            (out / fname).write_text(content)
    return files
