"""Table statistics: row counts, column types, widths, distinct counts.

The catalog file is JSON: a `tables` object mapping table name to
`row_count` and an ordered `columns` array of `{name, type,
width_bytes, ndv}` entries.  Column order in the file is the schema
order.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .errors import MissingStatistics
from .ir import Col, ColumnDef, Schema, TableDef


@dataclass(frozen=True)
class ColumnStats:
    name: str
    type: str
    width_bytes: int
    ndv: int


@dataclass(frozen=True)
class TableStats:
    name: str
    row_count: int
    columns: tuple[ColumnStats, ...]

    def column(self, name: str) -> ColumnStats:
        for c in self.columns:
            if c.name == name:
                return c
        raise MissingStatistics(f"no statistics for column {self.name}.{name}")


@dataclass(frozen=True)
class Catalog:
    tables: tuple[TableStats, ...]

    def table(self, name: str) -> TableStats:
        for t in self.tables:
            if t.name == name:
                return t
        raise MissingStatistics(f"no statistics for table {name!r}")

    def column(self, col: Col) -> ColumnStats:
        return self.table(col.table).column(col.column)

    def schema(self) -> Schema:
        return Schema(tuple(
            TableDef(t.name, tuple(ColumnDef(c.name, c.type, c.width_bytes)
                                   for c in t.columns))
            for t in self.tables
        ))

    def to_json(self) -> str:
        doc = {"tables": {
            t.name: {
                "row_count": t.row_count,
                "columns": [
                    {"name": c.name, "type": c.type,
                     "width_bytes": c.width_bytes, "ndv": c.ndv}
                    for c in t.columns
                ],
            } for t in self.tables
        }}
        return json.dumps(doc, indent=2) + "\n"

    @staticmethod
    def from_json(text: str) -> "Catalog":
        doc = json.loads(text)
        tables = []
        for name, entry in doc["tables"].items():
            cols = tuple(ColumnStats(c["name"], c["type"], int(c["width_bytes"]), int(c["ndv"]))
                         for c in entry["columns"])
            tables.append(TableStats(name, int(entry["row_count"]), cols))
        return Catalog(tuple(tables))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json())

    @staticmethod
    def load(path: str | Path) -> "Catalog":
        return Catalog.from_json(Path(path).read_text())
