"""Deterministic mini warehouse: eight tables, seeded rows, CSV round-trip.

Row counts scale linearly with `scale` (scale 0 means every table is
empty); foreign keys are drawn from the dimension sizes actually
generated.  Statistics (row counts, distinct counts, byte widths) are
measured from the rows actually generated, never assumed.
"""

from __future__ import annotations

import csv
import random
from pathlib import Path

from .catalog import Catalog, ColumnStats, TableStats
from .interp import Database

_STATUSES = ("F", "O", "P")

# (table, [(column, type)...]); generation order matters for key reuse.
TABLE_LAYOUT: list[tuple[str, list[tuple[str, str]]]] = [
    ("region", [("r_regionkey", "int"), ("r_name", "str")]),
    ("nation", [("n_nationkey", "int"), ("n_regionkey", "int"), ("n_name", "str")]),
    ("supplier", [("s_suppkey", "int"), ("s_nationkey", "int"), ("s_name", "str")]),
    ("customer", [("c_custkey", "int"), ("c_nationkey", "int"), ("c_name", "str")]),
    ("part", [("p_partkey", "int"), ("p_name", "str"), ("p_size", "int")]),
    ("orders", [("o_orderkey", "int"), ("o_custkey", "int"),
                ("o_orderstatus", "str"), ("o_totalprice", "int")]),
    ("lineitem", [("l_orderkey", "int"), ("l_suppkey", "int"),
                  ("l_quantity", "int"), ("l_extendedprice", "int")]),
    ("t", [("c1", "bool"), ("c2", "bool"), ("v", "int")]),
]

SUITES = ("mini",)


def _rows(base: int, scale: float) -> int:
    return max(0, round(base * scale))


def generate(scale: float = 1.0, seed: int = 0) -> tuple[Database, Catalog]:
    rng = random.Random(seed)
    db: Database = {}
    db["region"] = [(i, f"region{i}") for i in range(_rows(3, scale))]
    n_region = max(1, len(db["region"]))
    db["nation"] = [(i, i % n_region, f"nation{i}")
                    for i in range(_rows(4, scale))]
    n_nation = max(1, len(db["nation"]))
    db["supplier"] = [(i, i % n_nation, f"supplier{i}")
                      for i in range(_rows(5, scale))]
    db["customer"] = [(i, (2 * i + 1) % n_nation, f"customer{i}")
                      for i in range(_rows(6, scale))]
    db["part"] = [(i, f"part{i}", (3 * i) % 50 + 1)
                  for i in range(_rows(7, scale))]
    n_customer = max(1, len(db["customer"]))
    n_supplier = max(1, len(db["supplier"]))
    n_orders = _rows(15, scale)
    db["orders"] = [
        (i, rng.randrange(n_customer), rng.choice(_STATUSES),
         rng.randrange(1000, 99000))
        for i in range(n_orders)
    ]
    db["lineitem"] = [
        (rng.randrange(max(1, n_orders)), rng.randrange(n_supplier),
         rng.randrange(1, 51), rng.randrange(100, 10000))
        for _ in range(_rows(24, scale))
    ]
    db["t"] = [
        (rng.random() < 0.5, rng.random() < 0.5, rng.randrange(100))
        for _ in range(_rows(50, scale))
    ]
    return db, catalog_from_rows(db)


def _width(typ: str, values) -> int:
    if typ == "int":
        return 4
    if typ == "bool":
        return 1
    return max((len(v) for v in values), default=1)


def catalog_from_rows(db: Database) -> Catalog:
    tables = []
    for name, layout in TABLE_LAYOUT:
        rows = db[name]
        cols = []
        for idx, (col, typ) in enumerate(layout):
            values = [r[idx] for r in rows]
            cols.append(ColumnStats(col, typ, _width(typ, values),
                                    max(1, len(set(values)))))
        tables.append(TableStats(name, len(rows), tuple(cols)))
    return Catalog(tuple(tables))


def write_dataset(outdir: str | Path, scale: float = 1.0, seed: int = 0) -> Catalog:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    db, cat = generate(scale, seed)
    for name, layout in TABLE_LAYOUT:
        with open(outdir / f"{name}.csv", "w", newline="") as f:
            w = csv.writer(f)
            w.writerow([c for c, _ in layout])
            for row in db[name]:
                w.writerow(["true" if v is True else "false" if v is False else v
                            for v in row])
    cat.save(outdir / "catalog.json")
    return cat


def load_dataset(indir: str | Path) -> tuple[Database, Catalog]:
    indir = Path(indir)
    cat = Catalog.load(indir / "catalog.json")
    db: Database = {}
    for name, layout in TABLE_LAYOUT:
        rows = []
        with open(indir / f"{name}.csv", newline="") as f:
            reader = csv.reader(f)
            next(reader)
            for raw in reader:
                row = []
                for value, (_, typ) in zip(raw, layout):
                    if typ == "int":
                        row.append(int(value))
                    elif typ == "bool":
                        row.append(value == "true")
                    else:
                        row.append(value)
                rows.append(tuple(row))
        db[name] = rows
    return db, cat


# Benchmark workload, simplest first.  Every query parses under the
# generated catalog; the names key bench rows and CLI lookups.
# pg_original is the subquery pattern written with a derived table and a
# self join; the IN form it paraphrases is rejected by the parser and
# kept in UNSUPPORTED_QUERIES.
QUERIES: dict[str, str] = {
    "nested_filters":
        "select * from (select * from t where c2 = true) where c1 = true",
    "pg_original":
        "select orders.o_orderkey from orders, "
        "(select o_orderkey from orders where o_orderstatus = 'F') as sub "
        "where orders.o_orderkey = sub.o_orderkey "
        "and orders.o_totalprice > 40000",
    "pg_optimal":
        "select o_orderkey from orders "
        "where o_orderstatus = 'F' and o_totalprice > 40000",
    "pg_alternative":
        "select o_orderkey from "
        "(select * from orders where o_totalprice > 40000) as inter "
        "where inter.o_orderstatus = 'F'",
    "join3":
        "select o_orderkey, c_name, n_name from customer, orders, nation "
        "where c_custkey = o_custkey and c_nationkey = n_nationkey "
        "and o_totalprice > 40000",
    "join6":
        "select c_name from region, nation, supplier, customer, orders, lineitem "
        "where r_regionkey = n_regionkey and s_nationkey = n_nationkey "
        "and c_nationkey = s_nationkey and c_custkey = o_custkey "
        "and o_orderkey = l_orderkey and l_suppkey = s_suppkey "
        "and r_name = 'region1'",
}

QUERY_ORDER = tuple(QUERIES)

# Rejected on purpose: nested query under IN is outside the subset.
UNSUPPORTED_QUERIES: dict[str, str] = {
    "in_subquery":
        "select o_orderkey from orders where o_orderkey in "
        "(select o_orderkey from orders where o_orderstatus = 'F') "
        "and o_totalprice > 40000",
}
