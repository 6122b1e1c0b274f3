"""Data generator: determinism, scaling, statistics, disk round-trip."""

from sqlsat.datagen import (QUERIES, QUERY_ORDER, TABLE_LAYOUT, generate,
                            load_dataset, write_dataset)


def test_generation_is_deterministic():
    db1, cat1 = generate(scale=1.0, seed=0)
    db2, cat2 = generate(scale=1.0, seed=0)
    assert db1 == db2
    assert cat1 == cat2
    db3, _ = generate(scale=1.0, seed=1)
    assert db3 != db1


def test_scale_zero_gives_empty_tables():
    db, cat = generate(scale=0.0)
    assert all(rows == [] for rows in db.values())
    for stats in cat.tables:
        assert stats.row_count == 0


def test_scale_grows_fact_tables():
    db1, _ = generate(scale=1.0)
    db4, _ = generate(scale=4.0)
    assert len(db4["orders"]) == 4 * len(db1["orders"])
    assert len(db4["lineitem"]) == 4 * len(db1["lineitem"])


def test_catalog_matches_generated_rows():
    db, cat = generate()
    for name, layout in TABLE_LAYOUT:
        stats = cat.table(name)
        assert stats.row_count == len(db[name])
        for idx, (colname, typ) in enumerate(layout):
            cs = stats.column(colname)
            values = {r[idx] for r in db[name]}
            assert cs.ndv == max(1, len(values)), (name, colname)


def test_foreign_keys_land_in_dimension_range():
    db, _ = generate(scale=2.0, seed=7)
    n_customer = len(db["customer"])
    assert all(0 <= r[1] < n_customer for r in db["orders"])
    n_orders = len(db["orders"])
    assert all(0 <= r[0] < n_orders for r in db["lineitem"])


def test_fixture_queries_cover_the_suite():
    assert tuple(QUERIES) == QUERY_ORDER
    assert set(QUERY_ORDER) == {"nested_filters", "pg_original", "pg_optimal",
                                "pg_alternative", "join3", "join6"}


def test_write_then_load_round_trips(tmp_path):
    cat = write_dataset(tmp_path, scale=1.0, seed=0)
    db2, cat2 = load_dataset(tmp_path)
    db1, _ = generate(scale=1.0, seed=0)
    assert db2 == db1
    assert cat2 == cat
