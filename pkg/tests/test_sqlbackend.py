"""SQL rendering, execution, updates, and the data generator."""

import sqlite3

import pytest

from provql import pipeline, suites
from provql import syntax as S
from provql import values as V
from provql.errors import BackendError
from provql.interp import eval_big
from provql.parser import parse_expr
from provql.progen import ProgGen
from provql.sqlbackend import (
    apply_update,
    bench_schema_rows,
    execute,
    generate_benchmark_data,
    load_database,
    read_database,
    render_sql,
    schema_ddl,
)
from provql.typecheck import Mode


class TestRenderSql:
    def test_where_prov_constants_in_select(self):
        prepared = pipeline.prepare(suites.BOAT_TOURS_WHERE, Mode.WHERE)
        q = render_sql(pipeline.normalized_query(prepared))
        text = q.to_sql()
        assert len(q.selects) == 1
        assert "'Agencies'" in text and "'phone'" in text
        assert '"p_phone_1"' in text and '"p_phone_3"' in text
        assert text.count("SELECT") == 1
        # provenance columns are constants plus oid, never computed per row
        sel = dict((alias, expr) for expr, alias in q.selects[0].select)
        assert sel["p_phone_1"] == "'Agencies'"
        assert sel["p_phone_2"] == "'phone'"
        assert sel["p_phone_3"].endswith('."oid"')

    def test_empty_condition_no_where(self):
        prepared = pipeline.prepare(
            suites.TOURS_DECLS + "query { for (a <-- agencies) [(n = a.name)] }",
            Mode.PLAIN,
        )
        q = render_sql(pipeline.normalized_query(prepared))
        assert "WHERE" not in q.to_sql()

    def test_union_all_two_branches(self):
        prepared = pipeline.prepare(suites.LINEAGE_SUITE["QF4"]["nolineage"], Mode.PLAIN)
        q = render_sql(pipeline.normalized_query(prepared))
        assert len(q.selects) == 2
        assert "UNION ALL" in q.to_sql()

    def test_identifiers_quoted_and_strings_escaped(self):
        prepared = pipeline.prepare(
            suites.TOURS_DECLS
            + """query { for (a <-- agencies) where (a.name == "O'Brien") [(n = a.name)] }""",
            Mode.PLAIN,
        )
        text = render_sql(pipeline.normalized_query(prepared)).to_sql()
        assert "'O''Brien'" in text
        assert '"Agencies"' in text

    def test_non_flat_field_rejected(self):
        prepared = pipeline.prepare(suites.WHERE_SUITE["Q4"]["noprov"], Mode.PLAIN)
        with pytest.raises(BackendError, match="non-flat"):
            render_sql(pipeline.normalized_query(prepared))


class TestExecute:
    def test_boat_tours_decodes(self, tours_db, tours_conn):
        prepared = pipeline.prepare(suites.BOAT_TOURS, Mode.PLAIN)
        q = render_sql(pipeline.normalized_query(prepared))
        out = execute(tours_conn, q)
        assert len(out.items) == 3
        names = sorted(r.get("name").value for r in out.items)
        assert names == ["Burns's", "EdinTours", "EdinTours"]

    def test_empty_table_gives_empty_list(self, tours_conn):
        tours_conn.execute('DELETE FROM "Agencies"')
        prepared = pipeline.prepare(suites.BOAT_TOURS, Mode.PLAIN)
        q = render_sql(pipeline.normalized_query(prepared))
        assert execute(tours_conn, q) == V.VList(())

    def test_where_prov_triples_decode(self, tours_conn):
        prepared = pipeline.prepare(suites.BOAT_TOURS_WHERE, Mode.WHERE)
        q = render_sql(pipeline.normalized_query(prepared))
        out = execute(tours_conn, q)
        triples = sorted(
            (r.get("p_phone").get("1").value, r.get("p_phone").get("2").value,
             r.get("p_phone").get("3").value)
            for r in out.items
        )
        assert triples == [
            ("Agencies", "phone", 1),
            ("Agencies", "phone", 1),
            ("Agencies", "phone", 2),
        ]

    def test_boolean_round_trip(self, small_bench_conn):
        prepared = pipeline.prepare(
            suites.BENCH_DECLS_PLAIN
            + 'query { for (c <-- contacts) [(n = c.name, b = c."client")] }',
            Mode.PLAIN,
        )
        q = render_sql(pipeline.normalized_query(prepared))
        out = execute(small_bench_conn, q)
        assert all(isinstance(r.get("b").value, bool) for r in out.items)


class TestUpdates:
    def _setup(self):
        db = generate_benchmark_data(1, seed=3, employees_per_dept=4)
        conn = sqlite3.connect(":memory:")
        load_database(conn, db)
        return db, conn

    def test_delete_where_false_is_noop(self):
        db, conn = self._setup()
        row = bench_schema_rows()["tasks"]
        stmt = S.Delete("x", S.TableRef("tasks", row), S.Const(False))
        apply_update(conn, stmt, bench_schema_rows())
        n = conn.execute('SELECT COUNT(*) FROM "tasks"').fetchone()[0]
        assert n == len(db.get("tasks").rows)

    def test_insert_assigns_fresh_distinct_oids(self):
        db, conn = self._setup()
        row = bench_schema_rows()["departments"]
        stmt = parse_expr(
            'insert (table "departments" with (oid: Int, name: String) where oid readonly)'
            ' values [(name = "d_new1"), (name = "d_new2")]'
        )
        before = conn.execute('SELECT COUNT(*) FROM "departments"').fetchone()[0]
        apply_update(conn, stmt, bench_schema_rows())
        rows = conn.execute('SELECT "oid", "name" FROM "departments"').fetchall()
        assert len(rows) == before + 2
        oids = [r[0] for r in rows]
        assert len(set(oids)) == len(oids)
        # matches the interpreter applying the same statement
        eval_big(db, stmt, Mode.PLAIN)
        assert sorted(r["oid"] for r in db.get("departments").rows) == sorted(oids)

    def test_update_matches_interpreter(self):
        db, conn = self._setup()
        stmt = parse_expr(
            'update (x <-- table "employees" with (oid: Int, dept: String, name: String, salary: Int)'
            " where oid readonly) where (x.salary > 50000) set (salary = x.salary + 1)"
        )
        apply_update(conn, stmt, bench_schema_rows())
        eval_big(db, stmt, Mode.PLAIN)
        sdb = read_database(conn, bench_schema_rows())
        assert sorted(map(sorted, (r.items() for r in sdb.get("employees").rows))) == sorted(
            map(sorted, (r.items() for r in db.get("employees").rows))
        )

    def test_writing_oid_rejected(self):
        _, conn = self._setup()
        stmt = parse_expr(
            'update (x <-- table "tasks" with (oid: Int, employee: String, task: String)'
            " where oid readonly) where (true) set (oid = 1)"
        )
        with pytest.raises(BackendError, match="oid"):
            apply_update(conn, stmt, bench_schema_rows())


class TestGenerator:
    def test_deterministic_by_seed(self):
        a = generate_benchmark_data(3, seed=11)
        b = generate_benchmark_data(3, seed=11)
        assert a.dump_canonical() == b.dump_canonical()
        c = generate_benchmark_data(3, seed=12)
        assert a.dump_canonical() != c.dump_canonical()

    def test_department_scaling(self):
        db = generate_benchmark_data(4, seed=1)
        assert len(db.get("departments").rows) == 4
        emps = len(db.get("employees").rows)
        assert 280 <= emps <= 520  # ~100 per department on average
        tasks = len(db.get("tasks").rows)
        assert 0.5 * emps <= tasks <= 1.5 * emps  # 0-2 tasks per employee

    def test_zero_departments_rejected(self):
        with pytest.raises(BackendError):
            generate_benchmark_data(0, seed=1)

    def test_schema_and_indexes(self):
        db = generate_benchmark_data(1, seed=1)
        ddl = schema_ddl(db)
        text = ";\n".join(ddl)
        for idx in ("idx_tasks_employee", "idx_tasks_task", "idx_employees_dept", "idx_contacts_dept"):
            assert idx in text

    def test_sql_round_trip(self):
        db = generate_benchmark_data(2, seed=5, employees_per_dept=5)
        conn = sqlite3.connect(":memory:")
        load_database(conn, db)
        back = read_database(conn, bench_schema_rows())
        assert back.dump_canonical() == db.dump_canonical()
        conn.close()


class TestPlanExecutor:
    def test_nested_query_matches_interpreter(self, small_bench_db, small_bench_conn):
        text = suites.WHERE_SUITE["Q4"]["noprov"]
        prepared = pipeline.prepare(text, Mode.PLAIN)
        vi = pipeline.comparable(pipeline.run_interp(small_bench_db, prepared), Mode.PLAIN)
        vs = pipeline.comparable(pipeline.run_sql(small_bench_conn, prepared), Mode.PLAIN)
        assert vi == vs

    def test_exists_conditions(self, small_bench_db, small_bench_conn):
        text = suites.WHERE_SUITE["Q2"]["noprov"]
        prepared = pipeline.prepare(text, Mode.PLAIN)
        vi = pipeline.comparable(pipeline.run_interp(small_bench_db, prepared), Mode.PLAIN)
        vs = pipeline.comparable(pipeline.run_sql(small_bench_conn, prepared), Mode.PLAIN)
        assert vi == vs

    def test_generated_updates_route_through_raw_table(self, tours_db):
        # translated table pairs send updates to the raw table (.1); the
        # provenance view reflects the change on the next read
        text = suites.TOURS_DECLS_PROV + (
            "var u = update (x <-- agencies) where (x.name == \"Burns's\")"
            ' set (phone = "000");\n'
            "query { for (a <-- agencies) [(p = prov a.phone, d = data a.phone)] }"
        )
        prepared = pipeline.prepare(text, Mode.WHERE)
        translated = prepared.translated
        db = tours_db.copy()
        _, v = eval_big(db, translated.as_expr(), Mode.PLAIN)
        phones = sorted(
            (r.get("d").value, r.get("p").get("3").value) for r in v.items
        )
        assert phones == [("000", 2), ("412 1200", 1)]
