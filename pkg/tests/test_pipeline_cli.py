"""The run pipeline and the command-line interface."""

import json
import sqlite3

import pytest

from provql import pipeline, suites
from provql.cli import main
from provql.errors import ProvqlError
from provql.sqlbackend import load_database
from provql.typecheck import Mode


class TestPipeline:
    def test_both_engines_agree_and_compare(self, tours_db):
        cfg = pipeline.RunConfig(mode=Mode.WHERE, engine="both", emit_sql=True)
        result = pipeline.run(suites.BOAT_TOURS_WHERE, cfg, db=tours_db)
        assert result.value is not None
        assert "sql" in result.outputs

    def test_sql_engine_requires_query_main(self, tours_db):
        text = suites.TOURS_DECLS + "for (a <-- agencies) [(n = a.name)]"
        cfg = pipeline.RunConfig(mode=Mode.PLAIN, engine="sql")
        with pytest.raises(ProvqlError, match="query block"):
            pipeline.run(text, cfg, db=tours_db)

    def test_emit_translated(self, tours_db):
        cfg = pipeline.RunConfig(mode=Mode.LINEAGE, engine="interpret", emit_translated=True)
        result = pipeline.run(suites.BOAT_TOURS_LINEAGE, cfg, db=tours_db)
        assert "agencies.2()" in result.outputs["translated"].replace(" ", "").replace(
            "\n", ""
        ) or ".2()" in result.outputs["translated"]

    def test_explain_lists_plan(self, tours_db):
        cfg = pipeline.RunConfig(mode=Mode.PLAIN, engine="sql", explain=True)
        result = pipeline.run(suites.BOAT_TOURS, cfg, db=tours_db)
        kinds = [k for k, _ in result.outputs["explain"]]
        assert "sql" in kinds or "sql-skeleton" in kinds


class TestCli:
    def _write(self, tmp_path, text):
        p = tmp_path / "prog.pql"
        p.write_text(text, encoding="utf-8")
        return str(p)

    def test_run_exit_codes(self, tmp_path, capsys):
        path = self._write(tmp_path, suites.BOAT_TOURS)
        assert main(["run", path, "--engine", "both"]) == 0
        out = capsys.readouterr().out
        assert "EdinTours" in out

    def test_typecheck_error_exit(self, tmp_path, capsys):
        path = self._write(tmp_path, suites.TOURS_DECLS + "query { agencies.phone }")
        assert main(["run", path]) == 1
        assert "error" in capsys.readouterr().err

    def test_lineage_empty_rejected(self, tmp_path, capsys):
        path = self._write(
            tmp_path,
            suites.TOURS_DECLS
            + "lineage { for (a <-- agencies) where (empty([] : [Int])) [(n = a.name)] }",
        )
        assert main(["run", path, "--mode", "lineage"]) == 1
        assert "nonmonotonic" in capsys.readouterr().err

    def test_emit_sql_matches_listing(self, tmp_path, capsys):
        path = self._write(tmp_path, suites.BOAT_TOURS_WHERE)
        assert main(["sql", path, "--mode", "where"]) == 0
        out = capsys.readouterr().out
        assert "'Agencies'" in out and "UNION" not in out

    def test_gen_data_and_run_from_file_db(self, tmp_path, capsys):
        dsn = str(tmp_path / "bench.db")
        assert (
            main(["gen-data", "--departments", "2", "--seed", "1", "--employees", "5", "--db", dsn])
            == 0
        )
        info = json.loads(capsys.readouterr().out)
        assert info["rows"]["departments"] == 2
        qpath = self._write(tmp_path, suites.WHERE_SUITE["Q4"]["noprov"])
        assert main(["run", qpath, "--engine", "both", "--db", dsn]) == 0

    def test_check_subcommand(self, capsys):
        assert main(["check", "type-preservation", "--trials", "5"]) == 0
        report = json.loads(capsys.readouterr().out)
        assert report["ok"] is True

    def test_init_db_emit_only(self, capsys):
        assert main(["init-db", "--emit-only"]) == 0
        out = capsys.readouterr().out
        assert 'CREATE TABLE "departments"' in out
