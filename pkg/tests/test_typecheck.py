"""Typing judgments, auxiliary checks, and query safety."""

import pytest

from provql import suites
from provql import syntax as S
from provql.database import Database
from provql.errors import EvalError, QuerySafetyError, TypeCheckError
from provql.interp import eval_big
from provql.parser import parse_expr, parse_program, parse_type
from provql.progen import ProgGen
from provql.typecheck import (
    Mode,
    TypeChecker,
    TypeEnv,
    augment_row,
    check_query_safe,
    erase_type,
    is_base_row,
    is_qtype,
    typecheck,
    typecheck_program,
)

PROV_TRIPLE = S.tuple_type(S.STRING, S.STRING, S.INT)


def infer(text, mode=Mode.PLAIN, env=None):
    return typecheck(env or TypeEnv.empty(), parse_expr(text), mode).ty


class TestTypecheck:
    def test_q1ppp_type(self):
        checked = typecheck_program(parse_program(suites.BOAT_TOURS_WHERE), Mode.WHERE)
        assert checked.main.ty == S.ListType(
            S.record_type({"name": S.STRING, "phone": S.STRING, "p_phone": PROV_TRIPLE})
        )

    def test_empty_query_needs_annotation(self):
        with pytest.raises(TypeCheckError):
            infer("query { [] }")
        assert infer("query { [] : [Int] }") == S.ListType(S.INT)

    def test_lineage_block_type(self):
        checked = typecheck_program(parse_program(suites.BOAT_TOURS_LINEAGE), Mode.LINEAGE)
        expected = S.ListType(
            S.record_type(
                {
                    "data": S.record_type({"name": S.STRING, "phone": S.STRING}),
                    "prov": S.ListType(S.tuple_type(S.STRING, S.INT)),
                }
            )
        )
        assert checked.main.ty == expected

    def test_prov_and_data_types(self):
        env = TypeEnv({"p": S.ProvType(S.STRING)})
        assert infer("data p", Mode.WHERE, env) == S.STRING
        assert infer("prov p", Mode.WHERE, env) == PROV_TRIPLE
        with pytest.raises(TypeCheckError):
            infer("data p", Mode.PLAIN, env)

    def test_unknown_label_and_variable(self):
        with pytest.raises(TypeCheckError):
            infer("(a = 1).b")
        with pytest.raises(TypeCheckError):
            infer("nope")

    def test_table_with_spec_gets_augmented_type(self):
        t = infer(
            'table "T" with (a: String) where a prov default', Mode.WHERE
        )
        assert t == S.TableType(
            S.make_row([("a", S.ProvType(S.STRING)), ("oid", S.INT)])
        )

    def test_annotated_internal_nodes_rejected(self):
        from provql import values as V

        with pytest.raises(TypeCheckError):
            typecheck(TypeEnv.empty(), S.ValueLit(V.VConst(1)))

    def test_insert_values_exclude_oid(self):
        e = parse_expr('insert (table "T" with (a: Int)) values [(a = 1)]')
        assert typecheck(TypeEnv.empty(), e).ty == S.UNIT
        bad = parse_expr('insert (table "T" with (a: Int)) values [(a = 1, oid = 9)]')
        with pytest.raises(TypeCheckError):
            typecheck(TypeEnv.empty(), bad)

    def test_update_cannot_write_oid(self):
        bad = parse_expr('update (x <-- table "T" with (a: Int)) where (true) set (oid = 1)')
        with pytest.raises(TypeCheckError):
            typecheck(TypeEnv.empty(), bad)


class TestAuxJudgments:
    def test_qtype(self):
        assert is_qtype(parse_type("[(a: Int)]"))
        assert not is_qtype(parse_type("(Int) -> Int"))
        assert is_qtype(parse_type("[(x: Prov(String))]"), Mode.WHERE)
        assert not is_qtype(parse_type("[(x: Prov(String))]"), Mode.PLAIN)

    def test_base_row(self):
        assert is_base_row(S.make_row([("name", S.STRING), ("oid", S.INT)]))
        assert not is_base_row(S.make_row([("emps", S.ListType(S.STRING))]))
        assert is_base_row(
            S.make_row([("phone", S.ProvType(S.STRING))]), Mode.WHERE
        )

    def test_check_provspec(self):
        checker = TypeChecker(Mode.WHERE)
        row = S.make_row([("phone", S.STRING), ("oid", S.INT)])
        checker.check_provspec(TypeEnv.empty(), row, S.ProvSpec((S.ProvSpecEntry("phone", None),)))
        checker.check_provspec(TypeEnv.empty(), row, S.EMPTY_SPEC)
        bad_fn = parse_expr("fun (r) { r.phone }")
        with pytest.raises(TypeCheckError):
            checker.check_provspec(
                TypeEnv.empty(), row, S.ProvSpec((S.ProvSpecEntry("phone", bad_fn),))
            )

    def test_erase(self):
        assert erase_type(parse_type("Prov(Int)")) == S.INT
        assert erase_type(parse_type("(a: Prov(Bool), b: String)")) == parse_type(
            "(a: Bool, b: String)"
        )
        assert erase_type(S.STRING) == S.STRING

    def test_augment(self):
        row = S.make_row([("phone", S.STRING)])
        spec = S.ProvSpec((S.ProvSpecEntry("phone", None),))
        assert augment_row(row, spec) == S.make_row([("phone", S.ProvType(S.STRING))])
        assert augment_row(row, S.EMPTY_SPEC) == row


class TestQuerySafety:
    def test_boat_body_safe(self):
        prog = parse_program(suites.BOAT_TOURS)
        check_query_safe(prog.main.body, "plain", {})

    def test_empty_in_lineage_rejected(self):
        e = parse_expr("empty(for (x <-- t) [x])")
        with pytest.raises(QuerySafetyError):
            check_query_safe(e, "lineage", {})
        check_query_safe(e, "plain", {})  # fine in plain query blocks

    def test_effects_rejected(self):
        prog = parse_program(
            'var t = table "T" with (a: Int);\n'
            "query { var u = insert t values [(a = 1)]; [1] }"
        )
        with pytest.raises(QuerySafetyError):
            typecheck_program(prog, Mode.PLAIN)
        # an insert in result position is also rejected (it has unit type)
        bad = parse_program(
            'var t = table "T" with (a: Int);\n'
            "query { insert t values [(a = 1)] }"
        )
        with pytest.raises(TypeCheckError):
            typecheck_program(bad, Mode.PLAIN)

    def test_recursion_rejected(self):
        prog = parse_program(
            "sig f : (Int) -> [Int]\n"
            "fun f(n) { if (n < 1) { [] : [Int] } else { f(n - 1) } }\n"
            "query { f(3) }"
        )
        with pytest.raises(QuerySafetyError):
            typecheck_program(prog, Mode.PLAIN)

    def test_lineage_inside_plain_query_rejected(self):
        prog = parse_program("query { lineage { [1] } }")
        with pytest.raises(QuerySafetyError):
            typecheck_program(prog, Mode.LINEAGE)


class TestSoundness:
    def test_typechecked_programs_do_not_go_wrong(self, tours_db):
        # differential soundness harness at CI scale
        trials = 300
        for mode in (Mode.PLAIN, Mode.WHERE, Mode.LINEAGE):
            for i in range(trials // 3):
                prog = ProgGen(31_000 + i, mode, max_depth=4).program()
                typecheck_program(prog, mode)
                eval_mode = Mode.WHERE if mode is Mode.WHERE else Mode.PLAIN
                try:
                    eval_big(tours_db.copy(), prog.as_expr(), eval_mode)
                except EvalError as exc:
                    if "division by zero" in str(exc):
                        continue
                    raise
