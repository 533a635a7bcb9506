"""Rewriting to comprehension normal form."""

import pytest

from provql import pipeline, suites
from provql import syntax as S
from provql import values as V
from provql.errors import NormalizeError
from provql.interp import eval_big
from provql.normalize import (
    NO_REDEX,
    NormalQuery,
    SubQuery,
    TableGen,
    assert_no_residuals,
    normalize,
    render_back,
    rewrite_fixpoint,
    rewrite_step,
)
from provql.parser import parse_expr, parse_program
from provql.progen import ProgGen
from provql.typecheck import Mode, typecheck_program


class TestRewriteStep:
    def test_for_singleton(self):
        e = parse_expr("for (x <- [1]) [x + 1]")
        assert rewrite_step(e) == parse_expr("[1 + 1]")

    def test_projection_beta(self):
        assert rewrite_step(parse_expr("(l = 1, m = 2).l")) == S.Const(1)

    def test_for_concat_distributes(self):
        e = parse_expr("for (x <- l1 ++ l2) [x]")
        out = rewrite_step(e)
        assert out == parse_expr("(for (x <- l1) [x]) ++ (for (x <- l2) [x])")

    def test_no_redex(self):
        assert rewrite_step(S.Const(1)) is NO_REDEX or isinstance(
            rewrite_step(S.Const(1)), type(NO_REDEX)
        )

    def test_beta_application(self):
        e = parse_expr("(fun (x) { x + 1 })(41)")
        assert rewrite_step(e) == parse_expr("41 + 1")

    def test_let_inlines(self):
        e = parse_expr("var x = 1 + 2; [x]")
        assert rewrite_step(e) == parse_expr("[1 + 2]")


class TestNormalize:
    def test_interleaved_where_flattens(self, tours_db):
        prog = parse_program(suites.BOAT_TOURS_ALT)
        nq = normalize(pipeline.query_expr(prog))
        assert len(nq.branches) == 1
        b = nq.branches[0]
        assert [g.table for g in b.gens] == ["ExternalTours", "Agencies"]
        assert len(b.conds) == 2
        assert isinstance(b.result, S.RecordLit)
        assert b.result.field_labels() == ["name", "phone"]

    def test_already_normal_is_fixpoint(self):
        prog = parse_program(suites.BOAT_TOURS)
        body = pipeline.query_expr(prog)
        once = rewrite_fixpoint(body)
        assert rewrite_fixpoint(once) == once

    def test_lineage_boat_query_static_prov(self, tours_db):
        prepared = pipeline.prepare(suites.BOAT_TOURS_LINEAGE, Mode.LINEAGE)
        nq = pipeline.normalized_query(prepared)
        assert_no_residuals(nq)
        assert len(nq.branches) == 1
        result = dict(nq.branches[0].result.fields_)
        prov = result["prov"]
        assert isinstance(prov, SubQuery)
        assert prov.query.is_static_list()
        cells = [b.result for b in prov.query.branches]
        assert len(cells) == 2  # one witness pair per generator

    def test_union_branches(self):
        prepared = pipeline.prepare(suites.LINEAGE_SUITE["QF4"]["nolineage"], Mode.PLAIN)
        nq = pipeline.normalized_query(prepared)
        assert len(nq.branches) == 2
        assert [g.table for g in nq.branches[0].gens] == ["tasks"]
        assert [g.table for g in nq.branches[1].gens] == ["employees"]

    def test_where_prov_view_inlined_completely(self):
        prepared = pipeline.prepare(suites.BOAT_TOURS_WHERE, Mode.WHERE)
        nq = pipeline.normalized_query(prepared)
        assert_no_residuals(nq)

    def test_nonnormalizable_reports_span(self):
        e = parse_expr("for (x <- unknown_fn(1)) [x]")
        with pytest.raises(NormalizeError):
            normalize(e)


class TestSoundness:
    def test_rewrites_preserve_meaning(self, tours_db):
        for i in range(25):
            prog = ProgGen(80_000 + i, Mode.PLAIN, max_depth=4).program()
            typecheck_program(prog, Mode.PLAIN)
            from provql import bench

            body = bench._block_body(prog)
            _, expect = eval_big(tours_db.copy(), body, Mode.PLAIN)
            expect = V.canonical_order(expect)
            e = body
            steps = 0
            while steps < 300:
                out = rewrite_step(e)
                if not isinstance(out, S.Expr):
                    break
                e = out
                steps += 1
                if steps % 25 == 0:
                    _, mid = eval_big(tours_db.copy(), e, Mode.PLAIN)
                    assert V.canonical_order(mid) == expect
            nq = normalize(e)
            _, back = eval_big(tours_db.copy(), render_back(nq), Mode.PLAIN)
            assert V.canonical_order(back) == expect, i

    def test_termination_cap_raises(self):
        # pathological self-growing term: the cap reports rather than hangs
        loop = parse_expr("(fun f(x) { f(x) })(1)")
        with pytest.raises(NormalizeError):
            rewrite_fixpoint(S.For("y", S.Singleton(loop), S.Singleton(S.Var("y"))), 500)
