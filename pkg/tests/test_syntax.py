"""Core syntax operations: substitution, free variables, canonical order."""

import pytest
from hypothesis import given, settings, strategies as st

from provql import syntax as S
from provql import values as V
from provql.database import Database
from provql.errors import EvalError
from provql.interp import eval_big
from provql.parser import parse_expr
from provql.typecheck import Mode


def ev(e, db=None):
    _, v = eval_big(db or Database(), e, Mode.PLAIN)
    return v


class TestSubstitute:
    def test_direct_plug_in(self):
        e = parse_expr("x.l")
        out = S.substitute(e, {"x": parse_expr("(l = 1)")})
        assert out == parse_expr("(l = 1).l")

    def test_shadowed_binder_untouched(self):
        e = parse_expr("fun f(x) { x }")
        assert S.substitute(e, {"x": S.Const(2)}) == e

    def test_comprehension_source(self):
        e = parse_expr("for (y <- x) [y]")
        out = S.substitute(e, {"x": parse_expr("[1, 2]")})
        assert ev(out) == ev(parse_expr("for (y <- [1, 2]) [y]"))

    def test_capture_avoidance(self):
        # y is free in the replacement, so the binder must be renamed
        e = parse_expr("for (y <- [1]) [x + y]")
        out = S.substitute(e, {"x": S.Var("y")})
        assert ev(S.Let("y", S.Const(10), out)) == V.VList((V.VConst(11),))

    def test_simultaneous(self):
        e = parse_expr("x + y")
        out = S.substitute(e, {"x": S.Var("y"), "y": S.Var("x")})
        env_e = S.Let("x", S.Const(1), S.Let("y", S.Const(2), out))
        assert ev(env_e) == V.VConst(3)

    def test_value_bindings_wrap(self):
        out = S.substitute(S.Var("x"), {"x": V.VConst(5)})
        assert out == S.ValueLit(V.VConst(5))


class TestFreeVars:
    def test_comprehension(self):
        assert S.free_vars(parse_expr("for (x <- y) [x]")) == {"y"}

    def test_self_bound_function(self):
        assert S.free_vars(parse_expr("fun f(x) { f(x) }")) == set()

    def test_let(self):
        assert S.free_vars(parse_expr("var x = z; x ++ w")) == {"z", "w"}

    def test_naive_scanner_agreement(self):
        # cross-check against occurrences minus binder names
        exprs = [
            "for (x <- y) where (x.a == q) [x.b]",
            "fun g(a, b) { a + c }",
            "var u = t; fun f(v) { u(v, w) }",
            "update (x <-- t) where (x.a > n) set (a = x.a + m)",
        ]
        for text in exprs:
            e = parse_expr(text)
            names = set()
            binders = set()
            for node in S.walk(e):
                if isinstance(node, S.Var):
                    names.add(node.name)
                if isinstance(node, S.Fun):
                    binders |= set(node.params) | ({node.fname} if node.fname else set())
                if isinstance(node, (S.Let, S.For)):
                    binders.add(node.name if isinstance(node, S.Let) else node.var)
                if isinstance(node, (S.Update, S.Delete)):
                    binders.add(node.var)
            assert S.free_vars(e) <= names
            assert S.free_vars(e) >= names - binders


_base_values = st.one_of(
    st.integers(-50, 50).map(V.VConst),
    st.booleans().map(V.VConst),
    st.text(alphabet="abc", max_size=3).map(V.VConst),
)


def _values(depth=2):
    if depth == 0:
        return _base_values
    sub = _values(depth - 1)
    return st.one_of(
        _base_values,
        st.lists(sub, max_size=4).map(lambda xs: V.VList(tuple(xs))),
        st.dictionaries(st.sampled_from(["a", "b", "c"]), sub, max_size=3).map(V.vrecord),
    )


class TestCanonicalOrder:
    def test_sorts_flat(self):
        v = V.VList((V.VConst(2), V.VConst(1), V.VConst(2)))
        assert V.canonical_order(v) == V.VList((V.VConst(1), V.VConst(2), V.VConst(2)))

    def test_sorts_records(self):
        v = V.VList((V.vrecord({"a": V.VConst(2)}), V.vrecord({"a": V.VConst(1)})))
        out = V.canonical_order(v)
        assert out.items[0].get("a") == V.VConst(1)

    @given(_values())
    @settings(max_examples=200, deadline=None)
    def test_idempotent(self, v):
        once = V.canonical_order(v)
        assert V.canonical_order(once) == once

    @given(st.lists(_values(), max_size=5).map(lambda xs: V.VList(tuple(xs))))
    @settings(max_examples=200, deadline=None)
    def test_multiset_preserving(self, v):
        out = V.canonical_order(v)
        want = sorted(map(V.serialize, (V.canonical_order(x) for x in v.items)))
        got = [V.serialize(x) for x in out.items]
        assert got == want

    def test_closure_rejected(self):
        clo = V.VClosure(None, ("x",), S.Var("x"), None)
        with pytest.raises(EvalError):
            V.canonical_order(V.VList((clo,)))


class TestRows:
    def test_record_type_label_order_independent(self):
        a = S.record_type([("b", S.INT), ("a", S.STRING)])
        b = S.record_type([("a", S.STRING), ("b", S.INT)])
        assert a == b

    def test_duplicate_labels_rejected(self):
        with pytest.raises(ValueError):
            S.make_row([("a", S.INT), ("a", S.INT)])

    def test_prov_argument_base_only(self):
        spec = S.ProvSpec((S.ProvSpecEntry("x", None),))
        with pytest.raises(ValueError):
            spec.validate_against(S.make_row([("y", S.INT)]))
