"""Monomorphic bidirectional type checker with plain/where/lineage modes.

Where mode adds Prov(O), the data/prov keywords, and provenance specs on
tables; lineage mode adds lineage blocks.  Empty-list literals need an
expected type from context or an explicit annotation.  Query and lineage
block bodies are additionally checked for database-executability.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional

from .errors import TypeCheckError, QuerySafetyError
from . import syntax as S


class Mode(Enum):
    PLAIN = "plain"
    WHERE = "where"
    LINEAGE = "lineage"


PROV_TRIPLE = S.tuple_type(S.STRING, S.STRING, S.INT)


@dataclass
class TypeEnv:
    vars: dict[str, S.Type]

    def bind(self, name: str, ty: S.Type) -> "TypeEnv":
        new = dict(self.vars)
        new[name] = ty
        return TypeEnv(new)

    def lookup(self, name: str, span=None) -> S.Type:
        if name not in self.vars:
            raise TypeCheckError(f"unknown variable {name!r}", span)
        return self.vars[name]

    @staticmethod
    def empty() -> "TypeEnv":
        return TypeEnv({})


@dataclass
class TypedExpr:
    expr: S.Expr
    ty: S.Type
    children: tuple["TypedExpr", ...] = ()


def is_qtype(t: S.Type, mode: Mode = Mode.PLAIN) -> bool:
    """True iff t is a valid query result type (base/record/list only).

    In where mode Prov(O) counts as a base type.
    """
    if isinstance(t, S.BaseType):
        return True
    if isinstance(t, S.ProvType):
        return mode is Mode.WHERE
    if isinstance(t, S.RecordType):
        return all(is_qtype(ft, mode) for _, ft in t.row)
    if isinstance(t, S.ListType):
        return is_qtype(t.elem, mode)
    return False


def is_base_row(row: S.Row, mode: Mode = Mode.PLAIN) -> bool:
    """True iff every column type is base (including Prov in where mode)."""
    for _, t in row:
        if isinstance(t, S.BaseType):
            continue
        if isinstance(t, S.ProvType) and mode is Mode.WHERE:
            continue
        return False
    return True


def erase_type(t: S.Type) -> S.Type:
    """Remove all Prov wrappers recursively."""
    if isinstance(t, S.ProvType):
        return erase_type(t.base)
    if isinstance(t, S.RecordType):
        return S.RecordType(S.make_row([(l, erase_type(x)) for l, x in t.row]), t.open)
    if isinstance(t, S.ListType):
        return S.ListType(erase_type(t.elem))
    if isinstance(t, S.TableType):
        return S.TableType(S.make_row([(l, erase_type(x)) for l, x in t.row]))
    if isinstance(t, S.FunType):
        return S.FunType(tuple(erase_type(p) for p in t.params), erase_type(t.result))
    return t


def erase_row(row: S.Row) -> S.Row:
    return S.make_row([(l, erase_type(t)) for l, t in row])


def augment_row(row: S.Row, spec: S.ProvSpec) -> S.Row:
    """R ▷ S: specced columns become Prov(O), others stay unchanged."""
    spec.validate_against(row)
    out = []
    for l, t in row:
        if spec.lookup(l) is not None:
            if not isinstance(t, S.BaseType):
                raise TypeCheckError(f"Prov applied to non-base column {l!r}")
            out.append((l, S.ProvType(t)))
        else:
            out.append((l, t))
    return S.make_row(out)


def compat(expected: S.Type, actual: S.Type) -> bool:
    """Type compatibility; open record types accept any wider record."""
    if expected == actual:
        return True
    if isinstance(expected, S.RecordType) and isinstance(actual, S.RecordType):
        if expected.open:
            for l, t in expected.row:
                at = S.row_get(actual.row, l)
                if at is None or not compat(t, at):
                    return False
            return True
        if actual.open or len(expected.row) != len(actual.row):
            return False
        return all(
            S.row_get(actual.row, l) is not None and compat(t, S.row_get(actual.row, l))
            for l, t in expected.row
        )
    if isinstance(expected, S.ListType) and isinstance(actual, S.ListType):
        return compat(expected.elem, actual.elem)
    if isinstance(expected, S.FunType) and isinstance(actual, S.FunType):
        return (
            len(expected.params) == len(actual.params)
            and all(compat(a, b) for a, b in zip(expected.params, actual.params))
            and compat(expected.result, actual.result)
        )
    if isinstance(expected, S.ProvType) and isinstance(actual, S.ProvType):
        return compat(expected.base, actual.base)
    return False


class _CannotInfer(TypeCheckError):
    pass


class TypeChecker:
    def __init__(self, mode: Mode = Mode.PLAIN, top_funs: Optional[dict] = None):
        self.mode = mode
        self.top_funs = top_funs or {}

    # -- entry points --------------------------------------------------------

    def infer(self, env: TypeEnv, e: S.Expr) -> TypedExpr:
        te = self._infer(env, e)
        return te

    def check(self, env: TypeEnv, e: S.Expr, expected: S.Type) -> TypedExpr:
        te = self._check(env, e, expected)
        return te

    # -- inference -------------------------------------------------------------

    def _infer(self, env: TypeEnv, e: S.Expr) -> TypedExpr:
        if isinstance(e, S.Const):
            v = e.value
            if isinstance(v, bool):
                return TypedExpr(e, S.BOOL)
            if isinstance(v, int):
                return TypedExpr(e, S.INT)
            return TypedExpr(e, S.STRING)
        if isinstance(e, S.Var):
            return TypedExpr(e, env.lookup(e.name, e.span))
        if isinstance(e, S.RecordLit):
            seen = set()
            for l, _ in e.fields_:
                if l in seen:
                    raise TypeCheckError(f"duplicate label {l!r} in record", e.span)
                seen.add(l)
            kids = tuple(self._infer(env, x) for _, x in e.fields_)
            row = S.make_row([(l, k.ty) for (l, _), k in zip(e.fields_, kids)])
            return TypedExpr(e, S.RecordType(row), kids)
        if isinstance(e, S.Project):
            inner = self._infer(env, e.expr)
            t = inner.ty
            if not isinstance(t, S.RecordType):
                raise TypeCheckError(f"projection from non-record type {t}", e.span)
            ft = S.row_get(t.row, e.label)
            if ft is None:
                raise TypeCheckError(f"unknown label {e.label!r} in type {t}", e.span)
            return TypedExpr(e, ft, (inner,))
        if isinstance(e, S.Fun):
            if e.params:
                raise _CannotInfer(
                    "cannot infer parameter types of a function; add a signature", e.span
                )
            body = self._infer(env, e.body)
            return TypedExpr(e, S.FunType((), body.ty), (body,))
        if isinstance(e, S.App):
            if isinstance(e.fn, S.Fun) and e.fn.params:
                # Applied function literal (arises from inlining): type the
                # arguments, then the body under them.
                f = e.fn
                if len(f.params) != len(e.args):
                    raise TypeCheckError(
                        f"function takes {len(f.params)} argument(s), got {len(e.args)}",
                        e.span,
                    )
                args = [self._infer(env, a) for a in e.args]
                inner = env
                for p, a in zip(f.params, args):
                    inner = inner.bind(p, a.ty)
                fn_ty = None
                if f.fname is not None and f.fname in S.free_vars(f.body):
                    raise TypeCheckError(
                        "cannot type a recursive function literal application", e.span
                    )
                body = self._infer(inner, f.body)
                fn_te = TypedExpr(f, S.FunType(tuple(a.ty for a in args), body.ty), (body,))
                return TypedExpr(e, body.ty, tuple([fn_te] + args))
            fn = self._infer(env, e.fn)
            if not isinstance(fn.ty, S.FunType):
                raise TypeCheckError(f"application of non-function type {fn.ty}", e.span)
            if len(fn.ty.params) != len(e.args):
                raise TypeCheckError(
                    f"function takes {len(fn.ty.params)} argument(s), got {len(e.args)}",
                    e.span,
                )
            kids = [fn]
            for p, a in zip(fn.ty.params, e.args):
                kids.append(self._check(env, a, p))
            return TypedExpr(e, fn.ty.result, tuple(kids))
        if isinstance(e, S.Prim):
            kids = tuple(self._infer(env, a) for a in e.args)
            return TypedExpr(e, self._prim_type(e, [k.ty for k in kids]), kids)
        if isinstance(e, S.Let):
            val = self._infer(env, e.value)
            body = self._infer(env.bind(e.name, val.ty), e.body)
            return TypedExpr(e, body.ty, (val, body))
        if isinstance(e, S.If):
            cond = self._check(env, e.cond, S.BOOL)
            try:
                then = self._infer(env, e.then)
                els = self._check(env, e.els, then.ty)
            except _CannotInfer:
                els = self._infer(env, e.els)
                then = self._check(env, e.then, els.ty)
            return TypedExpr(e, then.ty, (cond, then, els))
        if isinstance(e, S.Query):
            body = self._infer(env, e.body)
            self._require_query_type(body.ty, e.span, lineage=False)
            return TypedExpr(e, body.ty, (body,))
        if isinstance(e, S.LineageBlock):
            if self.mode is not Mode.LINEAGE:
                raise TypeCheckError("lineage blocks require lineage mode", e.span)
            body = self._infer(env, e.body)
            self._require_query_type(body.ty, e.span, lineage=True)
            from .lineage_trans import lineage_type

            return TypedExpr(e, lineage_type(body.ty), (body,))
        if isinstance(e, S.TableRef):
            return TypedExpr(e, self.table_type(e))
        if isinstance(e, S.DatabaseRef):
            return TypedExpr(e, S.DbType())
        if isinstance(e, S.EmptyList):
            if e.elem is None:
                raise _CannotInfer("cannot infer the element type of []", e.span)
            return TypedExpr(e, S.ListType(e.elem))
        if isinstance(e, S.Singleton):
            item = self._infer(env, e.item)
            return TypedExpr(e, S.ListType(item.ty), (item,))
        if isinstance(e, S.Concat):
            try:
                left = self._infer(env, e.left)
                right = self._check(env, e.right, left.ty)
            except _CannotInfer:
                right = self._infer(env, e.right)
                left = self._check(env, e.left, right.ty)
            if not isinstance(left.ty, S.ListType):
                raise TypeCheckError(f"++ on non-list type {left.ty}", e.span)
            return TypedExpr(e, left.ty, (left, right))
        if isinstance(e, S.IsEmpty):
            coll = self._infer(env, e.coll)
            if not isinstance(coll.ty, S.ListType):
                raise TypeCheckError(f"empty() on non-list type {coll.ty}", e.span)
            return TypedExpr(e, S.BOOL, (coll,))
        if isinstance(e, S.For):
            src, elem = self._infer_source(env, e)
            body = self._infer(env.bind(e.var, elem), e.body)
            if not isinstance(body.ty, S.ListType):
                raise TypeCheckError(
                    f"comprehension body has non-list type {body.ty}", e.span
                )
            return TypedExpr(e, body.ty, (src, body))
        if isinstance(e, S.Where):
            cond = self._check(env, e.cond, S.BOOL)
            body = self._infer(env, e.body)
            if not isinstance(body.ty, S.ListType):
                raise TypeCheckError(f"where body has non-list type {body.ty}", e.span)
            return TypedExpr(e, body.ty, (cond, body))
        if isinstance(e, S.Insert):
            tbl = self._infer(env, e.table)
            row = self._require_table(tbl.ty, e.span)
            values = self._check(
                env, e.values, S.ListType(S.RecordType(self._insertable_row(row)))
            )
            return TypedExpr(e, S.UNIT, (tbl, values))
        if isinstance(e, S.Update):
            tbl = self._infer(env, e.table)
            row = self._require_table(tbl.ty, e.span)
            bound = env.bind(e.var, S.RecordType(erase_row(row)))
            pred = self._check(bound, e.pred, S.BOOL)
            kids = [tbl, pred]
            for l, x in e.assigns:
                ft = S.row_get(row, l)
                if ft is None:
                    raise TypeCheckError(f"unknown column {l!r} in update", e.span)
                if l == "oid":
                    raise TypeCheckError("attempt to write oid", e.span)
                kids.append(self._check(bound, x, erase_type(ft)))
            return TypedExpr(e, S.UNIT, tuple(kids))
        if isinstance(e, S.Delete):
            tbl = self._infer(env, e.table)
            row = self._require_table(tbl.ty, e.span)
            bound = env.bind(e.var, S.RecordType(erase_row(row)))
            pred = self._check(bound, e.pred, S.BOOL)
            return TypedExpr(e, S.UNIT, (tbl, pred))
        if isinstance(e, S.Data):
            inner = self._require_prov_arg(env, e.expr, e.span)
            return TypedExpr(e, inner.ty.base, (inner,))  # type: ignore[union-attr]
        if isinstance(e, S.ProvOf):
            inner = self._require_prov_arg(env, e.expr, e.span)
            return TypedExpr(e, PROV_TRIPLE, (inner,))
        if isinstance(e, (S.UnionAnnot, S.ValueLit, S.Hole)):
            raise TypeCheckError(
                f"internal node {type(e).__name__} not allowed in source programs", e.span
            )
        raise TypeCheckError(f"cannot type {type(e).__name__}", e.span)

    def _check(self, env: TypeEnv, e: S.Expr, expected: S.Type) -> TypedExpr:
        if isinstance(e, S.EmptyList):
            if not isinstance(expected, S.ListType):
                raise TypeCheckError(f"[] used where {expected} expected", e.span)
            if e.elem is not None and not compat(expected.elem, e.elem):
                raise TypeCheckError(
                    f"annotated [] of type [{e.elem}] used where {expected} expected",
                    e.span,
                )
            return TypedExpr(e, expected)
        if isinstance(e, S.Singleton) and isinstance(expected, S.ListType):
            item = self._check(env, e.item, expected.elem)
            return TypedExpr(e, expected, (item,))
        if isinstance(e, S.Concat) and isinstance(expected, S.ListType):
            left = self._check(env, e.left, expected)
            right = self._check(env, e.right, expected)
            return TypedExpr(e, expected, (left, right))
        if isinstance(e, S.RecordLit) and isinstance(expected, S.RecordType):
            got = sorted(l for l, _ in e.fields_)
            want = sorted(S.row_labels(expected.row))
            if got != want and not expected.open:
                raise TypeCheckError(
                    f"record labels {got} do not match expected {want}", e.span
                )
            kids = []
            for l, x in e.fields_:
                ft = S.row_get(expected.row, l)
                kids.append(self._infer(env, x) if ft is None else self._check(env, x, ft))
            row = S.make_row([(l, k.ty) for (l, _), k in zip(e.fields_, kids)])
            return TypedExpr(e, S.RecordType(row), tuple(kids))
        if isinstance(e, S.Fun):
            if not isinstance(expected, S.FunType):
                raise TypeCheckError(f"function used where {expected} expected", e.span)
            if len(e.params) != len(expected.params):
                raise TypeCheckError(
                    f"function has {len(e.params)} parameter(s), type wants "
                    f"{len(expected.params)}",
                    e.span,
                )
            inner = env
            for p, t in zip(e.params, expected.params):
                inner = inner.bind(p, t)
            if e.fname is not None:
                inner = inner.bind(e.fname, expected)
            body = self._check(inner, e.body, expected.result)
            return TypedExpr(e, expected, (body,))
        if isinstance(e, S.If):
            cond = self._check(env, e.cond, S.BOOL)
            then = self._check(env, e.then, expected)
            els = self._check(env, e.els, expected)
            return TypedExpr(e, expected, (cond, then, els))
        if isinstance(e, S.For):
            src, elem = self._infer_source(env, e)
            if not isinstance(expected, S.ListType):
                raise TypeCheckError(f"comprehension used where {expected} expected", e.span)
            body = self._check(env.bind(e.var, elem), e.body, expected)
            return TypedExpr(e, expected, (src, body))
        if isinstance(e, S.Where):
            cond = self._check(env, e.cond, S.BOOL)
            if not isinstance(expected, S.ListType):
                raise TypeCheckError(f"where used where {expected} expected", e.span)
            body = self._check(env, e.body, expected)
            return TypedExpr(e, expected, (cond, body))
        if isinstance(e, S.Let):
            val = self._infer(env, e.value)
            body = self._check(env.bind(e.name, val.ty), e.body, expected)
            return TypedExpr(e, expected, (val, body))
        te = self._infer(env, e)
        if not compat(expected, te.ty):
            raise TypeCheckError(f"type mismatch: expected {expected}, got {te.ty}", e.span)
        return te

    # -- helpers ---------------------------------------------------------------

    def _infer_source(self, env: TypeEnv, e: S.For):
        src = self._infer(env, e.source)
        if e.table:
            row = self._require_table(src.ty, e.span)
            return src, S.RecordType(row)
        if not isinstance(src.ty, S.ListType):
            raise TypeCheckError(
                f"for (x <- ...) needs a list source, got {src.ty}", e.span
            )
        return src, src.ty.elem

    def _require_table(self, t: S.Type, span) -> S.Row:
        if not isinstance(t, S.TableType):
            raise TypeCheckError(f"expected a table, got {t}", span)
        return t.row

    def _require_prov_arg(self, env: TypeEnv, e: S.Expr, span) -> TypedExpr:
        if self.mode is not Mode.WHERE:
            raise TypeCheckError("data/prov require where-provenance mode", span)
        inner = self._infer(env, e)
        if not isinstance(inner.ty, S.ProvType):
            raise TypeCheckError(f"data/prov applied to non-Prov type {inner.ty}", span)
        return inner

    def _require_query_type(self, t: S.Type, span, lineage: bool) -> None:
        if not isinstance(t, S.ListType):
            raise TypeCheckError(f"query body must have list type, got {t}", span)
        if not is_qtype(t.elem, self.mode):
            raise TypeCheckError(f"{t.elem} is not a valid query result type", span)

    def _insertable_row(self, row: S.Row) -> S.Row:
        return S.make_row([(l, erase_type(t)) for l, t in row if l != "oid"])

    def table_type(self, e: S.TableRef) -> S.TableType:
        if not is_base_row(e.row, Mode.PLAIN):
            raise TypeCheckError(f"table {e.name!r} row is not base-typed", e.span)
        if e.spec:
            if self.mode is not Mode.WHERE:
                raise TypeCheckError(
                    "provenance specs on tables require where-provenance mode", e.span
                )
            self.check_provspec(TypeEnv.empty(), e.row, e.spec, e.span)
            return S.TableType(augment_row(e.row, e.spec))
        return S.TableType(e.row)

    def check_provspec(self, env: TypeEnv, row: S.Row, spec: S.ProvSpec, span=None) -> None:
        try:
            spec.validate_against(row)
        except ValueError as exc:
            raise TypeCheckError(str(exc), span) from None
        for entry in spec.entries:
            if entry.fn is not None:
                want = S.FunType((S.RecordType(row),), PROV_TRIPLE)
                self._check(env, entry.fn, want)

    def _prim_type(self, e: S.Prim, arg_tys: list[S.Type]) -> S.Type:
        op = e.op
        span = e.span

        def need(n):
            if len(arg_tys) != n:
                raise TypeCheckError(f"{op} takes {n} argument(s)", span)

        if op in ("==", "<>"):
            need(2)
            a, b = arg_tys
            if a != b or not isinstance(a, S.BaseType):
                raise TypeCheckError(f"cannot compare {a} with {b}", span)
            return S.BOOL
        if op in ("<", ">"):
            need(2)
            if arg_tys != [S.INT, S.INT]:
                raise TypeCheckError(f"{op} compares integers, got {arg_tys}", span)
            return S.BOOL
        if op in ("+", "-", "*", "mod"):
            need(2)
            if arg_tys != [S.INT, S.INT]:
                raise TypeCheckError(f"{op} needs integer arguments, got {arg_tys}", span)
            return S.INT
        if op in ("&&", "||"):
            need(2)
            if arg_tys != [S.BOOL, S.BOOL]:
                raise TypeCheckError(f"{op} needs boolean arguments", span)
            return S.BOOL
        if op == "not":
            need(1)
            if arg_tys != [S.BOOL]:
                raise TypeCheckError("not needs a boolean argument", span)
            return S.BOOL
        raise TypeCheckError(f"unknown constant {op!r}", span)


# ---------------------------------------------------------------------------
# Query safety


def check_query_safe(
    e: S.Expr, mode: str = "plain", top_funs: Optional[dict] = None
) -> None:
    """Reject constructs that cannot run on the database.

    ``mode`` is 'plain' for query blocks or 'lineage' for lineage blocks;
    the latter additionally bans emptiness tests (nonmonotonic).
    """
    top_funs = top_funs or {}
    _safe(e, mode, top_funs, frozenset())


def _safe(e: S.Expr, mode: str, top_funs: dict, visiting: frozenset) -> None:
    if isinstance(e, (S.Insert, S.Update, S.Delete)):
        raise QuerySafetyError(
            f"effectful construct {type(e).__name__.lower()} inside a query block", e.span
        )
    if isinstance(e, S.IsEmpty) and mode == "lineage":
        raise QuerySafetyError(
            "empty() inside a lineage block is nonmonotonic", e.span
        )
    if isinstance(e, S.LineageBlock) and mode == "plain":
        raise QuerySafetyError("lineage block inside a query block", e.span)
    if isinstance(e, S.Fun):
        if e.fname is not None and e.fname in S.free_vars(e.body):
            raise QuerySafetyError(
                f"recursive function {e.fname!r} inside a query block", e.span
            )
    if isinstance(e, S.App) and isinstance(e.fn, S.Var) and e.fn.name in top_funs:
        name = e.fn.name
        if name in visiting:
            raise QuerySafetyError(f"recursive call of {name!r} inside a query block", e.span)
        _safe(top_funs[name], mode, top_funs, visiting | {name})
    if isinstance(e, S.TableRef):
        for entry in e.spec.entries:
            if entry.fn is not None:
                _safe(entry.fn, mode, top_funs, visiting)
        return
    for c in e.children():
        _safe(c, mode, top_funs, visiting)


# ---------------------------------------------------------------------------
# Program-level checking


@dataclass
class CheckedProgram:
    env: TypeEnv
    decl_types: dict[str, S.Type]
    decl_typed: dict[str, TypedExpr]
    main: Optional[TypedExpr]
    top_funs: dict[str, S.Expr]  # name -> function body (for safety checks)
    top_fun_exprs: dict[str, S.Expr]  # name -> fun literal (for inlining)


def typecheck(env: TypeEnv, e: S.Expr, mode: Mode = Mode.PLAIN) -> TypedExpr:
    """Type a single expression under the given environment and mode."""
    return TypeChecker(mode).infer(env, e)


def typecheck_program(prog, mode: Mode = Mode.PLAIN) -> CheckedProgram:
    """Type every declaration and the main expression, then check that all
    query and lineage blocks are database-executable."""
    checker = TypeChecker(mode)
    env = TypeEnv.empty()
    decl_types: dict[str, S.Type] = {}
    decl_typed: dict[str, TypedExpr] = {}
    top_funs: dict[str, S.Expr] = {}
    top_fun_exprs: dict[str, S.Expr] = {}
    for d in prog.decls:
        if d.sig is not None:
            te = checker.check(env, d.expr, d.sig)
        else:
            te = checker.infer(env, d.expr)
        env = env.bind(d.name, te.ty)
        decl_types[d.name] = te.ty
        decl_typed[d.name] = te
        if isinstance(d.expr, S.Fun):
            top_funs[d.name] = d.expr.body
            top_fun_exprs[d.name] = d.expr
    checker.top_funs = top_funs
    main = None
    if prog.main is not None:
        main = checker.infer(env, prog.main)
    for d in prog.decls:
        _check_blocks(d.expr, top_funs)
    if prog.main is not None:
        _check_blocks(prog.main, top_funs)
    return CheckedProgram(env, decl_types, decl_typed, main, top_funs, top_fun_exprs)


def _check_blocks(e: S.Expr, top_funs: dict) -> None:
    if isinstance(e, S.Query):
        check_query_safe(e.body, "plain", top_funs)
    elif isinstance(e, S.LineageBlock):
        check_query_safe(e.body, "lineage", top_funs)
    for c in e.children():
        _check_blocks(c, top_funs)
