"""SQL backend: render normal queries to SQL, execute them, decode results,
translate updates, and generate the benchmark database.

The reference backend is embedded SQLite; a PostgreSQL-compatible server
DSN is accepted for the benchmark harness when a driver is installed.
Emitted SQL stays within the common dialect subset (SELECT / UNION ALL /
scalar operators / EXISTS); oids are explicit integer columns assigned
from per-table sequences managed by this module.
"""

from __future__ import annotations

import sqlite3
from dataclasses import dataclass, field
from random import Random
from typing import Optional, Union

from .database import Database, OID
from .errors import BackendError
from .normalize import Branch, Gen, NormalQuery, QueryGen, SubQuery, TableGen
from .interp import delta
from . import syntax as S
from . import values as V


@dataclass
class ConnectionConfig:
    kind: str = "embedded"  # embedded file | server
    dsn: str = ":memory:"
    batch_size: int = 10_000

    def __post_init__(self):
        if self.kind not in ("embedded", "server"):
            raise BackendError(f"unknown backend kind {self.kind!r}")
        if self.kind == "server" and not self.dsn:
            raise BackendError("server backend needs a DSN")


def connect(cfg: ConnectionConfig):
    if cfg.kind == "embedded":
        conn = sqlite3.connect(cfg.dsn)
        return conn
    try:
        import psycopg2  # type: ignore

        return psycopg2.connect(cfg.dsn)
    except ImportError as exc:
        raise BackendError(
            "server backend requires a PostgreSQL driver (psycopg2)"
        ) from exc


# ---------------------------------------------------------------------------
# SQL text model


@dataclass
class SqlSelect:
    select: list[tuple[str, str]]  # (expression, alias)
    from_: list[tuple[str, str]]  # (table, alias)
    where: list[str]

    def to_sql(self) -> str:
        cols = ", ".join(f"{e} AS {qident(a)}" for e, a in self.select) or "1"
        out = f"SELECT {cols}"
        if self.from_:
            out += " FROM " + ", ".join(f"{qident(t)} AS {qident(a)}" for t, a in self.from_)
        if self.where:
            out += " WHERE " + " AND ".join(self.where)
        return out


@dataclass
class SqlQuery:
    selects: list[SqlSelect]

    def to_sql(self) -> str:
        return "\nUNION ALL\n".join(s.to_sql() for s in self.selects)


def qident(name: str) -> str:
    return '"' + name.replace('"', '""') + '"'


def qstr(s: str) -> str:
    return "'" + s.replace("'", "''") + "'"


# ---------------------------------------------------------------------------
# Result shapes (column layout of a flattened result)


@dataclass
class LeafShape:
    ty: S.Type  # base type, for decoding


@dataclass
class RecordShape:
    fields: list[tuple[str, "Shape"]]


@dataclass
class ListShape:
    """A static list: fixed number of cells, each with its own shape."""

    cells: list["Shape"]


Shape = Union[LeafShape, RecordShape, ListShape]


def shape_columns(shape: Shape) -> int:
    if isinstance(shape, LeafShape):
        return 1
    if isinstance(shape, RecordShape):
        return sum(shape_columns(s) for _, s in shape.fields)
    return sum(shape_columns(s) for s in shape.cells)


def shape_names(shape: Shape, prefix: str = "") -> list[str]:
    if isinstance(shape, LeafShape):
        return [prefix or "value"]
    out = []
    if isinstance(shape, RecordShape):
        for l, s in shape.fields:
            out.extend(shape_names(s, f"{prefix}_{l}" if prefix else l))
    else:
        for i, s in enumerate(shape.cells):
            out.extend(shape_names(s, f"{prefix}_{i + 1}" if prefix else str(i + 1)))
    return out


def _decode_row(shape: Shape, row: tuple, pos: int = 0) -> tuple[V.Value, int]:
    if isinstance(shape, LeafShape):
        x = row[pos]
        if shape.ty == S.BOOL:
            x = bool(x)
        return V.VConst(x), pos + 1
    if isinstance(shape, RecordShape):
        fields = []
        for l, s in shape.fields:
            v, pos = _decode_row(s, row, pos)
            fields.append((l, v))
        return V.vrecord(fields), pos
    items = []
    for s in shape.cells:
        v, pos = _decode_row(s, row, pos)
        items.append(v)
    return V.VList(tuple(items)), pos


def compile_decoder(shape: Shape):
    """A closure decoding one result row; column positions, label order, and
    boolean coercions are resolved once instead of per row."""
    VConst, VRecord, VList = V.VConst, V.VRecord, V.VList
    if isinstance(shape, LeafShape):
        # Interning pays off for constant select-list columns (provenance
        # table/column strings) and low-cardinality data columns.
        cache: dict = {}
        if shape.ty == S.BOOL:
            cache = {0: V.VConst(False), 1: V.VConst(True)}
            return 1, lambda row, pos: cache[1 if row[pos] else 0]

        def leaf(row, pos, cache=cache):
            x = row[pos]
            v = cache.get(x)
            if v is None:
                v = cache[x] = VConst(x)
            return v

        return 1, leaf
    if isinstance(shape, RecordShape):
        subs = []
        offset = 0
        for label, s in shape.fields:
            width, fn = compile_decoder(s)
            subs.append((label, offset, fn))
            offset += width
        subs.sort(key=lambda x: x[0])  # canonical label order
        # unrolled fast paths for the common small arities
        if len(subs) == 1:
            l1, o1, f1 = subs[0]
            return offset, lambda row, pos: VRecord(((l1, f1(row, pos + o1)),))
        if len(subs) == 2:
            (l1, o1, f1), (l2, o2, f2) = subs
            return offset, lambda row, pos: VRecord(
                ((l1, f1(row, pos + o1)), (l2, f2(row, pos + o2)))
            )
        if len(subs) == 3:
            (l1, o1, f1), (l2, o2, f2), (l3, o3, f3) = subs
            return offset, lambda row, pos: VRecord(
                (
                    (l1, f1(row, pos + o1)),
                    (l2, f2(row, pos + o2)),
                    (l3, f3(row, pos + o3)),
                )
            )

        def rec(row, pos, subs=tuple(subs)):
            return VRecord(tuple((l, fn(row, pos + off)) for l, off, fn in subs))

        return offset, rec
    subs2 = []
    offset = 0
    for s in shape.cells:
        width, fn = compile_decoder(s)
        subs2.append((offset, fn))
        offset += width
    if len(subs2) == 1:
        o1, f1 = subs2[0]
        return offset, lambda row, pos: VList((f1(row, pos + o1),))
    if len(subs2) == 2:
        (o1, f1), (o2, f2) = subs2
        return offset, lambda row, pos: VList((f1(row, pos + o1), f2(row, pos + o2)))

    def lst(row, pos, subs=tuple(subs2)):
        return VList(tuple(fn(row, pos + off) for off, fn in subs))

    return offset, lst


# ---------------------------------------------------------------------------
# Expression rendering


class _NotRenderable(Exception):
    pass


@dataclass(frozen=True)
class ParamRef(S.Expr):
    """A correlated outer-variable projection, rendered as a placeholder."""

    var: str
    label: str
    ty: object = None  # base type, for boolean placement


class _Renderer:
    """Renders normal-form expressions against generator aliases."""

    def __init__(self, scopes: dict[str, tuple[str, S.Row]], params: Optional[list] = None):
        # var -> (sql alias, row type)
        self.scopes = scopes
        self.params = params  # ordered (var, label) slots when parameterizing

    def expr(self, e: S.Expr, boolean: bool = False) -> str:
        if isinstance(e, ParamRef):
            if self.params is None:
                raise _NotRenderable()
            self.params.append((e.var, e.label))
            if boolean and e.ty == S.BOOL:
                return "? <> 0"
            return "?"
        if isinstance(e, S.Const):
            return self.const(e.value, boolean)
        if isinstance(e, S.ValueLit):
            v = V.strip_annotations(e.value)
            if isinstance(v, V.VConst):
                return self.const(v.value, boolean)
            raise _NotRenderable()
        if isinstance(e, S.Project) and isinstance(e.expr, S.Var):
            name = e.expr.name
            if name not in self.scopes:
                raise _NotRenderable()
            alias, row = self.scopes[name]
            ty = S.row_get(row, e.label)
            if ty is None:
                raise _NotRenderable()
            col = f"{qident(alias)}.{qident(e.label)}"
            if boolean and ty == S.BOOL:
                return f"{col} <> 0"
            return col
        if isinstance(e, S.Prim):
            return self.prim(e, boolean)
        if isinstance(e, S.If):
            c = self.expr(e.cond, True)
            a = self.expr(e.then, boolean)
            b = self.expr(e.els, boolean)
            return f"CASE WHEN {c} THEN {a} ELSE {b} END"
        if isinstance(e, S.IsEmpty) and isinstance(e.coll, SubQuery):
            sub = render_sql(e.coll.query, outer=self.scopes, params=self.params)
            inner = "\nUNION ALL\n".join(
                SqlSelect([("1", "x")], s.from_, s.where).to_sql() for s in sub.selects
            )
            return f"NOT EXISTS ({inner})"
        raise _NotRenderable()

    def const(self, v, boolean: bool) -> str:
        if isinstance(v, bool):
            return ("1 <> 0" if v else "1 <> 1") if boolean else ("1" if v else "0")
        if isinstance(v, int):
            return str(v)
        return qstr(v)

    def prim(self, e: S.Prim, boolean: bool) -> str:
        op = e.op
        if op in ("&&", "||"):
            a = self.expr(e.args[0], True)
            b = self.expr(e.args[1], True)
            return f"({a} {'AND' if op == '&&' else 'OR'} {b})"
        if op == "not":
            return f"(NOT {self.expr(e.args[0], True)})"
        if op in ("==", "<>"):
            a = self.expr(e.args[0])
            b = self.expr(e.args[1])
            return f"({a} {'=' if op == '==' else '<>'} {b})"
        if op in ("<", ">"):
            return f"({self.expr(e.args[0])} {op} {self.expr(e.args[1])})"
        if op in ("+", "-", "*"):
            return f"({self.expr(e.args[0])} {op} {self.expr(e.args[1])})"
        if op == "mod":
            return f"({self.expr(e.args[0])} % {self.expr(e.args[1])})"
        raise _NotRenderable()


def leaf_type(e: S.Expr, scopes: dict[str, tuple[str, S.Row]]) -> S.Type:
    if isinstance(e, ParamRef):
        if e.ty is None:
            raise _NotRenderable()
        return e.ty
    if isinstance(e, S.Const):
        v = e.value
        return S.BOOL if isinstance(v, bool) else S.INT if isinstance(v, int) else S.STRING
    if isinstance(e, S.ValueLit):
        v = V.strip_annotations(e.value)
        if isinstance(v, V.VConst):
            x = v.value
            return S.BOOL if isinstance(x, bool) else S.INT if isinstance(x, int) else S.STRING
    if isinstance(e, S.Project) and isinstance(e.expr, S.Var):
        entry = scopes.get(e.expr.name)
        if entry is not None:
            ty = S.row_get(entry[1], e.label)
            if ty is not None:
                return ty
    if isinstance(e, S.Prim):
        if e.op in ("+", "-", "*", "mod"):
            return S.INT
        return S.BOOL
    if isinstance(e, S.If):
        return leaf_type(e.then, scopes)
    if isinstance(e, S.IsEmpty):
        return S.BOOL
    raise _NotRenderable()


# ---------------------------------------------------------------------------
# render_sql


def render_sql(
    nq: NormalQuery,
    outer: Optional[dict[str, tuple[str, S.Row]]] = None,
    params: Optional[list] = None,
) -> SqlQuery:
    """Render a flat normal query to one SELECT per union branch.

    Record results flatten depth-first; static list cells flatten with
    numbered suffixes.  Raises when a field is not flat.  When ``params``
    is given, placeholder slots are appended to it in SQL text order.
    """
    selects = []
    shape0: Optional[Shape] = None
    names0: Optional[list[str]] = None
    for b in nq.branches:
        scopes = dict(outer or {})
        from_ = []
        for i, g in enumerate(b.gens):
            if not isinstance(g, TableGen):
                raise BackendError("non-table generator in SQL rendering")
            alias = f"t{len(scopes)}"
            scopes[g.var] = (alias, g.row)
            from_.append((g.table, alias))
        r = _Renderer(scopes, params)
        try:
            # the select list renders before WHERE so placeholder order
            # matches the statement text
            cols, shape = _flatten_result(b.result, r, scopes)
            where = [r.expr(c, True) for c in b.conds]
        except _NotRenderable:
            raise BackendError("non-flat field in SQL rendering") from None
        names = shape_names(shape)
        if shape0 is None:
            shape0, names0 = shape, names
        elif len(names) != len(names0 or []):
            raise BackendError("union branches have different shapes")
        selects.append(SqlSelect(list(zip(cols, names0 or names)), from_, where))
    if shape0 is None:
        raise BackendError("cannot render an empty union")
    q = SqlQuery(selects)
    q.shape = shape0  # type: ignore[attr-defined]
    return q


def _flatten_result(e: S.Expr, r: _Renderer, scopes) -> tuple[list[str], Shape]:
    if isinstance(e, S.RecordLit):
        cols: list[str] = []
        fields = []
        for l, x in e.fields_:
            c, s = _flatten_result(x, r, scopes)
            cols.extend(c)
            fields.append((l, s))
        return cols, RecordShape(fields)
    if isinstance(e, SubQuery):
        if not e.query.is_static_list():
            raise _NotRenderable()
        cols = []
        cells = []
        for br in e.query.branches:
            c, s = _flatten_result(br.result, r, scopes)
            cols.extend(c)
            cells.append(s)
        return cols, ListShape(cells)
    if isinstance(e, S.ValueLit) and isinstance(e.value, V.VRecord):
        cols = []
        fields = []
        for l, x in e.value.fields:
            c, s = _flatten_result(S.ValueLit(x), r, scopes)
            cols.extend(c)
            fields.append((l, s))
        return cols, RecordShape(fields)
    return [r.expr(e)], LeafShape(leaf_type(e, r.scopes))


def query_is_flat(nq: NormalQuery) -> bool:
    try:
        render_sql(nq)
        return True
    except BackendError:
        return False


# ---------------------------------------------------------------------------
# Execution


def execute(conn, q: SqlQuery, result_ty: Optional[S.Type] = None, decoder=None) -> V.VList:
    """Run a rendered query and decode rows back to values (multiset
    semantics: row order is not meaningful)."""
    shape = getattr(q, "shape", None)
    if shape is None:
        raise BackendError("query was rendered without a shape")
    try:
        rows = conn.execute(q.to_sql()).fetchall()
    except Exception as exc:  # connection/SQL failure
        raise BackendError(f"SQL execution failed: {exc}") from exc
    width, decode = decoder if decoder is not None else compile_decoder(shape)
    if rows and len(rows[0]) != width:
        raise BackendError("decode mismatch: column count")
    return V.VList(tuple(decode(row, 0) for row in rows))


class PlanExecutor:
    """Hybrid evaluation of normal queries.

    Fully flat queries go to the database in one statement.  Otherwise the
    flat skeleton of each branch is fetched by SQL and the result record
    (including nested subqueries, re-run per outer row with memoization) is
    assembled in memory.
    """

    def __init__(self, conn, explain: Optional[list] = None):
        self.conn = conn
        self.memo: dict = {}
        self.freevar_cache: dict = {}
        self.decoder_cache: dict = {}
        self.prepared_cache: dict = {}
        self.explain = explain

    def run(self, nq: NormalQuery, env: Optional[dict[str, V.Value]] = None) -> V.VList:
        # Memoization is per branch: the branches of a union usually depend
        # on different outer variables, so their caches must not be keyed on
        # the union of all of them.
        env = env or {}
        items: list[V.Value] = []
        for b in nq.branches:
            fvs = self._branch_free_vars(b)
            relevant = {k: env[k] for k in fvs if k in env}
            key = (
                id(b),
                tuple(sorted((k, V.serialize(v)) for k, v in relevant.items())),
            )
            if key not in self.memo:
                self.memo[key] = self._branch(b, relevant)
            items.extend(self.memo[key])
        return V.VList(tuple(items))

    def _branch(self, b: Branch, env: dict[str, V.Value]) -> list[V.Value]:
        if all(isinstance(g, TableGen) for g in b.gens):
            prepared = self._prepared(b)
            if prepared is not None:
                sql, slots, width, decode = prepared
                try:
                    args = [_param_value(env[var], label) for var, label in slots]
                except (KeyError, _NotRenderable):
                    args = None
                if args is not None:
                    if self.explain is not None:
                        self.explain.append(("sql", sql))
                    rows = self.conn.execute(sql, args).fetchall()
                    if rows and len(rows[0]) != width:
                        raise BackendError("decode mismatch: column count")
                    return [decode(row, 0) for row in rows]
            try:
                q = render_sql(_ground_query(NormalQuery([b]), env))
                if self.explain is not None:
                    self.explain.append(("sql", q.to_sql()))
                dec = self.decoder_cache.get(id(b))
                if dec is None:
                    dec = self.decoder_cache[id(b)] = compile_decoder(q.shape)
                return list(execute(self.conn, q, decoder=dec).items)
            except BackendError:
                pass
            return self._branch_sql_skeleton(b, env)
        return self._branch_memory(b, env)

    def _prepared(self, b: Branch):
        """A parameterized statement for a branch, rendered once: correlated
        outer projections become placeholders bound per call."""
        key = id(b)
        if key in self.prepared_cache:
            return self.prepared_cache[key]
        entry = None
        try:
            fvs = self._branch_free_vars(b)
            pb = _parametrize_branch(b, fvs)
            params: list = []
            q = render_sql(NormalQuery([pb]), params=params)
            width, decode = compile_decoder(q.shape)
            entry = (q.to_sql(), tuple(params), width, decode)
        except (BackendError, _NotRenderable):
            entry = None
        self.prepared_cache[key] = entry
        return entry

    def _branch_sql_skeleton(self, b: Branch, env: dict[str, V.Value]) -> list[V.Value]:
        scopes: dict[str, tuple[str, S.Row]] = {}
        from_ = []
        for g in b.gens:
            alias = f"t{len(scopes)}"
            scopes[g.var] = (alias, g.row)
            from_.append((g.table, alias))
        r = _Renderer(scopes)
        pushed, residual = [], []
        for c in b.conds:
            try:
                pushed.append(r.expr(_ground_expr(c, env), True))
            except _NotRenderable:
                residual.append(c)
        select = []
        for g in b.gens:
            alias, row = scopes[g.var]
            for label, _ in row:
                select.append((f"{qident(alias)}.{qident(label)}", f"{g.var}_{label}"))
        stmt = SqlSelect(select, from_, pushed)
        if self.explain is not None:
            self.explain.append(("sql-skeleton", stmt.to_sql()))
        rows = self.conn.execute(stmt.to_sql()).fetchall()
        # row labels are already in canonical order (rows are sorted maps)
        bool_cols = [
            [ty == S.BOOL for _, ty in g.row] for g in b.gens
        ]
        out = []
        for raw in rows:
            benv = dict(env)
            pos = 0
            for g, bools in zip(b.gens, bool_cols):
                fields = []
                for (label, _), is_bool in zip(g.row, bools):
                    x = raw[pos]
                    pos += 1
                    fields.append((label, V.VConst(bool(x) if is_bool else x)))
                benv[g.var] = V.VRecord(tuple(fields))
            if all(self._truth(c, benv) for c in residual):
                out.append(self.eval_expr(b.result, benv))
        return out

    def _branch_memory(self, b: Branch, env: dict[str, V.Value]) -> list[V.Value]:
        def loop(i: int, benv: dict[str, V.Value], acc: list):
            if i == len(b.gens):
                if all(self._truth(c, benv) for c in b.conds):
                    acc.append(self.eval_expr(b.result, benv))
                return
            g = b.gens[i]
            if isinstance(g, TableGen):
                rows = self._table_rows(g)
            else:
                rows = self.run(g.query, benv)
            for item in rows.items:
                benv2 = dict(benv)
                benv2[g.var] = item
                loop(i + 1, benv2, acc)

        acc: list[V.Value] = []
        loop(0, dict(env), acc)
        return acc

    def _table_rows(self, g: TableGen) -> V.VList:
        key = ("table", g.table)
        if key in self.memo:
            return self.memo[key]
        cols = ", ".join(qident(l) for l, _ in g.row)
        rows = self.conn.execute(f"SELECT {cols} FROM {qident(g.table)}").fetchall()
        out = []
        for raw in rows:
            fields = []
            for (label, ty), x in zip(g.row, raw):
                fields.append((label, V.VConst(bool(x) if ty == S.BOOL else x)))
            out.append(V.VRecord(tuple(fields)))
        v = V.VList(tuple(out))
        self.memo[key] = v
        return v

    def _truth(self, c: S.Expr, env: dict[str, V.Value]) -> bool:
        v = self.eval_expr(c, env)
        return v == V.TRUE

    def eval_expr(self, e: S.Expr, env: dict[str, V.Value]) -> V.Value:
        if isinstance(e, S.Const):
            return V.VConst(e.value)
        if isinstance(e, S.ValueLit):
            return e.value
        if isinstance(e, S.Var):
            if e.name not in env:
                raise BackendError(f"unbound variable {e.name!r} in plan")
            return env[e.name]
        if isinstance(e, S.Project):
            v = self.eval_expr(e.expr, env)
            if not isinstance(v, V.VRecord):
                raise BackendError("projection from non-record in plan")
            return v.get(e.label)
        if isinstance(e, S.RecordLit):
            return V.vrecord([(l, self.eval_expr(x, env)) for l, x in e.fields_])
        if isinstance(e, S.Prim):
            return delta(e.op, [self.eval_expr(a, env) for a in e.args])
        if isinstance(e, S.If):
            return self.eval_expr(
                e.then if self._truth(e.cond, env) else e.els, env
            )
        if isinstance(e, SubQuery):
            return self.run(e.query, env)
        if isinstance(e, S.IsEmpty):
            coll = self.eval_expr(e.coll, env)
            return V.VConst(len(coll.items) == 0)  # type: ignore[union-attr]
        raise BackendError(f"cannot evaluate {type(e).__name__} in plan")

    def _branch_free_vars(self, b: Branch) -> frozenset:
        key = id(b)
        if key in self.freevar_cache:
            return self.freevar_cache[key]
        out = _branch_free_vars(b)
        self.freevar_cache[key] = out
        return out


def _branch_free_vars(b: Branch) -> frozenset:
    out: set[str] = set()
    bound: set[str] = set()
    for g in b.gens:
        if isinstance(g, QueryGen):
            out |= _query_free_vars(g.query) - bound
        bound.add(g.var)
    for c in b.conds:
        out |= _expr_free_vars(c) - bound
    out |= _expr_free_vars(b.result) - bound
    return frozenset(out)


def _query_free_vars(nq: NormalQuery) -> frozenset:
    out: set[str] = set()
    for b in nq.branches:
        out |= _branch_free_vars(b)
    return frozenset(out)


def _expr_free_vars(e: S.Expr) -> set[str]:
    if isinstance(e, SubQuery):
        return set(_query_free_vars(e.query))
    out: set[str] = set()
    if isinstance(e, S.Var):
        out.add(e.name)
    for c in e.children():
        out |= _expr_free_vars(c)
    return out


def _param_value(row: V.Value, label: str):
    if not isinstance(row, V.VRecord):
        raise _NotRenderable()
    v = V.strip_annotations(row.get(label))
    if not isinstance(v, V.VConst):
        raise _NotRenderable()
    x = v.value
    return int(x) if isinstance(x, bool) else x


def _parametrize_branch(b: Branch, fvs: frozenset) -> Branch:
    """Replace projections of outer variables by placeholder slots."""

    def walk(e: S.Expr, bound: frozenset) -> S.Expr:
        if (
            isinstance(e, S.Project)
            and isinstance(e.expr, S.Var)
            and e.expr.name in fvs
            and e.expr.name not in bound
        ):
            return ParamRef(e.expr.name, e.label)
        if isinstance(e, S.Var) and e.name in fvs and e.name not in bound:
            raise _NotRenderable()  # whole-row references cannot be bound
        if isinstance(e, SubQuery):
            out = []
            for sb in e.query.branches:
                inner_bound = bound | {g.var for g in sb.gens}
                if any(isinstance(g, QueryGen) for g in sb.gens):
                    raise _NotRenderable()
                out.append(
                    Branch(
                        list(sb.gens),
                        [walk(c, inner_bound) for c in sb.conds],
                        walk(sb.result, inner_bound),
                    )
                )
            return SubQuery(NormalQuery(out))
        return S.map_children(e, lambda c: walk(c, bound))

    bound0 = frozenset(g.var for g in b.gens)
    return Branch(
        list(b.gens),
        [walk(c, bound0) for c in b.conds],
        walk(b.result, bound0),
    )


def _ground_expr(e: S.Expr, env: dict[str, V.Value]) -> S.Expr:
    """Substitute outer-variable references by literal values."""
    if isinstance(e, S.Var) and e.name in env:
        return S.ValueLit(env[e.name])
    if isinstance(e, S.Project) and isinstance(e.expr, S.Var) and e.expr.name in env:
        v = env[e.expr.name]
        if isinstance(v, V.VRecord):
            return S.ValueLit(v.get(e.label))
    if isinstance(e, SubQuery):
        return SubQuery(_ground_query(e.query, env))
    return S.map_children(e, lambda c: _ground_expr(c, env))


def _ground_query(nq: NormalQuery, env: dict[str, V.Value]) -> NormalQuery:
    if not env:
        return nq
    out = []
    for b in nq.branches:
        bound: set[str] = set()
        gens: list[Gen] = []
        for g in b.gens:
            if isinstance(g, QueryGen):
                gens.append(QueryGen(g.var, _ground_query(g.query, env)))
            else:
                gens.append(g)
            bound.add(g.var)
        live = {k: v for k, v in env.items() if k not in bound}
        out.append(
            Branch(
                gens,
                [_ground_expr(c, live) for c in b.conds],
                _ground_expr(b.result, live),
            )
        )
    return NormalQuery(out)


# ---------------------------------------------------------------------------
# Schema DDL, loading, updates


_SQL_TYPES = {"Int": "INTEGER", "Bool": "INTEGER", "String": "TEXT"}

BENCH_INDEXES = [
    ("tasks", "employee"),
    ("tasks", "task"),
    ("employees", "dept"),
    ("contacts", "dept"),
]


def schema_ddl(db: Database, indexes: bool = True) -> list[str]:
    stmts = []
    for name in sorted(db.tables):
        td = db.tables[name]
        cols = []
        for label, ty in td.schema:
            if label == OID:
                cols.append(f"{qident(label)} INTEGER PRIMARY KEY")
            else:
                cols.append(f"{qident(label)} {_SQL_TYPES[str(ty)]} NOT NULL")
        stmts.append(f"CREATE TABLE {qident(name)} ({', '.join(cols)})")
    stmts.append(
        'CREATE TABLE "_provql_seq" ("table_name" TEXT PRIMARY KEY, "next_oid" INTEGER NOT NULL)'
    )
    if indexes:
        for table, col in BENCH_INDEXES:
            if table in db.tables:
                stmts.append(
                    f"CREATE INDEX {qident('idx_' + table + '_' + col)} "
                    f"ON {qident(table)} ({qident(col)})"
                )
    return stmts


def load_database(conn, db: Database) -> None:
    """Create the schema and load an in-memory database snapshot."""
    for stmt in schema_ddl(db):
        conn.execute(stmt)
    for name in sorted(db.tables):
        td = db.tables[name]
        cols = [l for l, _ in td.schema]
        placeholders = ", ".join("?" for _ in cols)
        stmt = (
            f"INSERT INTO {qident(name)} ({', '.join(qident(c) for c in cols)}) "
            f"VALUES ({placeholders})"
        )
        conn.executemany(
            stmt,
            [tuple(int(r[c]) if isinstance(r[c], bool) else r[c] for c in cols) for r in td.rows],
        )
        conn.execute(
            'INSERT INTO "_provql_seq" VALUES (?, ?)', (name, td.next_oid)
        )
    conn.commit()


def read_database(conn, schema: dict[str, S.Row]) -> Database:
    """Snapshot the SQL state back into the in-memory model."""
    db = Database()
    for name, row in schema.items():
        db.create_table(name, row)
        td = db.get(name)
        cols = S.row_labels(td.schema)
        sel = ", ".join(qident(c) for c in cols)
        for raw in conn.execute(f"SELECT {sel} FROM {qident(name)}"):
            r = {}
            for c, x in zip(cols, raw):
                ty = S.row_get(td.schema, c)
                r[c] = bool(x) if ty == S.BOOL else x
            td.rows.append(r)
        seq = conn.execute(
            'SELECT "next_oid" FROM "_provql_seq" WHERE "table_name" = ?', (name,)
        ).fetchone()
        td.next_oid = seq[0] if seq else max((r[OID] for r in td.rows), default=0) + 1
    return db


def _next_oids(conn, table: str, count: int) -> list[int]:
    cur = conn.execute(
        'SELECT "next_oid" FROM "_provql_seq" WHERE "table_name" = ?', (table,)
    ).fetchone()
    if cur is None:
        raise BackendError(f"no sequence for table {table!r}")
    start = cur[0]
    conn.execute(
        'UPDATE "_provql_seq" SET "next_oid" = ? WHERE "table_name" = ?',
        (start + count, table),
    )
    return list(range(start, start + count))


def apply_update(conn, stmt: S.Expr, schema: dict[str, S.Row]) -> None:
    """Translate one insert/update/delete statement to SQL and run it."""
    from .normalize import rewrite_fixpoint
    from .interp import eval_big
    from .typecheck import Mode

    if isinstance(stmt, S.Insert):
        table = _resolve_table(stmt.table)
        _, rows_v = eval_big(Database(), rewrite_fixpoint(stmt.values), Mode.PLAIN)
        if not isinstance(rows_v, V.VList):
            raise BackendError("insert values did not evaluate to a list")
        td_row = schema[table.name]
        cols = [l for l, _ in td_row if l != OID]
        oids = _next_oids(conn, table.name, len(rows_v.items))
        for oid, item in zip(oids, rows_v.items):
            if not isinstance(item, V.VRecord):
                raise BackendError("insert row is not a record")
            labels = [l for l, _ in item.fields]
            if OID in labels:
                raise BackendError("attempt to write oid")
            vals = []
            for c in cols:
                x = V.strip_annotations(item.get(c))
                assert isinstance(x, V.VConst)
                vals.append(int(x.value) if isinstance(x.value, bool) else x.value)
            collist = ", ".join(qident(c) for c in cols + [OID])
            qs = ", ".join("?" for _ in range(len(cols) + 1))
            conn.execute(
                f"INSERT INTO {qident(table.name)} ({collist}) VALUES ({qs})",
                (*vals, oid),
            )
        conn.commit()
        return
    if isinstance(stmt, S.Update):
        table = _resolve_table(stmt.table)
        row = schema[table.name]
        r = _Renderer({stmt.var: ("", row)})
        try:
            pred = _strip_alias(r.expr(rewrite_fixpoint(stmt.pred), True))
            sets = []
            for label, x in stmt.assigns:
                if label == OID:
                    raise BackendError("attempt to write oid")
                sets.append(f"{qident(label)} = {_strip_alias(r.expr(rewrite_fixpoint(x)))}")
        except _NotRenderable:
            raise BackendError("update clause is not SQL-renderable") from None
        conn.execute(
            f"UPDATE {qident(table.name)} SET {', '.join(sets)} WHERE {pred}"
        )
        conn.commit()
        return
    if isinstance(stmt, S.Delete):
        table = _resolve_table(stmt.table)
        row = schema[table.name]
        r = _Renderer({stmt.var: ("", row)})
        try:
            pred = _strip_alias(r.expr(rewrite_fixpoint(stmt.pred), True))
        except _NotRenderable:
            raise BackendError("delete predicate is not SQL-renderable") from None
        conn.execute(f"DELETE FROM {qident(table.name)} WHERE {pred}")
        conn.commit()
        return
    raise BackendError(f"not an update statement: {type(stmt).__name__}")


def _resolve_table(e: S.Expr) -> S.TableRef:
    from .normalize import rewrite_fixpoint

    t = rewrite_fixpoint(e)
    if isinstance(t, S.ValueLit) and isinstance(t.value, V.VTable):
        return S.TableRef(t.value.name, t.value.row, t.value.spec)
    if not isinstance(t, S.TableRef):
        raise BackendError("update target is not a table")
    return t


def _strip_alias(sql: str) -> str:
    return sql.replace('"".', "")


# ---------------------------------------------------------------------------
# Benchmark schema and data generator

BENCH_SCHEMA: dict[str, list[tuple[str, S.Type]]] = {
    "departments": [("oid", S.INT), ("name", S.STRING)],
    "employees": [("oid", S.INT), ("dept", S.STRING), ("name", S.STRING), ("salary", S.INT)],
    "tasks": [("oid", S.INT), ("employee", S.STRING), ("task", S.STRING)],
    "contacts": [("oid", S.INT), ("dept", S.STRING), ("name", S.STRING), ("client", S.BOOL)],
}

TASK_NAMES = [
    "abstract", "build", "call", "design", "enhance", "file",
    "go", "implement", "join", "keep", "lead", "manage",
]


def generate_benchmark_data(
    departments: int, seed: int, employees_per_dept: int = 100
) -> Database:
    """Deterministic-by-seed population of the benchmark schema.

    Each department has on average ``employees_per_dept`` employees and
    each employee has 0-2 tasks.
    """
    if departments < 1:
        raise BackendError("departments must be >= 1")
    rng = Random(seed)
    db = Database()
    for name, cols in BENCH_SCHEMA.items():
        db.create_table(name, cols)
    lo = max(1, employees_per_dept // 2)
    hi = employees_per_dept + employees_per_dept // 2
    for d in range(departments):
        dept = f"dept_{d:04d}"
        db.insert_rows("departments", [{"name": dept}])
        for c in range(rng.randint(1, 4)):
            db.insert_rows(
                "contacts",
                [{"dept": dept, "name": f"cont_{d:04d}_{c}", "client": rng.random() < 0.3}],
            )
        for e in range(rng.randint(lo, hi)):
            emp = f"emp_{d:04d}_{e:04d}"
            if rng.random() < 0.02:
                salary = rng.choice([500, 900, 1_500_000, 2_000_000])
            else:
                salary = rng.randrange(1_000, 120_001, 400)
            db.insert_rows(
                "employees", [{"dept": dept, "name": emp, "salary": salary}]
            )
            for _ in range(rng.randint(0, 2)):
                db.insert_rows(
                    "tasks", [{"employee": emp, "task": rng.choice(TASK_NAMES)}]
                )
    return db


def generate_benchmark_db(
    cfg: ConnectionConfig, departments: int, seed: int, employees_per_dept: int = 100
):
    """Generate and load the benchmark database; returns the connection."""
    db = generate_benchmark_data(departments, seed, employees_per_dept)
    conn = connect(cfg)
    load_database(conn, db)
    return conn


def bench_schema_rows() -> dict[str, S.Row]:
    return {name: S.make_row(cols) for name, cols in BENCH_SCHEMA.items()}
