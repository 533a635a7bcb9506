"""Abstract syntax: types, rows, expressions, and the operations on them.

Expressions form a small comprehension-based query language.  Lists are
built from [] / [M] / M ++ N, comprehensions come in two flavours
(``for (x <- M)`` over lists, ``for (x <-- M)`` over tables), and query
and lineage blocks delimit the parts of a program that must be runnable
on a database.  Two internal node kinds never appear in source programs:
``UnionAnnot`` (produced by the lineage stepper) and ``ValueLit``
(embeds an already-computed runtime value into a term).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, fields
from typing import Iterator, Optional, Union

# ---------------------------------------------------------------------------
# Source spans


@dataclass(frozen=True)
class Span:
    line: int
    col: int
    end_line: int = 0
    end_col: int = 0

    def __str__(self) -> str:
        return f"{self.line}:{self.col}"


# ---------------------------------------------------------------------------
# Types

BASE_TYPES = ("Int", "Bool", "String")


class Type:
    """Base class for types."""

    __slots__ = ()


@dataclass(frozen=True)
class BaseType(Type):
    name: str  # Int | Bool | String

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class ProvType(Type):
    """Provenance-carrying base type; the argument is always a base type."""

    base: Type

    def __str__(self) -> str:
        return f"Prov({self.base})"


INT = BaseType("Int")
BOOL = BaseType("Bool")
STRING = BaseType("String")

# A row is a tuple of (label, type) pairs in canonical (lexicographic) label
# order, so record-type equality is label-order independent.
Row = tuple[tuple[str, Type], ...]


def make_row(entries) -> Row:
    items = list(entries.items()) if isinstance(entries, dict) else list(entries)
    labels = [l for l, _ in items]
    if len(labels) != len(set(labels)):
        dup = next(l for l in labels if labels.count(l) > 1)
        raise ValueError(f"duplicate label {dup!r} in row")
    return tuple(sorted(items, key=lambda kv: kv[0]))


def row_labels(row: Row) -> list[str]:
    return [l for l, _ in row]


def row_get(row: Row, label: str) -> Optional[Type]:
    for l, t in row:
        if l == label:
            return t
    return None


@dataclass(frozen=True)
class TableType(Type):
    row: Row

    def __str__(self) -> str:
        inner = ", ".join(f"{l}: {t}" for l, t in self.row)
        return f"table({inner})"


@dataclass(frozen=True)
class FunType(Type):
    params: tuple[Type, ...]
    result: Type

    def __str__(self) -> str:
        inner = ", ".join(str(t) for t in self.params)
        return f"({inner}) -> {self.result}"


@dataclass(frozen=True)
class RecordType(Type):
    row: Row
    open: bool = False  # open rows come from signatures like (name:String|_)

    def __str__(self) -> str:
        labels = set(row_labels(self.row))
        if len(self.row) >= 2 and labels == {str(i + 1) for i in range(len(self.row))}:
            parts = [str(row_get(self.row, str(i + 1))) for i in range(len(self.row))]
            return "(" + ", ".join(parts) + ")"
        inner = ", ".join(f"{_label_str(l)}: {t}" for l, t in self.row)
        tail = "|_" if self.open else ""
        return f"({inner}{tail})"


@dataclass(frozen=True)
class ListType(Type):
    elem: Type

    def __str__(self) -> str:
        return f"[{self.elem}]"


@dataclass(frozen=True)
class DbType(Type):
    """Type of database handles (declaration plumbing only)."""

    def __str__(self) -> str:
        return "Database"


UNIT = RecordType(())


def record_type(entries, open: bool = False) -> RecordType:
    return RecordType(make_row(entries), open)


def tuple_type(*types: Type) -> RecordType:
    return record_type([(str(i + 1), t) for i, t in enumerate(types)])


def is_base(t: Type) -> bool:
    return isinstance(t, BaseType)


def _label_str(label: str) -> str:
    return label if label.isidentifier() else f'"{label}"'


# ---------------------------------------------------------------------------
# Provenance specifications on table declarations


@dataclass(frozen=True)
class ProvSpecEntry:
    column: str
    # None means default provenance; otherwise a function expression of type
    # (R) -> (String, String, Int) computing the annotation for a row.
    fn: Optional["Expr"]


@dataclass(frozen=True)
class ProvSpec:
    entries: tuple[ProvSpecEntry, ...] = ()

    def __bool__(self) -> bool:
        return bool(self.entries)

    def lookup(self, column: str) -> Optional[ProvSpecEntry]:
        for e in self.entries:
            if e.column == column:
                return e
        return None

    def validate_against(self, row: Row) -> None:
        seen = set()
        for e in self.entries:
            if e.column in seen:
                raise ValueError(f"duplicate provenance spec for column {e.column!r}")
            seen.add(e.column)
            if row_get(row, e.column) is None:
                raise ValueError(f"provenance spec names missing column {e.column!r}")


EMPTY_SPEC = ProvSpec()


# ---------------------------------------------------------------------------
# Expressions


@dataclass(frozen=True)
class Expr:
    span: Optional[Span] = field(default=None, compare=False, kw_only=True)

    def children(self) -> Iterator["Expr"]:
        for f in fields(self):
            if f.name == "span":
                continue
            v = getattr(self, f.name)
            if isinstance(v, Expr):
                yield v
            elif isinstance(v, tuple):
                for item in v:
                    if isinstance(item, Expr):
                        yield item
                    elif (
                        isinstance(item, tuple)
                        and len(item) == 2
                        and isinstance(item[1], Expr)
                    ):
                        yield item[1]


@dataclass(frozen=True)
class Const(Expr):
    value: Union[int, bool, str]


@dataclass(frozen=True)
class Var(Expr):
    name: str


@dataclass(frozen=True)
class RecordLit(Expr):
    # Field order is source order; it is the evaluation order of the fields.
    fields_: tuple[tuple[str, Expr], ...]

    def field_labels(self) -> list[str]:
        return [l for l, _ in self.fields_]


@dataclass(frozen=True)
class Project(Expr):
    expr: Expr
    label: str


@dataclass(frozen=True)
class Fun(Expr):
    """n-ary recursive function; fname is None for anonymous functions."""

    fname: Optional[str]
    params: tuple[str, ...]
    body: Expr


@dataclass(frozen=True)
class App(Expr):
    fn: Expr
    args: tuple[Expr, ...]


@dataclass(frozen=True)
class Prim(Expr):
    """Application of a built-in constant function (==, +, mod, not, ...)."""

    op: str
    args: tuple[Expr, ...]


@dataclass(frozen=True)
class Let(Expr):
    name: str
    value: Expr
    body: Expr


@dataclass(frozen=True)
class If(Expr):
    cond: Expr
    then: Expr
    els: Expr


@dataclass(frozen=True)
class Query(Expr):
    body: Expr


@dataclass(frozen=True)
class LineageBlock(Expr):
    body: Expr


@dataclass(frozen=True)
class TableRef(Expr):
    name: str
    row: Row
    spec: ProvSpec = EMPTY_SPEC
    # Metadata clauses; parsed and retained but semantically inert apart from
    # oid write protection.
    readonly: tuple[str, ...] = ()
    keys: tuple[tuple[str, ...], ...] = ()
    # True when the engine-managed oid column was not declared in the source.
    oid_implicit: bool = False


@dataclass(frozen=True)
class DatabaseRef(Expr):
    name: str


@dataclass(frozen=True)
class EmptyList(Expr):
    # Optional element-type annotation ([] : [T]); needed wherever the
    # monomorphic checker has no expected type to push.
    elem: Optional[Type] = None


@dataclass(frozen=True)
class Singleton(Expr):
    item: Expr


@dataclass(frozen=True)
class Concat(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class IsEmpty(Expr):
    coll: Expr


@dataclass(frozen=True)
class For(Expr):
    var: str
    source: Expr
    body: Expr
    table: bool = False  # True for the <-- (table) form


@dataclass(frozen=True)
class Where(Expr):
    cond: Expr
    body: Expr


@dataclass(frozen=True)
class Insert(Expr):
    table: Expr
    values: Expr


@dataclass(frozen=True)
class Update(Expr):
    var: str
    table: Expr
    pred: Expr
    assigns: tuple[tuple[str, Expr], ...]


@dataclass(frozen=True)
class Delete(Expr):
    var: str
    table: Expr
    pred: Expr


@dataclass(frozen=True)
class Data(Expr):
    expr: Expr


@dataclass(frozen=True)
class ProvOf(Expr):
    expr: Expr


@dataclass(frozen=True)
class UnionAnnot(Expr):
    """Internal: add a set of lineage colors to every cell of a list term."""

    expr: Expr
    colors: frozenset


@dataclass(frozen=True)
class ValueLit(Expr):
    """Internal: an already-computed value embedded in a term."""

    value: object


@dataclass(frozen=True)
class Hole(Expr):
    """The hole of an evaluation context (never part of a program)."""


def record_lit(entries, span=None) -> RecordLit:
    items = list(entries.items()) if isinstance(entries, dict) else list(entries)
    return RecordLit(tuple(items), span=span)


def pair(a: Expr, b: Expr) -> RecordLit:
    return record_lit([("1", a), ("2", b)])


def triple(a: Expr, b: Expr, c: Expr) -> RecordLit:
    return record_lit([("1", a), ("2", b), ("3", c)])


UNIT_LIT = RecordLit(())


def list_lit(items, span=None) -> Expr:
    """[a, b, c] sugar: a concat chain of singletons."""
    items = list(items)
    if not items:
        return EmptyList(span=span)
    out = Singleton(items[-1], span=span)
    for item in reversed(items[:-1]):
        out = Concat(Singleton(item, span=span), out, span=span)
    return out


# ---------------------------------------------------------------------------
# Free variables and substitution


def free_vars(e: Expr) -> set[str]:
    """The exact free-variable set of a term, respecting all binders."""
    out: set[str] = set()
    _free_vars(e, frozenset(), out)
    return out


def _free_vars(e: Expr, bound: frozenset, out: set[str]) -> None:
    if isinstance(e, Var):
        if e.name not in bound:
            out.add(e.name)
    elif isinstance(e, Fun):
        inner = bound | set(e.params)
        if e.fname is not None:
            inner |= {e.fname}
        _free_vars(e.body, inner, out)
    elif isinstance(e, Let):
        _free_vars(e.value, bound, out)
        _free_vars(e.body, bound | {e.name}, out)
    elif isinstance(e, For):
        _free_vars(e.source, bound, out)
        _free_vars(e.body, bound | {e.var}, out)
    elif isinstance(e, Update):
        _free_vars(e.table, bound, out)
        inner = bound | {e.var}
        _free_vars(e.pred, inner, out)
        for _, a in e.assigns:
            _free_vars(a, inner, out)
    elif isinstance(e, Delete):
        _free_vars(e.table, bound, out)
        _free_vars(e.pred, bound | {e.var}, out)
    elif isinstance(e, TableRef):
        for entry in e.spec.entries:
            if entry.fn is not None:
                _free_vars(entry.fn, bound, out)
    else:
        for c in e.children():
            _free_vars(c, bound, out)


_fresh_counter = itertools.count()


def fresh_name(base: str, avoid: set[str]) -> str:
    base = base.split("_")[0] or "x"
    while True:
        cand = f"{base}_{next(_fresh_counter)}"
        if cand not in avoid:
            return cand


def _rebuild(e: Expr, **updates) -> Expr:
    vals = {f.name: getattr(e, f.name) for f in fields(e)}
    vals.update(updates)
    return type(e)(**vals)


def rebuild(e: Expr, **updates) -> Expr:
    """Copy a node with some fields replaced."""
    return _rebuild(e, **updates)


def substitute(e: Expr, bindings: dict) -> Expr:
    """Capture-avoiding simultaneous substitution.

    Binding values may be expressions or runtime values; values are wrapped
    as ValueLit leaves.  Bound variables are renamed fresh when they would
    capture a free variable of a substituted term.
    """
    subst: dict[str, Expr] = {}
    for name, v in bindings.items():
        subst[name] = v if isinstance(v, Expr) else ValueLit(v)
    if not subst:
        return e
    avoid = set()
    for v in subst.values():
        avoid |= free_vars(v)
    return _subst(e, subst, avoid)


def _subst(e: Expr, subst: dict[str, Expr], avoid: set[str]) -> Expr:
    if isinstance(e, Var):
        return subst.get(e.name, e)
    if isinstance(e, Fun):
        binders = list(e.params) + ([e.fname] if e.fname is not None else [])
        live = {k: v for k, v in subst.items() if k not in binders}
        if not live and not (avoid & set(binders)):
            return e
        ren, params, fname = {}, list(e.params), e.fname
        for i, p in enumerate(params):
            if p in avoid:
                params[i] = fresh_name(p, avoid | set(params) | set(live))
                ren[p] = Var(params[i])
        if fname is not None and fname in avoid:
            new_f = fresh_name(fname, avoid | set(params) | set(live))
            ren[fname] = Var(new_f)
            fname = new_f
        body = _subst(e.body, ren, set()) if ren else e.body
        if not live:
            return _rebuild(e, fname=fname, params=tuple(params), body=body)
        return _rebuild(e, fname=fname, params=tuple(params), body=_subst(body, live, avoid))
    if isinstance(e, Let):
        value = _subst(e.value, subst, avoid)
        body = _sub_under_binder(e.body, e.name, subst, avoid)
        return _rebuild(e, value=value, body=body[1], name=body[0])
    if isinstance(e, For):
        source = _subst(e.source, subst, avoid)
        var, body = _sub_under_binder(e.body, e.var, subst, avoid)
        return _rebuild(e, source=source, var=var, body=body)
    if isinstance(e, Update):
        table = _subst(e.table, subst, avoid)
        live = {k: v for k, v in subst.items() if k != e.var}
        var = e.var
        pred, assigns = e.pred, e.assigns
        if var in avoid:
            new = fresh_name(var, avoid | set(live))
            ren = {var: Var(new)}
            pred = _subst(pred, ren, set())
            assigns = tuple((l, _subst(a, ren, set())) for l, a in assigns)
            var = new
        if live:
            pred = _subst(pred, live, avoid)
            assigns = tuple((l, _subst(a, live, avoid)) for l, a in assigns)
        return _rebuild(e, table=table, var=var, pred=pred, assigns=assigns)
    if isinstance(e, Delete):
        table = _subst(e.table, subst, avoid)
        var, pred = _sub_under_binder(e.pred, e.var, subst, avoid)
        return _rebuild(e, table=table, var=var, pred=pred)
    if isinstance(e, TableRef):
        if not e.spec:
            return e
        entries = tuple(
            ProvSpecEntry(x.column, None if x.fn is None else _subst(x.fn, subst, avoid))
            for x in e.spec.entries
        )
        return _rebuild(e, spec=ProvSpec(entries))
    if isinstance(e, (Const, ValueLit, EmptyList, DatabaseRef, Hole)):
        return e
    return _map_children(e, lambda c: _subst(c, subst, avoid))


def _sub_under_binder(body: Expr, var: str, subst: dict, avoid: set[str]):
    live = {k: v for k, v in subst.items() if k != var}
    if var in avoid:
        new = fresh_name(var, avoid | set(live))
        body = _subst(body, {var: Var(new)}, set())
        var = new
    if live:
        body = _subst(body, live, avoid)
    return var, body


def _map_children(e: Expr, f) -> Expr:
    updates = {}
    for fl in fields(e):
        if fl.name == "span":
            continue
        v = getattr(e, fl.name)
        if isinstance(v, Expr):
            updates[fl.name] = f(v)
        elif isinstance(v, tuple) and v and isinstance(v[0], Expr):
            updates[fl.name] = tuple(f(item) for item in v)
        elif (
            isinstance(v, tuple)
            and v
            and isinstance(v[0], tuple)
            and len(v[0]) == 2
            and isinstance(v[0][1], Expr)
        ):
            updates[fl.name] = tuple((l, f(item)) for l, item in v)
    if not updates:
        return e
    return _rebuild(e, **updates)


def map_children(e: Expr, f) -> Expr:
    return _map_children(e, f)


def walk(e: Expr) -> Iterator[Expr]:
    """Preorder traversal of a term, including provenance-spec functions."""
    yield e
    if isinstance(e, TableRef):
        for entry in e.spec.entries:
            if entry.fn is not None:
                yield from walk(entry.fn)
        return
    for c in e.children():
        yield from walk(c)
