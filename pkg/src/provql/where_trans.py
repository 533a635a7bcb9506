"""Translation of where-provenance programs to plain programs.

Prov(O) values become records with internal labels !data/!prov; table
references become pairs of the raw table (used by updates) and a delayed
view computing the annotated rows (used by comprehensions, and inlined by
the normalizer).
"""

from __future__ import annotations

from .errors import TypeCheckError
from . import syntax as S
from .typecheck import erase_type as erase, erase_row, augment_row as augment

DATA = "!data"
PROV = "!prov"

PROV_TRIPLE_T = S.tuple_type(S.STRING, S.STRING, S.INT)


def w_type(t: S.Type) -> S.Type:
    """Type translation: Prov becomes a data/prov record, tables become
    (raw table, unit -> annotated rows) pairs."""
    if isinstance(t, S.BaseType):
        return t
    if isinstance(t, S.ProvType):
        return S.record_type({DATA: w_type(t.base), PROV: PROV_TRIPLE_T})
    if isinstance(t, S.FunType):
        return S.FunType(tuple(w_type(p) for p in t.params), w_type(t.result))
    if isinstance(t, S.RecordType):
        return S.RecordType(S.make_row([(l, w_type(x)) for l, x in t.row]), t.open)
    if isinstance(t, S.ListType):
        return S.ListType(w_type(t.elem))
    if isinstance(t, S.TableType):
        raw = S.TableType(erase_row(t.row))
        view = S.FunType((), S.ListType(w_type(S.RecordType(t.row))))
        return S.tuple_type(raw, view)
    if isinstance(t, S.DbType):
        return t
    raise TypeCheckError(f"cannot translate type {t}")


def build_initial_prov(row: S.Row, table: str, rowvar: str, spec: S.ProvSpec) -> S.RecordLit:
    """The record expression producing one annotated row of a table view.

    Default columns get constant table/column strings plus the row's oid;
    user-function columns apply the translated function to the row.
    """
    x = S.Var(rowvar)
    fields = []
    for label, _ in row:
        entry = spec.lookup(label)
        raw = S.Project(x, label)
        if entry is None:
            fields.append((label, raw))
        elif entry.fn is None:
            prov = S.triple(S.Const(table), S.Const(label), S.Project(x, "oid"))
            fields.append((label, S.record_lit([(DATA, raw), (PROV, prov)])))
        else:
            prov = S.App(w_translate(entry.fn), (x,))
            fields.append((label, S.record_lit([(DATA, raw), (PROV, prov)])))
    return S.record_lit(fields)


def table_pair(e: S.TableRef) -> S.Expr:
    """(raw table, fun () { for (x <-- raw table) [annotated row] })."""
    raw = S.TableRef(
        e.name, e.row, S.EMPTY_SPEC, e.readonly, e.keys, e.oid_implicit, span=e.span
    )
    avoid = set()
    for entry in e.spec.entries:
        if entry.fn is not None:
            avoid |= S.free_vars(entry.fn)
    rowvar = S.fresh_name("t", avoid)
    body = S.For(rowvar, raw, S.Singleton(build_initial_prov(e.row, e.name, rowvar, e.spec)), True)
    return S.pair(raw, S.Fun(None, (), body))


def w_translate(e: S.Expr) -> S.Expr:
    """Expression translation; homomorphic except for the provenance forms."""
    w = w_translate
    if isinstance(e, S.Data):
        return S.Project(w(e.expr), DATA, span=e.span)
    if isinstance(e, S.ProvOf):
        return S.Project(w(e.expr), PROV, span=e.span)
    if isinstance(e, S.TableRef):
        return table_pair(e)
    if isinstance(e, S.For) and e.table:
        view = S.App(S.Project(w(e.source), "2"), ())
        return S.For(e.var, view, w(e.body), False, span=e.span)
    if isinstance(e, S.Insert):
        return S.Insert(S.Project(w(e.table), "1"), w(e.values), span=e.span)
    if isinstance(e, S.Update):
        return S.Update(
            e.var,
            S.Project(w(e.table), "1"),
            w(e.pred),
            tuple((l, w(x)) for l, x in e.assigns),
            span=e.span,
        )
    if isinstance(e, S.Delete):
        return S.Delete(e.var, S.Project(w(e.table), "1"), w(e.pred), span=e.span)
    if isinstance(e, S.EmptyList):
        if e.elem is not None:
            return S.EmptyList(w_type(e.elem), span=e.span)
        return e
    if isinstance(e, (S.LineageBlock, S.UnionAnnot, S.ValueLit)):
        raise TypeCheckError(
            f"{type(e).__name__} has no where-provenance translation", e.span
        )
    return S.map_children(e, w)


def w_translate_program(prog):
    """Translate a whole program declaration by declaration."""
    from .parser import Declaration, SourceProgram

    out = SourceProgram()
    for d in prog.decls:
        sig = w_type(d.sig) if d.sig is not None else None
        out.decls.append(Declaration(d.name, w_translate(d.expr), sig, d.span))
    if prog.main is not None:
        out.main = w_translate(prog.main)
    return out
