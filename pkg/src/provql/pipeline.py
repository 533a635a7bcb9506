"""End-to-end run pipeline shared by the CLI, the benchmark harness, and
the test suite: parse, typecheck, translate per mode, normalize, execute on
the interpreter and/or the SQL backend, and compare.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional

from .database import Database
from .errors import ProvqlError
from .interp import eval_big
from .lineage_trans import d_translate_program
from .normalize import NormalQuery, normalize
from .parser import SourceProgram, parse_program, pretty_print_program
from .sqlbackend import PlanExecutor, load_database
from .typecheck import Mode, typecheck_program
from .where_trans import w_translate_program
from . import syntax as S
from . import values as V


@dataclass
class RunConfig:
    mode: Mode = Mode.PLAIN
    engine: str = "interpret"  # interpret | sql | both
    repetitions: int = 1
    seed: int = 0
    emit_translated: bool = False
    emit_normal: bool = False
    emit_sql: bool = False
    explain: bool = False
    trace: bool = False

    def __post_init__(self):
        if self.engine not in ("interpret", "sql", "both"):
            raise ProvqlError(f"unknown engine {self.engine!r}")
        if self.repetitions < 1:
            raise ProvqlError("repetitions must be >= 1")


@dataclass
class Prepared:
    source: SourceProgram
    mode: Mode
    source_type: S.Type
    translated: SourceProgram  # equals source in plain mode
    translated_type: Optional[S.Type] = None


def prepare(text: str, mode: Mode) -> Prepared:
    """Parse, typecheck in the given mode, and translate to a plain program."""
    prog = parse_program(text)
    checked = typecheck_program(prog, mode)
    if checked.main is None:
        raise ProvqlError("program has no main expression")
    if mode is Mode.WHERE:
        translated = w_translate_program(prog)
    elif mode is Mode.LINEAGE:
        translated = d_translate_program(prog)
    else:
        translated = prog
    tchecked = typecheck_program(translated, Mode.PLAIN)
    tty = tchecked.main.ty if tchecked.main else None
    return Prepared(prog, mode, checked.main.ty, translated, tty)


def query_expr(prog: SourceProgram) -> S.Expr:
    """The main query block's body with all declarations folded in as lets.

    The SQL engine requires the main expression to be a query block,
    possibly under let bindings.
    """
    main = prog.main
    lets: list[tuple[str, S.Expr]] = []
    for d in prog.decls:
        if not isinstance(d.expr, S.DatabaseRef):
            lets.append((d.name, d.expr))
    while isinstance(main, S.Let):
        lets.append((main.name, main.value))
        main = main.body
    if not isinstance(main, S.Query):
        raise ProvqlError(
            "the SQL engine needs the main expression to be a query block"
        )
    body = main.body
    for name, value in reversed(lets):
        body = S.Let(name, value, body)
    return body


def normalized_query(prepared: Prepared) -> NormalQuery:
    return normalize(query_expr(prepared.translated))


def table_schemas(prog: SourceProgram) -> dict[str, S.Row]:
    out: dict[str, S.Row] = {}
    for d in prog.decls:
        for node in S.walk(d.expr):
            if isinstance(node, S.TableRef):
                out[node.name] = node.row
    if prog.main is not None:
        for node in S.walk(prog.main):
            if isinstance(node, S.TableRef):
                out[node.name] = node.row
    return out


def run_interp(db: Database, prepared: Prepared) -> V.Value:
    """Direct interpretation of the source program (the oracle path)."""
    eval_mode = Mode.WHERE if prepared.mode is Mode.WHERE else Mode.PLAIN
    _, v = eval_big(db.copy(), prepared.source.as_expr(), eval_mode)
    return v


def run_sql(conn, prepared: Prepared, explain: Optional[list] = None) -> V.Value:
    """Translated, normalized, and executed on the database."""
    nq = normalized_query(prepared)
    ex = PlanExecutor(conn, explain=explain)
    return ex.run(nq)


def comparable(v: V.Value, mode: Mode) -> V.Value:
    """Canonical form for cross-engine comparison.

    Where mode: annotated base values become data/prov records.  Lineage
    mode: results convert back to annotated cells, so witness lists compare
    as color sets (the translation emits concatenated lists, which can
    repeat a row that witnesses an output twice; the correctness theorem is
    stated on sets).
    """
    if mode is Mode.WHERE:
        v = annotated_to_records(v)
    if mode is Mode.LINEAGE:
        from .interp import d2a

        v = d2a(v)
    return V.canonical_order(v)


def annotated_to_records(v: V.Value) -> V.Value:
    if isinstance(v, V.VAnnot):
        return V.vrecord(
            [("!data", annotated_to_records(v.base)), ("!prov", V.color_value(v.color))]
        )
    if isinstance(v, V.VRecord):
        return V.VRecord(tuple((l, annotated_to_records(x)) for l, x in v.fields))
    if isinstance(v, V.VList):
        return V.VList(tuple(annotated_to_records(x) for x in v.items))
    if isinstance(v, V.VAnnList):
        return V.VAnnList(tuple((annotated_to_records(x), c) for x, c in v.cells))
    return v


@dataclass
class RunResult:
    value: Optional[V.Value]
    timings_ms: list[float] = field(default_factory=list)
    outputs: dict = field(default_factory=dict)

    @property
    def median_ms(self) -> float:
        xs = sorted(self.timings_ms)
        return xs[len(xs) // 2] if xs else 0.0


def run(
    text: str,
    cfg: RunConfig,
    db: Optional[Database] = None,
    conn=None,
) -> RunResult:
    """The full pipeline; measures per-repetition execution time."""
    prepared = prepare(text, cfg.mode)
    result = RunResult(None)
    if cfg.emit_translated:
        result.outputs["translated"] = pretty_print_program(prepared.translated)
    if cfg.emit_normal or cfg.emit_sql or cfg.engine in ("sql", "both"):
        nq = normalized_query(prepared)
        if cfg.emit_normal:
            from .normalize import render_back
            from .parser import pretty_print

            result.outputs["normal"] = pretty_print(render_back(nq))
        if cfg.emit_sql:
            from .sqlbackend import render_sql

            result.outputs["sql"] = render_sql(nq).to_sql()
    own_conn = False
    if cfg.engine in ("sql", "both") and conn is None:
        if db is None:
            raise ProvqlError("SQL engine needs a database")
        import sqlite3

        conn = sqlite3.connect(":memory:")
        load_database(conn, db)
        own_conn = True
    try:
        vi = vs = None
        for _ in range(cfg.repetitions):
            t0 = time.perf_counter()
            if cfg.engine in ("interpret", "both"):
                if db is None:
                    raise ProvqlError("interpreter engine needs a database")
                vi = run_interp(db, prepared)
            if cfg.engine in ("sql", "both"):
                explain: Optional[list] = [] if cfg.explain else None
                vs = run_sql(conn, prepared, explain)
                if cfg.explain and explain is not None:
                    result.outputs["explain"] = explain
            result.timings_ms.append((time.perf_counter() - t0) * 1000.0)
        if cfg.engine == "both":
            a = comparable(vi, cfg.mode)
            b = comparable(vs, cfg.mode)
            if a != b:
                raise ProvqlError(
                    "engine mismatch: interpreter and SQL results differ"
                )
            result.value = a
        else:
            result.value = comparable(vi if cfg.engine == "interpret" else vs, cfg.mode)
    finally:
        if own_conn:
            conn.close()
    return result
