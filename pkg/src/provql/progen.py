"""Random well-typed program generation for the property harnesses.

Programs are built bottom-up from what is in scope, so they typecheck by
construction.  Shapes are biased toward comprehensions over the example
tables; where mode sprinkles provenance specs and data/prov projections,
lineage mode wraps bodies in lineage blocks and lets values cross the
block boundary.
"""

from __future__ import annotations

from random import Random
from typing import Optional

from .parser import Declaration, SourceProgram
from .typecheck import Mode
from . import syntax as S

TOURS_TABLES: dict[str, list[tuple[str, S.Type]]] = {
    "Agencies": [("name", S.STRING), ("based_in", S.STRING), ("phone", S.STRING)],
    "ExternalTours": [
        ("name", S.STRING),
        ("destination", S.STRING),
        ("type", S.STRING),
        ("price", S.INT),
    ],
}

_STRS = ["boat", "bus", "EdinTours", "Burns's", "Loch Ness", "abstract", "x"]


class ProgGen:
    def __init__(self, seed: int, mode: Mode = Mode.PLAIN, max_depth: int = 6):
        self.rng = Random(seed)
        self.mode = mode
        self.max_depth = max_depth

    # -- scope atoms -------------------------------------------------------

    def _atoms(self, env: dict[str, S.Type], want) -> list[S.Expr]:
        """In-scope expressions whose type satisfies the predicate."""
        out = []
        for name, ty in env.items():
            if want(ty):
                out.append(S.Var(name))
            if isinstance(ty, S.RecordType):
                for l, ft in ty.row:
                    if want(ft):
                        out.append(S.Project(S.Var(name), l))
        return out

    def _base_atoms(self, env, base: S.BaseType) -> list[S.Expr]:
        atoms = self._atoms(env, lambda t: t == base)
        if self.mode is Mode.WHERE:
            for a in self._atoms(env, lambda t: t == S.ProvType(base)):
                atoms.append(S.Data(a))
        return atoms

    # -- expressions by type ------------------------------------------------

    def base_expr(self, env, base: S.BaseType, depth: int) -> S.Expr:
        r = self.rng
        atoms = self._base_atoms(env, base)
        if depth <= 0 or (atoms and r.random() < 0.5):
            if atoms and r.random() < 0.8:
                return r.choice(atoms)
            return self._literal(base)
        if base == S.INT and r.random() < 0.5:
            op = r.choice(["+", "-", "*", "mod"])
            a = self.base_expr(env, S.INT, depth - 1)
            b = (
                S.Const(r.randint(1, 9))
                if op == "mod"
                else self.base_expr(env, S.INT, depth - 1)
            )
            return S.Prim(op, (a, b))
        if base == S.BOOL:
            return self.bool_expr(env, depth)
        if r.random() < 0.3:
            return S.If(
                self.bool_expr(env, depth - 1),
                self.base_expr(env, base, depth - 1),
                self.base_expr(env, base, depth - 1),
            )
        return self._literal(base) if not atoms else r.choice(atoms)

    def bool_expr(self, env, depth: int) -> S.Expr:
        r = self.rng
        if depth <= 0:
            return S.Const(r.random() < 0.5)
        roll = r.random()
        if roll < 0.45:
            base = r.choice([S.INT, S.STRING, S.BOOL])
            a = self.base_expr(env, base, depth - 1)
            b = self.base_expr(env, base, depth - 1)
            return S.Prim(r.choice(["==", "<>"]), (a, b))
        if roll < 0.6:
            a = self.base_expr(env, S.INT, depth - 1)
            b = self.base_expr(env, S.INT, depth - 1)
            return S.Prim(r.choice(["<", ">"]), (a, b))
        if roll < 0.8:
            return S.Prim(
                r.choice(["&&", "||"]),
                (self.bool_expr(env, depth - 1), self.bool_expr(env, depth - 1)),
            )
        if roll < 0.9:
            return S.Prim("not", (self.bool_expr(env, depth - 1),))
        atoms = self._base_atoms(env, S.BOOL)
        return r.choice(atoms) if atoms else S.Const(r.random() < 0.5)

    def _literal(self, base: S.BaseType) -> S.Expr:
        r = self.rng
        if base == S.INT:
            return S.Const(r.randint(-20, 200))
        if base == S.BOOL:
            return S.Const(r.random() < 0.5)
        return S.Const(r.choice(_STRS))

    def record_expr(self, env, depth: int, flat: bool) -> S.Expr:
        r = self.rng
        n = r.randint(1, 4)
        fields = []
        for i in range(n):
            label = f"f{i}"
            roll = r.random()
            if not flat and roll < 0.25 and depth > 1:
                fields.append((label, self.list_expr(env, depth - 1, flat)))
            elif self.mode is Mode.WHERE and roll < 0.4:
                prov_atoms = self._atoms(env, lambda t: isinstance(t, S.ProvType))
                if prov_atoms:
                    a = r.choice(prov_atoms)
                    fields.append((label, r.choice([a, S.ProvOf(a)])))
                else:
                    base = r.choice([S.INT, S.STRING, S.BOOL])
                    fields.append((label, self.base_expr(env, base, depth - 1)))
            else:
                base = r.choice([S.INT, S.STRING, S.BOOL])
                fields.append((label, self.base_expr(env, base, depth - 1)))
        return S.record_lit(fields)

    def list_expr(self, env, depth: int, flat: bool = False) -> S.Expr:
        """A list-typed expression, biased toward table comprehensions."""
        r = self.rng
        if depth <= 1:
            return S.Singleton(self.record_expr(env, 1, flat))
        roll = r.random()
        if roll < 0.5:
            return self.comprehension(env, depth, flat)
        if roll < 0.6:
            e = self.list_expr(env, depth - 1, flat)
            return S.Where(self.bool_expr(env, depth - 1), e)
        if roll < 0.7:
            # concat of structurally equal-typed branches: generate one body
            # under two different conditions
            e = self.list_expr(env, depth - 1, flat)
            return S.Concat(S.Where(self.bool_expr(env, 1), e), e)
        if roll < 0.8 and not flat:
            e = self.list_expr(env, depth - 1, flat)
            return S.If(
                self.bool_expr(env, depth - 1), e, S.EmptyList()
            )
        return S.Singleton(self.record_expr(env, depth - 1, flat))

    def comprehension(self, env, depth: int, flat: bool) -> S.Expr:
        r = self.rng
        n_gens = r.randint(1, 2 if depth < 4 else 3)
        env2 = dict(env)
        gens = []
        for _ in range(n_gens):
            name, row = self.pick_table()
            var = S.fresh_name("g", set(env2))
            row_ty = self.table_row_type(name, row)
            env2[var] = S.RecordType(row_ty)
            gens.append((var, name, row))
        body: S.Expr = S.Singleton(self.record_expr(env2, depth - 1, flat))
        if r.random() < 0.7:
            body = S.Where(self.bool_expr(env2, depth - 1), body)
        for var, name, row in reversed(gens):
            table = S.TableRef(
                name, S.make_row(row), self.spec_for(name, row), oid_implicit=False
            )
            body = S.For(var, table, body, True)
        return body

    # -- tables --------------------------------------------------------------

    def pick_table(self) -> tuple[str, list[tuple[str, S.Type]]]:
        name = self.rng.choice(sorted(TOURS_TABLES))
        row = [("oid", S.INT)] + TOURS_TABLES[name]
        return name, row

    def spec_for(self, name: str, row) -> S.ProvSpec:
        if self.mode is not Mode.WHERE:
            return S.EMPTY_SPEC
        if name not in self._specs:
            entries = []
            for label, ty in row:
                if label == "oid":
                    continue
                roll = self.rng.random()
                if roll < 0.4:
                    entries.append(S.ProvSpecEntry(label, None))
                elif roll < 0.5:
                    fn = S.Fun(
                        None,
                        ("r",),
                        S.triple(
                            S.Const(name.lower()),
                            S.Const(label),
                            S.Project(S.Var("r"), "oid"),
                        ),
                    )
                    entries.append(S.ProvSpecEntry(label, fn))
            self._specs[name] = S.ProvSpec(tuple(entries))
        return self._specs[name]

    def table_row_type(self, name: str, row) -> S.Row:
        spec = self.spec_for(name, row)
        out = []
        for label, ty in row:
            entry = spec.lookup(label)
            out.append((label, S.ProvType(ty) if entry is not None else ty))
        return S.make_row(out)

    # -- whole programs --------------------------------------------------------

    _specs: dict[str, S.ProvSpec]

    def program(self, flat: bool = False) -> SourceProgram:
        """A declarations-plus-main program for the generator's mode."""
        self._specs = {}
        r = self.rng
        prog = SourceProgram()
        env: dict[str, S.Type] = {}
        # a few top-level value bindings that may cross into query blocks
        for i in range(r.randint(0, 2)):
            name = f"v{i}"
            if r.random() < 0.5:
                base = r.choice([S.INT, S.STRING])
                expr: S.Expr = self._literal(base)
                ty: S.Type = base
            else:
                items = [
                    S.record_lit([("a", self._literal(S.INT)), ("b", self._literal(S.STRING))])
                    for _ in range(r.randint(1, 3))
                ]
                expr = S.list_lit(items)
                ty = S.ListType(S.record_type({"a": S.INT, "b": S.STRING}))
            prog.decls.append(Declaration(name, expr))
            env[name] = ty
        body = self.query_body(env, flat)
        if self.mode is Mode.LINEAGE:
            prog.main = S.LineageBlock(body)
        else:
            prog.main = S.Query(body)
        return prog

    def query_body(self, env, flat: bool) -> S.Expr:
        r = self.rng
        depth = r.randint(2, self.max_depth)
        outer_lists = [
            (n, t) for n, t in env.items() if isinstance(t, S.ListType)
        ]
        if outer_lists and r.random() < 0.4:
            # iterate a value from outside the block
            name, ty = r.choice(outer_lists)
            var = S.fresh_name("o", set(env))
            env2 = dict(env)
            env2[var] = ty.elem
            return S.For(var, S.Var(name), self.list_expr(env2, max(1, depth - 2), flat), False)
        return self.list_expr(env, depth, flat)

    def pure_where_term(self) -> tuple[SourceProgram, S.Expr]:
        """A pure where-mode program (no updates) plus its main expression,
        for the per-step color-monotonicity harness."""
        self._specs = {}
        prog = self.program(flat=False)
        return prog, prog.as_expr()

    def update_script(self, schema: dict[str, S.Row]) -> list[S.Expr]:
        """Randomized insert/update/delete statements over a schema."""
        r = self.rng
        stmts: list[S.Expr] = []
        names = sorted(schema)
        for _ in range(r.randint(1, 5)):
            name = r.choice(names)
            row = schema[name]
            table = S.TableRef(name, row, oid_implicit=False)
            env = {"x": S.RecordType(row)}
            kind = r.random()
            if kind < 0.4:
                rows = []
                for _ in range(r.randint(1, 3)):
                    fields = []
                    for label, ty in row:
                        if label == "oid":
                            continue
                        fields.append((label, self._literal(ty)))
                    rows.append(S.record_lit(fields))
                stmts.append(S.Insert(table, S.list_lit(rows)))
            elif kind < 0.7:
                assigns = []
                cols = [l for l, _ in row if l != "oid"]
                for label in r.sample(cols, r.randint(1, len(cols))):
                    ty = S.row_get(row, label)
                    if ty == S.INT and r.random() < 0.5:
                        assigns.append(
                            (label, S.Prim("+", (S.Project(S.Var("x"), label), S.Const(r.randint(1, 5)))))
                        )
                    else:
                        assigns.append((label, self._literal(ty)))
                stmts.append(
                    S.Update(
                        "x", table, self._row_pred(env, row), tuple(assigns)
                    )
                )
            else:
                stmts.append(S.Delete("x", table, self._row_pred(env, row)))
        return stmts

    def _row_pred(self, env, row: S.Row) -> S.Expr:
        r = self.rng
        label, ty = r.choice([(l, t) for l, t in row])
        lhs = S.Project(S.Var("x"), label)
        if ty == S.INT:
            return S.Prim(r.choice(["<", ">", "==", "<>"]), (lhs, S.Const(r.randint(0, 50))))
        if ty == S.BOOL:
            return lhs if r.random() < 0.5 else S.Prim("not", (lhs,))
        return S.Prim(r.choice(["==", "<>"]), (lhs, self._literal(ty)))
