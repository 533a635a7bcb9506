"""Example fixtures and the benchmark query corpus.

The tours database is the worked desk example; the departments/employees/
tasks/contacts schema carries the measurement suites.  Every program is
monomorphic: helper functions are specialized per row type instead of
relying on row polymorphism.
"""

from __future__ import annotations

from .database import Database
from . import syntax as S

# ---------------------------------------------------------------------------
# Tours example database


def tours_db() -> Database:
    db = Database()
    db.create_table(
        "Agencies",
        [("name", S.STRING), ("based_in", S.STRING), ("phone", S.STRING)],
    )
    db.seed(
        "Agencies",
        [
            {"oid": 1, "name": "EdinTours", "based_in": "Edinburgh", "phone": "412 1200"},
            {"oid": 2, "name": "Burns's", "based_in": "Glasgow", "phone": "607 3000"},
        ],
    )
    db.create_table(
        "ExternalTours",
        [
            ("name", S.STRING),
            ("destination", S.STRING),
            ("type", S.STRING),
            ("price", S.INT),
        ],
    )
    db.seed(
        "ExternalTours",
        [
            {"oid": 3, "name": "EdinTours", "destination": "Edinburgh", "type": "bus", "price": 20},
            {"oid": 4, "name": "EdinTours", "destination": "Loch Ness", "type": "bus", "price": 50},
            {"oid": 5, "name": "EdinTours", "destination": "Loch Ness", "type": "boat", "price": 200},
            {"oid": 6, "name": "EdinTours", "destination": "Firth of Forth", "type": "boat", "price": 50},
            {"oid": 7, "name": "Burns's", "destination": "Islay", "type": "boat", "price": 100},
            {"oid": 8, "name": "Burns's", "destination": "Mallaig", "type": "train", "price": 40},
        ],
    )
    return db


TOURS_DECLS = '''
var agencies = table "Agencies"
  with (name: String, based_in: String, phone: String);
var externalTours = table "ExternalTours"
  with (name: String, destination: String, type: String, price: Int);
'''

TOURS_DECLS_PROV = '''
var agencies = table "Agencies"
  with (name: String, based_in: String, phone: String)
  where phone prov default;
var externalTours = table "ExternalTours"
  with (name: String, destination: String, type: String, price: Int);
'''

BOAT_BODY = '''
  for (a <-- agencies)
    for (e <-- externalTours)
    where (a.name == e.name && e.type == "boat")
      [(name = e.name, phone = a.phone)]
'''

BOAT_TOURS = TOURS_DECLS + "query {" + BOAT_BODY + "}\n"

# where clauses interleaved with generators; normalizes to the same SQL
BOAT_TOURS_ALT = TOURS_DECLS + '''
query {
  for (e <-- externalTours)
  where (e.type == "boat")
    for (a <-- agencies)
    where (a.name == e.name)
    [(name = e.name, phone = a.phone)]
}
'''

BOAT_TOURS_WHERE = TOURS_DECLS_PROV + '''
query {
  for (a <-- agencies)
    for (e <-- externalTours)
    where (a.name == e.name && e.type == "boat")
      [(name = e.name, phone = data a.phone, p_phone = prov a.phone)]
}
'''

BOAT_TOURS_LINEAGE = TOURS_DECLS + "lineage {" + BOAT_BODY + "}\n"


# ---------------------------------------------------------------------------
# Benchmark schema declarations

BENCH_DECLS_PLAIN = '''
var db = database "bench";
var departments =
  table "departments" with (oid: Int, name: String)
  where oid readonly tablekeys [["name"], ["oid"]] from db;
var employees =
  table "employees" with (oid: Int, dept: String, name: String, salary: Int)
  where oid readonly tablekeys [["name"], ["oid"]] from db;
var tasks =
  table "tasks" with (oid: Int, employee: String, task: String)
  where oid readonly tablekeys [["oid"]] from db;
var contacts =
  table "contacts" with (oid: Int, dept: String, name: String, "client": Bool)
  where oid readonly tablekeys [["name"], ["oid"]] from db;
'''

BENCH_DECLS_WHERE = '''
var db = database "bench";
var departments =
  table "departments" with (oid: Int, name: String)
  where oid readonly, name prov default
  tablekeys [["name"]] from db;
var employees =
  table "employees" with (oid: Int, dept: String, name: String, salary: Int)
  where oid readonly, dept prov default, name prov default, salary prov default
  tablekeys [["name"]] from db;
var tasks =
  table "tasks" with (oid: Int, employee: String, task: String)
  where oid readonly, employee prov default, task prov default
  tablekeys [["oid"]] from db;
var contacts =
  table "contacts" with (oid: Int, dept: String, name: String, "client": Bool)
  where oid readonly, dept prov default, name prov default, "client" prov default
  tablekeys [["name"]] from db;
'''

# Row types as they appear to comprehensions (declared columns plus oid).
_EROW = "(dept: String, name: String, oid: Int, salary: Int)"
_TROW = "(employee: String, oid: Int, task: String)"
_DROW = "(name: String, oid: Int)"
_EROW_W = "(dept: Prov(String), name: Prov(String), oid: Int, salary: Prov(Int))"
_TROW_W = "(employee: Prov(String), oid: Int, task: Prov(String))"
_DROW_W = "(name: Prov(String), oid: Int)"

HELPERS_PLAIN = f'''
sig tasksOfEmp : ({_EROW}) -> [String]
fun tasksOfEmp(e) {{
  for (t <-- tasks) where (t.employee == e.name) [t.task]
}}

sig contactsOfDept : ({_DROW}) -> [("client": Bool, name: String)]
fun contactsOfDept(d) {{
  for (c <-- contacts) where (d.name == c.dept) [("client" = c."client", name = c.name)]
}}

sig employeesOfDept : ({_DROW}) -> [(name: String, salary: Int, tasks: [String])]
fun employeesOfDept(d) {{
  for (e <-- employees) where (d.name == e.dept)
    [(name = e.name, salary = e.salary, tasks = tasksOfEmp(e))]
}}

sig employeesByTask : ({_TROW}) -> [(name: String, salary: Int, tasks: [String])]
fun employeesByTask(t) {{
  for (e <-- employees) for (d <-- departments)
  where (e.name == t.employee && e.dept == d.name)
    [(name = e.name, salary = e.salary, tasks = tasksOfEmp(e))]
}}

sig containsStr : ([String], String) -> Bool
fun containsStr(xs, u) {{ not(empty(for (x <- xs) where (x == u) [()])) }}

sig qOrg : () -> [(contacts: [("client": Bool, name: String)],
                   employees: [(name: String, salary: Int, tasks: [String])],
                   name: String)]
fun qOrg() {{
  for (d <-- departments)
    [(contacts = contactsOfDept(d), employees = employeesOfDept(d), name = d.name)]
}}
'''

HELPERS_WHERE = f'''
sig tasksOfEmp : ({_EROW_W}) -> [Prov(String)]
fun tasksOfEmp(e) {{
  for (t <-- tasks) where ((data t.employee) == data e.name) [t.task]
}}

sig dataTasks : ([Prov(String)]) -> [String]
fun dataTasks(ts) {{ for (t <- ts) [data t] }}

sig contactsOfDept : ({_DROW_W}) -> [("client": Prov(Bool), name: Prov(String))]
fun contactsOfDept(d) {{
  for (c <-- contacts) where ((data d.name) == data c.dept)
    [("client" = c."client", name = c.name)]
}}

sig employeesOfDept : ({_DROW_W})
  -> [(name: Prov(String), salary: Prov(Int), tasks: [Prov(String)])]
fun employeesOfDept(d) {{
  for (e <-- employees) where ((data d.name) == data e.dept)
    [(name = e.name, salary = e.salary, tasks = tasksOfEmp(e))]
}}

sig employeesByTask : ({_TROW_W})
  -> [(name: Prov(String), salary: Prov(Int), tasks: [Prov(String)])]
fun employeesByTask(t) {{
  for (e <-- employees) for (d <-- departments)
  where ((data e.name) == (data t.employee) && (data e.dept) == (data d.name))
    [(name = e.name, salary = e.salary, tasks = tasksOfEmp(e))]
}}

sig containsStr : ([String], String) -> Bool
fun containsStr(xs, u) {{ not(empty(for (x <- xs) where (x == u) [()])) }}

sig qOrg : () -> [(contacts: [("client": Prov(Bool), name: Prov(String))],
                   employees: [(name: Prov(String), salary: Prov(Int), tasks: [Prov(String)])],
                   name: Prov(String))]
fun qOrg() {{
  for (d <-- departments)
    [(contacts = contactsOfDept(d), employees = employeesOfDept(d), name = d.name)]
}}
'''


# Where-provenance suite: Q1..Q6 in allprov / someprov / noprov variants.

WHERE_SUITE: dict[str, dict[str, str]] = {
    "Q1": {
        "allprov": BENCH_DECLS_WHERE + HELPERS_WHERE + '''
query { qOrg() }
''',
        "someprov": BENCH_DECLS_WHERE + HELPERS_WHERE + '''
query {
  for (d <-- departments)
    [(contacts = for (c <- contactsOfDept(d))
                   [("client" = data c."client", name = data c.name)],
      employees = employeesOfDept(d),
      name = d.name)]
}
''',
        "noprov": BENCH_DECLS_PLAIN + HELPERS_PLAIN + '''
query { qOrg() }
''',
    },
    "Q2": {
        "allprov": BENCH_DECLS_WHERE + HELPERS_WHERE + '''
sig allAbstract : ([(name: Prov(String), salary: Prov(Int), tasks: [Prov(String)])]) -> Bool
fun allAbstract(es) {
  empty(for (e <- es) where (not(containsStr(dataTasks(e.tasks), "abstract"))) [()])
}
query {
  for (d <- qOrg()) where (allAbstract(d.employees)) [(d = d.name)]
}
''',
        "someprov": BENCH_DECLS_WHERE + HELPERS_WHERE + '''
sig allAbstract : ([(name: Prov(String), salary: Prov(Int), tasks: [Prov(String)])]) -> Bool
fun allAbstract(es) {
  empty(for (e <- es) where (not(containsStr(dataTasks(e.tasks), "abstract"))) [()])
}
query {
  for (d <- qOrg()) where (allAbstract(d.employees))
    [(d = data d.name, p = prov d.name)]
}
''',
        "noprov": BENCH_DECLS_PLAIN + HELPERS_PLAIN + '''
sig allAbstract : ([(name: String, salary: Int, tasks: [String])]) -> Bool
fun allAbstract(es) {
  empty(for (e <- es) where (not(containsStr(e.tasks, "abstract"))) [()])
}
query {
  for (d <- qOrg()) where (allAbstract(d.employees)) [(d = d.name)]
}
''',
    },
    "Q3": {
        "allprov": BENCH_DECLS_WHERE + HELPERS_WHERE + '''
query { for (e <-- employees) [(b = tasksOfEmp(e), e = e.name)] }
''',
        "someprov": BENCH_DECLS_WHERE + HELPERS_WHERE + '''
query { for (e <-- employees) [(b = tasksOfEmp(e), e = data e.name)] }
''',
        "noprov": BENCH_DECLS_PLAIN + HELPERS_PLAIN + '''
query { for (e <-- employees) [(b = tasksOfEmp(e), e = e.name)] }
''',
    },
    "Q4": {
        "allprov": BENCH_DECLS_WHERE + HELPERS_WHERE + '''
query {
  for (d <-- departments)
    [(dpt = d.name,
      emps = for (e <-- employees) where ((data d.name) == (data e.dept)) [e.name])]
}
''',
        "someprov": BENCH_DECLS_WHERE + HELPERS_WHERE + '''
query {
  for (d <-- departments)
    [(dpt = d.name,
      emps = for (e <-- employees) where ((data d.name) == (data e.dept)) [prov e.name])]
}
''',
        "noprov": BENCH_DECLS_PLAIN + HELPERS_PLAIN + '''
query {
  for (d <-- departments)
    [(dpt = d.name,
      emps = for (e <-- employees) where (d.name == e.dept) [e.name])]
}
''',
    },
    "Q5": {
        "allprov": BENCH_DECLS_WHERE + HELPERS_WHERE + '''
query { for (t <-- tasks) [(a = t.task, b = employeesByTask(t))] }
''',
        "someprov": BENCH_DECLS_WHERE + HELPERS_WHERE + '''
query {
  for (t <-- tasks)
    [(a = t.task,
      b = for (x <- employeesByTask(t))
            [(name = data x.name, salary = data x.salary, tasks = dataTasks(x.tasks))])]
}
''',
        "noprov": BENCH_DECLS_PLAIN + HELPERS_PLAIN + '''
query { for (t <-- tasks) [(a = t.task, b = employeesByTask(t))] }
''',
    },
    "Q6": {
        "allprov": BENCH_DECLS_WHERE + HELPERS_WHERE + '''
query {
  for (x <- qOrg())
    [(d = x.name,
      p = (for (y <- x.employees)
           where ((data y.salary) > 1000000 || (data y.salary) < 1000)
             [(name = y.name, tasks = dataTasks(y.tasks))]) ++
          (for (y <- x.contacts)
           where (data y."client")
             [(name = y.name, tasks = ["buy"])]))]
}
''',
        "someprov": BENCH_DECLS_WHERE + HELPERS_WHERE + '''
query {
  for (x <- qOrg())
    [(d = data x.name,
      p = (for (y <- x.employees)
           where ((data y.salary) > 1000000 || (data y.salary) < 1000)
             [(name = y.name, tasks = dataTasks(y.tasks))]) ++
          (for (y <- x.contacts)
           where (data y."client")
             [(name = y.name, tasks = ["buy"])]))]
}
''',
        "noprov": BENCH_DECLS_PLAIN + HELPERS_PLAIN + '''
query {
  for (x <- qOrg())
    [(d = x.name,
      p = (for (y <- x.employees)
           where (y.salary > 1000000 || y.salary < 1000)
             [(name = y.name, tasks = y.tasks)]) ++
          (for (y <- x.contacts)
           where (y."client")
             [(name = y.name, tasks = ["buy"])]))]
}
''',
    },
}


# Lineage suite: bodies shared between lineage{...} and query{...} variants.

_LINEAGE_BODIES: dict[str, str] = {
    "AQ6": '''
  for (d <- for (d2 <-- departments)
              [(employees = for (e <-- employees) where (d2.name == e.dept)
                              [(name = e.name, salary = e.salary)],
                name = d2.name)])
    [(department = d.name,
      outliers = for (o <- d.employees)
                 where (o.salary > 1000000 || o.salary < 1000) [o])]
''',
    "Q3": '''
  for (e <-- employees) [(b = tasksOfEmp(e), e = e.name)]
''',
    "Q4": '''
  for (d <-- departments)
    [(dpt = d.name,
      emps = for (e <-- employees) where (d.name == e.dept) [e.name])]
''',
    "Q5": '''
  for (t <-- tasks) [(a = t.task, b = employeesByTask(t))]
''',
    "Q6N": '''
  for (x <-- departments)
    [(department = x.name,
      people = (for (y <-- employees)
                where (x.name == y.dept && (y.salary < 1000 || y.salary > 1000000))
                  [(name = y.name,
                    tasks = for (z <-- tasks) where (z.employee == y.name) [z.task])]) ++
               (for (y <-- contacts)
                where (x.name == y.dept && y."client")
                  [(name = y.dept, tasks = ["buy"])]))]
''',
    "Q7": '''
  for (d <-- departments) for (e <-- employees)
  where (d.name == e.dept && e.salary > 1000000 || e.salary < 1000)
    [(employee = (name = e.name, salary = e.salary), department = d.name)]
''',
    "QC4": '''
  for (x <-- employees) for (y <-- employees)
  where (x.dept == y.dept && x.name <> y.name)
    [(a = x.name, b = y.name,
      c = (for (t <-- tasks) where (x.name == t.employee) [(doer = "a", task = t.task)]) ++
          (for (t <-- tasks) where (y.name == t.employee) [(doer = "b", task = t.task)]))]
''',
    "QF3": '''
  for (e1 <-- employees) for (e2 <-- employees)
  where (e1.dept == e2.dept && e1.salary == e2.salary && e1.name <> e2.name)
    [(e1.name, e2.name)]
''',
    "QF4": '''
  (for (t <-- tasks) where (t.task == "abstract") [t.employee]) ++
  (for (e <-- employees) where (e.salary > 50000) [e.name])
''',
}


def _lineage_program(body: str, block: str) -> str:
    return BENCH_DECLS_PLAIN + HELPERS_PLAIN + block + " {" + body + "}\n"


LINEAGE_SUITE: dict[str, dict[str, str]] = {
    name: {
        "lineage": _lineage_program(body, "lineage"),
        "nolineage": _lineage_program(body, "query"),
    }
    for name, body in _LINEAGE_BODIES.items()
}

# Sizes beyond which a query is too expensive to measure; runs above
# the cap are reported as skipped.
SIZE_CAPS: dict[str, int] = {"QC4": 16, "Q7": 128, "QF3": 512, "Q1": 512, "Q5": 1024, "Q6": 2048}


# Flat queries (results decode from a single SQL statement per mode) used by
# the differential engine-equivalence suite.

FLAT_QUERIES: list[tuple[str, str, str]] = [
    ("boat-plain", "plain", BOAT_TOURS),
    ("boat-alt", "plain", BOAT_TOURS_ALT),
    ("boat-where", "where", BOAT_TOURS_WHERE),
    ("boat-lineage", "lineage", BOAT_TOURS_LINEAGE),
    ("QF3-plain", "plain", _lineage_program(_LINEAGE_BODIES["QF3"], "query")),
    ("QF3-lineage", "lineage", _lineage_program(_LINEAGE_BODIES["QF3"], "lineage")),
    ("QF4-plain", "plain", _lineage_program(_LINEAGE_BODIES["QF4"], "query")),
    ("QF4-lineage", "lineage", _lineage_program(_LINEAGE_BODIES["QF4"], "lineage")),
    ("Q7-plain", "plain", _lineage_program(_LINEAGE_BODIES["Q7"], "query")),
    ("Q7-lineage", "lineage", _lineage_program(_LINEAGE_BODIES["Q7"], "lineage")),
    ("Q2-noprov", "plain", WHERE_SUITE["Q2"]["noprov"]),
    ("Q2-someprov", "where", WHERE_SUITE["Q2"]["someprov"]),
]
