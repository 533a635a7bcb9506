import sqlite3

import pytest

from provql import suites
from provql.sqlbackend import generate_benchmark_data, load_database


@pytest.fixture()
def tours_db():
    return suites.tours_db()


@pytest.fixture()
def tours_conn(tours_db):
    conn = sqlite3.connect(":memory:")
    load_database(conn, tours_db)
    yield conn
    conn.close()


@pytest.fixture(scope="session")
def small_bench_db():
    return generate_benchmark_data(2, seed=7, employees_per_dept=6)


@pytest.fixture()
def small_bench_conn(small_bench_db):
    conn = sqlite3.connect(":memory:")
    load_database(conn, small_bench_db)
    yield conn
    conn.close()
