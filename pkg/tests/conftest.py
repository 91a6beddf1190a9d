import functools

import pytest

from sharphardy.distfield import build_field
from sharphardy.domains import make_domain

# one summary line per acceptance criterion, filled by tests/test_acceptance.py
ACCEPTANCE = {}


def record(number, ok, detail):
    line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE[number] = line
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[k])


@functools.lru_cache(maxsize=None)
def cached_field(kind, cells, ridge=False, **kw):
    """Distance fields are the slow part of most tests; build each one once per session."""
    return build_field(make_domain(kind, **kw), cells=cells, ridge=ridge)


@pytest.fixture(scope="session")
def field_cache():
    return cached_field
