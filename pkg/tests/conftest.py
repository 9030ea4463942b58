from functools import lru_cache

import numpy as np
import pytest

from bihyper.charts import get_entry
from bihyper.fieldcalc import Grid


@lru_cache(maxsize=None)
def entry(name):
    return get_entry(name)


@lru_cache(maxsize=32)
def grid(name, m):
    """Grids are expensive to build, so tests share them by (entry, resolution)."""
    return Grid(entry(name).chart, m)


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


@pytest.fixture
def acceptance(request):
    """Record one pass/fail line per acceptance criterion for the terminal summary."""
    lines = request.config.stash.setdefault(_LINES, [])

    def record(number, ok, message):
        line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {message}"
        lines.append((number, line))
        print(line)
        return ok

    return record


_LINES = pytest.StashKey[list]()


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_LINES, [])
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(lines):
        terminalreporter.write_line(line)
