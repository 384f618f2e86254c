import shutil
import time
from contextlib import contextmanager

import pytest

HAVE_Z3 = shutil.which("z3") is not None

requires_z3 = pytest.mark.skipif(not HAVE_Z3, reason="z3 binary not on PATH")

_CRITERIA = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_CRITERIA] = []


def pytest_collection_modifyitems(config, items):
    for item in items:
        if "solver" in item.keywords and not HAVE_Z3:
            item.add_marker(pytest.mark.skip(reason="z3 binary not on PATH"))


@pytest.fixture
def criterion(pytestconfig):
    """Context manager that records one PASS/FAIL line per acceptance criterion."""
    lines = pytestconfig.stash[_CRITERIA]

    @contextmanager
    def run(number, title, limit=None):
        start = time.monotonic()
        try:
            yield
            took = time.monotonic() - start
            if limit is not None:
                assert took < limit, f"took {took:.1f}s, limit {limit}s"
        except BaseException as exc:
            took = time.monotonic() - start
            reason = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
            line = f"FAIL criterion {number}: {title} ({took:.1f}s) - {reason}"
            lines.append(line)
            print(line)
            raise
        line = f"PASS criterion {number}: {title} ({took:.1f}s)"
        lines.append(line)
        print(line)

    return run


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_CRITERIA, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
