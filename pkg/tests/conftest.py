"""Acceptance report: one PASS/FAIL line per criterion at the end of the run."""
import time
from contextlib import contextmanager

import pytest

_RESULTS = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(n, title): acceptance criterion number and title")


class Criterion:
    def __init__(self, number, title, budget):
        self.number, self.title, self.budget = number, title, budget
        self.elapsed = None
        self.notes = []

    def note(self, text):
        self.notes.append(text)

    @contextmanager
    def timed(self):
        t0 = time.perf_counter()
        yield
        self.elapsed = time.perf_counter() - t0

    def check_budget(self):
        assert self.elapsed is not None
        assert self.elapsed <= self.budget, f"took {self.elapsed:.2f}s > {self.budget}s"


@pytest.fixture
def criterion(request):
    mark = request.node.get_closest_marker("acceptance")
    number, title, budget = mark.args
    crit = Criterion(number, title, budget)
    request.node._criterion = crit
    return crit


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    crit = getattr(item, "_criterion", None)
    if crit is None or rep.when != "call":
        return
    _RESULTS[crit.number] = (rep.passed, crit)


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_RESULTS):
        ok, crit = _RESULTS[number]
        t = "n/a" if crit.elapsed is None else f"{crit.elapsed:.2f}s/{crit.budget:g}s"
        line = f"[{'PASS' if ok else 'FAIL'}] {number}. {crit.title} ({t})"
        terminalreporter.write_line(line)
        for n in crit.notes:
            terminalreporter.write_line(f"       {n}")
