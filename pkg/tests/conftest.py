import time

import pytest

_RESULTS: list[str] = []


class Criterion:
    """Collects one pass/fail line per acceptance criterion, with wall time."""

    def __init__(self, number, title, budget):
        self.number, self.title, self.budget = number, title, budget
        self.failures: list[str] = []
        self.start = time.perf_counter()

    def check(self, ok, message):
        if not ok:
            self.failures.append(message)
        return ok

    def finish(self):
        elapsed = time.perf_counter() - self.start
        self.check(elapsed < self.budget, f"runtime {elapsed:.2f}s exceeds {self.budget}s")
        status = "PASS" if not self.failures else "FAIL"
        detail = "; ".join(self.failures[:3])
        if len(self.failures) > 3:
            detail += f"; ... ({len(self.failures)} failures)"
        line = f"criterion {self.number:>2} {status} ({elapsed:.2f}s) {self.title}"
        if detail:
            line += f" -- {detail}"
        _RESULTS.append(line)
        print(line)
        assert not self.failures, detail


@pytest.fixture
def criterion():
    def make(number, title, budget):
        return Criterion(number, title, budget)
    return make


def pytest_terminal_summary(terminalreporter):
    if _RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_RESULTS, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
