import os
import sys

import pytest

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
RESULTS = []


@pytest.fixture
def record():
    """record(number, title, passed, detail): one PASS/FAIL line per acceptance criterion."""

    def rec(number, title, passed, detail=""):
        line = f"criterion {number:2d} {'PASS' if passed else 'FAIL'}  {title}  [{detail}]"
        RESULTS.append((number, line))
        print(line)
        sys.stdout.flush()
        return passed

    return rec


@pytest.fixture
def repo_root(monkeypatch):
    monkeypatch.chdir(ROOT)
    return ROOT


def pytest_terminal_summary(terminalreporter):
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(RESULTS):
            terminalreporter.write_line(line)
