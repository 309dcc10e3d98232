import os
import stat
import sys
import textwrap

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from helpers import TOY_CNF, S, T, record, vec  # noqa: E402
from knnportfolio.features import N_FEATURES  # noqa: E402
from knnportfolio.knowledge_base import KnowledgeBase  # noqa: E402


@pytest.fixture
def toy_cnf(tmp_path):
    path = tmp_path / "toy.cnf"
    path.write_text(TOY_CNF)
    return path


@pytest.fixture
def three_kb():
    """i1, i2 near the origin solved by A; i3 far away solved by B."""
    return KnowledgeBase(1500.0, ("A", "B"), (
        record("i1", vec(0.0), A=S(10), B=T),
        record("i2", vec(0.1), A=S(20), B=T),
        record("i3", vec(*([10.0] * N_FEATURES)), A=T, B=S(5)),
    ))


@pytest.fixture
def stub(tmp_path):
    """Factory for shell-script solvers: ``stub("sleep 1; exit 10")``."""
    count = [0]

    def make(body, name=None):
        count[0] += 1
        path = tmp_path / (name or f"stub{count[0]}.sh")
        path.write_text("#!/bin/sh\n" + textwrap.dedent(body).strip() + "\n")
        path.chmod(path.stat().st_mode | stat.S_IXUSR | stat.S_IXGRP | stat.S_IXOTH)
        return (str(path), "{cnf}")

    return make


# -- acceptance summary -----------------------------------------------------

_criteria = []


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(name): acceptance criterion reported in the summary")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        status = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}[rep.outcome]
        _criteria.append((status, marker.args[0]))


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for status, name in _criteria:
        terminalreporter.write_line(f"{status}  {name}")
