"""Shared fixtures and helpers for the test suite."""

from __future__ import annotations

import numpy as np
import pytest

from lambda_biharmonic.ambient import AmbientSpace
from lambda_biharmonic.calculus import ChartGrid

DEFAULT_N = {2: 81, 3: 41, 4: 17}


def grid_for(imm, n=None, margin=4):
    """Regular grid over an immersion's parameter box."""
    n = n or DEFAULT_N[imm.m]
    return ChartGrid.regular(imm.lo, imm.hi, n, margin)


def random_base_point(rng, space, radius=0.8):
    """Random ambient point whose base part lies safely inside the chart."""
    x = rng.normal(size=space.m)
    x *= rng.uniform(0, radius) / np.linalg.norm(x)
    return np.concatenate([x, [rng.normal()]])


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(params=[(c, m) for c in (-1, 0, 1) for m in (2, 3)], ids=lambda p: f"c{p[0]}m{p[1]}")
def space(request):
    c, m = request.param
    return AmbientSpace(c, m)


# ---------------------------------------------------------------------------
# acceptance summary: one line per criterion


_CRITERION_RESULTS: dict[int, str] = {}


def pytest_runtest_logreport(report):
    name = report.nodeid.rsplit("::", 1)[-1]
    if not name.startswith("test_criterion_"):
        return
    number = int(name.split("_")[2])
    if report.when == "call" or report.outcome != "passed":
        previous = _CRITERION_RESULTS.get(number, "PASS")
        outcome = "PASS" if report.outcome == "passed" and previous == "PASS" else "FAIL"
        _CRITERION_RESULTS[number] = outcome


def pytest_terminal_summary(terminalreporter):
    if not _CRITERION_RESULTS:
        return
    from test_acceptance import CRITERIA

    terminalreporter.section("acceptance criteria")
    for number in sorted(CRITERIA):
        outcome = _CRITERION_RESULTS.get(number, "NOT RUN")
        terminalreporter.write_line(f"criterion {number}: {outcome}  ({CRITERIA[number]})")
