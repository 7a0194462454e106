from __future__ import annotations

import sys

import pytest

from ndlgen.tsp import load_instance, reference_operators, tsp_model


@pytest.fixture(scope="session")
def model6():
    return tsp_model(6)


@pytest.fixture(scope="session")
def model7():
    return tsp_model(7)


@pytest.fixture(scope="session")
def tests6(model6):
    return load_instance("tsp6").configurations(model6)


@pytest.fixture(scope="session")
def tests7(model7):
    return load_instance("tsp7").configurations(model7)


@pytest.fixture(scope="session")
def ops():
    return reference_operators()


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("tests.test_acceptance")
    results = getattr(module, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for num, ok, detail in sorted(results):
        terminalreporter.write_line(f"criterion {num:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
