import os

import pytest

ACCEPTANCE = {}   # criterion number -> (status, detail)
COLLECTED = set()  # criterion numbers selected for this session


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False,
                     help="run the long benchmark simulations (also CUTFSI_RUNSLOW=1)")


def runslow(config) -> bool:
    return config.getoption("--runslow") or os.environ.get("CUTFSI_RUNSLOW") == "1"


def pytest_collection_modifyitems(config, items):
    skip = pytest.mark.skip(reason="long simulation; use --runslow or CUTFSI_RUNSLOW=1")
    for item in items:
        if "slow" in item.keywords and not runslow(config):
            item.add_marker(skip)


@pytest.fixture
def report():
    """``report(n, ok, detail)`` records one acceptance verdict for the summary."""
    def record(n: int, ok: bool, detail: str = ""):
        ACCEPTANCE[n] = ("PASS" if ok else "FAIL", detail)
        print(f"criterion {n}: {'PASS' if ok else 'FAIL'} {detail}")
    return record


def pytest_collection_finish(session):
    for item in session.items:
        if item.name.startswith("test_criterion_"):
            COLLECTED.add(int(item.name.split("_")[2]))


def pytest_terminal_summary(terminalreporter):
    if not COLLECTED:
        return
    terminalreporter.section("acceptance criteria")
    for n in range(1, 13):
        why = "(skipped: slow suite, use --runslow)" if n in COLLECTED else "(not selected)"
        status, detail = ACCEPTANCE.get(n, ("NOT RUN", why))
        terminalreporter.write_line(f"criterion {n:2d}: {status:7s} {detail}")
