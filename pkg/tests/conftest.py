import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from numq.synthetic import identity_config, identity_dataset  # noqa: E402


@pytest.fixture
def identity():
    ds = identity_dataset()
    return ds, identity_config(ds)


@pytest.fixture
def small_identity():
    ds = identity_dataset(points=64)
    return ds, identity_config(ds)


ACCEPTANCE_RESULTS: dict[int, tuple[bool, str]] = {}


@pytest.fixture
def acceptance(request):
    """Record one pass/fail line for an acceptance criterion.

    The test calls ``acceptance(n, detail)`` once its checks are done; a
    test that raises before that is recorded as failed."""
    state = {}

    def record(criterion: int, detail: str) -> None:
        state["criterion"] = criterion
        state["detail"] = detail

    yield record
    crit = state.get("criterion")
    if crit is None:
        crit = int(request.node.name.split("_")[1])
    call = getattr(request.node, "rep_call", None)
    ok = call is not None and call.passed and "detail" in state
    ACCEPTANCE_RESULTS[crit] = (ok, state.get("detail", "did not complete"))
    line = f"ACCEPTANCE {crit}: {'PASS' if ok else 'FAIL'}  {ACCEPTANCE_RESULTS[crit][1]}"
    print("\n" + line)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    setattr(item, f"rep_{rep.when}", rep)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for crit in sorted(ACCEPTANCE_RESULTS):
        ok, detail = ACCEPTANCE_RESULTS[crit]
        terminalreporter.write_line(f"ACCEPTANCE {crit}: {'PASS' if ok else 'FAIL'}  {detail}")
