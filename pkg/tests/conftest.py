import pytest

_RESULTS = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[_RESULTS] = {}


@pytest.fixture
def report(request):
    """Record one acceptance line; the assert that follows decides the test."""
    results = request.config.stash[_RESULTS]

    def record(n: int, ok: bool, detail: str) -> bool:
        prev = results.get(n)
        # a criterion split over several tests passes only if all parts do
        if prev is not None:
            ok = ok and prev[0]
            detail = f"{prev[1]}; {detail}"
        results[n] = (ok, detail)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = config.stash.get(_RESULTS, {})
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        ok, detail = results[n]
        terminalreporter.write_line(f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
