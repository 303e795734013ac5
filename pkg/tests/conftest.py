import pytest

CRITERIA = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[CRITERIA] = {}


@pytest.fixture
def record_criterion(request):
    """Store one summary line per acceptance criterion for the terminal report."""
    store = request.config.stash[CRITERIA]

    def record(number, passed, detail):
        store[number] = (passed, detail)

    return record


def pytest_terminal_summary(terminalreporter, config):
    store = config.stash.get(CRITERIA, {})
    if not store:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(store):
        passed, detail = store[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}")
