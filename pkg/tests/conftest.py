import pytest

# (criterion id, passed, detail) lines collected by the acceptance module
ACCEPTANCE_LINES = []


@pytest.fixture
def criterion():
    def record(cid, ok, detail):
        ACCEPTANCE_LINES.append((cid, bool(ok), detail))
        print(f"{'PASS' if ok else 'FAIL'} criterion {cid}: {detail}")
        assert ok, f"criterion {cid}: {detail}"

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for cid, ok, detail in sorted(ACCEPTANCE_LINES, key=lambda r: r[0]):
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {cid:>2}: {detail}")
