import pytest

# (status, name, detail) rows from the acceptance suite, printed after the run
ACCEPTANCE: list[tuple[str, str, str]] = []


@pytest.fixture
def report():
    def add(name: str, ok: bool, detail: str = "") -> bool:
        ACCEPTANCE.append(("PASS" if ok else "FAIL", name, detail))
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
        return ok
    return add


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for status, name, detail in ACCEPTANCE:
        terminalreporter.write_line(f"{status} {name}: {detail}")
