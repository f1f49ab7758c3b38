import pytest

# criterion number -> (status, detail); filled by tests/test_acceptance.py
ACCEPTANCE = {}


def record(number: int, ok, detail: str) -> None:
    status = {True: "PASS", False: "FAIL", None: "SKIP"}[ok]
    ACCEPTANCE[number] = (status, detail)
    print(f"criterion {number}: {status} - {detail}")


@pytest.fixture
def criterion():
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        status, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number}: {status} - {detail}")
