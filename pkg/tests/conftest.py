import pytest

# (criterion, passed, detail) lines recorded by the acceptance tests
ACCEPTANCE_LINES = []


@pytest.fixture
def criterion():
    def record(name, passed, detail):
        line = f"{name} {'PASS' if passed else 'FAIL'}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
