import pytest

_ACCEPTANCE: dict = {}


@pytest.fixture
def verdict(request):
    """Record one PASS/FAIL line for an acceptance criterion; printed in the terminal summary."""

    def record(criterion: int, passed: bool, detail: str) -> None:
        _ACCEPTANCE[criterion] = f"AC{criterion} {'PASS' if passed else 'FAIL'}: {detail}"

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_ACCEPTANCE):
        terminalreporter.write_line(_ACCEPTANCE[k])
