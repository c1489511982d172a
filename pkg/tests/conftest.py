import pytest

from rialign.netmodel import make_config

_ACCEPTANCE: list[str] = []


@pytest.fixture
def record_criterion():
    """Collect one PASS/FAIL line per acceptance criterion for the summary."""

    def record(number: int, ok: bool, detail: str) -> bool:
        _ACCEPTANCE.append(f"{'PASS' if ok else 'FAIL'}  criterion {number:>2}: {detail}")
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)


@pytest.fixture
def ic2():
    return make_config("ic", 2, 2, [1, 1], [1, 1])


@pytest.fixture
def ic3():
    return make_config("ic", 3, 3, [1, 1, 1], [1, 1, 1])


@pytest.fixture
def xnet():
    return make_config("x", 2, 2, [1, 1], [1, 1])


@pytest.fixture
def general():
    return make_config("general", 3, 2, [2, 2, 2], [2, 2], [[1, 2], [3]])
