import pytest

from wardropdyn.scenario import load_scenario


@pytest.fixture(scope="session")
def fig1_cfg():
    return load_scenario("fig1")


@pytest.fixture(scope="session")
def asym_cfg():
    return load_scenario("two-link-asym")


def pytest_terminal_summary(terminalreporter):
    import _acceptance_log

    if _acceptance_log.LINES:
        terminalreporter.section("acceptance criteria")
        for number in sorted(_acceptance_log.LINES):
            terminalreporter.write_line(_acceptance_log.LINES[number])
