import pytest

_ACCEPTANCE: dict[int, str] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.fixture
def notes(request):
    """Free-form details attached to the acceptance line of this test."""
    items: list[str] = []
    request.node.acceptance_notes = items
    return items


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or (rep.when != "call" and rep.passed):
        return
    number, title = mark.args
    status = "PASS" if rep.passed else "FAIL"
    detail = "; ".join(getattr(item, "acceptance_notes", []))
    _ACCEPTANCE[number] = f"{status}  criterion {number}: {title}" + (f" | {detail}" if detail else "")


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for number in sorted(_ACCEPTANCE):
            terminalreporter.write_line(_ACCEPTANCE[number])
