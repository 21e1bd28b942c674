import pytest

_results = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker and (rep.when == "call" or (rep.when == "setup" and rep.failed)):
        _results.append((marker.args[0], marker.args[1], rep.passed))


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion")


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for n, title, ok in sorted(_results):
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {n}. {title}")
