import pytest


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    criterion = item.get_closest_marker("criterion")
    if criterion is None or rep.when != "call":
        return
    verdict = "PASS" if rep.passed else "FAIL"
    reporter = item.config.pluginmanager.get_plugin("terminalreporter")
    line = f"[criterion {criterion.args[0]}] {verdict}: {criterion.args[1]}"
    if reporter is not None:
        reporter.write_line("")
        reporter.write_line(line)
    else:
        print(line)


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion")
