import pytest

ACCEPTANCE_LINES = []


@pytest.fixture()
def report_line(request):
    """Record one acceptance line; it is echoed live and again in the summary."""
    tr = request.config.pluginmanager.get_plugin("terminalreporter")

    def emit(number, ok, text):
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {text}"
        ACCEPTANCE_LINES.append(line)
        if tr is not None:
            tr.write_line("")
            tr.write_line(line)
        return ok

    return emit


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
