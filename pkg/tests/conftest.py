_criteria_lines: list[str] = []


def pytest_runtest_logreport(report):
    if report.when == "call" and "test_acceptance.py" in report.nodeid:
        _criteria_lines.extend(line for line in report.capstdout.splitlines()
                               if line.startswith(("PASS ", "FAIL ")))


def pytest_terminal_summary(terminalreporter):
    if _criteria_lines:
        terminalreporter.section("acceptance criteria")
        for line in _criteria_lines:
            terminalreporter.write_line(line)
