import oracles


def pytest_terminal_summary(terminalreporter):
    if not oracles.ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(oracles.ACCEPTANCE):
        terminalreporter.write_line(oracles.ACCEPTANCE[k])
