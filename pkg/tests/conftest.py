# name -> (passed, seconds, limit, detail); filled in by test_acceptance.py
ACCEPTANCE_RESULTS = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, (passed, seconds, limit, detail) in ACCEPTANCE_RESULTS.items():
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"{status}  {name}  [{seconds:.2f}s / {limit:g}s]  {detail}")
