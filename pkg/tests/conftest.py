from hypothesis import settings

# first use of a cone runs a Monte Carlo normalization, which trips per-example deadlines
settings.register_profile("coneatoms", deadline=None)
settings.load_profile("coneatoms")

# acceptance results, filled by tests/test_acceptance.py
ACCEPTANCE = {}


def _line(number, title, ok, detail, seconds):
    return f"[{'PASS' if ok else 'FAIL'}] {number:>2}. {title}: {detail} ({seconds:.2f} s)"


def record(number, title, ok, detail, seconds):
    ACCEPTANCE[(number, title)] = (bool(ok), detail, seconds)
    line = _line(number, title, ok, detail, seconds)
    print(line)
    return line


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for (number, title), (ok, detail, seconds) in sorted(ACCEPTANCE.items()):
        terminalreporter.write_line(_line(number, title, ok, detail, seconds))
