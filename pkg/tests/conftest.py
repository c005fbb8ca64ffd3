import time
from contextlib import contextmanager

ACCEPTANCE: dict[str, dict] = {}


@contextmanager
def criterion(name: str, title: str):
    entry = {"title": title, "status": "FAIL", "detail": "", "seconds": 0.0}
    ACCEPTANCE[name] = entry
    start = time.monotonic()
    try:
        yield entry
        entry["status"] = "PASS"
    finally:
        entry["seconds"] = time.monotonic() - start


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for name in sorted(ACCEPTANCE):
        e = ACCEPTANCE[name]
        terminalreporter.write_line(
            f"{name} [{e['status']}] {e['title']} "
            f"({e['seconds']:.1f}s) {e['detail']}")
