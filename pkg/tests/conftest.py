import sys
from contextlib import contextmanager
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

# criterion number -> (passed, title, detail); filled by test_acceptance.py
ACCEPTANCE = {}


def _line(k, passed, title, detail):
    return f"[{'PASS' if passed else 'FAIL'}] criterion {k}: {title}" + (f" ({detail})" if detail else "")


@pytest.fixture
def criterion():
    @contextmanager
    def record(k, title):
        info = {"detail": ""}
        try:
            yield info
        except BaseException as exc:
            msg = f"{type(exc).__name__}: {exc}".splitlines()[0][:240]
            ACCEPTANCE[k] = (False, title, msg)
            print(_line(k, False, title, msg))
            raise
        ACCEPTANCE[k] = (True, title, info["detail"])
        print(_line(k, True, title, info["detail"]))
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        terminalreporter.write_line(_line(k, *ACCEPTANCE[k]))
    done = sum(p for p, _, _ in ACCEPTANCE.values())
    terminalreporter.write_line(f"{done}/{len(ACCEPTANCE)} criteria passed")
