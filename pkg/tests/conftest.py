import os

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("thorough", max_examples=500, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

_ACCEPTANCE: dict[int, tuple[bool, str]] = {}


@pytest.fixture
def acceptance():
    """Record one pass/fail line per acceptance criterion.

    Usage: `with acceptance(3, "outsourcing example") as detail: ...`;
    put a short summary in detail["msg"].
    """
    class _Rec:
        def __init__(self, num, title):
            self.num, self.title, self.detail = num, title, {"msg": ""}

        def __enter__(self):
            return self.detail

        def __exit__(self, et, ev, tb):
            ok = et is None
            msg = self.detail["msg"] if ok else f"{et.__name__}: {ev}".splitlines()[0]
            _ACCEPTANCE[self.num] = (ok, f"{self.title}: {msg}")
            line = f"[criterion {self.num}] {'PASS' if ok else 'FAIL'} {self.title}: {msg}"
            print(line)
            return False

    return _Rec


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_ACCEPTANCE):
        ok, text = _ACCEPTANCE[num]
        terminalreporter.write_line(f"criterion {num}: {'PASS' if ok else 'FAIL'}  {text}")
