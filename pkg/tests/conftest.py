from collections import OrderedDict

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

# criterion id -> list of (part, passed, detail); filled by tests/test_acceptance.py
ACCEPTANCE = OrderedDict()


@pytest.fixture(scope="session")
def acceptance():
    def record(criterion: int, part: str, passed: bool, detail: str) -> bool:
        ACCEPTANCE.setdefault(criterion, []).append((part, bool(passed), detail))
        return bool(passed)

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for crit in sorted(ACCEPTANCE):
        parts = ACCEPTANCE[crit]
        ok = all(p[1] for p in parts)
        detail = "; ".join(f"{name}: {d}" for name, _, d in parts)
        terminalreporter.write_line(f"criterion {crit:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
