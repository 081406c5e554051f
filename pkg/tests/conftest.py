import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import VERDICTS
    except ImportError:
        return
    if not VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    order = sorted(VERDICTS, key=lambda k: (int("".join(c for c in k if c.isdigit())), k))
    for key in order:
        ok, detail = VERDICTS[key]
        terminalreporter.write_line(f"criterion {key:>3}: {'PASS' if ok else 'FAIL'}  {detail}")
