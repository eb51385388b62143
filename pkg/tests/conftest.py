import numpy as np
import pytest

from masqkd._accel import HAS_NUMBA


def pytest_report_header(config):
    from masqkd._accel import default_backend

    return f"masqkd kernel backend: {default_backend()}"


@pytest.fixture
def np_rng():
    return np.random.default_rng(20240917)


BACKENDS = ["numpy"] + (["numba"] if HAS_NUMBA else [])


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.format_line(num))
