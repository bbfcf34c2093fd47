import numpy as np
import pytest

from analytic_fb.signal import Waveform

_ACCEPTANCE = []


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def noise_wave():
    return Waveform(np.random.default_rng(5).standard_normal(4000), 8000)


@pytest.fixture
def acceptance_log():
    def record(criterion, passed, detail):
        _ACCEPTANCE.append((criterion, passed, detail))
    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for criterion, passed, detail in sorted(_ACCEPTANCE, key=lambda r: r[0]):
        terminalreporter.write_line(f"[{criterion:>2}] {'PASS' if passed else 'FAIL'}  {detail}")
