import numpy as np
import pytest

from riscap.model import make_config

# acceptance results collected as (criterion, passed, detail) and echoed at the end of the run
ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for crit, ok, detail in sorted(ACCEPTANCE_LINES, key=lambda r: _order(r[0])):
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {crit}: {detail}")


def _order(crit):
    head = str(crit).split()[0]
    return (0, int(head)) if head.isdigit() else (1, str(crit))


@pytest.fixture
def small_config():
    """Two antennas, two elements, binary phases, 4-ASK, short block."""
    return make_config(N=2, K=2, A=2, S=4, m=1, ell=4, tau=2, P_dB=10)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
