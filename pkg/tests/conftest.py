import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from asyncura.config import SystemConfig  # noqa: E402


@pytest.fixture
def tiny_cfg():
    """N_c=8 with two used subcarriers [1, 3]."""
    return SystemConfig(
        N_c=8, N_cp=2, S=2, B_p=1, B_c=2, B=4, L_code=4, T_d=2, D=1, Q=1, N_cand=1, M=1, K_a=1
    )


@pytest.fixture
def small_cfg():
    """N_c=64, S=8 subcarriers, still fast enough for brute-force oracles."""
    return SystemConfig(N_c=64, N_cp=8, S=8, B_p=3, B_c=10, B=16, L_code=20, T_d=4, D=4, Q=5, eps_max=0.02, M=4, K_a=3)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(mod.RESULTS, key=lambda x: int(x.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
