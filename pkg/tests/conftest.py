import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from fdi_mpc import BoxSet, CoupledTanks, MpcConfig  # noqa: E402


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE: dict[str, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE, key=lambda k: (int(k.split()[0]), k)):
            terminalreporter.write_line(ACCEPTANCE[key])


def make_cfg(horizon=5, q=(1.0, 1.0), r=0.01, setpoint=(0.8, 0.8), P=None, riccati=False, **kw):
    """Small tanks problem; terminal cost is zero unless ``P`` is given or ``riccati`` is set."""
    if riccati:
        P = None
    elif P is None:
        P = np.zeros((2, 2))
    return MpcConfig(
        horizon=horizon,
        Q=np.diag(q),
        R=np.array([[r]]),
        setpoint=np.array(setpoint, dtype=float),
        state_box=BoxSet([0.0, 0.0], [1.0, 1.0]),
        input_box=BoxSet([0.0], [1.0]),
        terminal_weight=P,
        **kw,
    )


@pytest.fixture
def tanks():
    return CoupledTanks()
