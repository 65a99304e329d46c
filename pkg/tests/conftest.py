"""
Shared fixtures: the toll-gate PTa model, a PTa model with V_c < V_f and two
PTp parameter sets.
"""

import sys
from pathlib import Path

import pytest

# Add project root to path
sys.path.append(str(Path(__file__).parent.parent))

from phase_traffic.pipeline.phase_model import ModelParams  # noqa: E402
from phase_traffic.pipeline.toll_gate import TOLL_GATE_MODEL  # noqa: E402


@pytest.fixture(scope="session")
def pta_r():
    """Toll-gate data: a = 0, sigma = 0.3, V_f = V_c = 1, w in [-0.5, 0.5]."""
    return ModelParams.pta(**TOLL_GATE_MODEL)


@pytest.fixture(scope="session")
def pta_s():
    """Toll-gate data with V_c = 0.6."""
    return ModelParams.pta(**{**TOLL_GATE_MODEL, "V_c": 0.6})


@pytest.fixture(scope="session")
def ptp_s():
    """gamma = 2, R = 1, w in [0.45, 1], V_f = 0.25, V_c = 0.15."""
    return ModelParams.ptp(gamma=2.0, R=1.0, w_minus=0.45, w_plus=1.0, V_f=0.25, V_c=0.15)


@pytest.fixture(scope="session")
def ptp_r():
    """Same as ptp_s with V_c = V_f = 0.25."""
    return ModelParams.ptp(gamma=2.0, R=1.0, w_minus=0.45, w_plus=1.0, V_f=0.25, V_c=0.25)


@pytest.fixture(scope="session")
def ptp_linear():
    """gamma = 1, R = 6, w in [4.5, 6], V_f = 2, V_c = 1."""
    return ModelParams.ptp(gamma=1.0, R=6.0, w_minus=4.5, w_plus=6.0, V_f=2.0, V_c=1.0)
