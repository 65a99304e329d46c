"""
Toll-Gate Scenario
==================

Purpose: The reference toll-gate run: a jammed queue released through a gate
of capacity F at x = 0, with the landmark quantities that can be computed by
hand from the data.

Data: PTa with a = 0, R = 1, sigma = 0.3, V_f = V_c = 1, w in [-0.5, 0.5];
u_1 = (1, -0.4) on (-5, -1), u_2 = (1, 0.3) on (-1, 0), vacuum elsewhere.
"""

import logging
from typing import Dict, List, Optional

from pydantic import BaseModel

from phase_traffic.pipeline.constrained import select_hat_check_R
from phase_traffic.pipeline.front_tracking import GateSpec, InitialPiece, ProfileGrid, SimConfig
from phase_traffic.pipeline.phase_model import ModelParams, State, rh_speed, u_star, vacuum, velocity

logger = logging.getLogger(__name__)

TOLL_GATE_MODEL = {
    "a": 0.0,
    "sigma": 0.3,
    "V_f": 1.0,
    "V_c": 1.0,
    "R": 1.0,
    "w_minus": -0.5,
    "w_plus": 0.5,
}
TOLL_GATE_F = 0.12
U1 = State(1.0, -0.4)
U2 = State(1.0, 0.3)
X1, X2 = -5.0, -1.0


class TollGateLandmarks(BaseModel):
    """Closed-form states and times of the toll-gate run."""

    F: float
    sigma_minus: float
    u_hat_2: State
    u_hat_1: State
    u_check: State
    u_star: State
    v_star: float
    speed_2: float
    t_a1: float
    t_a6: float
    mass: float

    def as_rows(self) -> List[Dict[str, float]]:
        rows = []
        for name in ("u_hat_2", "u_hat_1", "u_check", "u_star"):
            u = getattr(self, name)
            rows.append({"name": name, "rho": u.rho, "q": u.q})
        for name in ("F", "sigma_minus", "v_star", "speed_2", "t_a1", "t_a6", "mass"):
            rows.append({"name": name, "value": getattr(self, name)})
        return rows


def toll_gate_model() -> ModelParams:
    return ModelParams.pta(**TOLL_GATE_MODEL)


def toll_gate_config(
    p: Optional[ModelParams] = None,
    F: float = TOLL_GATE_F,
    delta_v: float = 1e-3,
    t_end: float = 50.0,
    profile_times: Optional[List[float]] = None,
) -> SimConfig:
    """Simulation config of the toll-gate run; profiles default to t in {0, 5, 20, 45}."""
    p = p or toll_gate_model()
    empty = vacuum(p)
    return SimConfig(
        model=p,
        initial=[
            InitialPiece(x_hi=X1, state=empty),
            InitialPiece(x_lo=X1, x_hi=X2, state=U1),
            InitialPiece(x_lo=X2, x_hi=0.0, state=U2),
            InitialPiece(x_lo=0.0, state=empty),
        ],
        gate=GateSpec(F=F),
        t_end=t_end,
        delta_v=delta_v,
        profile_times=[0.0, 5.0, 20.0, 45.0] if profile_times is None else profile_times,
        profile_x=ProfileGrid(x_min=-6.0, x_max=6.0, n=481),
    )


def analytic_landmarks(p: Optional[ModelParams] = None, F: float = TOLL_GATE_F) -> TollGateLandmarks:
    """
    States and times of the run that follow from the data alone.

    The gate opens on u_2 and holds the flux at F, so the queue behind it moves
    to u_hat_2 through a wave of mean speed Lambda(u_2, u_hat_2) that reaches
    x = -1 at t_a1. All the mass then leaves at rate F, the last car passing
    at t_a6 = -x_1 / F.
    """
    p = p or toll_gate_model()
    empty = vacuum(p)
    u_hat_2, u_check = select_hat_check_R(p, F, U2, empty)
    u_hat_1, _ = select_hat_check_R(p, F, U1, empty)
    mid = u_star(p, U1, u_hat_2)
    speed_2 = rh_speed(p, U2, u_hat_2)
    mass = U1.rho * (X2 - X1) + U2.rho * (0.0 - X2)
    landmarks = TollGateLandmarks(
        F=F,
        sigma_minus=p.sigma_minus,
        u_hat_2=u_hat_2,
        u_hat_1=u_hat_1,
        u_check=u_check,
        u_star=mid,
        v_star=velocity(p, mid),
        speed_2=speed_2,
        t_a1=X2 / speed_2,
        t_a6=-X1 / F,
        mass=mass,
    )
    logger.info(f"✅ Toll-gate landmarks: t_a1={landmarks.t_a1:.6g}, t_a6={landmarks.t_a6:.6g}")
    return landmarks
