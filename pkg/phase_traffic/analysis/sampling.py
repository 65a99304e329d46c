"""
State Sampling
==============

Purpose: Seeded generators of states, pairs and triples for the analysis
campaigns.

Each sample index gets its own generator seeded with (seed, index), so a
campaign gives the same pairs whatever the number of worker threads.
"""

import logging
from typing import Literal, Optional, Tuple

import numpy as np

from phase_traffic.pipeline.phase_model import (
    ModelParams,
    State,
    curve_state,
    free_state,
    velocity,
)

logger = logging.getLogger(__name__)

Branch = Literal["minus", "plus", "any"]

# keeps samples away from the phase boundaries, where classification is a tolerance call
EDGE = 1e-6


def rng_for(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng([seed, index])


def sample_free(p: ModelParams, rng: np.random.Generator, branch: Branch = "any") -> State:
    """Free state with density in Omega_f^-, Omega_f^+ or anywhere on the free curve."""
    lo, hi = EDGE, p.sigma_f_plus * (1.0 - EDGE)
    if branch == "minus":
        hi = p.sigma_f_minus * (1.0 - EDGE)
    elif branch == "plus":
        lo = p.sigma_f_minus * (1.0 + EDGE)
    return free_state(p, float(rng.uniform(lo, hi)))


def sample_congested(
    p: ModelParams,
    rng: np.random.Generator,
    v_max: Optional[float] = None,
    v_min: float = 0.0,
) -> State:
    """Congested state, uniform in (w, v) over [w_-, w_+] x [v_min, v_max]."""
    v_max = p.V_c if v_max is None else v_max
    w = float(rng.uniform(p.w_minus, p.w_plus))
    v = float(rng.uniform(v_min, v_max * (1.0 - EDGE)))
    return curve_state(p, w, v)


def sample_congested_minus(p: ModelParams, rng: np.random.Generator) -> State:
    """Congested state off the free curve (Omega_c^-)."""
    return sample_congested(p, rng, v_max=p.V_c * (1.0 - 1e-4))


def sample_state(p: ModelParams, rng: np.random.Generator) -> State:
    """Any state of Omega: free and congested halves, a few vacua."""
    draw = rng.uniform()
    if draw < 0.05:
        return free_state(p, 0.0)
    if draw < 0.5:
        return sample_free(p, rng)
    return sample_congested(p, rng)


def sample_pair(p: ModelParams, rng: np.random.Generator) -> Tuple[State, State]:
    return sample_state(p, rng), sample_state(p, rng)


def sample_with_velocity(p: ModelParams, rng: np.random.Generator, v: float) -> State:
    """Congested state with velocity v and a random marker."""
    w = float(rng.uniform(p.w_minus, p.w_plus))
    return curve_state(p, w, v)


def sample_triple_proposal(p: ModelParams, rng: np.random.Generator) -> Tuple[State, State, State]:
    """
    Triple (u_l, u_m, u_r) for the concatenation check.

    u_r is drawn so that the two Riemann problems are often compatible: a free
    state, a congested state sharing the velocity of u_m, or any state.
    """
    u_l, u_m = sample_pair(p, rng)
    draw = rng.uniform()
    if draw < 0.35:
        u_r = sample_free(p, rng)
    elif draw < 0.7 and u_m.rho > 0.0 and velocity(p, u_m) <= p.V_c:
        u_r = sample_with_velocity(p, rng, velocity(p, u_m))
    else:
        u_r = sample_state(p, rng)
    return u_l, u_m, u_r


def free_with_flux(p: ModelParams, target: float) -> State:
    """Free state with flux `target`."""
    return free_state(p, target / p.V_f)


def above_capacity(p: ModelParams, rng: np.random.Generator, F: float) -> State:
    """Free state with flux in (F, V_f sigma_+^f)."""
    lo, hi = F / p.V_f, p.sigma_f_plus
    return free_state(p, lo + (hi - lo) * float(rng.uniform(EDGE, 1.0 - EDGE)))
