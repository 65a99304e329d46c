"""
Solver Service
==============

Purpose: One entry point per CLI command over the solver, simulation and
analysis layers.

Handles:
- single (constrained) Riemann solves with an admissibility check
- front-tracking runs
- analysis suites
- model descriptions

Every method returns a result dict; package errors are logged and re-raised.
"""

import logging
from typing import Any, Dict, List, Optional

from phase_traffic.analysis.harness import AnalysisOptions, SuiteResult, run_suite
from phase_traffic.core.errors import PhaseTrafficError
from phase_traffic.pipeline.constrained import Constraint, solve_constrained
from phase_traffic.pipeline.front_tracking import SimConfig, run
from phase_traffic.pipeline.phase_model import ModelParams, State, canonical, describe, validate
from phase_traffic.pipeline.riemann import RiemannProblem, solve_problem
from phase_traffic.pipeline.wavefan import check_admissible, to_record, trace_flux

logger = logging.getLogger(__name__)


class SolverService:
    """
    Service for solver operations.
    """

    def solve(self, p: ModelParams, u_l: State, u_r: State, F: Optional[float] = None) -> Dict[str, Any]:
        """
        Solve one Riemann problem, constrained when F is given.

        Args:
            p: Model
            u_l: Left state
            u_r: Right state
            F: Gate capacity at x = 0, or None

        Returns:
            Dict with the fan, its text record and a summary
        """
        try:
            u_l, u_r = canonical(p, u_l), canonical(p, u_r)
            split = None
            if F is None:
                fan = solve_problem(p, RiemannProblem(u_left=u_l, u_right=u_r))
            else:
                Constraint(F=F).check(p)
                split = solve_constrained(p, F, u_l, u_r)
                fan = split.fan
            admissible = check_admissible(p, fan)
            f_minus, f_plus = trace_flux(p, fan, 0.0)

            summary: Dict[str, Any] = {
                "waves": len(fan.waves),
                "kinds": [k.value for k in fan.kinds()],
                "admissible": admissible.passed,
                "gate_flux_minus": f_minus,
                "gate_flux_plus": f_plus,
            }
            if split is not None:
                summary.update({"family": split.family.value, "classification": split.classification.value})
                if split.u_hat is not None:
                    summary.update({"u_hat": tuple(split.u_hat), "u_check": tuple(split.u_check)})
            if not admissible.passed:
                logger.warning(f"❌ Solution fails admissibility: {admissible.violations}")

            logger.info(f"✅ Solved Riemann problem: {len(fan.waves)} waves")
            return {"success": True, "fan": fan, "split": split, "record": to_record(fan), "summary": summary}

        except PhaseTrafficError as e:
            logger.error(f"❌ Solve failed: {e}")
            raise

    def simulate(self, p: ModelParams, cfg: SimConfig) -> Dict[str, Any]:
        """
        Run front tracking.

        Returns:
            Dict with the trace and its macro-event times
        """
        try:
            logger.info(f"🚀 Simulating to t={cfg.t_end} with delta_v={cfg.delta_v}")
            trace = run(p, cfg)
            return {
                "success": True,
                "trace": trace,
                "macro_times": trace.macro_times(),
                "mass_drift": trace.mass_drift(),
            }
        except PhaseTrafficError as e:
            logger.error(f"❌ Simulation failed: {e}")
            raise

    def analyze(self, p: ModelParams, suites: List[str], F: Optional[float] = None,
                options: Optional[AnalysisOptions] = None) -> Dict[str, Any]:
        """
        Run the named analysis suites in order.

        Failed properties are reported, not raised.
        """
        try:
            results: List[SuiteResult] = [run_suite(p, name, F, options) for name in suites]
            return {
                "success": all(r.passed for r in results),
                "results": results,
            }
        except PhaseTrafficError as e:
            logger.error(f"❌ Analysis failed: {e}")
            raise

    def describe(self, p: ModelParams) -> Dict[str, Any]:
        report = validate(p)
        return {"success": report.passed, "description": describe(p), "validation": report}


# Global instance
solver_service = SolverService()
