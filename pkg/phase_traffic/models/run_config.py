"""
Run Configuration
=================

Pydantic models for the JSON run configuration read by the CLI.

Sections: model, problem (riemann | simulation), constraint, analysis, output.
Unknown keys are rejected everywhere.
"""

import logging
from pathlib import Path
from typing import List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from phase_traffic.analysis.harness import SUITES, AnalysisOptions
from phase_traffic.core.config import settings
from phase_traffic.core.errors import ConfigError
from phase_traffic.pipeline.front_tracking import GateSpec, InitialPiece, ProfileGrid, SimConfig
from phase_traffic.pipeline.phase_model import ModelParams, State, Variant

logger = logging.getLogger(__name__)

Pair = Tuple[float, float]


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ModelSection(_Strict):
    """Model constants; `a`/`sigma` for PTa, `gamma` for PTp."""
    variant: Variant
    V_f: float
    V_c: float
    R: float
    w_minus: float
    w_plus: float
    a: Optional[float] = None
    sigma: Optional[float] = None
    gamma: Optional[float] = None

    @model_validator(mode="after")
    def _variant_fields(self) -> "ModelSection":
        if self.variant is Variant.PTA and (self.a is None or self.sigma is None):
            raise ValueError("PTa needs a and sigma")
        if self.variant is Variant.PTP and self.gamma is None:
            raise ValueError("PTp needs gamma")
        return self

    def build(self) -> ModelParams:
        common = dict(V_f=self.V_f, V_c=self.V_c, R=self.R, w_minus=self.w_minus, w_plus=self.w_plus)
        if self.variant is Variant.PTA:
            return ModelParams.pta(a=self.a, sigma=self.sigma, **common)
        return ModelParams.ptp(gamma=self.gamma, **common)


class RiemannSection(_Strict):
    u_l: Pair
    u_r: Pair


class PieceSection(_Strict):
    """Constant state (rho, q) on (x_lo, x_hi); null ends are infinite."""
    x_lo: Optional[float] = None
    x_hi: Optional[float] = None
    state: Pair


class SimulationSection(_Strict):
    initial: List[PieceSection] = []
    t_end: float = Field(gt=0)
    delta_v: Optional[float] = Field(default=None, gt=0)
    profile_times: List[float] = []
    profile_x: Optional[ProfileGrid] = None
    event_cap: int = Field(default=settings.event_cap, gt=0)


class ProblemSection(_Strict):
    riemann: Optional[RiemannSection] = None
    simulation: Optional[SimulationSection] = None

    @model_validator(mode="after")
    def _one_problem(self) -> "ProblemSection":
        if self.riemann is not None and self.simulation is not None:
            raise ValueError("problem holds either riemann or simulation, not both")
        return self


class ConstraintSection(_Strict):
    F: float = Field(gt=0)


class AnalysisSection(_Strict):
    suites: List[str] = list(SUITES)
    n_pairs: int = Field(default=10_000, gt=0)
    n_triples: int = Field(default=1000, gt=0)
    n_probe: int = Field(default=200, gt=0)
    radii: List[float] = [1e-3, 1e-4, 1e-5]
    seed: Optional[int] = None
    n_jobs: int = Field(default=settings.n_jobs, ge=1)


class OutputSection(_Strict):
    dir: Optional[str] = None
    formats: List[Literal["csv", "svg", "txt"]] = ["csv", "svg", "txt"]
    profiles: str = "profiles.csv"
    events: str = "events.csv"
    gate_flux: str = "gate_flux.csv"
    mass: str = "mass.csv"
    diagram: str = "spacetime.svg"
    analysis: str = "analysis.csv"
    summary: str = "summary.txt"


class RunConfig(_Strict):
    model: ModelSection
    problem: ProblemSection = ProblemSection()
    constraint: Optional[ConstraintSection] = None
    analysis: AnalysisSection = AnalysisSection()
    output: OutputSection = OutputSection()

    @property
    def F(self) -> Optional[float]:
        return self.constraint.F if self.constraint else None

    def with_overrides(self, seed: Optional[int] = None, delta_v: Optional[float] = None) -> "RunConfig":
        """Apply the --seed / --delta-v command-line overrides."""
        cfg = self
        if seed is not None:
            cfg = cfg.model_copy(update={"analysis": cfg.analysis.model_copy(update={"seed": seed})})
        if delta_v is not None:
            if delta_v <= 0:
                raise ConfigError(f"--delta-v must be positive, got {delta_v}")
            sim = cfg.problem.simulation
            if sim is not None:
                problem = cfg.problem.model_copy(update={"simulation": sim.model_copy(update={"delta_v": delta_v})})
                cfg = cfg.model_copy(update={"problem": problem})
        return cfg

    def output_dir(self, override: Optional[str] = None) -> Path:
        return Path(override or self.output.dir or settings.output_dir)

    def riemann_states(self) -> Tuple[State, State]:
        if self.problem.riemann is None:
            raise ConfigError("Config has no problem.riemann section")
        return State(*self.problem.riemann.u_l), State(*self.problem.riemann.u_r)

    def sim_config(self, p: ModelParams) -> SimConfig:
        """SimConfig for the simulation section; delta_v defaults to delta_v_fraction * V_f."""
        sim = self.problem.simulation
        if sim is None:
            raise ConfigError("Config has no problem.simulation section")
        try:
            return SimConfig(
                model=p,
                initial=[InitialPiece(x_lo=s.x_lo, x_hi=s.x_hi, state=State(*s.state)) for s in sim.initial],
                gate=GateSpec(F=self.F) if self.constraint else None,
                t_end=sim.t_end,
                delta_v=sim.delta_v or settings.delta_v_fraction * p.V_f,
                profile_times=sim.profile_times,
                profile_x=sim.profile_x,
                event_cap=sim.event_cap,
            )
        except ValidationError as e:
            raise ConfigError(f"Invalid simulation section: {e}") from e

    def analysis_options(self) -> AnalysisOptions:
        a = self.analysis
        return AnalysisOptions(
            n_pairs=a.n_pairs, n_triples=a.n_triples, n_probe=a.n_probe, radii=a.radii,
            seed=settings.default_seed if a.seed is None else a.seed, n_jobs=a.n_jobs,
        )


def load_run_config(path: str) -> RunConfig:
    """
    Read and validate a JSON run configuration.

    Raises:
        ConfigError: missing file or schema violation
    """
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"Cannot read config {path}: {e}") from e
    try:
        cfg = RunConfig.model_validate_json(text)
    except ValidationError as e:
        raise ConfigError(f"Invalid config {path}: {e}", details={"errors": e.errors()}) from e
    logger.info(f"✅ Loaded config {path} ({cfg.model.variant.value})")
    return cfg
