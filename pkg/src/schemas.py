from typing import Dict, List, Literal, Optional, Tuple

from pydantic import BaseModel, Extra, Field, validator

from src.conf.config import settings

REPORT_SCHEMA = "v1"


class StrictModel(BaseModel):
    class Config:
        extra = Extra.forbid


def _check_box(box):
    if box is None:
        return box
    if not box:
        raise ValueError("parameter box must not be empty")
    for lo, hi in box:
        if not lo <= hi:
            raise ValueError(f"interval [{lo}, {hi}] has lo > hi")
    return box


# Plant parameters. Field names are the override keys after the plant prefix.

class ArtificialPancreasParams(StrictModel):
    w: float = Field(100.0, gt=0)
    ke: float = 0.138
    k12: float = 0.066
    ka1: float = 0.006
    ka2: float = 0.06
    ka3: float = 0.03
    kb1: float = 0.0034
    kb2: float = 0.056
    kb3: float = 0.024
    tmax_i: float = Field(55.0, gt=0)
    vi_per_kg: float = 0.12
    vg_per_kg: float = 0.16
    f01_per_kg: float = 0.0097
    tmax_g: float = Field(40.0, gt=0)
    fr: float = 0.0
    egp0_per_kg: float = 0.0161
    a_g: float = 0.8
    k_int: float = 0.025
    u_b: float = Field(0.05548, ge=0)
    reference: float = 6.11
    noise_std: float = Field(0.25, ge=0)
    mw_glucose: float = Field(180.0, gt=0)
    meal_means: Tuple[float, float, float] = (50.0, 70.0, 60.0)
    meal_var: float = Field(100.0, ge=0)
    wait_mean: float = 300.0
    wait_var: float = Field(100.0, ge=0)
    negative_wait: float = Field(30.0, ge=0)
    g_low: float = 4.0
    g_high: float = 16.0
    final_window: float = Field(30.0, ge=0)
    final_band: float = Field(0.25, ge=0)
    tau: float = Field(5.0, gt=0)
    horizon: float = Field(1440.0, gt=0)


class PowertrainParams(StrictModel):
    c1: float = 0.41328
    c2: float = -0.366
    c3: float = 0.08979
    c4: float = -0.0337
    c5: float = 0.0001
    c6: float = 2.821
    c7: float = -0.05231
    c8: float = 0.10299
    c9: float = -0.00063
    c10: float = 1.0
    c12: float = 0.9
    c25: float = 1.0
    c26: float = 4.0
    lambda_bar: float = Field(14.7, gt=0)
    zeta: float = Field(4.0, gt=0)
    tau: float = Field(0.1, gt=0)
    noise_var: float = Field(0.0625, ge=0)
    omega_mean: float = 105.0
    omega_var: float = Field(4.0, ge=0)
    amp_mean: float = 30.6
    amp_var: float = Field(25.0, ge=0)
    theta_low: float = 8.8
    u_min: float = Field(-0.99, gt=-1)
    band: float = Field(0.05, gt=0)


class QuadTankParams(StrictModel):
    A1: float = 28.0
    A2: float = 32.0
    A3: float = 28.0
    A4: float = 32.0
    a1: float = 0.071
    a2: float = 0.057
    a3: float = 0.071
    a4: float = 0.057
    k1: float = 3.33
    k2: float = 3.35
    kc: float = Field(0.5, gt=0)
    g: float = Field(981.0, gt=0)
    u1_nominal: float = 3.0
    u2_nominal: float = 3.0
    u_max: float = Field(24.0, gt=0)
    r1: float = 12.4
    r2: float = 12.7
    gamma1_mean: float = 0.7
    gamma2_mean: float = 0.6
    gamma_var: float = Field(0.223, ge=0)
    gamma_min: float = 0.05
    gamma_max: float = 0.95
    removal_max: float = Field(3.0, ge=0)
    noise_var: float = Field(0.33, ge=0)
    level_max: float = Field(20.0, gt=0)
    tau: float = Field(0.1, gt=0)
    horizon: float = Field(180.0, gt=0)
    window: float = Field(60.0, gt=0)
    settle: float = Field(5.0, ge=0)
    band: float = Field(1.0, gt=0)


class LinearTestParams(StrictModel):
    tau: float = Field(0.1, gt=0)
    horizon: float = Field(10.0, gt=0)
    noise_std: float = Field(0.01, ge=0)
    x0_max: float = Field(1.0, ge=0)
    bound: float = Field(2.0, gt=0)
    settle_time: float = Field(5.0, ge=0)
    band: float = Field(0.2, gt=0)


# Run configuration document ([plant] [controller] [synthesis] [output]).

class PlantSection(StrictModel):
    name: str
    overrides: Dict[str, float] = {}


class ChannelSection(StrictModel):
    output: int = Field(0, ge=0)
    reference: int = Field(0, ge=0)
    box: Optional[List[Tuple[float, float]]] = None

    _box = validator("box", allow_reuse=True)(_check_box)


class ControllerSection(StrictModel):
    mode: Literal["pid", "general"] = "pid"
    max_degree: int = Field(2, ge=0)
    box: Optional[List[Tuple[float, float]]] = None
    channels: Optional[List[ChannelSection]] = None

    _box = validator("box", allow_reuse=True)(_check_box)

    @validator("max_degree")
    def pid_degree(cls, value, values):
        if values.get("mode") == "pid" and value > 2:
            raise ValueError("pid mode supports degrees 0 (P), 1 (PI) and 2 (PID)")
        return value


class SynthesisSection(StrictModel):
    threshold: float = Field(0.95, gt=0, lt=1)
    xi: float = Field(0.05, gt=0, lt=1)
    confidence: float = Field(0.99, gt=0, lt=1)
    alpha: float = Field(0.5, gt=0, le=1)
    m0: int = Field(1, ge=1)
    m_verify: int = Field(settings.m_verify, ge=1)
    max_iterations: int = Field(3, ge=1)
    verify_samples: int = Field(settings.verify_samples, ge=1)
    ce_iterations: int = Field(10, ge=1)
    ce_samples: int = Field(30, ge=1)
    ci_samples: int = Field(settings.ci_samples, ge=1)
    elite_fraction: float = Field(0.1, gt=0, le=1)
    smoothing: float = Field(0.9, ge=0, le=1)
    method: Literal["bayesian", "clopper-pearson", "chernoff"] = "bayesian"
    seed: int = Field(0, ge=0)
    workers: Optional[int] = Field(None, ge=1)


class OutputSection(StrictModel):
    directory: str = "."
    report: str = "report.json"
    history: str = "history.csv"


class RunConfig(StrictModel):
    plant: PlantSection
    controller: ControllerSection = ControllerSection()
    synthesis: SynthesisSection = SynthesisSection()
    output: OutputSection = OutputSection()


# Documents written by the commands.

class IntervalModel(BaseModel):
    lo: float
    hi: float
    confidence: float
    successes: int
    trials: int
    method: str


class HistoryRow(BaseModel):
    degree: int
    iter: int
    m: int
    a_opt: float
    b_opt: float
    a_ver: float
    b_ver: float
    candidates: int
    unstable: int
    seconds: float
    source: str = "verify"


class Diagnostics(BaseModel):
    all_unstable_degrees: List[int] = []
    divergence_storms: int = 0
    tolerance_breaches: int = 0


class SynthesisReport(BaseModel):
    schema_version: str = Field(REPORT_SCHEMA, alias="schema")
    tool_version: str
    seed: int
    config: dict
    params: List[float]
    controller: dict
    interval: IntervalModel
    degree: int
    success: bool
    diagnostics: Diagnostics = Diagnostics()
    history: List[HistoryRow] = []

    class Config:
        allow_population_by_field_name = True


class EvalReport(BaseModel):
    schema_version: str = Field(REPORT_SCHEMA, alias="schema")
    tool_version: str
    seed: int
    plant: str
    controller: dict
    solver: str
    substeps: int
    interval: IntervalModel
    diverged: int = 0
    tolerance_breaches: int = 0
    width_reached: bool = False

    class Config:
        allow_population_by_field_name = True


class EigenvalueModel(BaseModel):
    re: float
    im: float
    modulus: float


class StabilityReport(BaseModel):
    plant: str
    controller: dict
    spectral_radius: float
    verdict: Literal["accept", "reject"]
    eigenvalues: List[EigenvalueModel]
    lyapunov_positive_definite: Optional[bool] = None


class BoundsReport(BaseModel):
    plant: str
    gamma: float
    t: float
    L: float
    L1: float
    L2: float
    Gamma: float
    alpha_growth: float
    h1: float
    h2: float
    hhat1: float
    hhat2: float
