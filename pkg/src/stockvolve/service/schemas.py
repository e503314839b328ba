"""Pydantic request/response models of the HTTP service.

Requests carry all data inline (no server-side file access) so any client,
including the bundled CLI, can drive the service.  Unknown keys are
rejected everywhere: a typoed option should fail loudly, not silently fall
back to a default.
"""

from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


# --- shared specs ---

class GridSpec(StrictModel):
    p_min: float = Field(ge=0.0)
    p_max: float = Field(gt=0.0)
    n_points: int = Field(ge=16, le=2_000_000)

    @model_validator(mode="after")
    def _ordered(self):
        if not self.p_min < self.p_max:
            raise ValueError("p_min must be below p_max")
        return self


class PriceModelSpec(StrictModel):
    mu: float = Field(gt=0.0)
    mu_m: float = Field(default=0.0, ge=0.0)
    eps: float = Field(default=0.01, gt=0.0, lt=0.5)

    @model_validator(mode="after")
    def _ordered(self):
        if not self.mu_m < self.mu:
            raise ValueError("mu_m must be below mu")
        return self


# --- kinetics ---

class KineticsRequest(StrictModel):
    grid: GridSpec
    model: PriceModelSpec
    n_total: float = Field(default=1e6, gt=0.0)
    z_total: float = Field(default=1e6, gt=0.0)
    eta: float = Field(default=1.0, gt=0.0)
    tol: float = Field(default=1e-8, gt=0.0, lt=1.0)
    max_steps: int = Field(default=100_000, ge=1)
    record_every: int = Field(default=10, ge=1)
    demand_scale: float = Field(default=1.0, gt=0.0,
                                description="multiplies the stationary demand rate")
    supply_scale: float = Field(default=1.0, gt=0.0,
                                description="multiplies the stationary supply rate")
    start_scale: float = Field(default=1.1, gt=0.0,
                               description="initial n,z as a multiple of the "
                                           "stationary curves")


class StateSnapshot(StrictModel):
    p: list[float]
    n: list[float]
    z: list[float]
    demand_rate: list[float]
    supply_rate: list[float]
    purchase_rate: list[float]


class StabilityModel(StrictModel):
    lambda_negative: float
    lambda_zero: float
    numeric_eigenvalues: tuple[float, float]
    classification: str


class ResidualPoint(StrictModel):
    step: int
    residual: float


class KineticsResponse(StrictModel):
    state: StateSnapshot
    residual_trace: list[ResidualPoint]
    steps_taken: int
    final_residual: float
    stability: StabilityModel
    n_total: float
    z_total: float
    y_total: float
    intersection_price: float


# --- market evolution ---

class FitnessPhase(StrictModel):
    """Constant per-stock fitness rates active until the given time."""

    until: float = Field(gt=0.0)
    rates: list[float]


class ReplicatorSpec(StrictModel):
    mu0: list[float] = Field(min_length=1)
    phases: list[FitnessPhase] = Field(min_length=1)
    dt: float = Field(gt=0.0)
    horizon: float = Field(gt=0.0)
    record_every: int = Field(default=1, ge=1)

    @model_validator(mode="after")
    def _consistent(self):
        b = len(self.mu0)
        if any(m <= 0 for m in self.mu0):
            raise ValueError("all initial prices must be positive")
        for phase in self.phases:
            if len(phase.rates) != b:
                raise ValueError("each phase needs one rate per stock")
        if any(b.until <= a.until for a, b in zip(self.phases, self.phases[1:])):
            raise ValueError("phase end times must be strictly increasing")
        return self


class GbmSpec(StrictModel):
    mu0: float = Field(gt=0.0)
    mean_growth: float
    sigma_prime: float = Field(ge=0.0)
    dt: float = Field(gt=0.0)
    horizon: float = Field(gt=0.0)
    n_paths: int = Field(default=1, ge=1, le=1_000_000)
    record_every: int = Field(default=1, ge=1)


class MarketRequest(StrictModel):
    replicator: Optional[ReplicatorSpec] = None
    gbm: Optional[GbmSpec] = None
    seed: int = 0
    threads: int = Field(default=1, ge=1, le=64)

    @model_validator(mode="after")
    def _something_to_run(self):
        if self.replicator is None and self.gbm is None:
            raise ValueError("need a replicator and/or gbm section")
        return self


class ReplicatorTrajectory(StrictModel):
    t: list[float]
    mu: list[list[float]]
    w: list[list[float]]


class GbmTrajectories(StrictModel):
    t: list[float]
    paths: list[list[float]]


class MarketResponse(StrictModel):
    replicator: Optional[ReplicatorTrajectory] = None
    gbm: Optional[GbmTrajectories] = None


# --- return fitting ---

class ReturnsPayload(StrictModel):
    """Either precomputed returns or prices to difference."""

    returns: Optional[list[float]] = None
    prices: Optional[list[float]] = None
    step: int = Field(default=1, ge=1)

    @model_validator(mode="after")
    def _one_source(self):
        if (self.returns is None) == (self.prices is None):
            raise ValueError("provide exactly one of returns or prices")
        return self


class FitRequest(StrictModel):
    data: ReturnsPayload
    families: list[Literal["normal", "laplace", "ged", "hyperbolic",
                           "kanji_mixture", "gauss_laplace_sum"]] = Field(min_length=1)
    theta: float = Field(default=0.5, gt=0.0, lt=1.0,
                         description="fixed mixing weight for gauss_laplace_sum")
    n_bins: int = Field(default=60, ge=4, le=2000)


class FitModel(StrictModel):
    family: str
    params: dict[str, float]
    log_likelihood: float
    aic: float
    bic: float
    iterations: int
    converged: bool
    skewness: float
    n_observations: int


class DensityTable(StrictModel):
    bin_center: list[float]
    empirical: list[float]
    fitted: dict[str, list[float]]


class FitResponse(StrictModel):
    fits: list[FitModel]  # AIC-ranked, best first
    density: DensityTable


# --- Fisher-Pry analysis ---

class SeriesPayload(StrictModel):
    label: str = ""
    dates: list[str]
    prices: list[float]

    @model_validator(mode="after")
    def _aligned(self):
        if len(self.dates) != len(self.prices):
            raise ValueError("dates and prices must have equal length")
        if not self.dates:
            raise ValueError("series is empty")
        return self


class SegmentationSpec(StrictModel):
    max_segments: int = Field(default=8, ge=1, le=64)
    penalty: Optional[float] = Field(default=None, gt=0.0)
    min_segment_length: int = Field(default=60, ge=2)
    refine_breakpoints: bool = True
    neutral_threshold: float = Field(default=0.01, ge=0.0)


class FisherPryRequest(StrictModel):
    stock: SeriesPayload
    index: SeriesPayload
    segmentation: SegmentationSpec = SegmentationSpec()
    include_svg: bool = False


class SegmentModel(StrictModel):
    start_index: int
    end_index: int
    start_date: str
    end_date: str
    fitness_advantage_per_year: float
    intercept: float
    r_squared: float
    classification: str


class FisherPryPlot(StrictModel):
    dates: list[str]
    t_years: list[float]
    log_relative_price: list[float]
    fitted: list[float]


class FisherPryResponse(StrictModel):
    label: str
    n_aligned: int
    segments: list[SegmentModel]
    plot: FisherPryPlot
    svg: Optional[str] = None


class HealthResponse(StrictModel):
    status: str
    version: str


class ErrorBody(StrictModel):
    code: str
    message: str
