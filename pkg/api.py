import logging

import uvicorn
from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field, model_validator

from calibration import FirmModel, WaccBreakdown, WaccInputs, derive_model, load_reference_model, wacc
from config import SETTINGS, setup_logging
from diffusion_core import DensityCurve
from errors import LeverageError, ModelInputError
from last_passage import AlarmQuery, lp_density_curve, lp_within_curve
from numerics import geometric_grid
from occupation_opt import ObjectiveBreakdown, OptimizerConfig, optimize_alpha
from reports import AnalysisRow, analysis_table
from time_reversal import ReversedSpec, time_to_default_cdf, time_to_default_density

logger = logging.getLogger(__name__)

# --- Configuration & Globals ---
API_HOST = "0.0.0.0"
API_PORT = 8080

# --- FastAPI App Instance ---
app = FastAPI(
    title="Leverage Alarm API",
    description="Last-passage-time alarms, time-to-default densities and optimal alarm levels "
                "for a calibrated leverage process.",
    version="1.0.0",
)


# --- Request & Response Models ---
class ModelSource(BaseModel):
    """Either explicit firm parameters or the label of a shipped reference quarter."""

    reference: str | None = Field(None, examples=["2013-12"])
    nu: float | None = None
    sigma: float | None = None
    r: float | None = None
    A0: float | None = None
    D0: float | None = None

    @model_validator(mode="after")
    def _one_source(self):
        explicit = [self.nu, self.sigma, self.r, self.A0, self.D0]
        if self.reference is None and any(v is None for v in explicit):
            raise ValueError("give either 'reference' or all of nu, sigma, r, A0, D0")
        return self

    def build(self) -> FirmModel:
        if self.reference is not None:
            return load_reference_model(self.reference)
        return derive_model(self.nu, self.sigma, self.r, self.A0, self.D0)


class AnalyzeRequest(BaseModel):
    model: ModelSource
    rstar: list[float] = Field([1.25, 1.67], min_length=1)
    t: list[float] = Field([1.0], min_length=1)


class AnalyzeResponse(BaseModel):
    mu: float
    c: float
    R0: float
    rows: list[AnalysisRow]


class DensityRequest(BaseModel):
    model: ModelSource
    alpha: float | None = None
    rstar: float | None = None
    kind: str = Field("last-passage", pattern="^(last-passage|last-passage-cdf|time-to-default|time-to-default-cdf)$")
    grid_start: float = Field(1e-4, gt=0.0)
    grid_stop: float = Field(10.0, gt=0.0)
    grid_n: int = Field(400, ge=2, le=5000)

    @model_validator(mode="after")
    def _one_level(self):
        if (self.alpha is None) == (self.rstar is None):
            raise ValueError("give exactly one of alpha and rstar")
        return self


class OptimizeRequest(BaseModel):
    model: ModelSource
    gamma: float = Field(0.4, ge=0.0, le=1.0)
    q: float = Field(..., gt=0.0, examples=[0.3006])
    t: float = Field(1.0, gt=0.0)
    grid_n: int = Field(400, ge=100)


class OptimizeResponse(BaseModel):
    alpha_star: float
    rstar: float
    value: float
    breakdown: ObjectiveBreakdown


def _unprocessable(e: Exception) -> HTTPException:
    return HTTPException(status_code=422, detail=str(e))


# --- Health Check Endpoint ---
@app.get("/health", tags=["Health"])
async def health_check():
    """Liveness check."""
    return {"status": "ok"}


# --- Analysis Endpoints ---
@app.post("/analyze", response_model=AnalyzeResponse, tags=["Analysis"])
def analyze(request: AnalyzeRequest):
    """Table rows (lp_within, atom, first passage, Q_t joint, occupancy) for each (R*, t)."""
    try:
        model = request.model.build()
        rows = analysis_table(model, request.rstar, request.t)
    except ModelInputError as e:
        raise _unprocessable(e)
    except LeverageError as e:
        logger.error(f"Analysis failed: {e}")
        raise HTTPException(status_code=500, detail=str(e))
    return AnalyzeResponse(mu=model.spec.mu, c=model.spec.c, R0=model.R0, rows=rows)


@app.post("/density", response_model=DensityCurve, tags=["Analysis"])
def density(request: DensityRequest):
    """Last-passage or time-to-default curve for one alarm level."""
    try:
        model = request.model.build()
        alpha = request.alpha if request.alpha is not None else model.alpha_of_rstar(request.rstar)
        if not alpha > model.spec.c:
            raise ModelInputError(f"alpha = {alpha} must lie above the killing level c = {model.spec.c}")
        grid = geometric_grid(request.grid_start, request.grid_stop, request.grid_n)
        if request.kind == "last-passage":
            return lp_density_curve(AlarmQuery(alpha=alpha, spec=model.spec), grid)
        if request.kind == "last-passage-cdf":
            return lp_within_curve(AlarmQuery(alpha=alpha, spec=model.spec), grid)
        if request.kind == "time-to-default":
            return time_to_default_density(alpha, ReversedSpec(base=model.spec), grid)
        return time_to_default_cdf(alpha, ReversedSpec(base=model.spec), grid)
    except ModelInputError as e:
        raise _unprocessable(e)
    except LeverageError as e:
        logger.error(f"Density failed: {e}")
        raise HTTPException(status_code=500, detail=str(e))


@app.post("/optimize", response_model=OptimizeResponse, tags=["Optimization"])
def optimize(request: OptimizeRequest):
    """Optimal alarm level alpha* and the matching leverage threshold R*."""
    try:
        model = request.model.build()
        cfg = OptimizerConfig(gamma=request.gamma, q=request.q, horizon_t=request.t,
                              coarse_grid_n=request.grid_n)
        result = optimize_alpha(model.spec, cfg)
    except ModelInputError as e:
        raise _unprocessable(e)
    except LeverageError as e:
        logger.error(f"Optimization failed: {e}")
        raise HTTPException(status_code=500, detail=str(e))
    return OptimizeResponse(alpha_star=result.alpha_star, rstar=model.rstar_of_alpha(result.alpha_star),
                            value=result.value, breakdown=result.breakdown)


@app.post("/wacc", response_model=WaccBreakdown, tags=["Optimization"])
def cost_of_capital(inputs: WaccInputs):
    """q with its CAPM and cost-of-debt components."""
    try:
        return wacc(inputs)
    except ModelInputError as e:
        raise _unprocessable(e)


# --- Run Instruction (for local dev) ---
if __name__ == "__main__":
    setup_logging(SETTINGS.log_level, SETTINGS.log_file)
    uvicorn.run("api:app", host=API_HOST, port=API_PORT)
