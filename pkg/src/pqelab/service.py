"""HTTP service wrapping the experiment runners.

Each endpoint takes a full experiment configuration in the request body and
returns the finished run record; clients (including the bundled CLI) decide
how to persist it.  Desk-scale experiments run synchronously.
"""

from __future__ import annotations

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, ConfigDict, Field

from . import __version__
from .backends import Sampler
from .experiments import RUNNERS, ConfigError, ExperimentConfig, NoiseConfig, RunRecord
from .mitigation import MitigationError, calibrate_readout

app = FastAPI(
    title="pqelab",
    version=__version__,
    description="Projective quantum eigensolver experiments over HTTP",
)


class ExperimentRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    config: ExperimentConfig = ExperimentConfig()


class HealthResponse(BaseModel):
    status: str
    version: str
    experiments: list[str]


class CalibrationRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    n_qubits: int = Field(ge=1, le=10)
    shots: int = Field(default=8192, ge=1)
    magnification: int = Field(default=1, ge=1)
    seed: int = 0
    noise: NoiseConfig = NoiseConfig()


class CalibrationResponse(BaseModel):
    n_qubits: int
    shots_per_column: int
    matrix: list[list[float]]


@app.get("/health", response_model=HealthResponse)
def health() -> HealthResponse:
    return HealthResponse(status="ok", version=__version__,
                          experiments=sorted(RUNNERS))


def _run(name: str, request: ExperimentRequest) -> RunRecord:
    try:
        return RUNNERS[name](request.config)
    except (ConfigError, MitigationError, ValueError) as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from exc


@app.post("/experiments/h2-curve", response_model=RunRecord)
def h2_curve(request: ExperimentRequest) -> RunRecord:
    return _run("h2-curve", request)


@app.post("/experiments/tfim-matrix", response_model=RunRecord)
def tfim_matrix(request: ExperimentRequest) -> RunRecord:
    return _run("tfim-matrix", request)


@app.post("/experiments/tfim-truncation", response_model=RunRecord)
def tfim_truncation(request: ExperimentRequest) -> RunRecord:
    return _run("tfim-truncation", request)


@app.post("/experiments/tfim-correlations", response_model=RunRecord)
def tfim_correlations(request: ExperimentRequest) -> RunRecord:
    return _run("tfim-correlations", request)


@app.post("/experiments/scaling", response_model=RunRecord)
def scaling(request: ExperimentRequest) -> RunRecord:
    return _run("scaling", request)


@app.post("/calibration", response_model=CalibrationResponse)
def calibration(request: CalibrationRequest) -> CalibrationResponse:
    import numpy as np

    sampler = Sampler(noise=request.noise.to_noise_spec(),
                      rng=np.random.default_rng(request.seed))
    try:
        cal = calibrate_readout(sampler, request.n_qubits, request.shots,
                                request.magnification)
    except (MitigationError, ValueError) as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from exc
    return CalibrationResponse(n_qubits=cal.n_qubits,
                               shots_per_column=cal.shots_per_column,
                               matrix=cal.matrix.tolist())
