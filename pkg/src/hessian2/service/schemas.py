"""Pydantic request/response models for the HTTP service."""

from __future__ import annotations

from pydantic import BaseModel, Field


class TauRequest(BaseModel):
    f0: float
    mode: str = "auto"


class TauRecord(BaseModel):
    values: list[float]
    sigma: list[float]
    sigma_reduced: list[float]
    cone: str
    sigma2_target: float


class SolveRequest(BaseModel):
    f: str
    mode: str = "auto"
    n: int = 33
    bandwidth: float = 1.5
    eps_initial: float = Field(default=0.1, gt=0)
    eps_shrink: float = Field(default=0.5, gt=0, lt=1)
    max_eps_halvings: int = Field(default=20, ge=0)
    max_outer: int = Field(default=30, ge=0)
    stop_tol: float = Field(default=1e-11, gt=0)
    emit_fields: bool = False
    sample_n: int = 9
    threads: int = 1
    output_dir: str = "."


class HistoryRowModel(BaseModel):
    m: int
    g_sup: float
    rho_sup: float
    w_proxy: float
    ellipticity_margin: float
    eps: float


class VerificationReportModel(BaseModel):
    residual_sup: float
    ellipticity_margin_min: float
    ellipticity_bound: float
    convexity: str
    sign_samples: dict[str, int]


class FieldRowModel(BaseModel):
    i: int
    j: int
    k: int
    x1: float
    x2: float
    x3: float
    value: float


class USampleRowModel(BaseModel):
    y1: float
    y2: float
    y3: float
    u: float
    s1: float
    s2: float
    s3: float


class RunMeta(BaseModel):
    tau: TauRecord
    eps: float
    n: int
    outcome: str
    iterations: int
    g0_sup: float
    stop_threshold: float
    ellipticity_pass: bool
    verification_pass: bool
    failure: str


class SolveResponse(BaseModel):
    outcome: str
    exit_code: int
    run: RunMeta
    history: list[HistoryRowModel]
    report: VerificationReportModel | None = None
    config: dict
    w_field: list[FieldRowModel] | None = None
    u_samples: list[USampleRowModel] | None = None


class SweepRequest(BaseModel):
    f: str
    mode: str = "auto"
    n: int = 33
    bandwidth: float = 1.5
    eps_list: list[float]
    stop_tol: float = Field(default=1e-11, gt=0)


class SweepRowModel(BaseModel):
    eps: float
    g0_sup: float
    margin: float
    accepted: bool
    note: str = ""


class SweepResponse(BaseModel):
    rows: list[SweepRowModel]


class VerifyRequest(BaseModel):
    f: str
    tau_values: list[float]
    eps: float = Field(gt=0)
    n: int = 33
    bandwidth: float = 1.5
    sample_n: int = 9
    w_field: list[FieldRowModel]


class VerifyResponse(BaseModel):
    report: VerificationReportModel
    ellipticity_pass: bool
    verification_pass: bool


class HealthResponse(BaseModel):
    status: str
