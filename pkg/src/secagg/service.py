"""HTTP service exposing the aggregation experiments.

Thin wrapper over the library: every endpoint validates a request model,
runs the corresponding experiment synchronously, and returns both
machine-readable fields and the exact CSV/JSON text artifacts so clients
can persist byte-stable outputs.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction

from fastapi import FastAPI, HTTPException
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from . import airsim, analysis
from .coding import CodingConfig, ConfigurationError, InsufficientSharesError
from .galois import DEFAULT_PRIME, field
from .protocol import UnsupportedTopologyError, run_end_to_end
from .rng import FieldSampler, derive_seed

DEFAULT_TPRIME_CAP = 4096
DEFAULT_POWERS = (1e2, 1e3, 1e4, 1e5, 1e6)


class NdtRequest(BaseModel):
    M: int = Field(ge=3)
    K: int = Field(ge=2)
    r: int = Field(ge=1)


class RationalValue(BaseModel):
    exact: str
    value: float


def _rational(x: Fraction) -> RationalValue:
    return RationalValue(exact=str(x), value=float(x))


class NdtResponse(BaseModel):
    M: int
    K: int
    r: int
    ndt_up: RationalValue
    ndt_down: RationalValue
    ndt_up_lb: RationalValue
    ndt_down_lb: RationalValue
    gap_up: RationalValue
    gap_down: RationalValue
    dof_up: RationalValue
    dof_down: RationalValue
    single_up: RationalValue
    single_down: RationalValue
    comm_up: RationalValue
    comm_down: RationalValue


class E2ERequest(BaseModel):
    M: int = Field(ge=3)
    K: int = Field(ge=2)
    r: int = Field(ge=1)
    p: int = Field(default=300, ge=1)
    q: int | None = Field(default=None, description=f"prime modulus, default {DEFAULT_PRIME}")
    seed: int = 0
    stragglers: int = Field(default=0, ge=0)


class E2EResponse(BaseModel):
    ok: bool
    report: dict
    report_json: str


class AlignRequest(BaseModel):
    M: int = Field(default=3, ge=3)
    K: int = Field(default=3, ge=3)
    n: int = Field(default=1, ge=1)
    seed: int = 0
    seeds: int = Field(default=20, ge=1)
    powers: tuple[float, ...] = DEFAULT_POWERS
    duplex: str = Field(default="both", pattern="^(both|full|half)$")
    no_noise: bool = False
    tprime_cap: int = Field(default=DEFAULT_TPRIME_CAP, ge=1)


class AlignResponse(BaseModel):
    ok: bool
    csv: str
    rows: list[dict]


class SweepRequest(BaseModel):
    M: tuple[int, ...] = analysis.DEFAULT_SWEEP_M
    K: tuple[int, ...] = analysis.DEFAULT_SWEEP_K
    r: int | None = Field(default=None, description="fixed r; default rule is K-1")
    single_server: bool = True


class SweepResponse(BaseModel):
    csv: str
    rows: int


app = FastAPI(
    title="secagg",
    description="Multi-server secure gradient aggregation experiments",
)


@app.exception_handler(analysis.DomainError)
@app.exception_handler(ConfigurationError)
@app.exception_handler(InsufficientSharesError)
@app.exception_handler(UnsupportedTopologyError)
@app.exception_handler(ValueError)
async def _domain_error(request, exc):
    return JSONResponse(status_code=400, content={"detail": str(exc)})


@app.get("/health")
def health() -> dict:
    return {"status": "ok"}


@app.post("/ndt", response_model=NdtResponse)
def ndt(req: NdtRequest) -> NdtResponse:
    rep = analysis.ndt_report(req.M, req.K, req.r)
    return NdtResponse(
        M=rep.M, K=rep.K, r=rep.r,
        ndt_up=_rational(rep.uplink_achievable),
        ndt_down=_rational(rep.downlink_achievable),
        ndt_up_lb=_rational(rep.uplink_lb),
        ndt_down_lb=_rational(rep.downlink_lb),
        gap_up=_rational(rep.uplink_gap),
        gap_down=_rational(rep.downlink_gap),
        dof_up=_rational(rep.dof_up),
        dof_down=_rational(rep.dof_down),
        single_up=_rational(rep.single_server_up),
        single_down=_rational(rep.single_server_down),
        comm_up=_rational(rep.comm_up),
        comm_down=_rational(rep.comm_down),
    )


@app.post("/e2e", response_model=E2EResponse)
def e2e(req: E2ERequest) -> E2EResponse:
    cfg = CodingConfig.default(M=req.M, K=req.K, r=req.r, p=req.p, q=req.q)
    f = field(cfg.q)
    gradients = [
        FieldSampler(f, derive_seed(req.seed, f"gradient/user{i}")).vector(cfg.p)
        for i in range(1, cfg.M + 1)
    ]
    result = run_end_to_end(gradients, cfg, seed=req.seed, stragglers=req.stragglers)
    report_json = result.report.to_json()
    return E2EResponse(ok=result.report.ok, report=json.loads(report_json),
                       report_json=report_json)


@app.post("/align", response_model=AlignResponse)
def align(req: AlignRequest) -> AlignResponse:
    directions = [airsim.UPLINK]
    if req.duplex in ("both", "full"):
        directions.append(f"{airsim.DOWNLINK}_{airsim.FULL}")
    if req.duplex in ("both", "half"):
        directions.append(f"{airsim.DOWNLINK}_{airsim.HALF}")
    blocks = {airsim.UPLINK: airsim.uplink_block_length(req.M, req.K, req.n)}
    for label in directions[1:]:
        dup = label.split("_")[1]
        blocks[label] = airsim.downlink_block_length(req.M, req.K, req.n, dup)
    for label, t in blocks.items():
        if t > req.tprime_cap:
            raise HTTPException(
                status_code=400,
                detail=(
                    f"refusing {label} run: block length T'={t} exceeds cap "
                    f"{req.tprime_cap} (raise tprime_cap to override)"
                ),
            )
    def one_trial(t: int) -> list[airsim.TrialRow]:
        trial_seed = derive_seed(req.seed, f"align/trial{t}")
        return airsim.run_alignment_trial(
            req.M, req.K, req.n, trial_seed, powers=req.powers,
            include_noise=not req.no_noise, directions=directions,
        )

    # Trials are independent; the dense-algebra steps release the GIL, so a
    # small thread pool helps. Collection order is submission order, keeping
    # the CSV deterministic regardless of completion order.
    rows = []
    with ThreadPoolExecutor(max_workers=min(4, req.seeds)) as pool:
        for trial_rows in pool.map(one_trial, range(req.seeds)):
            rows.extend(trial_rows)
    ok = all(row.ok for row in rows)
    return AlignResponse(
        ok=ok,
        csv=airsim.trial_rows_to_csv(rows),
        rows=[
            {
                "seed": row.seed, "M": row.M, "K": row.K, "n": row.n,
                "direction": row.direction,
                "relation_count": row.relation_count,
                "max_containment_residual": row.max_containment_residual,
                "min_sv_ratio": row.min_sv_ratio,
                "leakage_slope": row.leakage_slope,
                "ok": row.ok,
            }
            for row in rows
        ],
    )


@app.post("/sweep", response_model=SweepResponse)
def sweep(req: SweepRequest) -> SweepResponse:
    r_for = None if req.r is None else (lambda M, K: req.r)
    reports = analysis.sweep_reports(req.M, req.K, r_for=r_for)
    csv = analysis.sweep_csv(reports, include_single=req.single_server)
    return SweepResponse(csv=csv, rows=len(reports))
