"""FastAPI service exposing instance generation, solving and evaluation.

Run with:  uvicorn robust_pricing.service.app:app

The heavy experiment protocol stays in the CLI; the service covers the
request/response-sized operations a pricing backend needs.
"""

import numpy as np
from fastapi import FastAPI, HTTPException

from ..errors import ConfigurationError, ConvergenceError, DomainError, NumericError
from ..harness import generate_instance, instance_from_json, instance_to_json
from ..penalty import robust_penalty_solve
from ..pricing_robust import (
    robust_price_homogeneous,
    robust_price_partition,
    sampled_worst_case,
    solution_to_json,
)
from .schemas import (
    EvaluateRequest,
    EvaluateResponse,
    GenerateRequest,
    InstanceSchema,
    SolveRequest,
    SolveResponse,
)

app = FastAPI(title="robust-pricing", version="0.1.0")


def _instance(schema):
    try:
        return instance_from_json(schema.model_dump(by_alias=True))
    except (ConfigurationError, DomainError) as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc


@app.get("/health")
def health():
    return {"status": "ok"}


@app.post("/generate", response_model=InstanceSchema)
def generate(req: GenerateRequest):
    try:
        instance = generate_instance(
            req.seed, m=req.m, k=req.k, n_partitions=req.n, eps=req.eps,
            psp=req.psp, variant=req.variant,
        )
    except (ConfigurationError, DomainError) as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc
    return instance_to_json(instance)


def solve_instance(instance, mode):
    """Dispatch an instance to the solver for the requested mode."""
    if mode == "homogeneous":
        if instance.uncertainty.mode != "joint":
            raise ConfigurationError(
                "homogeneous mode needs a joint-mode uncertainty set"
            )
        return robust_price_homogeneous(
            instance.model, instance.uncertainty, instance.products.costs
        )
    if mode == "partition":
        return robust_price_partition(
            instance.model, instance.uncertainty, instance.products.costs,
            instance.products.partitions,
        )
    if mode == "penalty":
        if instance.penalty is None:
            raise ConfigurationError("instance carries no penalty specification")
        return robust_penalty_solve(
            instance.model, instance.uncertainty, instance.products.costs,
            instance.products.partitions, instance.penalty,
        )
    raise ConfigurationError(f"unknown solve mode: {mode!r}")


@app.post("/solve", response_model=SolveResponse)
def solve(req: SolveRequest):
    instance = _instance(req.instance)
    try:
        solution = solve_instance(instance, req.mode)
    except (ConfigurationError, DomainError) as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc
    except (ConvergenceError, NumericError) as exc:
        raise HTTPException(status_code=500, detail=str(exc)) from exc
    return solution_to_json(solution)


@app.post("/evaluate", response_model=EvaluateResponse)
def evaluate(req: EvaluateRequest):
    instance = _instance(req.instance)
    if len(req.prices) != instance.products.m:
        raise HTTPException(status_code=422, detail="prices length mismatch")
    try:
        result = sampled_worst_case(
            instance.model, instance.uncertainty, instance.products.costs,
            np.asarray(req.prices, dtype=float), req.samples,
            np.random.default_rng(req.seed),
        )
    except (ConfigurationError, DomainError) as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc
    return {
        "worst": result.worst,
        "average": result.average,
        "max": result.max_value,
        "revenues": [float(v) for v in result.revenues],
    }
