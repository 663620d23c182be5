"""Pydantic request/response models for the pricing service.

These mirror the package's JSON file formats one-to-one, so payloads saved
by the CLI can be posted to the service unchanged.
"""

from typing import Dict, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field


class NestSchema(BaseModel):
    items: List[int]
    mu_n: float
    sigma: Optional[List[float]] = None


class GevModelSchema(BaseModel):
    variant: Literal["mnl", "nested"]
    mu: float = 1.0
    nests: Optional[List[NestSchema]] = None


class AnchorSchema(BaseModel):
    a: List[float]
    b: List[float]


class UncertaintySchema(BaseModel):
    anchors: List[AnchorSchema]
    tau: List[float]
    eps: float
    mode: Literal["joint", "partition"]


class PenaltyConstraintSchema(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    alpha: List[float]
    r: float
    lam: float = Field(default=0.0, alias="lambda")


class PenaltySpecSchema(BaseModel):
    constraints: List[PenaltyConstraintSchema]


class InstanceSchema(BaseModel):
    seed: int = 0
    costs: List[float]
    partitions: List[List[int]]
    model: GevModelSchema
    uncertainty: UncertaintySchema
    penalty: Optional[PenaltySpecSchema] = None


class GenerateRequest(BaseModel):
    seed: int
    m: int = 50
    k: int = 5
    n: int = 5
    eps: float = 0.1
    psp: Literal["homogeneous", "partition"] = "partition"
    variant: Literal["nested", "mnl"] = "nested"


class SolveRequest(BaseModel):
    instance: InstanceSchema
    mode: Literal["homogeneous", "partition", "penalty"]


class SolveResponse(BaseModel):
    markup: List[float]
    prices: List[float]
    worst_case_revenue: float
    diagnostics: Dict[str, object]


class EvaluateRequest(BaseModel):
    instance: InstanceSchema
    prices: List[float]
    samples: int = 1000
    seed: int = 0


class EvaluateResponse(BaseModel):
    worst: float
    average: float
    max: float
    revenues: List[float]
