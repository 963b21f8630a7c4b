"""Request and response schemas for the HTTP service."""

from __future__ import annotations

from typing import List, Optional

from pydantic import BaseModel, Field, field_validator


class SegmentModel(BaseModel):
    dt: float = Field(gt=0)
    u0: float = 0.0
    u: Optional[List[float]] = None
    r: float = 0.0


class ScheduleModel(BaseModel):
    d: int = Field(ge=1)
    segments: List[SegmentModel] = Field(default_factory=list)


class GroupElementModel(BaseModel):
    """Wire form of a group element; v is interleaved (x1, y1, x2, y2, ...)."""

    d: int = Field(ge=1)
    S: List[List[float]]
    v: List[float]
    z: float = 0.0
    winding: int = 0

    @field_validator("S")
    @classmethod
    def _square(cls, s):
        if len(s) != 2 or any(len(row) != 2 for row in s):
            raise ValueError("S must be a 2x2 matrix")
        return s


class AlgebraCheckRequest(BaseModel):
    d: int = Field(default=1, ge=1)
    seed: int = 1234
    samples: int = Field(default=200, ge=1)
    tol: float = Field(default=1e-9, gt=0)


class IwasawaRequest(BaseModel):
    matrix: List[float]

    @field_validator("matrix")
    @classmethod
    def _four(cls, m):
        if len(m) != 4:
            raise ValueError("matrix must have 4 entries, row-major")
        return m


class SynthRequest(BaseModel):
    target: GroupElementModel
    tol: float = Field(gt=0)
    eps0: float = Field(default=0.02, gt=0)
    max_iter: int = Field(default=20, ge=1)


class SimulateRequest(BaseModel):
    schedule: ScheduleModel


class SweepRequest(BaseModel):
    target: str
    eps: List[float]
    jobs: int = Field(default=1, ge=1)


class QuantumReachRequest(BaseModel):
    d: int = Field(default=1, ge=1, le=2)
    s: float
    alpha: float
    p: List[float]
    sigma: float = Field(gt=0)
    beta: List[float]
    tol: float = Field(gt=0)
    grid_n: int = Field(default=16384, ge=16)
    grid_l: float = Field(default=24.0, gt=0)
    dt_max: float = Field(default=1e-3, gt=0)
    eta: float = Field(default=5e-5, gt=0)
    eps0: float = Field(default=0.0125, gt=0)


class LiouvilleReachRequest(BaseModel):
    d: int = Field(default=1, ge=1)
    alpha: float = Field(gt=0)
    t: float
    r: float
    s: List[float]
    w: List[float]
    tol: float = Field(gt=0)
    grid_n: int = Field(default=512, ge=16)
    grid_l: float = Field(default=8.0, gt=0)
    p_norms: List[float] = Field(default_factory=lambda: [1.0, 2.0])
    eps0: float = Field(default=0.01, gt=0)
