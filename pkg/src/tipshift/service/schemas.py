"""Pydantic request/response models for the analysis service.

The CLI builds the same request models and either executes them in-process or
posts them to a running server, so the wire format and the batch format are
one and the same. Every response embeds the resolved request under "config"
to make runs reproducible from their artifacts alone.
"""

from __future__ import annotations

from pydantic import BaseModel, Field, model_validator


class ModelSpecIn(BaseModel):
    """A builtin field (by name, with constant overrides) or an expression."""

    name: str | None = None
    constants: dict[str, float] = Field(default_factory=dict)
    expression: str | None = None
    domain: tuple[float, float] | None = None

    @model_validator(mode="after")
    def _one_source(self):
        if (self.name is None) == (self.expression is None):
            raise ValueError("specify exactly one of model name or expression")
        return self


class ShiftSpecIn(BaseModel):
    family: str = "tanh"  # tanh | logistic | expression
    lambda_min: float = Field(alias="lmin", default=None)
    lambda_max: float = Field(alias="lmax", default=None)
    expression: str | None = None

    model_config = {"populate_by_name": True}

    @model_validator(mode="after")
    def _check(self):
        if self.lambda_min is None or self.lambda_max is None:
            raise ValueError("shift needs lambda_min and lambda_max")
        if self.lambda_min >= self.lambda_max:
            raise ValueError("lambda_min must be < lambda_max")
        if self.family == "expression" and not self.expression:
            raise ValueError("family 'expression' needs an expression in s")
        return self


class DiagramRequest(BaseModel):
    model: ModelSpecIn
    lambda_min: float
    lambda_max: float
    n_lambda: int = 201
    n_scan: int = 400


class DiagramResponse(BaseModel):
    config: dict
    csv: str
    points: list[dict]
    n_branches: int
    branches: list[dict]


class PullbackRequest(BaseModel):
    model: ModelSpecIn
    shift: ShiftSpecIn
    r: float = Field(gt=0)
    x0: float
    pullback_tol: float = 1e-7
    with_path: bool = True


class PullbackResponse(BaseModel):
    config: dict
    csv: str
    convergence: float
    horizon: float
    escaped: bool
    x_end: float
    forward_limit: dict | None = None


class ScanRequest(BaseModel):
    model: ModelSpecIn
    shift: ShiftSpecIn
    x0: float
    r_min: float = Field(gt=0, default=0.01)
    r_max: float = 10.0
    n_scan: int = 32
    bisect_tol: float = 1e-3


class ScanResponse(BaseModel):
    config: dict
    csv: str
    windows: list[dict]
    x_plus: float | str | None
    unresolved: list[float]
    samples: list[dict]


class ClassifyRequest(BaseModel):
    model: ModelSpecIn
    shift: ShiftSpecIn
    x0: float
    r_min: float = 0.01
    r_max: float = 10.0
    n_scan: int = 32
    bisect_tol: float = 1e-3
    run_scan: bool = True


class ClassifyResponse(BaseModel):
    config: dict
    report: dict


class PseudoRequest(BaseModel):
    model: ModelSpecIn
    shift: ShiftSpecIn
    x0: float
    r: float = Field(gt=0)
    eps: float = Field(gt=0)


class PseudoResponse(BaseModel):
    config: dict
    csv: str
    jumps: list[dict]
    n_pieces: int
    verify_passed: bool
    checks: list[dict]


class EbmRequest(BaseModel):
    b: str
    c: str
    n_grid: int = 401


class EbmResponse(BaseModel):
    config: dict
    checks: dict
    n_grid: int


class ModelsResponse(BaseModel):
    models: list[dict]
    shift_families: list[str]


class ErrorRecord(BaseModel):
    error: str
    kind: str
