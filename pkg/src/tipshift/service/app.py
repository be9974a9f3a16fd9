"""FastAPI application exposing the tipping analyses."""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__
from ..errors import ExpressionError, TipshiftError
from . import handlers
from .schemas import (
    ClassifyRequest,
    ClassifyResponse,
    DiagramRequest,
    DiagramResponse,
    EbmRequest,
    EbmResponse,
    ModelsResponse,
    PseudoRequest,
    PseudoResponse,
    PullbackRequest,
    PullbackResponse,
    ScanRequest,
    ScanResponse,
)


def create_app() -> FastAPI:
    app = FastAPI(
        title="tipshift",
        version=__version__,
        description=(
            "Bifurcation- and rate-induced tipping analysis for scalar "
            "nonautonomous ODEs driven by smooth parameter shifts."
        ),
    )

    @app.exception_handler(TipshiftError)
    async def _tipshift_error(request: Request, exc: TipshiftError):
        # bad user expressions are client errors; numerical failures are 422
        status = 400 if isinstance(exc, ExpressionError) else 422
        return JSONResponse(status_code=status, content={"error": str(exc), "kind": exc.kind})

    @app.exception_handler(ValueError)
    async def _value_error(request: Request, exc: ValueError):
        return JSONResponse(status_code=400, content={"error": str(exc), "kind": "argument"})

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok", "version": __version__}

    @app.get("/models", response_model=ModelsResponse)
    def models() -> ModelsResponse:
        return handlers.handle_models()

    @app.post("/diagram", response_model=DiagramResponse)
    def diagram(req: DiagramRequest) -> DiagramResponse:
        return handlers.handle_diagram(req)

    @app.post("/pullback", response_model=PullbackResponse)
    def pullback(req: PullbackRequest) -> PullbackResponse:
        return handlers.handle_pullback(req)

    @app.post("/scan", response_model=ScanResponse)
    def scan(req: ScanRequest) -> ScanResponse:
        return handlers.handle_scan(req)

    @app.post("/classify", response_model=ClassifyResponse)
    def classify(req: ClassifyRequest) -> ClassifyResponse:
        return handlers.handle_classify(req)

    @app.post("/pseudo", response_model=PseudoResponse)
    def pseudo(req: PseudoRequest) -> PseudoResponse:
        return handlers.handle_pseudo(req)

    @app.post("/ebm", response_model=EbmResponse)
    def ebm(req: EbmRequest) -> EbmResponse:
        return handlers.handle_ebm(req)

    return app


app = create_app()
