"""Request execution shared by the HTTP service and the CLI."""

from __future__ import annotations

import math

from .. import bifurcation as bif
from .. import models as builtin_models
from .. import nonautonomous as na
from .. import tipping as tp
from ..dynamics import ParameterShift, ScalarField, user_shift
from ..expressions import (
    coefficient_from_expression,
    field_from_expression,
    shape_from_expression,
)
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
    ShiftSpecIn,
)

DEFAULT_EXPR_DOMAIN = (-10.0, 10.0)


def build_field(spec) -> ScalarField:
    if spec.expression is not None:
        return field_from_expression(spec.expression, spec.domain or DEFAULT_EXPR_DOMAIN)
    return builtin_models.build_model(spec.name, spec.constants or None, spec.domain)


def build_shift_obj(spec: ShiftSpecIn) -> ParameterShift:
    if spec.family == "expression":
        shape = shape_from_expression(spec.expression)
        return user_shift(shape, spec.lambda_min, spec.lambda_max)
    return builtin_models.build_shift(spec.family, spec.lambda_min, spec.lambda_max)


def _coefficient(text: str):
    try:
        return float(text)
    except ValueError:
        return coefficient_from_expression(text)


def _limit_payload(fl: na.ForwardLimit) -> dict:
    out: dict = {"status": fl.status.value}
    if fl.equilibrium is not None:
        out["x"] = fl.equilibrium.x
        out["kind"] = fl.equilibrium.kind.value
    if fl.escape_time is not None:
        out["escape_time"] = fl.escape_time
        out["escape_sign"] = fl.escape_sign
    return out


def handle_models() -> ModelsResponse:
    entries = []
    for name, m in builtin_models.BUILTINS.items():
        entries.append(
            {
                "name": name,
                "description": m.description,
                "constants": m.constants,
                "default_domain": list(m.default_domain),
                "default_lambda_range": list(m.default_lambda_range),
                "expression": m.expression(),
            }
        )
    return ModelsResponse(models=entries, shift_families=["tanh", "logistic", "expression"])


def handle_diagram(req: DiagramRequest) -> DiagramResponse:
    field = build_field(req.model)
    diagram = bif.build_diagram(
        field, (req.lambda_min, req.lambda_max), req.n_lambda, req.n_scan
    )
    points = [
        {
            "x": p.x,
            "lambda": p.lam,
            "class": p.klass.value,
            "incident": [{"branch": bid, "side": side} for bid, side in p.incident],
        }
        for p in diagram.points
    ]
    branches = [
        {
            "id": b.id,
            "stability": b.stability.value,
            "lambda_lo": b.lam_lo,
            "lambda_hi": b.lam_hi,
            "x_lo_end": b.samples[0].x,
            "x_hi_end": b.samples[-1].x,
        }
        for b in diagram.branches
    ]
    return DiagramResponse(
        config=req.model_dump(),
        csv=bif.export_diagram_csv(diagram),
        points=points,
        n_branches=len(diagram.branches),
        branches=branches,
    )


def handle_pullback(req: PullbackRequest) -> PullbackResponse:
    field = build_field(req.model)
    shift = build_shift_obj(req.shift)
    pb = na.compute_pullback(
        field, shift, req.r, req.x0, pullback_tol=req.pullback_tol, certify=False
    )
    diagram = bif.build_diagram(field, (shift.lambda_minus, shift.lambda_plus))
    fl = na.forward_limit(pb, diagram)
    if req.with_path:
        try:
            path = na.make_stable_path(diagram, shift, req.x0)
            csv = na.export_pullback_csv(pb, shift, path)
        except Exception:
            csv = _pullback_csv_pathless(pb, shift)
    else:
        csv = _pullback_csv_pathless(pb, shift)
    return PullbackResponse(
        config=req.model_dump(),
        csv=csv,
        convergence=pb.convergence,
        horizon=pb.T,
        escaped=pb.escaped,
        x_end=pb.trajectory.x_end,
        forward_limit=_limit_payload(fl),
    )


def _pullback_csv_pathless(pb: na.PullbackAttractor, shift: ParameterShift) -> str:
    from ..runtime import csv_lines

    tr = pb.trajectory
    rows = (
        (float(t), float(x), shift.shape(pb.r * float(t)), "", "")
        for t, x in zip(tr.t, tr.x)
    )
    return csv_lines("t,x,lambda,path_x,deviation", rows)


def _window_payload(w: tp.RateWindow) -> dict:
    return {
        "r1": w.r1,
        "r2": w.r2,
        "y_plus": w.y_plus,
        "r1_bracket": list(w.r1_bracket),
        "r2_bracket": list(w.r2_bracket),
        "open_ended": w.open_ended,
    }


def handle_scan(req: ScanRequest) -> ScanResponse:
    field = build_field(req.model)
    shift = build_shift_obj(req.shift)
    result = tp.find_rate_windows(
        field, shift, req.x0, req.r_min, req.r_max, req.n_scan, req.bisect_tol
    )
    samples = [
        {"r": s.r, "status": s.status, "x": s.x, "kind": s.kind} for s in result.samples
    ]
    return ScanResponse(
        config=req.model_dump(),
        csv=tp.export_rate_scan_csv(result),
        windows=[_window_payload(w) for w in result.windows],
        x_plus=result.x_plus,
        unresolved=result.unresolved,
        samples=samples,
    )


def handle_classify(req: ClassifyRequest) -> ClassifyResponse:
    field = build_field(req.model)
    shift = build_shift_obj(req.shift)
    sc = tp.ScanConfig(
        r_lo=req.r_min,
        r_hi=req.r_max,
        n_scan=req.n_scan,
        bisect_tol=req.bisect_tol,
        run_scan=req.run_scan,
    )
    report = tp.classify_tipping(field, shift, req.x0, sc)
    import json

    payload = json.loads(tp.export_tipping_report_json(report, indent=0))
    return ClassifyResponse(config=req.model_dump(), report=payload)


def handle_pseudo(req: PseudoRequest) -> PseudoResponse:
    field = build_field(req.model)
    shift = build_shift_obj(req.shift)
    diagram = bif.build_diagram(field, (shift.lambda_minus, shift.lambda_plus))
    path = na.make_stable_path(diagram, shift, req.x0)
    po = na.construct_pseudo_orbit(field, shift, req.r, path, req.eps)
    report = na.verify_pseudo_orbit(po, field, shift, req.r, req.eps)
    jumps = [
        {"t": j.t, "x_left": j.x_left, "x_restart": j.x_restart, "size": j.size}
        for j in po.jumps
    ]
    return PseudoResponse(
        config=req.model_dump(),
        csv=na.export_pseudo_orbit_csv(po, shift),
        jumps=jumps,
        n_pieces=len(po.pieces),
        verify_passed=report["passed"],
        checks=report["checks"],
    )


def handle_ebm(req: EbmRequest) -> EbmResponse:
    b = _coefficient(req.b)
    c = _coefficient(req.c)
    report = tp.energy_balance_report(b, c, req.n_grid)
    return EbmResponse(config=req.model_dump(), checks=report.checks, n_grid=req.n_grid)
