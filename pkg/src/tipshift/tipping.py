"""Tipping classification: connectivity, basin stability, and rate windows.

The geometry of the frozen-system diagram decides most questions before any
integration happens: reachability of future equilibria along the shift's
parameter course (connectivity), and whether the basin of the current
attractor keeps containing everywhere the path has already been (forward
basin stability, which rules out rate-induced escape at any rate). The rate
scan then locates the windows where the pullback attractor actually tips.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from typing import Callable

import numpy as np

from .bifurcation import (
    BasinInterval,
    BifurcationDiagram,
    Branch,
    Equilibrium,
    Kind,
    PointClass,
    build_diagram,
)
from .dynamics import (
    DEFAULT_CONFIG,
    IntegratorConfig,
    ParameterShift,
    ScalarField,
    monotone_segments,
    user_shift,
)
from .errors import DeadEndError, NeedsManualRoutingError
from .nonautonomous import (
    DEFAULT_ROUTING,
    ForwardLimit,
    LimitStatus,
    RoutingPolicy,
    StablePath,
    compute_pullback,
    forward_limit,
    make_stable_path,
)
from .runtime import csv_lines, parallel_map, to_json17

__all__ = [
    "MonotoneSweep",
    "ConnectivityGraph",
    "RateWindow",
    "RateScanResult",
    "ScanConfig",
    "TippingReport",
    "CrossBasinWitness",
    "CommittedStartReport",
    "NeighborhoodReport",
    "EnergyBalanceReport",
    "sweep_decompose",
    "build_connectivity",
    "lambda_connected",
    "reachable_future_equilibria",
    "forward_basin_stable",
    "find_rate_windows",
    "classify_tipping",
    "cross_basin_witness",
    "committed_start_check",
    "no_rtip_neighborhood",
    "energy_balance_report",
    "export_tipping_report_json",
    "export_rate_scan_csv",
]

BASIN_MARGIN = 2e-6  # safety inside basin interval endpoints


@dataclass(frozen=True)
class MonotoneSweep:
    """Monotone lambda legs of a shift, in traversal order."""

    segments: list[tuple[float, float]]  # (lambda_from, lambda_to)
    s_bounds: list[tuple[float, float]]

    @property
    def n_segments(self) -> int:
        return len(self.segments)


def sweep_decompose(
    shift: ParameterShift, n_probe: int = 2001, amplitude_tol: float | None = None
) -> MonotoneSweep:
    """Split the shift at its interior extrema (sub-tolerance wiggles ignored)."""
    s_segs = monotone_segments(shift, n_probe, amplitude_tol)
    lam_segs = [(shift.shape(a), shift.shape(b)) for a, b in s_segs]
    # the truncated tails stand in for the asymptotic limits
    lam_segs[0] = (shift.lambda_minus, lam_segs[0][1])
    lam_segs[-1] = (lam_segs[-1][0], shift.lambda_plus)
    return MonotoneSweep(lam_segs, s_segs)


# ---------------------------------------------------------------------------
# connectivity


@dataclass(frozen=True)
class ConnectivityGraph:
    """Stable branch segments joined at the diagram's bifurcation points."""

    diagram: BifurcationDiagram
    # point index -> (stable branch ids left of it, right of it)
    sides: dict[int, tuple[tuple[int, ...], tuple[int, ...]]]

    def stable_branch_at(self, x: float, lam: float) -> Branch:
        b = self.diagram.branch_containing(x, lam)
        if b is None:
            raise ValueError(f"no branch near (x={x:g}, lambda={lam:g})")
        if b.stability is not Kind.STABLE:
            raise ValueError(f"(x={x:g}, lambda={lam:g}) is not on a stable branch")
        return b


def build_connectivity(diagram: BifurcationDiagram) -> ConnectivityGraph:
    sides: dict[int, tuple[tuple[int, ...], tuple[int, ...]]] = {}
    for k, p in enumerate(diagram.points):
        left = tuple(
            bid
            for bid, side in p.incident
            if side == "left" and diagram.branches[bid].stability is Kind.STABLE
        )
        right = tuple(
            bid
            for bid, side in p.incident
            if side == "right" and diagram.branches[bid].stability is Kind.STABLE
        )
        sides[k] = (left, right)
    return ConnectivityGraph(diagram, sides)


def _reachable_over_sweep(
    graph: ConnectivityGraph, sweep: MonotoneSweep, start_branch: Branch
) -> set[int]:
    """Branch ids reachable at the end of the final sweep segment."""
    diagram = graph.diagram
    lam_tol = 1e-9 * (diagram.lambda_plus - diagram.lambda_minus)
    current: set[int] = {start_branch.id}
    for lam_from, lam_to in sweep.segments:
        direction = 1 if lam_to > lam_from else -1
        alive: set[int] = set()
        frontier = list(current)
        seen: set[int] = set(frontier)
        while frontier:
            bid = frontier.pop()
            b = diagram.branches[bid]
            end = b.lam_hi if direction > 0 else b.lam_lo
            if (end - lam_to) * direction >= -lam_tol:
                alive.add(bid)
                continue
            pt_idx = b.end_point if direction > 0 else b.start_point
            if pt_idx is None:
                continue  # branch dies at a domain edge: this route stops
            p = diagram.points[pt_idx]
            if p.klass is PointClass.OTHER:
                raise NeedsManualRoutingError(
                    f"unclassified bifurcation at (x={p.x:.6g}, lambda={p.lam:.6g}) "
                    "touches a candidate route"
                )
            conts = graph.sides[pt_idx][1 if direction > 0 else 0]
            for nb in conts:
                if nb != bid and nb not in seen:
                    seen.add(nb)
                    frontier.append(nb)
        current = alive
        if not current:
            break
    return current


def lambda_connected(
    graph: ConnectivityGraph,
    sweep: MonotoneSweep,
    from_point: tuple[float, float],
    to_point: tuple[float, float],
) -> bool:
    """Whether a stable path along the sweep joins the two stable equilibria."""
    start = graph.stable_branch_at(*from_point)
    target = graph.stable_branch_at(*to_point)
    x_to, lam_to = to_point
    if abs(target.x_at(lam_to) - x_to) > 0.02 * (
        graph.diagram.field.state_domain[1] - graph.diagram.field.state_domain[0]
    ):
        raise ValueError(f"target (x={x_to:g}, lambda={lam_to:g}) is not on a stable branch")
    return target.id in _reachable_over_sweep(graph, sweep, start)


def reachable_future_equilibria(
    graph: ConnectivityGraph, sweep: MonotoneSweep, from_point: tuple[float, float]
) -> list[Equilibrium]:
    """Future-limit equilibria reachable by stable paths along the sweep."""
    start = graph.stable_branch_at(*from_point)
    lam_plus = graph.diagram.lambda_plus
    out: list[Equilibrium] = []
    for bid in sorted(_reachable_over_sweep(graph, sweep, start)):
        b = graph.diagram.branches[bid]
        if b.covers(lam_plus, tol=1e-9):
            for s in (b.samples[-1], b.samples[0]):
                if abs(s.lam - lam_plus) < 1e-9 * max(1.0, abs(lam_plus)):
                    out.append(s)
                    break
    return sorted(out, key=lambda e: e.x)


# ---------------------------------------------------------------------------
# forward basin stability


def _basin_bounds(eqs: list[Equilibrium], x_star: float) -> tuple[float, float]:
    lo, hi = -math.inf, math.inf
    for e in eqs:
        if e.x < x_star - 1e-12:
            lo = max(lo, e.x)
        elif e.x > x_star + 1e-12:
            hi = min(hi, e.x)
    return lo, hi


def forward_basin_stable(
    diagram: BifurcationDiagram,
    path: StablePath,
    n_s: int = 200,
    margin: float = BASIN_MARGIN,
) -> tuple[bool, dict | None]:
    """Every earlier path position must lie in the basin of the current one.

    Returns (True, None), or (False, witness) with the first violating pair
    of path times (u, v) and the offending basin bound.
    """
    s_lo, s_hi = float(path.s_grid[0]), float(path.s_grid[-1])
    ss = np.linspace(s_lo, s_hi, n_s)
    xs = np.asarray(path.value(ss))

    run_min = run_max = float(xs[0])
    argmin_s, argmax_s = float(ss[0]), float(ss[0])
    for k in range(len(ss)):
        s_v = float(ss[k])
        x_v = float(xs[k])
        if x_v < run_min:
            run_min, argmin_s = x_v, s_v
        if x_v > run_max:
            run_max, argmax_s = x_v, s_v
        lam_v = float(path.shift.shape(s_v))
        eqs = diagram.equilibria_at(lam_v)
        # skip samples sitting essentially on a bifurcation point
        near = min(eqs, key=lambda e: abs(e.x - x_v), default=None)
        if near is None or abs(near.x - x_v) > 1e-3 * max(1.0, abs(x_v)):
            continue  # path sample between grid branches; neighbours cover it
        if near.kind is Kind.BIFURCATION:
            continue
        lo, hi = _basin_bounds(eqs, near.x)
        if run_min <= lo + margin:
            return False, {
                "u": argmin_s,
                "v": s_v,
                "x_u": run_min,
                "bound": lo,
                "side": "below",
                "lambda_v": lam_v,
            }
        if run_max >= hi - margin:
            return False, {
                "u": argmax_s,
                "v": s_v,
                "x_u": run_max,
                "bound": hi,
                "side": "above",
                "lambda_v": lam_v,
            }
    return True, None


# ---------------------------------------------------------------------------
# rate scan


@dataclass(frozen=True)
class RateWindow:
    r1: float
    r2: float
    y_plus: float | str  # tipped-to equilibrium state, or "+inf"/"-inf"
    r1_bracket: tuple[float, float]
    r2_bracket: tuple[float, float]
    open_ended: bool = False


@dataclass(frozen=True)
class RateSample:
    r: float
    status: str  # converged | diverged | unresolved
    x: float | None
    kind: str | None


@dataclass(frozen=True)
class RateScanResult:
    r_grid: list[float]
    samples: list[RateSample]
    windows: list[RateWindow]
    x_plus: float | str | None  # the small-rate reference limit
    unresolved: list[float]


def _limit_label(fl: ForwardLimit) -> tuple[str, float | str | None, str | None]:
    if fl.status is LimitStatus.CONVERGED:
        return "converged", float(fl.equilibrium.x), fl.equilibrium.kind.value
    if fl.status is LimitStatus.DIVERGED:
        return "diverged", "+inf" if fl.escape_sign > 0 else "-inf", None
    return "unresolved", None, None


def _same_limit(a: float | str | None, b: float | str | None, tol: float) -> bool:
    if a is None or b is None:
        return False
    if isinstance(a, str) or isinstance(b, str):
        return a == b
    return abs(a - b) <= tol


def find_rate_windows(
    field: ScalarField,
    shift: ParameterShift,
    x_minus: float,
    r_lo: float,
    r_hi: float,
    n_scan: int = 32,
    bisect_tol: float = 1e-3,
    diagram: BifurcationDiagram | None = None,
    cfg: IntegratorConfig = DEFAULT_CONFIG,
    limit_tol: float = 1e-4,
) -> RateScanResult:
    """Log-spaced scan of forward limits with bisection-refined window edges.

    Adjacent rates with different limits bracket a critical rate; each bracket
    is narrowed to a relative width of bisect_tol. Samples whose limit stays
    undecided after horizon extension are reported as unresolved, never
    silently classified.
    """
    if r_lo <= 0 or r_hi <= r_lo:
        raise ValueError("need 0 < r_lo < r_hi")
    if n_scan < 16:
        raise ValueError("n_scan must be >= 16")
    diag = diagram if diagram is not None else build_diagram(
        field, (shift.lambda_minus, shift.lambda_plus)
    )

    def limit_at(r: float) -> ForwardLimit:
        pb = compute_pullback(field, shift, r, x_minus, cfg, certify=False, max_retries=2)
        fl = forward_limit(pb, diag)
        extend = 4.0
        while fl.status is LimitStatus.UNDECIDED and extend <= 16.0:
            span = pb.trajectory.t1 - pb.trajectory.t0
            pb = compute_pullback(
                field, shift, r, x_minus, cfg, certify=False, max_retries=2,
                t_fwd=pb.trajectory.t0 + extend * span,
            )
            fl = forward_limit(pb, diag)
            extend *= 2.0
        return fl

    rs = [float(v) for v in np.geomspace(r_lo, r_hi, n_scan)]
    limits = parallel_map(limit_at, rs)
    samples = []
    for r, fl in zip(rs, limits):
        status, x, kind = _limit_label(fl)
        samples.append(RateSample(r, status, x if not isinstance(x, str) else None, kind)
                       if status == "converged"
                       else RateSample(r, status, None, x if isinstance(x, str) else None))
    labels: list[float | str | None] = []
    for fl in limits:
        _status, x, _kind = _limit_label(fl)
        labels.append(x)

    resolved = [(r, lab) for r, lab in zip(rs, labels) if lab is not None]
    unresolved = [r for r, lab in zip(rs, labels) if lab is None]
    if not resolved:
        return RateScanResult(rs, samples, [], None, unresolved)
    x_plus = resolved[0][1]
    scale = limit_tol * max(1.0, abs(x_plus)) if not isinstance(x_plus, str) else limit_tol

    def is_ref(lab) -> bool:
        return _same_limit(lab, x_plus, scale)

    def refine(r_out: float, r_in: float) -> tuple[float, float]:
        """Bracket (outside, inside) narrowed to relative width bisect_tol."""
        a, b = r_out, r_in
        while abs(b - a) > bisect_tol * min(a, b):
            m = math.sqrt(a * b) if (a > 0 and b > 0) else 0.5 * (a + b)
            fl = limit_at(m)
            _st, lab, _k = _limit_label(fl)
            if lab is None:
                break  # keep the bracket; report stays honest about width
            if is_ref(lab):
                a = m
            else:
                b = m
        return a, b

    windows: list[RateWindow] = []
    i = 0
    n = len(resolved)
    while i < n:
        r_i, lab_i = resolved[i]
        if is_ref(lab_i):
            i += 1
            continue
        j = i
        while j + 1 < n and not is_ref(resolved[j + 1][1]):
            j += 1
        inside_labels = [resolved[k][1] for k in range(i, j + 1)]
        y_plus = inside_labels[len(inside_labels) // 2]
        if i > 0:
            a, b = refine(resolved[i - 1][0], r_i)
            r1, r1_bracket = 0.5 * (a + b), (a, b)
        else:
            r1, r1_bracket = r_i, (r_i, r_i)
        open_ended = j == n - 1
        if not open_ended:
            a, b = refine(resolved[j + 1][0], resolved[j][0])
            r2, r2_bracket = 0.5 * (a + b), (min(a, b), max(a, b))
        else:
            r2, r2_bracket = resolved[j][0], (resolved[j][0], resolved[j][0])
        windows.append(RateWindow(r1, r2, y_plus, r1_bracket, r2_bracket, open_ended))
        i = j + 1

    return RateScanResult(rs, samples, windows, x_plus, unresolved)


# ---------------------------------------------------------------------------
# classification


@dataclass(frozen=True)
class ScanConfig:
    r_lo: float = 0.01
    r_hi: float = 10.0
    n_scan: int = 32
    bisect_tol: float = 1e-3
    small_r_start: float = 0.1
    max_halvings: int = 12
    n_lambda: int = 201
    limit_tol: float = 1e-4
    run_scan: bool = True


@dataclass
class TippingReport:
    model: str
    shift_family: str
    x_minus: float
    reference_limit: float | str | None  # robust small-rate limit
    reference_kind: str | None
    connected: bool | None
    b_tipping: bool
    windows: list[RateWindow]
    scan: RateScanResult | None
    predicates: dict
    provenance: dict
    small_r_trace: list[tuple[float, float | str | None]] = dc_field(default_factory=list)

    @property
    def verdict(self) -> str:
        if self.reference_limit is None:
            return "unresolved"
        if self.b_tipping:
            return "b-tipping"
        if self.windows:
            return "r-tipping-windows"
        return "endpoint-tracks"


def classify_tipping(
    field: ScalarField,
    shift: ParameterShift,
    x_minus: float,
    scan: ScanConfig | None = None,
    routing: RoutingPolicy = DEFAULT_ROUTING,
    diagram: BifurcationDiagram | None = None,
) -> TippingReport:
    """Full verdict for one (field, shift, start): B-tipping, windows, predicates.

    The small-rate limit is declared robust once two successive halvings of r
    agree; if it is not reachable by any stable path for this shift shape the
    verdict is bifurcation-forced tipping, cross-checked by requiring a
    bifurcation point on the starting branch strictly inside the range.
    A divergent small-rate limit (possible when a fold annihilates every
    future equilibrium) counts as tipping to infinity.
    """
    sc = scan or ScanConfig()
    diag = diagram if diagram is not None else build_diagram(
        field, (shift.lambda_minus, shift.lambda_plus), n_lambda=sc.n_lambda
    )
    graph = build_connectivity(diag)
    sweep = sweep_decompose(shift)

    # robust small-rate limit: halve until two successive labels agree
    trace: list[tuple[float, float | str | None]] = []
    ref: float | str | None = None
    ref_kind: str | None = None
    r = sc.small_r_start
    prev: float | str | None = None
    prev_kind: str | None = None
    for _ in range(sc.max_halvings):
        pb = compute_pullback(field, shift, r, x_minus, certify=False, max_retries=2)
        fl = forward_limit(pb, diag)
        _status, lab, kind = _limit_label(fl)
        trace.append((r, lab))
        tol_here = sc.limit_tol * max(1.0, abs(lab)) if isinstance(lab, float) else sc.limit_tol
        if lab is not None and prev is not None and _same_limit(lab, prev, tol_here):
            ref, ref_kind = lab, kind
            break
        prev, prev_kind = lab, kind
        r *= 0.5

    predicates: dict = {}
    provenance = {
        "r_lo": sc.r_lo,
        "r_hi": sc.r_hi,
        "n_scan": sc.n_scan,
        "bisect_tol": sc.bisect_tol,
        "small_r_start": sc.small_r_start,
        "limit_tol": sc.limit_tol,
        "n_lambda": sc.n_lambda,
        "basin_margin": BASIN_MARGIN,
    }

    if ref is None:
        return TippingReport(
            field.name, shift.family, x_minus, None, None, None, False, [], None,
            predicates, provenance, trace,
        )

    # connectivity of the realized limit
    connected: bool | None = None
    if isinstance(ref, str):
        connected = False  # escape to infinity is never on a stable path
    else:
        try:
            connected = lambda_connected(graph, sweep, (x_minus, shift.lambda_minus), (ref, shift.lambda_plus))
        except ValueError:
            connected = None  # the limit is not a stable equilibrium (e.g. invariant line)

    b_tip = connected is False

    if b_tip:
        # a bifurcation must sit on the starting branch strictly inside the range
        start_branch = diag.branch_containing(x_minus, shift.lambda_minus)
        ok = False
        if start_branch is not None:
            for pt_idx in (start_branch.start_point, start_branch.end_point):
                if pt_idx is not None:
                    p = diag.points[pt_idx]
                    if shift.lambda_minus < p.lam < shift.lambda_plus:
                        ok = True
        predicates["fold_on_start_branch"] = ok

    # path-based predicates
    path: StablePath | None = None
    try:
        path = make_stable_path(diag, shift, x_minus, routing)
    except DeadEndError as err:
        predicates["path"] = f"dead-end at (x={err.x:.6g}, lambda={err.lam:.6g})"
    except Exception as err:  # noqa: BLE001 - recorded, not fatal
        predicates["path"] = f"unavailable: {err}"

    if path is not None:
        fbs, witness = forward_basin_stable(diag, path)
        predicates["forward_basin_stable"] = fbs
        if witness is not None:
            predicates["forward_basin_witness"] = witness
        single_branch = len({bid for bid, _a, _b in path.segments}) == 1
        if single_branch:
            try:
                w = cross_basin_witness(diag, path)
                predicates["cross_basin_witness"] = (
                    None if w is None else {"u": w.u, "v": w.v, "x_u": w.x_u, "y_branch": w.y_branch_id}
                )
            except ValueError as err:
                predicates["cross_basin_witness"] = f"not-applicable: {err}"
            cs = committed_start_check(diag, shift, x_minus, graph=graph, sweep=sweep, path=path)
            predicates["committed_start"] = cs.fired
            if cs.fired:
                predicates["committed_start_rate"] = cs.sufficient_rate
        nb = no_rtip_neighborhood(diag, x_minus, shift.lambda_minus)
        predicates["safe_range_nu"] = nb.nu

    scan_result: RateScanResult | None = None
    windows: list[RateWindow] = []
    if sc.run_scan and not b_tip:
        scan_result = find_rate_windows(
            field, shift, x_minus, sc.r_lo, sc.r_hi, sc.n_scan, sc.bisect_tol,
            diagram=diag, limit_tol=sc.limit_tol,
        )
        windows = scan_result.windows

    return TippingReport(
        field.name, shift.family, x_minus, ref, ref_kind, connected, b_tip,
        windows, scan_result, predicates, provenance, trace,
    )


# ---------------------------------------------------------------------------
# sufficient-condition predicates


@dataclass(frozen=True)
class CrossBasinWitness:
    """Earlier path position inside a competitor branch's later basin."""

    u: float
    v: float
    x_u: float
    basin: tuple[float, float]
    y_branch_id: int
    shift: ParameterShift  # reparametrized shift with a fast middle over [u, v]
    M: float
    eta: float


def _fast_middle_shift(
    shift: ParameterShift, u: float, v: float, M: float, eta: float
) -> ParameterShift:
    """Reparametrize so the stretch [u, v] of shift time passes at speed M.

    The speed profile in original shift time y is 1 outside [u, v], M inside
    [u+eta, v-eta], with C^2 smoothstep ramps; the new time is its inverse
    integral. The asymptotic values and containment are untouched.
    """

    def smooth(t: float) -> float:
        if t <= 0.0:
            return 0.0
        if t >= 1.0:
            return 1.0
        return t * t * t * (10.0 + t * (-15.0 + 6.0 * t))

    def speed(y: float) -> float:
        if y <= u or y >= v:
            return 1.0
        if y < u + eta:
            return 1.0 + (M - 1.0) * smooth((y - u) / eta)
        if y > v - eta:
            return 1.0 + (M - 1.0) * smooth((v - y) / eta)
        return M

    ys = np.linspace(u, v, 4001)
    inv = 1.0 / np.array([speed(float(y)) for y in ys])
    # new-time coordinates of the original times ys, with s(u) = u
    s_of_y = u + np.concatenate(([0.0], np.cumsum(0.5 * (inv[1:] + inv[:-1]) * np.diff(ys))))
    s_v = float(s_of_y[-1])

    def sigma(s: float) -> float:
        if s <= u:
            return s
        if s >= s_v:
            return v + (s - s_v)
        return float(np.interp(s, s_of_y, ys))

    shape = lambda s: shift.shape(sigma(s))
    shape_ds = lambda s: shift.shape_ds(sigma(s)) * speed(sigma(s))
    return ParameterShift(
        shape,
        shape_ds,
        shift.lambda_minus,
        shift.lambda_plus,
        shift.s_support,
        "user",
        shift.asymptotic_tol,
    )


def cross_basin_witness(
    diagram: BifurcationDiagram,
    path: StablePath,
    n_grid: int = 160,
    M: float = 1e3,
    margin: float = BASIN_MARGIN,
) -> CrossBasinWitness | None:
    """Search u < v with the path's X(u) inside a competitor's basin at L(v).

    Requires a single-branch path and at least one other stable branch ending
    at the future limit; returns the first witness together with a
    reparametrized shift whose fast middle realizes the tipping.
    """
    branch_ids = {bid for bid, _a, _b in path.segments}
    if len(branch_ids) != 1:
        raise ValueError("the path must traverse a single stable branch")
    own = branch_ids.pop()
    lam_plus = diagram.lambda_plus
    competitors = [
        b
        for b in diagram.stable_branches()
        if b.id != own and b.covers(lam_plus, tol=1e-9)
        and abs(b.x_at(lam_plus) - path.x_plus) > 1e-6
    ]
    if not competitors:
        raise ValueError("no second stable branch reaches the future limit")

    ss = np.linspace(float(path.s_grid[0]), float(path.s_grid[-1]), n_grid)
    xs = np.asarray(path.value(ss))
    run_min = run_max = float(xs[0])
    arg_min, arg_max = float(ss[0]), float(ss[0])
    for k in range(1, len(ss)):
        s_v = float(ss[k])
        if xs[k] < run_min:
            run_min, arg_min = float(xs[k]), s_v
        if xs[k] > run_max:
            run_max, arg_max = float(xs[k]), s_v
        lam_v = float(path.shift.shape(s_v))
        eqs = diagram.equilibria_at(lam_v)
        for y in competitors:
            if not y.covers(lam_v, tol=1e-12):
                continue
            y_eq = min(eqs, key=lambda e: abs(e.x - y.x_at(lam_v)), default=None)
            if y_eq is None or y_eq.kind is not Kind.STABLE:
                continue
            lo, hi = _basin_bounds(eqs, y_eq.x)
            for x_u, s_u in ((run_min, arg_min), (run_max, arg_max)):
                if lo + margin < x_u < hi - margin and s_u < s_v:
                    eta = (s_v - s_u) / 100.0
                    emitted = _fast_middle_shift(path.shift, s_u, s_v, M, eta)
                    return CrossBasinWitness(
                        s_u, s_v, x_u, (lo, hi), y.id, emitted, M, eta
                    )
    return None


@dataclass(frozen=True)
class CommittedStartReport:
    fired: bool
    y_plus: float | str | None = None
    sufficient_rate: float | None = None
    reason: str = ""


def committed_start_check(
    diagram: BifurcationDiagram,
    shift: ParameterShift,
    x_minus: float,
    graph: ConnectivityGraph | None = None,
    sweep: MonotoneSweep | None = None,
    path: StablePath | None = None,
    margin: float = BASIN_MARGIN,
) -> CommittedStartReport:
    """Is the start already inside the frozen future basin of an unreachable
    competitor? If so a fast enough shift must tip onto it; the reported rate
    (from a crude speed bound over the dwell interval) is a sufficient
    starting point for a scan, not a sharp threshold.
    """
    graph = graph or build_connectivity(diagram)
    sweep = sweep or sweep_decompose(shift)
    if path is None:
        try:
            path = make_stable_path(diagram, shift, x_minus)
        except DeadEndError:
            return CommittedStartReport(False, reason="no stable path from the start")
    if len({bid for bid, _a, _b in path.segments}) != 1:
        return CommittedStartReport(False, reason="path traverses several branches")

    lam_plus = diagram.lambda_plus
    eqs = diagram.equilibria_at(lam_plus)
    if not eqs:
        return CommittedStartReport(False, reason="the future limit system has no equilibria")

    # competitors: stable future equilibria plus the divergent pseudo-attractors
    # beyond the outermost equilibria (a runaway counts as an unreachable target)
    candidates: list[tuple[float | str, tuple[float, float]]] = []
    for y in eqs:
        if y.kind is Kind.STABLE and abs(y.x - path.x_plus) > 1e-6:
            candidates.append((y.x, _basin_bounds(eqs, y.x)))
    probe = 1e-3 * max(1.0, abs(eqs[0].x))
    if diagram.field.rhs(eqs[0].x - probe, lam_plus) < 0:
        candidates.append(("-inf", (-math.inf, eqs[0].x)))
    if diagram.field.rhs(eqs[-1].x + probe, lam_plus) > 0:
        candidates.append(("+inf", (eqs[-1].x, math.inf)))

    for y_label, (lo, hi) in candidates:
        if isinstance(y_label, float):
            try:
                conn = lambda_connected(
                    graph, sweep, (x_minus, shift.lambda_minus), (y_label, lam_plus)
                )
            except (ValueError, NeedsManualRoutingError):
                continue
            if conn:
                continue
        if not (lo + margin < x_minus < hi - margin):
            continue
        # crude sufficient rate: outrun the drift over the dwell interval
        gaps = [g for g in (x_minus - lo, hi - x_minus) if math.isfinite(g)]
        eps = min(0.25 * min(gaps) if gaps else 1.0, 1.0)
        K = shift.s_support
        lam_grid = np.linspace(shift.lambda_minus, shift.lambda_plus, 101)
        x_grid = np.linspace(x_minus - 2 * eps, x_minus + 2 * eps, 41)
        M_bound = max(
            abs(diagram.field.rhs(float(x), float(l))) for x in x_grid for l in lam_grid
        )
        rate = 2.0 * M_bound * K / eps if eps > 0 else math.inf
        return CommittedStartReport(True, y_plus=y_label, sufficient_rate=rate)
    return CommittedStartReport(False, reason="start not inside any unreachable future basin")


@dataclass(frozen=True)
class NeighborhoodReport:
    nu: float
    lambda_minus: float
    post_fold_interval: tuple[float, float] | None = None


def no_rtip_neighborhood(
    diagram: BifurcationDiagram,
    x_minus: float,
    lambda_minus: float,
    n_grid: int = 256,
    margin: float = BASIN_MARGIN,
) -> NeighborhoodReport:
    """Largest grid-certified nu with the branch path over [lambda_minus,
    lambda_minus+nu] forward basin-stable for every monotone shift.

    When the branch is born at a fold, the interval on which it sits between
    the fold's unstable sibling (from below) and the next unstable branch
    (from above) is certified separately: there the ordering alone already
    forbids rate-induced escape.
    """
    branch = diagram.branch_containing(x_minus, lambda_minus)
    if branch is None or branch.stability is not Kind.STABLE:
        raise ValueError(f"(x={x_minus:g}, lambda={lambda_minus:g}) is not on a stable branch")
    lam_end = min(branch.lam_hi, diagram.lambda_plus)
    lams = np.linspace(lambda_minus, lam_end, n_grid)
    run_min = run_max = branch.x_at(lambda_minus)
    nu = 0.0
    for lam in lams:
        x_here = branch.x_at(float(lam))
        run_min = min(run_min, x_here)
        run_max = max(run_max, x_here)
        eqs = diagram.equilibria_at(float(lam))
        near = min(eqs, key=lambda e: abs(e.x - x_here), default=None)
        if near is None:
            break
        lo, hi = _basin_bounds(eqs, near.x)
        if run_min <= lo + margin or run_max >= hi - margin:
            break
        nu = float(lam) - lambda_minus

    post_fold = None
    if branch.start_point is not None:
        p = diagram.points[branch.start_point]
        if p.klass is PointClass.SADDLE_NODE:
            lam0 = p.lam
            sibling = None
            for bid, side in p.incident:
                b2 = diagram.branches[bid]
                if bid != branch.id and side == "right" and b2.stability is Kind.UNSTABLE:
                    sibling = b2
            if sibling is not None:
                lam_hi = min(branch.lam_hi, sibling.lam_hi, diagram.lambda_plus)
                grid = np.linspace(lam0, lam_hi, n_grid)[1:]
                sib_max = -math.inf
                lam1 = lam0
                for lam in grid:
                    lamf = float(lam)
                    sib_max = max(sib_max, sibling.x_at(lamf))
                    x_here = branch.x_at(lamf)
                    eqs = diagram.equilibria_at(lamf)
                    above = [e.x for e in eqs if e.x > x_here + 1e-9]
                    upper = min(above) if above else math.inf
                    below_ok = (sib_max < x_here) if branch.x_at(lamf) > sibling.x_at(lamf) else (
                        sib_max > x_here
                    )
                    if not below_ok or not (x_here < upper - margin):
                        break
                    lam1 = lamf
                if lam1 > lam0:
                    post_fold = (lam0, lam1)
    return NeighborhoodReport(nu, lambda_minus, post_fold)


# ---------------------------------------------------------------------------
# energy-balance analyzer


@dataclass(frozen=True)
class EnergyBalanceReport:
    """Which geometric conditions on b(lambda), c(lambda) fire, with witnesses."""

    checks: dict
    n_grid: int

    def fires(self, name: str) -> bool:
        return bool(self.checks[name]["fires"])


def energy_balance_report(
    b: Callable[[float], float] | float,
    c: Callable[[float], float] | float,
    n_grid: int = 401,
) -> EnergyBalanceReport:
    """Geometric tipping predicates for dX/dt = -X^2 + b X - c over [0, 1].

    Branches exist where b^2 > 4c: stable (b + sqrt(b^2-4c))/2, unstable
    (b - sqrt(b^2-4c))/2. The five checks: branch persistence (no fold in
    range), global branch ordering (no rate-induced escape at any rate),
    crossed levels at ordered times (escape for some shift), start below the
    future unstable point (escape for the monotone shift itself), and a
    discriminant sign change (fold-forced tipping for every shift).
    """
    b_of = b if callable(b) else (lambda _l, _v=float(b): _v)
    c_of = c if callable(c) else (lambda _l, _v=float(c): _v)
    lams = np.linspace(0.0, 1.0, n_grid)
    bs = np.array([b_of(float(l)) for l in lams])
    cs = np.array([c_of(float(l)) for l in lams])
    disc = bs * bs - 4.0 * cs

    checks: dict = {}
    all_exist = bool(np.all(disc > 0))
    k_min = int(np.argmin(disc))
    checks["no_fold_in_range"] = {
        "fires": all_exist,
        "witness": {"lambda": float(lams[k_min]), "discriminant": float(disc[k_min])},
    }

    if all_exist:
        xs = 0.5 * (bs + np.sqrt(disc))
        xu = 0.5 * (bs - np.sqrt(disc))
        i_min, i_max = int(np.argmin(xs)), int(np.argmax(xu))
        ordered = bool(xs[i_min] > xu[i_max])
        checks["no_rate_tipping"] = {
            "fires": ordered,
            "witness": {
                "min_stable": float(xs[i_min]),
                "at_lambda": float(lams[i_min]),
                "max_unstable": float(xu[i_max]),
                "unstable_at": float(lams[i_max]),
            },
        }
        # exists mu < nu with stable(mu) < unstable(nu)
        run_min = np.minimum.accumulate(xs)
        run_arg = np.zeros(n_grid, dtype=int)
        best = 0
        for k in range(n_grid):
            if xs[k] < xs[best]:
                best = k
            run_arg[k] = best
        crossed = None
        for k in range(1, n_grid):
            if run_min[k - 1] < xu[k]:
                crossed = {
                    "mu": float(lams[run_arg[k - 1]]),
                    "nu": float(lams[k]),
                    "stable_mu": float(run_min[k - 1]),
                    "unstable_nu": float(xu[k]),
                }
                break
        checks["rate_tipping_some_shift"] = {"fires": crossed is not None, "witness": crossed}
        checks["rate_tipping_this_shift"] = {
            "fires": bool(xs[0] < xu[-1]),
            "witness": {"stable_start": float(xs[0]), "unstable_end": float(xu[-1])},
        }
    else:
        for name in ("no_rate_tipping", "rate_tipping_some_shift", "rate_tipping_this_shift"):
            checks[name] = {"fires": False, "witness": "branches do not persist over the range"}

    sign_change = bool(disc[0] > 0 and np.any(disc < 0))
    k_neg = int(np.argmax(disc < 0)) if np.any(disc < 0) else None
    checks["forced_tipping_any_shift"] = {
        "fires": sign_change,
        "witness": None if k_neg is None else {"lambda": float(lams[k_neg]), "discriminant": float(disc[k_neg])},
    }
    return EnergyBalanceReport(checks, n_grid)


# ---------------------------------------------------------------------------
# export


def export_rate_scan_csv(result: RateScanResult) -> str:
    def window_id(r: float) -> int:
        for i, w in enumerate(result.windows):
            if w.r1 <= r <= w.r2 or (w.open_ended and r >= w.r1):
                return i
        return -1

    rows = []
    for s in result.samples:
        limit_x = s.x if s.x is not None else (s.kind if s.status == "diverged" else "")
        rows.append((s.r, limit_x, s.kind or s.status, window_id(s.r)))
    return csv_lines("r,limit_x,limit_kind,window_id", rows)


def export_tipping_report_json(report: TippingReport, indent: int = 2) -> str:
    verdicts = []
    if report.scan is not None:
        for s in report.scan.samples:
            verdicts.append(
                {"r": s.r, "limit": s.x if s.x is not None else s.kind, "kind": s.kind or s.status}
            )
    for w in report.windows:
        verdicts.append(
            {
                "window": [w.r1, w.r2],
                "limit": w.y_plus,
                "kind": "r-tipping",
                "open_ended": w.open_ended,
            }
        )
    payload = {
        "model": report.model,
        "shift": report.shift_family,
        "x_minus": report.x_minus,
        "verdict": report.verdict,
        "reference_limit": report.reference_limit,
        "reference_kind": report.reference_kind,
        "lambda_connected": report.connected,
        "b_tipping": report.b_tipping,
        "verdicts": verdicts,
        "predicates": report.predicates,
        "tolerances": report.provenance,
        "small_r_trace": [[r, lab] for r, lab in report.small_r_trace],
    }
    return to_json17(payload, indent=indent)
