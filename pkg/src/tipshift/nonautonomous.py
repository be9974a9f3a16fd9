"""Pullback attractors, stable paths, and pseudo-orbit tracking.

Each stable equilibrium of the past limit system owns a unique trajectory
limiting to it in backward time. We approximate it by starting exactly on the
equilibrium at t = -T (with T deep enough into the flat tail of the shift)
and certify the truncation by a doubling-T self-consistency check.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy.optimize import brentq

from .bifurcation import (
    BifurcationDiagram,
    BifurcationPoint,
    Branch,
    Equilibrium,
    Kind,
    find_equilibria,
)
from .dynamics import (
    DEFAULT_CONFIG,
    IntegratorConfig,
    ParameterShift,
    ScalarField,
    Trajectory,
    eval_field,
    eval_field_dx,
    integrate,
    monotone_segments,
    support_for_tolerance,
)
from .errors import (
    AmbiguousRoutingError,
    ConstructionFailureError,
    DeadEndError,
    DivergenceError,
    PullbackUnresolvedError,
)
from .runtime import csv_lines, to_json17

__all__ = [
    "RoutingPolicy",
    "StablePath",
    "PullbackAttractor",
    "PseudoOrbit",
    "Jump",
    "LimitStatus",
    "ForwardLimit",
    "PULLBACK_TOL",
    "make_stable_path",
    "compute_pullback",
    "eps_close_tracks",
    "forward_limit",
    "construct_pseudo_orbit",
    "verify_pseudo_orbit",
    "pullback_ball_spread",
    "export_pullback_csv",
    "export_pseudo_orbit_csv",
    "export_jump_manifest_json",
]

PULLBACK_TOL = 1e-7


@dataclass(frozen=True)
class RoutingPolicy:
    """How a stable path continues through an exchange point.

    prefer: tie-break among several stable continuations ("up" takes the
    larger state). strict: refuse instead of tie-breaking.
    """

    prefer: str = "up"
    strict: bool = False


DEFAULT_ROUTING = RoutingPolicy()


@dataclass(frozen=True)
class StablePath:
    """x = X(s) following stable branches under the shift's parameter course."""

    shift: ParameterShift
    s_grid: np.ndarray
    x_of_s: np.ndarray
    lam_of_s: np.ndarray
    segments: list[tuple[int, float, float]]  # (branch id, s_lo, s_hi)
    crossings: list[tuple[float, BifurcationPoint]]
    x_minus: float
    x_plus: float

    def value(self, s) -> np.ndarray | float:
        return np.interp(s, self.s_grid, self.x_of_s)

    @property
    def lambda_plus(self) -> float:
        return self.shift.lambda_plus


@dataclass(frozen=True)
class PullbackAttractor:
    trajectory: Trajectory
    x_minus: float
    r: float
    T: float
    convergence: float
    escaped: bool = False
    escape_time: float | None = None
    escape_sign: int = 0


class LimitStatus(str, enum.Enum):
    CONVERGED = "converged"
    DIVERGED = "diverged"
    UNDECIDED = "undecided"


@dataclass(frozen=True)
class ForwardLimit:
    status: LimitStatus
    equilibrium: Equilibrium | None = None
    escape_time: float | None = None
    escape_sign: int = 0

    @property
    def x(self) -> float | None:
        return self.equilibrium.x if self.equilibrium else None


@dataclass(frozen=True)
class Jump:
    t: float
    x_left: float
    x_restart: float

    @property
    def size(self) -> float:
        return abs(self.x_restart - self.x_left)


@dataclass(frozen=True)
class PseudoOrbit:
    pieces: list[Trajectory]
    jumps: list[Jump]
    eps: float
    path: StablePath
    r: float
    min_gap: float = 1.0


# ---------------------------------------------------------------------------
# stable paths


def _s_of_lambda(shift: ParameterShift, lam: float, s_lo: float, s_hi: float) -> float:
    """Invert the shift on a monotone s-interval."""
    f = lambda s: shift.shape(s) - lam
    fa, fb = f(s_lo), f(s_hi)
    if fa == 0.0:
        return s_lo
    if fb == 0.0:
        return s_hi
    if fa * fb > 0:
        # lam outside the segment's range; clamp to the nearer end
        return s_lo if abs(fa) < abs(fb) else s_hi
    return float(brentq(f, s_lo, s_hi, xtol=1e-13))


def _branch_x(field: ScalarField, diagram: BifurcationDiagram, branch: Branch, lam: float) -> float:
    """Branch state at lam, refined near linked bifurcation endpoints.

    Close to a fold or exchange the branch behaves like
    x = x_p +- k sqrt(|lam - lam_p|); plain interpolation of grid samples is
    biased there, so the root is re-solved with a sqrt-model bracket.
    """
    guess = branch.x_at(lam)
    grid_step = (diagram.lambda_plus - diagram.lambda_minus) / max(diagram.n_lambda - 1, 1)
    for pt_idx, side in ((branch.start_point, "left"), (branch.end_point, "right")):
        if pt_idx is None:
            continue
        p = diagram.points[pt_idx]
        dist = abs(lam - p.lam)
        if dist > 3.0 * grid_step or dist == 0.0:
            continue
        # calibrate sqrt coefficient from the nearest sample beyond the vicinity
        samples = branch.samples if side == "left" else list(reversed(branch.samples))
        ref = None
        for s in samples:
            if abs(s.lam - p.lam) > 2.0 * grid_step and abs(s.x - p.x) > 0:
                ref = s
                break
        if ref is None:
            ref = samples[-1]
        dl_ref = abs(ref.lam - p.lam)
        if dl_ref <= 0:
            continue
        k = (ref.x - p.x) / math.sqrt(dl_ref)
        g = k * math.sqrt(dist)
        if abs(g) < 1e-14:
            continue
        a, b = p.x + 0.35 * g, p.x + 2.2 * g
        fa, fb = field.rhs(a, lam), field.rhs(b, lam)
        if fa * fb < 0:
            root = float(brentq(lambda x: field.rhs(x, lam), min(a, b), max(a, b), xtol=1e-14))
            return root
        return p.x + g
    return guess


def _stable_continuations(
    diagram: BifurcationDiagram, point_idx: int, direction: int, exclude: int
) -> list[Branch]:
    """Stable branches leaving the point in the travel direction."""
    want_side = "right" if direction > 0 else "left"
    out = []
    for bid, side in diagram.points[point_idx].incident:
        if bid == exclude or side != want_side:
            continue
        b = diagram.branches[bid]
        if b.stability is Kind.STABLE:
            out.append(b)
    return out


def make_stable_path(
    diagram: BifurcationDiagram,
    shift: ParameterShift,
    x_minus: float,
    routing: RoutingPolicy = DEFAULT_ROUTING,
    n_s: int = 2001,
) -> StablePath:
    """Follow stable branches as the shift sweeps lambda; route at crossings.

    Raises DeadEndError when a branch terminates with no stable continuation
    (a candidate for bifurcation-forced tipping) and AmbiguousRoutingError
    under a strict policy when several stable continuations exist.
    """
    field = diagram.field
    lam_minus = shift.lambda_minus
    start = diagram.branch_containing(x_minus, lam_minus)
    if start is None or abs(start.x_at(lam_minus) - x_minus) > 0.02 * (
        field.state_domain[1] - field.state_domain[0]
    ):
        raise ValueError(f"no diagram branch passes through (x={x_minus:g}, lambda={lam_minus:g})")
    if start.stability is not Kind.STABLE:
        raise ValueError(f"(x={x_minus:g}, lambda={lam_minus:g}) is not on a stable branch")

    lam_eps = 1e-9 * (diagram.lambda_plus - diagram.lambda_minus)
    segs = monotone_segments(shift)
    total_len = sum(b - a for a, b in segs)

    s_all: list[float] = []
    x_all: list[float] = []
    segments: list[tuple[int, float, float]] = []
    crossings: list[tuple[float, BifurcationPoint]] = []

    branch = start
    for s_a, s_b in segs:
        lam_a, lam_b = shift.shape(s_a), shift.shape(s_b)
        direction = 1 if lam_b > lam_a else -1
        s_cursor = s_a
        lam_cursor = lam_a
        while True:
            # the branch's end in the travel direction
            if direction > 0:
                lam_end_branch = branch.lam_hi
                pt_idx = branch.end_point
            else:
                lam_end_branch = branch.lam_lo
                pt_idx = branch.start_point
            hits_crossing = (
                pt_idx is not None
                and (lam_end_branch - lam_b) * direction < -lam_eps
                and (lam_end_branch - lam_cursor) * direction > lam_eps
            )
            lam_stop = lam_end_branch if hits_crossing else lam_b
            s_stop = _s_of_lambda(shift, lam_stop, s_cursor, s_b) if hits_crossing else s_b

            n_here = max(8, int(round(n_s * (s_stop - s_cursor) / max(total_len, 1e-300))))
            ss = np.linspace(s_cursor, s_stop, n_here)
            # refine geometrically toward crossing ends where x(lambda) is sqrt-like
            extra: list[float] = []
            for s_ref, into in ((s_cursor, +1), (s_stop, -1)):
                width = (s_stop - s_cursor) * 0.2
                f = width
                while f > 1e-9 * max(1.0, abs(s_ref)):
                    extra.append(s_ref + into * f)
                    f *= 0.25
            ss = np.unique(np.concatenate([ss, np.array(extra)]))
            for s in ss:
                if s_all and s <= s_all[-1] + 1e-15:
                    continue
                lam = float(shift.shape(float(s)))
                s_all.append(float(s))
                x_all.append(_branch_x(field, diagram, branch, lam))
            segments.append((branch.id, float(s_cursor), float(s_stop)))

            if not hits_crossing:
                break
            point = diagram.points[pt_idx]
            crossings.append((float(s_stop), point))
            conts = _stable_continuations(diagram, pt_idx, direction, branch.id)
            if not conts:
                raise DeadEndError(point.x, point.lam)
            if len(conts) > 1:
                if routing.strict:
                    raise AmbiguousRoutingError(
                        f"{len(conts)} stable continuations at (x={point.x:.6g}, lambda={point.lam:.6g})"
                    )
                probe = point.lam + direction * 10 * lam_eps
                conts.sort(key=lambda b: b.x_at(probe), reverse=(routing.prefer == "up"))
            branch = conts[0]
            s_cursor = s_stop
            lam_cursor = lam_stop

    s_arr = np.asarray(s_all)
    x_arr = np.asarray(x_all)
    lam_arr = np.array([shift.shape(float(s)) for s in s_arr])
    return StablePath(
        shift=shift,
        s_grid=s_arr,
        x_of_s=x_arr,
        lam_of_s=lam_arr,
        segments=segments,
        crossings=crossings,
        x_minus=float(x_arr[0]),
        x_plus=float(x_arr[-1]),
    )


# ---------------------------------------------------------------------------
# pullback attractors


def _require_stable(field: ScalarField, x: float, lam: float):
    fv = eval_field(field, x, lam)
    if abs(fv) > 1e-6 * max(1.0, abs(x)):
        raise ValueError(f"x={x:g} is not an equilibrium of the past limit system (f={fv:.3g})")
    df = eval_field_dx(field, x, lam)
    if df >= 0:
        raise ValueError(f"(x={x:g}, lambda={lam:g}) is not linearly stable (df={df:.3g})")
    return df


def _sup_deviation(a: Trajectory, b: Trajectory, t_lo: float, t_hi: float) -> float:
    mask = (a.t >= t_lo) & (a.t <= t_hi)
    if not np.any(mask):
        return 0.0
    return float(np.max(np.abs(a.x[mask] - np.interp(a.t[mask], b.t, b.x))))


def _integrate_possibly_escaping(
    field: ScalarField,
    shift: ParameterShift,
    r: float,
    x0: float,
    t0: float,
    t1: float,
    cfg: IntegratorConfig,
):
    try:
        return integrate(field, shift, r, x0, t0, t1, cfg), None
    except DivergenceError as err:
        times, values = err.partial  # type: ignore[attr-defined]
        traj = Trajectory(times, values, r, err.stats)  # type: ignore[attr-defined]
        return traj, err


def compute_pullback(
    field: ScalarField,
    shift: ParameterShift,
    r: float,
    x_minus: float,
    cfg: IntegratorConfig = DEFAULT_CONFIG,
    pullback_tol: float = PULLBACK_TOL,
    t_fwd: float | None = None,
    max_retries: int = 3,
    certify: bool = True,
) -> PullbackAttractor:
    """Backward-horizon approximation of the pullback attractor from x_minus.

    The start horizon is pushed into the shift tail until the frozen
    equilibrium displacement is negligible against pullback_tol; the result is
    then certified by re-running from twice the horizon and comparing.
    Retries both lengthen the horizon and tighten the integrator (a passage
    near a saddle amplifies integration error, which the doubling check sees).
    With certify=False the best run is returned even if the tolerance is
    missed; callers can inspect .convergence.
    """
    if r <= 0:
        raise ValueError("rate r must be positive")
    df_minus = _require_stable(field, x_minus, shift.lambda_minus)

    # horizon deep enough that the moving equilibrium has settled at x_minus
    h = 1e-6 * max(1.0, abs(shift.lambda_range))
    f_lam = (
        field.rhs(x_minus, shift.lambda_minus + h) - field.rhs(x_minus, shift.lambda_minus - h)
    ) / (2 * h)
    slope = abs(f_lam / df_minus)
    lam_gap_target = min(
        0.05 * pullback_tol / max(slope, 1e-3), 1e-6 * shift.lambda_range
    )
    S = support_for_tolerance(shift, lam_gap_target)

    settle = 100.0 / abs(df_minus)
    T = S / r
    t_end = t_fwd if t_fwd is not None else T + settle

    best: PullbackAttractor | None = None
    for _ in range(max_retries + 1):
        run_a, esc_a = _integrate_possibly_escaping(field, shift, r, x_minus, -T, t_end, cfg)
        run_b, _esc_b = _integrate_possibly_escaping(field, shift, r, x_minus, -2 * T, t_end, cfg)
        t_hi = min(run_a.t1, run_b.t1)
        conv = _sup_deviation(run_a, run_b, -T, t_hi)
        if esc_a is not None:
            return PullbackAttractor(
                trajectory=run_a,
                x_minus=x_minus,
                r=r,
                T=T,
                convergence=conv,
                escaped=True,
                escape_time=esc_a.escape_time,
                escape_sign=1 if esc_a.x > 0 else -1,
            )
        pb = PullbackAttractor(run_a, x_minus, r, T, conv)
        if conv < pullback_tol:
            return pb
        if best is None or conv < best.convergence:
            best = pb
        T *= 2.0
        if t_fwd is None:
            t_end = T + settle
        cfg = IntegratorConfig(
            abs_tol=max(cfg.abs_tol * 1e-2, 1e-13),
            rel_tol=max(cfg.rel_tol * 1e-2, 1e-13),
            max_step=cfg.max_step,
            method=cfg.method,
            escape_bound=cfg.escape_bound,
        )
    if certify:
        raise PullbackUnresolvedError(
            f"doubling the horizon left a deviation of {best.convergence:.3g} "
            f"(tol {pullback_tol:g}) after {max_retries} retries"
        )
    return best


def pullback_ball_spread(
    field: ScalarField,
    shift: ParameterShift,
    r: float,
    x_minus: float,
    radius: float,
    n_starts: int = 10,
    cfg: IntegratorConfig = DEFAULT_CONFIG,
) -> float:
    """Cross-check ofuniqueness: spread at t = -T/2 of a fan of starts at -T."""
    df_minus = _require_stable(field, x_minus, shift.lambda_minus)
    T = shift.s_support / r
    finals = []
    for k in range(n_starts):
        x0 = x_minus + radius * (2.0 * k / (n_starts - 1) - 1.0)
        tr = integrate(field, shift, r, x0, -T, -T / 2, cfg)
        finals.append(tr.x_end)
    return float(max(finals) - min(finals))


def eps_close_tracks(pb: PullbackAttractor, path: StablePath, eps: float) -> tuple[bool, float]:
    """Sup over sampled times of |x(t) - X(r t)| compared against eps."""
    pv = np.interp(pb.r * pb.trajectory.t, path.s_grid, path.x_of_s)
    sup = float(np.max(np.abs(pb.trajectory.x - pv)))
    return sup < eps, sup


def forward_limit(
    pb: PullbackAttractor,
    diagram: BifurcationDiagram,
    delta: float | None = None,
    dwell: float | None = None,
) -> ForwardLimit:
    """Decide where the trajectory settles for the future limit system.

    Converged(E) needs the tail inside the delta-ball of E for a
    hyperbolicity-scaled dwell time with |f| not growing; the equilibrium's
    kind is carried so callers can see convergence onto a non-attracting
    state (possible on invariant lines).
    """
    if pb.escaped:
        return ForwardLimit(
            LimitStatus.DIVERGED, escape_time=pb.escape_time, escape_sign=pb.escape_sign
        )
    field = diagram.field
    lam_plus = diagram.lambda_plus
    lo, hi = field.state_domain
    if delta is None:
        delta = 1e-4 * (hi - lo)
    eqs = diagram.equilibria_at(lam_plus)
    if not eqs:
        return ForwardLimit(LimitStatus.UNDECIDED)

    traj = pb.trajectory
    x_end = traj.x_end
    order = sorted(eqs, key=lambda e: abs(e.x - x_end))
    for eq in order:
        if abs(eq.x - x_end) > delta:
            continue
        dwell_e = dwell if dwell is not None else 20.0 / max(abs(eq.df), 1e-3)
        inside = np.abs(traj.x - eq.x) <= delta
        if not inside[-1]:
            continue
        outside_idx = np.nonzero(~inside)[0]
        if len(outside_idx) == 0:
            t_enter = traj.t0
        else:
            k = int(outside_idx[-1]) + 1
            t_enter = float(traj.t[k]) if k < len(traj.t) else traj.t1
        stay = traj.t1 - t_enter
        if stay < dwell_e:
            continue
        f_end = abs(field.rhs(x_end, lam_plus))
        t_mid = traj.t1 - 0.5 * stay
        x_mid = float(traj.interp(t_mid))
        f_mid = abs(field.rhs(x_mid, lam_plus))
        if f_end <= f_mid + 1e-12:
            return ForwardLimit(LimitStatus.CONVERGED, equilibrium=eq)
    return ForwardLimit(LimitStatus.UNDECIDED)


# ---------------------------------------------------------------------------
# pseudo-orbits


def _crossing_window(path: StablePath, s_j: float, eps: float, s_lo: float, s_hi: float) -> float:
    """Largest eta with |X(s) - X(s_j)| < eps/4 on |s - s_j| <= eta."""
    x_j = float(path.value(s_j))
    eta_max = min(s_j - s_lo, s_hi - s_j, 0.5)
    if eta_max <= 0:
        return 0.0
    eta = eta_max
    while eta > 1e-12:
        probes = np.linspace(s_j - eta, s_j + eta, 33)
        if np.max(np.abs(path.value(probes) - x_j)) < eps / 4:
            return float(eta)
        eta *= 0.5
    return float(eta)


def construct_pseudo_orbit(
    field: ScalarField,
    shift: ParameterShift,
    r: float,
    path: StablePath,
    eps: float,
    min_gap: float = 1.0,
    cfg: IntegratorConfig = DEFAULT_CONFIG,
) -> PseudoOrbit:
    """Track the path by true trajectory pieces with jumps smaller than eps.

    Away from crossings a piece runs until its drift from the path reaches
    eps/2, then restarts on the path. Inside a window around each crossing
    (where the path moves less than eps/4) short pieces of length ~1.5 keep
    the orbit pinned while the branch exchange happens. A piece drifting to
    eps within the minimum gap means the rate is too large for this eps.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    S = shift.s_support
    t_lo, t_hi = -S / r, S / r
    s_lo, s_hi = float(path.s_grid[0]), float(path.s_grid[-1])

    windows: list[tuple[float, float]] = []
    for s_j, _pt in path.crossings:
        eta = _crossing_window(path, s_j, eps, s_lo, s_hi)
        eta = max(eta, r * (min_gap * 1.5))
        windows.append((s_j - eta, s_j + eta))
    windows.sort()

    short_len = 1.5 * min_gap
    guard = 1.001 * min_gap

    pieces: list[Trajectory] = []
    jumps: list[Jump] = []
    t_cursor = t_lo
    x_cursor = float(path.value(r * t_lo))
    last_jump_t = -math.inf

    def _in_window(s: float) -> bool:
        return any(a <= s <= b for a, b in windows)

    def _next_window_start(s: float) -> float | None:
        starts = [a for a, b in windows if a > s]
        return min(starts) if starts else None

    def _restart(t: float, x_left: float):
        nonlocal x_cursor, last_jump_t
        x_new = float(path.value(r * t))
        size = abs(x_new - x_left)
        if size >= eps:
            raise ConstructionFailureError(r * t, size, eps)
        jumps.append(Jump(t, x_left, x_new))
        x_cursor = x_new
        last_jump_t = t

    while t_cursor < t_hi - 1e-12:
        s_now = r * t_cursor
        if _in_window(s_now):
            t_stop = min(t_cursor + short_len, t_hi)
            piece = integrate(field, shift, r, x_cursor, t_cursor, t_stop, cfg)
            pieces.append(piece)
            dev_end = abs(piece.x_end - float(path.value(r * t_stop)))
            if dev_end >= eps:
                raise ConstructionFailureError(r * t_stop, dev_end, eps)
            t_cursor = t_stop
            if t_stop < t_hi and t_stop - last_jump_t >= guard:
                _restart(t_stop, piece.x_end)
            else:
                x_cursor = piece.x_end
        else:
            nw = _next_window_start(s_now)
            t_stop = min(t_hi, nw / r if nw is not None else t_hi)
            # long free-running piece with drift monitoring
            piece = integrate(field, shift, r, x_cursor, t_cursor, t_stop, cfg)
            dev = np.abs(piece.x - np.interp(r * piece.t, path.s_grid, path.x_of_s))
            armed = piece.t >= max(t_cursor, last_jump_t) + guard
            trigger = np.nonzero((dev >= eps / 2) & armed)[0]
            overflow = np.nonzero((dev >= eps) & ~armed)[0]
            if len(overflow) > 0 and (len(trigger) == 0 or overflow[0] < trigger[0]):
                k = int(overflow[0])
                raise ConstructionFailureError(r * float(piece.t[k]), float(dev[k]), eps)
            if len(trigger) > 0:
                k = int(trigger[0])
                cut_t = float(piece.t[k])
                cut = Trajectory(piece.t[: k + 1], piece.x[: k + 1], r, piece.stats)
                pieces.append(cut)
                _restart(cut_t, float(cut.x_end))
                t_cursor = cut_t
            else:
                pieces.append(piece)
                x_cursor = piece.x_end
                t_cursor = t_stop

    # the tracking bound is part of the construction contract
    worst = 0.0
    worst_s = 0.0
    for piece in pieces:
        dev = np.abs(piece.x - np.interp(r * piece.t, path.s_grid, path.x_of_s))
        k = int(np.argmax(dev))
        if dev[k] > worst:
            worst, worst_s = float(dev[k]), float(r * piece.t[k])
    if worst >= eps:
        raise ConstructionFailureError(worst_s, worst, eps)
    return PseudoOrbit(pieces, jumps, eps, path, r, min_gap)


def verify_pseudo_orbit(
    po: PseudoOrbit,
    field: ScalarField,
    shift: ParameterShift,
    r: float,
    eps: float,
    n_residual_spots: int = 8,
) -> dict:
    """Itemized re-check of the pseudo-orbit invariants."""
    from .dynamics import trajectory_residuals

    checks: list[dict] = []

    sizes = [j.size for j in po.jumps]
    worst_jump = max(sizes) if sizes else 0.0
    checks.append(
        {"name": "jump-sizes", "passed": bool(worst_jump < eps), "worst": worst_jump, "bound": eps}
    )

    times = [j.t for j in po.jumps]
    gaps = [b - a for a, b in zip(times, times[1:])]
    min_seen = min(gaps) if gaps else math.inf
    checks.append(
        {
            "name": "jump-gaps",
            "passed": bool(all(g > po.min_gap for g in gaps)),
            "worst": min_seen,
            "bound": po.min_gap,
        }
    )

    worst_res = 0.0
    for piece in po.pieces:
        worst_res = max(
            worst_res, trajectory_residuals(field, shift, piece, n_spot=n_residual_spots)
        )
    checks.append(
        {"name": "ode-residual", "passed": bool(worst_res <= 1.0), "worst": worst_res, "bound": 1.0}
    )

    worst_dev = 0.0
    for piece in po.pieces:
        dev = np.abs(piece.x - np.interp(r * piece.t, po.path.s_grid, po.path.x_of_s))
        worst_dev = max(worst_dev, float(np.max(dev)))
    checks.append(
        {"name": "eps-tracking", "passed": bool(worst_dev < eps), "worst": worst_dev, "bound": eps}
    )

    return {"passed": all(c["passed"] for c in checks), "checks": checks}


# ---------------------------------------------------------------------------
# export


def export_pullback_csv(pb: PullbackAttractor, shift: ParameterShift, path: StablePath) -> str:
    tr = pb.trajectory
    pv = np.interp(pb.r * tr.t, path.s_grid, path.x_of_s)
    rows = (
        (float(t), float(x), shift.shape(pb.r * float(t)), float(p), abs(float(x) - float(p)))
        for t, x, p in zip(tr.t, tr.x, pv)
    )
    return csv_lines("t,x,lambda,path_x,deviation", rows)


def export_pseudo_orbit_csv(po: PseudoOrbit, shift: ParameterShift) -> str:
    rows = []
    for i, piece in enumerate(po.pieces):
        for t, x in zip(piece.t, piece.x):
            rows.append((i, float(t), float(x), shift.shape(po.r * float(t))))
    return csv_lines("piece,t,x,lambda", rows)


def export_jump_manifest_json(po: PseudoOrbit, indent: int = 2) -> str:
    payload = [
        {"t": j.t, "x_left": j.x_left, "x_restart": j.x_restart, "size": j.size}
        for j in po.jumps
    ]
    return to_json17(payload, indent=indent)
