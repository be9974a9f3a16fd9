"""Scalar fields, parameter shifts, and nonautonomous integration.

The model is dx/dt = f(x, L(r t)) for a scalar state x, a smooth field
f(x, lambda), and a bounded parameter shift L(s) moving from lambda_minus to
lambda_plus with vanishing derivative at both ends. Everything downstream
(bifurcation diagrams, pullback attractors, tipping analysis) is built on the
three types here: ScalarField, ParameterShift, Trajectory.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from typing import Callable

import numpy as np

from .errors import (
    DivergenceError,
    DomainViolationError,
    ShiftValidationError,
    StiffnessError,
)

__all__ = [
    "ScalarField",
    "ParameterShift",
    "IntegratorConfig",
    "IntegratorStats",
    "Trajectory",
    "ValidationCheck",
    "ValidationReport",
    "eval_field",
    "eval_field_dx",
    "eval_shift",
    "eval_shift_ds",
    "validate_field",
    "validate_shift",
    "integrate",
    "integrate_frozen",
    "tanh_shift",
    "logistic_shift",
    "user_shift",
    "shift_translated",
    "support_for_tolerance",
    "monotone_segments",
    "finite_difference_dx",
    "default_escape_bound",
    "export_trajectory_csv",
    "trajectory_residuals",
]

# Finite-difference step scale for C^2 fields: balances truncation vs roundoff.
FD_STEP_SCALE = 1e-6
DERIVATIVE_RTOL = 1e-5


@dataclass(frozen=True)
class ScalarField:
    """Autonomous right-hand side f(x, lambda) with optional analytic d/dx.

    state_domain bounds equilibrium searches only; trajectories may leave it
    (escape is policed separately by the integrator's escape bound).
    """

    rhs: Callable[[float, float], float]
    name: str
    state_domain: tuple[float, float]
    rhs_dx: Callable[[float, float], float] | None = None

    def __post_init__(self):
        lo, hi = self.state_domain
        if not (lo < hi):
            raise ValueError(f"state_domain must satisfy lo < hi, got {self.state_domain}")


@dataclass(frozen=True)
class ParameterShift:
    """A smooth shift L(s) strictly inside (lambda_minus, lambda_plus).

    s_support is the truncation point for the infinite time horizon: beyond
    |s| = s_support both L and dL/ds are within asymptotic_tol of their limits,
    so the dynamics there are autonomous to within tolerance.
    """

    shape: Callable[[float], float]
    shape_ds: Callable[[float], float]
    lambda_minus: float
    lambda_plus: float
    s_support: float
    family: str = "user"
    asymptotic_tol: float = 0.0

    def __post_init__(self):
        if not (self.lambda_minus < self.lambda_plus):
            raise ValueError("lambda_minus must be < lambda_plus")
        if not (self.s_support > 0):
            raise ValueError("s_support must be positive")

    @property
    def lambda_range(self) -> float:
        return self.lambda_plus - self.lambda_minus


@dataclass(frozen=True)
class IntegratorConfig:
    """Adaptive embedded Runge-Kutta 4(5) settings."""

    abs_tol: float = 1e-9
    rel_tol: float = 1e-9
    max_step: float = math.inf
    method: str = "rk45"
    escape_bound: float | None = None  # None: derived from the field's domain

    def __post_init__(self):
        if self.abs_tol <= 0 or self.rel_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_step <= 0:
            raise ValueError("max_step must be positive")
        if self.method != "rk45":
            raise ValueError(f"unknown method {self.method!r}")


DEFAULT_CONFIG = IntegratorConfig()


@dataclass(frozen=True)
class IntegratorStats:
    n_steps: int
    n_rejected: int
    n_rhs: int
    max_error_estimate: float


@dataclass(frozen=True)
class Trajectory:
    """Sampled solution of the nonautonomous IVP.

    Samples are dense enough that linear interpolation stays within 10x the
    integrator tolerance, so interp() is safe for diagnostics.
    """

    t: np.ndarray
    x: np.ndarray
    r: float
    stats: IntegratorStats

    def __post_init__(self):
        if len(self.t) != len(self.x):
            raise ValueError("t and x must have equal length")
        if len(self.t) >= 2 and not np.all(np.diff(self.t) > 0):
            raise ValueError("sample times must be strictly increasing")

    @property
    def t0(self) -> float:
        return float(self.t[0])

    @property
    def t1(self) -> float:
        return float(self.t[-1])

    @property
    def x_end(self) -> float:
        return float(self.x[-1])

    def interp(self, t) -> np.ndarray | float:
        return np.interp(t, self.t, self.x)


@dataclass(frozen=True)
class ValidationCheck:
    name: str
    passed: bool
    detail: str = ""


@dataclass(frozen=True)
class ValidationReport:
    checks: list[ValidationCheck] = dc_field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list[ValidationCheck]:
        return [c for c in self.checks if not c.passed]


# ---------------------------------------------------------------------------
# evaluation


def eval_field(field: ScalarField, x: float, lam: float) -> float:
    value = field.rhs(x, lam)
    if not math.isfinite(value):
        raise DomainViolationError(field.name, x, lam, value)
    return value


def finite_difference_dx(fn: Callable[[float], float], x: float, h: float | None = None) -> float:
    if h is None:
        h = FD_STEP_SCALE * max(1.0, abs(x))
    return (fn(x + h) - fn(x - h)) / (2.0 * h)


def eval_field_dx(field: ScalarField, x: float, lam: float) -> float:
    if field.rhs_dx is not None:
        value = field.rhs_dx(x, lam)
    else:
        value = finite_difference_dx(lambda u: field.rhs(u, lam), x)
    if not math.isfinite(value):
        raise DomainViolationError(field.name, x, lam, value)
    return value


def eval_shift(shift: ParameterShift, s: float) -> float:
    return shift.shape(s)


def eval_shift_ds(shift: ParameterShift, s: float) -> float:
    return shift.shape_ds(s)


def _derivative_close(a: float, b: float) -> bool:
    return abs(a - b) <= DERIVATIVE_RTOL * max(1.0, abs(a), abs(b))


def validate_field(
    field: ScalarField,
    lambda_range: tuple[float, float],
    n_probe: int = 200,
) -> ValidationReport:
    """Finiteness of rhs on the domain grid, and rhs_dx vs central differences."""
    lo, hi = field.state_domain
    lmin, lmax = lambda_range
    xs = np.linspace(lo, hi, max(2, int(round(math.sqrt(n_probe)))))
    lams = np.linspace(lmin, lmax, max(2, int(round(math.sqrt(n_probe)))))
    checks: list[ValidationCheck] = []

    bad = None
    for x in xs:
        for lam in lams:
            v = field.rhs(float(x), float(lam))
            if not math.isfinite(v):
                bad = (float(x), float(lam), v)
                break
        if bad:
            break
    checks.append(
        ValidationCheck(
            "rhs-finite",
            bad is None,
            "" if bad is None else f"non-finite {bad[2]!r} at (x={bad[0]:g}, lambda={bad[1]:g})",
        )
    )

    if field.rhs_dx is not None and bad is None:
        worst = 0.0
        worst_at = None
        ok = True
        for x in xs:
            for lam in lams:
                analytic = field.rhs_dx(float(x), float(lam))
                fd = finite_difference_dx(lambda u: field.rhs(u, float(lam)), float(x))
                err = abs(analytic - fd) / max(1.0, abs(analytic), abs(fd))
                if err > worst:
                    worst, worst_at = err, (float(x), float(lam))
                if not _derivative_close(analytic, fd):
                    ok = False
        checks.append(
            ValidationCheck(
                "rhs_dx-consistent",
                ok,
                f"max relative deviation {worst:.3g}" + (f" at {worst_at}" if worst_at else ""),
            )
        )
    return ValidationReport(checks)


def validate_shift(
    shift: ParameterShift,
    n_probe: int = 201,
    asymptotic_tol: float | None = None,
) -> ValidationReport:
    """Strict containment on a probe grid plus endpoint asymptotics."""
    if n_probe < 2:
        raise ValueError("n_probe must be >= 2")
    tol = asymptotic_tol if asymptotic_tol is not None else _default_asymptotic_tol(shift)
    S = shift.s_support
    ss = np.linspace(-S, S, n_probe)
    checks: list[ValidationCheck] = []

    worst_s = None
    contained = True
    for s in ss:
        v = shift.shape(float(s))
        if not (shift.lambda_minus < v < shift.lambda_plus):
            contained = False
            worst_s = (float(s), v)
            break
    checks.append(
        ValidationCheck(
            "containment",
            contained,
            "" if contained else f"L({worst_s[0]:g}) = {worst_s[1]:g} outside open range",
        )
    )

    for label, s_end, lam_end in (
        ("past-limit", -S, shift.lambda_minus),
        ("future-limit", S, shift.lambda_plus),
    ):
        gap = abs(shift.shape(s_end) - lam_end)
        checks.append(
            ValidationCheck(
                label,
                gap < tol,
                f"|L({s_end:g}) - {lam_end:g}| = {gap:.3g} vs tol {tol:g}",
            )
        )
        dv = abs(shift.shape_ds(s_end))
        checks.append(
            ValidationCheck(
                label + "-flat",
                dv < tol,
                f"|dL/ds({s_end:g})| = {dv:.3g} vs tol {tol:g}",
            )
        )

    ok = True
    worst = 0.0
    for s in ss:
        analytic = shift.shape_ds(float(s))
        fd = finite_difference_dx(shift.shape, float(s))
        worst = max(worst, abs(analytic - fd) / max(1.0, abs(analytic), abs(fd)))
        if not _derivative_close(analytic, fd):
            ok = False
    checks.append(ValidationCheck("shape_ds-consistent", ok, f"max relative deviation {worst:.3g}"))
    return ValidationReport(checks)


# ---------------------------------------------------------------------------
# adaptive Dormand-Prince 5(4) for a scalar state
#
# A hand-rolled scalar pair avoids array overhead on the hot path (pullback
# scans integrate thousands of IVPs) and gives direct control over escape
# detection, sample densification, and local-error bookkeeping.

_C2, _C3, _C4, _C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9
_A21 = 1 / 5
_A31, _A32 = 3 / 40, 9 / 40
_A41, _A42, _A43 = 44 / 45, -56 / 15, 32 / 9
_A51, _A52, _A53, _A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
_A61, _A62, _A63, _A64, _A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
_B1, _B3, _B4, _B5, _B6 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
_E1, _E3, _E4, _E5, _E6, _E7 = (
    71 / 57600,
    -71 / 16695,
    71 / 1920,
    -17253 / 339200,
    22 / 525,
    -1 / 40,
)

_MAX_DENSIFY_DEPTH = 14

# quartic dense-output coefficients for the 5(4) pair (error is at the level
# of the step's local error, so emitted samples are as accurate as the steps)
_P = (
    (1.0, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432),
    (0.0, 0.0, 0.0, 0.0),
    (0.0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799),
    (0.0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072),
    (0.0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632),
    (0.0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844),
    (0.0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423),
)


def _dense_eval(x0: float, h: float, ks: tuple, theta: float) -> float:
    acc = 0.0
    for k, row in zip(ks, _P):
        acc += k * (theta * (row[0] + theta * (row[1] + theta * (row[2] + theta * row[3]))))
    return x0 + h * acc


def _solve_scalar(
    rhs: Callable[[float, float], float],
    t0: float,
    t1: float,
    x0: float,
    cfg: IntegratorConfig,
    escape_bound: float,
    field_name: str = "",
    lam_of_t: Callable[[float], float] | None = None,
):
    """Integrate dx/dt = rhs(t, x) from t0 to t1 (t1 > t0).

    Returns (times, values, stats). Samples are densified per accepted step so
    that linear interpolation error stays below 10x the local tolerance.
    """
    if not (t1 > t0):
        raise ValueError("t1 must be > t0")
    atol, rtol = cfg.abs_tol, cfg.rel_tol

    class _NonFinite(Exception):
        def __init__(self, t, x, v):
            self.t, self.x, self.v = t, x, v

    def _checked(t, x):
        if not math.isfinite(x):
            raise _NonFinite(t, x, x)
        v = rhs(t, x)
        if not math.isfinite(v):
            raise _NonFinite(t, x, v)
        return v

    t, x = float(t0), float(x0)
    try:
        f = _checked(t, x)
    except _NonFinite as nf:
        lam = lam_of_t(t) if lam_of_t is not None else math.nan
        raise DomainViolationError(field_name or "field", nf.x, lam, nf.v)
    n_rhs = 1
    n_steps = 0
    n_rejected = 0
    max_err = 0.0

    # initial step from the local scale (Hairer-style cheap estimate)
    scale = atol + rtol * abs(x)
    d0 = abs(x) / scale
    d1 = abs(f) / scale
    h = 0.01 * (d0 / d1) if (d0 > 1e-5 and d1 > 1e-5) else 1e-6
    h = min(h, cfg.max_step, t1 - t0)

    times = [t]
    values = [x]

    def _emit(t_step, x_step, h_step, ks, th_a, xa, th_b, xb, depth=0):
        # subdivide until a chord matches the dense interpolant
        if depth < _MAX_DENSIFY_DEPTH:
            th_m = 0.5 * (th_a + th_b)
            xm = _dense_eval(x_step, h_step, ks, th_m)
            tol_here = 10.0 * (atol + rtol * max(abs(xa), abs(xb)))
            if abs(xm - 0.5 * (xa + xb)) > tol_here:
                _emit(t_step, x_step, h_step, ks, th_a, xa, th_m, xm, depth + 1)
                _emit(t_step, x_step, h_step, ks, th_m, xm, th_b, xb, depth + 1)
                return
        times.append(t_step + th_b * h_step)
        values.append(xb)

    t_scale = max(abs(t0), abs(t1), 1.0)
    while True:
        remaining = t1 - t
        if remaining <= 16.0 * math.ulp(t_scale):
            break  # within roundoff of the end point
        h = min(h, remaining, cfg.max_step)
        if h <= 32.0 * math.ulp(max(abs(t), 1.0)):
            raise StiffnessError(t, h)

        k1 = f
        try:
            k2 = _checked(t + _C2 * h, x + h * (_A21 * k1))
            k3 = _checked(t + _C3 * h, x + h * (_A31 * k1 + _A32 * k2))
            k4 = _checked(t + _C4 * h, x + h * (_A41 * k1 + _A42 * k2 + _A43 * k3))
            k5 = _checked(t + _C5 * h, x + h * (_A51 * k1 + _A52 * k2 + _A53 * k3 + _A54 * k4))
            k6 = _checked(t + h, x + h * (_A61 * k1 + _A62 * k2 + _A63 * k3 + _A64 * k4 + _A65 * k5))
            x_new = x + h * (_B1 * k1 + _B3 * k3 + _B4 * k4 + _B5 * k5 + _B6 * k6)
            t_new = t + h
            k7 = _checked(t_new, x_new)
        except _NonFinite as nf:
            # an overlong step can overflow the stages before the error test
            # sees it; shrink and retry unless the step is already tiny
            n_rhs += 6
            n_rejected += 1
            if h <= 1e-10 * max(1.0, abs(t)) or h <= 1e3 * abs(t) * math.ulp(1.0):
                lam = lam_of_t(nf.t) if lam_of_t is not None else math.nan
                raise DomainViolationError(field_name or "field", nf.x, lam, nf.v)
            h *= 0.1
            continue
        n_rhs += 6

        err = h * abs(
            _E1 * k1 + _E3 * k3 + _E4 * k4 + _E5 * k5 + _E6 * k6 + _E7 * k7
        )
        tol_step = atol + rtol * max(abs(x), abs(x_new))
        ratio = err / tol_step if tol_step > 0 else math.inf

        if ratio <= 1.0:
            _emit(t, x, h, (k1, k2, k3, k4, k5, k6, k7), 0.0, x, 1.0, x_new)
            n_steps += 1
            max_err = max(max_err, err)
            t, x, f = t_new, x_new, k7
            if abs(x) > escape_bound:
                err = DivergenceError(t, x, escape_bound)
                # callers that treat escape as an outcome can keep the samples
                err.partial = (np.asarray(times), np.asarray(values))
                err.stats = IntegratorStats(n_steps, n_rejected, n_rhs, max_err)
                raise err
            factor = 5.0 if ratio == 0.0 else min(5.0, max(0.2, 0.9 * ratio ** -0.2))
        else:
            n_rejected += 1
            factor = max(0.1, 0.9 * ratio ** -0.2)
        h *= factor

    stats = IntegratorStats(n_steps, n_rejected, n_rhs, max_err)
    return np.asarray(times), np.asarray(values), stats


def default_escape_bound(field: ScalarField) -> float:
    lo, hi = field.state_domain
    return 10.0 * (abs(lo) + abs(hi))


def integrate(
    field: ScalarField,
    shift: ParameterShift,
    r: float,
    x0: float,
    t0: float,
    t1: float,
    cfg: IntegratorConfig = DEFAULT_CONFIG,
) -> Trajectory:
    """Solve dx/dt = f(x, L(r t)) on [t0, t1]."""
    if r <= 0:
        raise ValueError("rate r must be positive")
    bound = cfg.escape_bound if cfg.escape_bound is not None else default_escape_bound(field)
    rhs = lambda t, x: field.rhs(x, shift.shape(r * t))
    times, values, stats = _solve_scalar(
        rhs, t0, t1, x0, cfg, bound, field.name, lam_of_t=lambda t: shift.shape(r * t)
    )
    return Trajectory(times, values, r, stats)


def integrate_frozen(
    field: ScalarField,
    lam: float,
    x0: float,
    t0: float,
    t1: float,
    cfg: IntegratorConfig = DEFAULT_CONFIG,
) -> Trajectory:
    """Solve the frozen (autonomous) system dx/dt = f(x, lam)."""
    bound = cfg.escape_bound if cfg.escape_bound is not None else default_escape_bound(field)
    rhs = lambda t, x: field.rhs(x, lam)
    times, values, stats = _solve_scalar(
        rhs, t0, t1, x0, cfg, bound, field.name, lam_of_t=lambda t: lam
    )
    return Trajectory(times, values, 0.0, stats)


def trajectory_residuals(
    field: ScalarField,
    shift: ParameterShift,
    traj: Trajectory,
    n_spot: int = 50,
    seed: int = 0,
) -> float:
    """Spot-check stored samples by re-integrating random intervals.

    Returns the worst endpoint mismatch, normalized by the interval tolerance;
    values O(1) mean the samples are consistent with the ODE.
    """
    n = len(traj.t) - 1
    if n < 1:
        return 0.0
    rng = np.random.default_rng(seed)
    idx = rng.choice(n, size=min(n_spot, n), replace=False)
    cfg = DEFAULT_CONFIG
    worst = 0.0
    for i in sorted(int(j) for j in idx):
        t0, t1 = float(traj.t[i]), float(traj.t[i + 1])
        x0, x1 = float(traj.x[i]), float(traj.x[i + 1])
        redo = integrate(field, shift, traj.r, x0, t0, t1, cfg) if traj.r > 0 else None
        x1_redo = redo.x_end if redo is not None else x1
        tol = cfg.abs_tol + cfg.rel_tol * max(1.0, abs(x0), abs(x1))
        worst = max(worst, abs(x1_redo - x1) / (100.0 * tol))
    return worst


# ---------------------------------------------------------------------------
# shift families


def _default_asymptotic_tol(shift: ParameterShift) -> float:
    if shift.asymptotic_tol > 0:
        return shift.asymptotic_tol
    return 1e-6 * shift.lambda_range


def _numeric_support(
    shape: Callable[[float], float],
    shape_ds: Callable[[float], float],
    lambda_minus: float,
    lambda_plus: float,
    tol: float,
) -> float:
    def ok(S: float) -> bool:
        return (
            abs(shape(-S) - lambda_minus) < tol
            and abs(shape(S) - lambda_plus) < tol
            and abs(shape_ds(-S)) < tol
            and abs(shape_ds(S)) < tol
        )

    S = 1.0
    for _ in range(200):
        if ok(S):
            break
        S *= 1.5
    else:
        raise ShiftValidationError(
            f"shape does not reach its limits to tolerance {tol:g} within |s| <= {S:g}"
        )
    lo = S / 1.5 if S > 1.0 else 0.0
    hi = S
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if mid <= 0:
            break
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi * 1.05


def tanh_shift(
    lambda_minus: float,
    lambda_plus: float,
    asymptotic_tol: float | None = None,
) -> ParameterShift:
    """L(s) = midpoint + halfwidth * tanh(s)."""
    if not (lambda_minus < lambda_plus):
        raise ValueError("lambda_minus must be < lambda_plus")
    mid = 0.5 * (lambda_minus + lambda_plus)
    half = 0.5 * (lambda_plus - lambda_minus)
    tol = asymptotic_tol if asymptotic_tol is not None else 1e-6 * (lambda_plus - lambda_minus)
    shape = lambda s: mid + half * math.tanh(s)
    shape_ds = lambda s: half / math.cosh(s) ** 2
    S = _numeric_support(shape, shape_ds, lambda_minus, lambda_plus, tol)
    return ParameterShift(shape, shape_ds, lambda_minus, lambda_plus, S, "tanh", tol)


def logistic_shift(
    lambda_minus: float,
    lambda_plus: float,
    asymptotic_tol: float | None = None,
) -> ParameterShift:
    """The shift solving dL/ds = -(L - lambda_minus)(L - lambda_plus).

    Centered so L(0) is the midpoint. For the symmetric range (-1, 1) this is
    exactly tanh(s).
    """
    if not (lambda_minus < lambda_plus):
        raise ValueError("lambda_minus must be < lambda_plus")
    k = lambda_plus - lambda_minus
    tol = asymptotic_tol if asymptotic_tol is not None else 1e-6 * k

    def shape(s: float) -> float:
        # lambda_minus + k * logistic(k s); guard the exp against overflow
        z = -k * s
        if z > 700.0:
            return lambda_minus + k * math.exp(-z)
        return lambda_minus + k / (1.0 + math.exp(z))

    def shape_ds(s: float) -> float:
        v = shape(s)
        return -(v - lambda_minus) * (v - lambda_plus)

    S = _numeric_support(shape, shape_ds, lambda_minus, lambda_plus, tol)
    return ParameterShift(shape, shape_ds, lambda_minus, lambda_plus, S, "logistic-ode", tol)


def user_shift(
    shape: Callable[[float], float],
    lambda_minus: float,
    lambda_plus: float,
    shape_ds: Callable[[float], float] | None = None,
    s_support: float | None = None,
    asymptotic_tol: float | None = None,
) -> ParameterShift:
    """Wrap a user-supplied shape; derivative falls back to central differences."""
    tol = asymptotic_tol if asymptotic_tol is not None else 1e-6 * (lambda_plus - lambda_minus)
    ds = shape_ds if shape_ds is not None else (lambda s: finite_difference_dx(shape, s))
    S = s_support if s_support is not None else _numeric_support(shape, ds, lambda_minus, lambda_plus, tol)
    return ParameterShift(shape, ds, lambda_minus, lambda_plus, S, "user", tol)


def shift_translated(shift: ParameterShift, ds: float) -> ParameterShift:
    """The same shape advanced by ds: s -> L(s + ds)."""
    return ParameterShift(
        lambda s: shift.shape(s + ds),
        lambda s: shift.shape_ds(s + ds),
        shift.lambda_minus,
        shift.lambda_plus,
        shift.s_support + abs(ds),
        shift.family,
        shift.asymptotic_tol,
    )


def support_for_tolerance(shift: ParameterShift, tol: float) -> float:
    """Smallest horizon S >= s_support with both tails within tol of their limits."""
    S = shift.s_support
    def ok(v: float) -> bool:
        return (
            abs(shift.shape(-v) - shift.lambda_minus) < tol
            and abs(shift.shape(v) - shift.lambda_plus) < tol
        )

    if ok(S):
        return S
    for _ in range(200):
        S *= 1.5
        if ok(S):
            return S
    raise ShiftValidationError(f"shift tails do not reach tolerance {tol:g}")


def monotone_segments(
    shift: ParameterShift,
    n_probe: int = 2001,
    amplitude_tol: float | None = None,
) -> list[tuple[float, float]]:
    """Split [-S, S] at interior extrema of L; returns s-intervals.

    Extrema whose lambda-amplitude is below amplitude_tol are treated as noise
    and merged away.
    """
    S = shift.s_support
    tol = amplitude_tol if amplitude_tol is not None else 1e-6 * shift.lambda_range
    ss = np.linspace(-S, S, n_probe)
    d = np.array([shift.shape_ds(float(s)) for s in ss])

    extrema: list[float] = []
    for i in range(len(ss) - 1):
        if d[i] == 0.0 and (i == 0 or d[i - 1] * (d[i + 1] if i + 1 < len(d) else 1) != 0):
            extrema.append(float(ss[i]))
        elif d[i] * d[i + 1] < 0.0:
            a, b = float(ss[i]), float(ss[i + 1])
            fa = d[i]
            for _ in range(80):
                m = 0.5 * (a + b)
                fm = shift.shape_ds(m)
                if fa * fm <= 0:
                    b = m
                else:
                    a, fa = m, fm
            extrema.append(0.5 * (a + b))

    # drop wiggles below the amplitude threshold
    knots = [-S] + extrema + [S]
    vals = [shift.shape(s) for s in knots]
    changed = True
    while changed and len(knots) > 2:
        changed = False
        for i in range(1, len(knots) - 1):
            if abs(vals[i] - vals[i - 1]) < tol or abs(vals[i + 1] - vals[i]) < tol:
                del knots[i], vals[i]
                changed = True
                break
    return [(knots[i], knots[i + 1]) for i in range(len(knots) - 1)]


# ---------------------------------------------------------------------------
# export


def export_trajectory_csv(traj: Trajectory, shift: ParameterShift) -> str:
    from .runtime import csv_lines

    rows = (
        (float(t), float(x), shift.shape(traj.r * float(t)))
        for t, x in zip(traj.t, traj.x)
    )
    return csv_lines("t,x,lambda", rows)
