"""Bifurcation diagrams of the frozen system f(x, lambda) = 0.

Per parameter column the equilibria of a scalar field are totally ordered, so
branches are assembled by matching sorted roots across neighbouring columns
rather than by arclength continuation. Count changes between columns localize
folds; sign changes of the linearization along a chain localize stability
exchanges. Both are refined by bisection in lambda.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field as dc_field
from typing import Callable

import numpy as np
from scipy.optimize import brentq

from .dynamics import ScalarField, eval_field, eval_field_dx
from .errors import (
    DiagramInvalidError,
    DiagramIrregularError,
    NotAnEquilibriumError,
)
from .runtime import csv_lines, parallel_map, to_json17

__all__ = [
    "Kind",
    "PointClass",
    "Equilibrium",
    "Branch",
    "BifurcationPoint",
    "BifurcationDiagram",
    "BasinInterval",
    "ROOT_TOL",
    "BIF_TOL",
    "find_equilibria",
    "brute_force_equilibria",
    "classify",
    "build_diagram",
    "basin",
    "check_bifurcation_equivalence",
    "export_diagram_csv",
    "export_bif_points_json",
]

ROOT_TOL = 1e-9
BIF_TOL = 1e-8
MATCH_TOL = 1e-6


class Kind(str, enum.Enum):
    STABLE = "stable"
    UNSTABLE = "unstable"
    BIFURCATION = "bifurcation"


class PointClass(str, enum.Enum):
    SADDLE_NODE = "saddle-node"
    EXCHANGE = "exchange-crossing"
    OTHER = "other"


@dataclass(frozen=True)
class Equilibrium:
    x: float
    lam: float
    df: float
    kind: Kind


@dataclass
class Branch:
    """Equilibria over a lambda interval with uniform interior stability."""

    id: int
    samples: list[Equilibrium]
    stability: Kind
    start_point: int | None = None  # BifurcationPoint index at the low-lambda end
    end_point: int | None = None

    @property
    def lam_lo(self) -> float:
        return self.samples[0].lam

    @property
    def lam_hi(self) -> float:
        return self.samples[-1].lam

    def covers(self, lam: float, tol: float = 0.0) -> bool:
        return self.lam_lo - tol <= lam <= self.lam_hi + tol

    def x_at(self, lam: float) -> float:
        lams = [s.lam for s in self.samples]
        xs = [s.x for s in self.samples]
        return float(np.interp(lam, lams, xs))

    def endpoint(self, side: str) -> Equilibrium:
        return self.samples[0] if side == "left" else self.samples[-1]


@dataclass
class BifurcationPoint:
    x: float
    lam: float
    klass: PointClass
    incident: list[tuple[int, str]] = dc_field(default_factory=list)  # (branch id, side)


@dataclass
class BifurcationDiagram:
    field: ScalarField
    lambda_range: tuple[float, float]
    n_lambda: int
    branches: list[Branch]
    points: list[BifurcationPoint]
    n_scan: int = 400
    root_tol: float = ROOT_TOL
    bif_tol: float = BIF_TOL

    @property
    def lambda_minus(self) -> float:
        return self.lambda_range[0]

    @property
    def lambda_plus(self) -> float:
        return self.lambda_range[1]

    def equilibria_at(self, lam: float) -> list[Equilibrium]:
        return find_equilibria(
            self.field, lam, self.n_scan, root_tol=self.root_tol, bif_tol=self.bif_tol
        )

    def stable_branches(self) -> list[Branch]:
        return [b for b in self.branches if b.stability is Kind.STABLE]

    def branch_containing(self, x: float, lam: float, tol: float | None = None) -> Branch | None:
        """The branch passing within tol of (x, lam); nearest if several."""
        if tol is None:
            lo, hi = self.field.state_domain
            tol = 0.05 * (hi - lo)
        best, best_d = None, tol
        for b in self.branches:
            if b.covers(lam, tol=1e-12):
                d = abs(b.x_at(lam) - x)
                if d <= best_d:
                    best, best_d = b, d
        return best


@dataclass(frozen=True)
class BasinInterval:
    """1-D basin of attraction of a stable equilibrium at frozen lambda."""

    attractor: Equilibrium
    lo: float
    hi: float
    lo_boundary: Equilibrium | None
    hi_boundary: Equilibrium | None
    lo_unbounded: bool
    hi_unbounded: bool

    def contains(self, x: float, margin: float = 0.0) -> bool:
        lo = -math.inf if self.lo_unbounded else self.lo + margin
        hi = math.inf if self.hi_unbounded else self.hi - margin
        return lo < x < hi


# ---------------------------------------------------------------------------
# root finding per column


def _field_scale(fs: np.ndarray) -> float:
    return max(1.0, float(np.max(np.abs(fs))))


def classify(
    field: ScalarField,
    x: float,
    lam: float,
    bif_tol: float = BIF_TOL,
    root_tol: float = ROOT_TOL,
) -> Kind:
    f = eval_field(field, x, lam)
    if abs(f) >= root_tol * max(1.0, abs(x)):
        raise NotAnEquilibriumError(
            f"|f({x:.6g}, {lam:.6g})| = {abs(f):.3g} exceeds the equilibrium tolerance"
        )
    df = eval_field_dx(field, x, lam)
    if df < -bif_tol:
        return Kind.STABLE
    if df > bif_tol:
        return Kind.UNSTABLE
    return Kind.BIFURCATION


def _make_equilibrium(field: ScalarField, x: float, lam: float, bif_tol: float) -> Equilibrium:
    df = eval_field_dx(field, x, lam)
    if df < -bif_tol:
        kind = Kind.STABLE
    elif df > bif_tol:
        kind = Kind.UNSTABLE
    else:
        kind = Kind.BIFURCATION
    return Equilibrium(x, lam, df, kind)


def find_equilibria(
    field: ScalarField,
    lam: float,
    n_scan: int = 400,
    root_tol: float = ROOT_TOL,
    bif_tol: float = BIF_TOL,
    window: tuple[float, float] | None = None,
) -> list[Equilibrium]:
    """All roots of f(., lam) in the state domain, refined and classified.

    Sign-change brackets are refined by scipy's bracketing solver; tangential
    (double) roots are picked up separately at critical points of f where |f|
    is already below tolerance.
    """
    if n_scan < 10:
        raise ValueError("n_scan must be >= 10")
    lo, hi = window if window is not None else field.state_domain
    xs = np.linspace(lo, hi, n_scan)
    fs = np.array([field.rhs(float(x), lam) for x in xs])
    if not np.all(np.isfinite(fs)):
        bad = int(np.argmax(~np.isfinite(fs)))
        raise NotAnEquilibriumError(
            f"field {field.name!r} non-finite at (x={xs[bad]:.6g}, lambda={lam:.6g})"
        )
    scale = _field_scale(fs)
    g = lambda x: field.rhs(x, lam)

    roots: list[float] = []
    for i in range(n_scan - 1):
        fa, fb = float(fs[i]), float(fs[i + 1])
        if fa == 0.0:
            roots.append(float(xs[i]))
        elif fa * fb < 0.0:
            roots.append(float(brentq(g, float(xs[i]), float(xs[i + 1]), xtol=1e-14, rtol=1e-15)))
    if float(fs[-1]) == 0.0:
        roots.append(float(xs[-1]))

    # tangential roots: critical points of f with |f| below tolerance
    dfs = np.array([eval_field_dx(field, float(x), lam) for x in xs])
    for i in range(n_scan - 1):
        da, db = float(dfs[i]), float(dfs[i + 1])
        if da * db < 0.0:
            try:
                xc = float(
                    brentq(lambda x: eval_field_dx(field, x, lam), float(xs[i]), float(xs[i + 1]), xtol=1e-13)
                )
            except ValueError:
                continue
            if abs(g(xc)) < root_tol * scale:
                roots.append(xc)

    roots.sort()
    span = hi - lo
    dedup: list[float] = []
    for x in roots:
        if not dedup or abs(x - dedup[-1]) > 1e-8 * max(1.0, span):
            dedup.append(x)
    return [_make_equilibrium(field, x, lam, bif_tol) for x in dedup]


def brute_force_equilibria(
    field: ScalarField,
    lam: float,
    n_grid: int = 100_000,
    refine_iters: int = 80,
) -> list[float]:
    """Independent oracle: dense sign scan refined by plain bisection only."""
    lo, hi = field.state_domain
    xs = np.linspace(lo, hi, n_grid)
    rhs = field.rhs
    fs = np.array([rhs(float(x), lam) for x in xs])
    roots: list[float] = []
    for i in range(n_grid - 1):
        fa, fb = float(fs[i]), float(fs[i + 1])
        if fa == 0.0:
            roots.append(float(xs[i]))
            continue
        if fa * fb < 0.0:
            a, b = float(xs[i]), float(xs[i + 1])
            for _ in range(refine_iters):
                m = 0.5 * (a + b)
                fm = rhs(m, lam)
                if fm == 0.0:
                    a = b = m
                    break
                if fa * fm < 0.0:
                    b = m
                else:
                    a, fa = m, fm
            roots.append(0.5 * (a + b))
    if float(fs[-1]) == 0.0:
        roots.append(float(xs[-1]))
    return roots


def _polish_root(
    field: ScalarField, lam: float, x_guess: float, width: float
) -> float | None:
    """Refine a root near x_guess by bracketing within +-width; None if lost."""
    g = lambda x: field.rhs(x, lam)
    for w in (width, width / 4, width / 16):
        a, b = x_guess - w, x_guess + w
        fa, fb = g(a), g(b)
        if fa == 0.0:
            return a
        if fb == 0.0:
            return b
        if fa * fb < 0.0:
            return float(brentq(g, a, b, xtol=1e-14, rtol=1e-15))
    return None


# ---------------------------------------------------------------------------
# diagram assembly


@dataclass
class _Chain:
    xs: list[float]
    cols: list[int]
    eqs: list[Equilibrium]
    alive: bool = True

    @property
    def x_now(self) -> float:
        return self.xs[-1]


def _match_columns(chain_xs: list[float], root_xs: list[float], jump_tol: float):
    """Greedy minimal-distance matching under the jump threshold.

    Returns (pairs, unmatched_chain_idx, unmatched_root_idx); deterministic.
    """
    pairs: list[tuple[int, int]] = []
    if chain_xs and root_xs:
        cand = sorted(
            (abs(cx - rx), ci, ri)
            for ci, cx in enumerate(chain_xs)
            for ri, rx in enumerate(root_xs)
            if abs(cx - rx) <= jump_tol
        )
        used_c: set[int] = set()
        used_r: set[int] = set()
        for _, ci, ri in cand:
            if ci in used_c or ri in used_r:
                continue
            pairs.append((ci, ri))
            used_c.add(ci)
            used_r.add(ri)
    matched_c = {c for c, _ in pairs}
    matched_r = {r for _, r in pairs}
    un_c = [i for i in range(len(chain_xs)) if i not in matched_c]
    un_r = [i for i in range(len(root_xs)) if i not in matched_r]
    return pairs, un_c, un_r


def _cluster_pairs(values: list[float], gap: float) -> list[list[float]]:
    clusters: list[list[float]] = []
    for v in sorted(values):
        if clusters and v - clusters[-1][-1] <= gap:
            clusters[-1].append(v)
        else:
            clusters.append([v])
    return clusters


def _count_in_window(
    field: ScalarField, lam: float, window: tuple[float, float], n_local: int = 120
) -> list[float]:
    eqs = find_equilibria(field, lam, n_scan=max(20, n_local), window=window)
    return [e.x for e in eqs]


def _near_domain_edge(field: ScalarField, x: float, tol: float) -> bool:
    lo, hi = field.state_domain
    return abs(x - lo) <= tol or abs(x - hi) <= tol


def build_diagram(
    field: ScalarField,
    lambda_range: tuple[float, float],
    n_lambda: int = 201,
    n_scan: int = 400,
    branch_jump_tol: float | None = None,
    root_tol: float = ROOT_TOL,
    bif_tol: float = BIF_TOL,
    max_bif: int = 100,
) -> BifurcationDiagram:
    """Assemble branches and bifurcation points over the lambda range."""
    if n_lambda < 50:
        raise ValueError("n_lambda must be >= 50")
    lmin, lmax = lambda_range
    if not (lmin < lmax):
        raise ValueError("lambda_range must be increasing")
    x_lo, x_hi = field.state_domain
    span = x_hi - x_lo
    jump_tol = branch_jump_tol if branch_jump_tol is not None else 0.15 * span
    lam_tol = 1e-8 * (lmax - lmin)
    edge_tol = 2.0 * span / n_scan

    lams = np.linspace(lmin, lmax, n_lambda)
    columns = parallel_map(
        lambda lam: find_equilibria(field, float(lam), n_scan, root_tol, bif_tol), list(lams)
    )

    for j, name in ((0, "lambda_minus"), (n_lambda - 1, "lambda_plus")):
        for eq in columns[j]:
            if eq.kind is Kind.BIFURCATION:
                raise DiagramInvalidError(
                    f"bifurcation equilibrium at the range endpoint {name} "
                    f"(x={eq.x:.6g}, lambda={lams[j]:.6g})"
                )

    chains: list[_Chain] = [
        _Chain([e.x], [0], [e]) for e in columns[0]
    ]
    events: list[dict] = []  # {kind: died|born, lam_a, lam_b, xs: [..], chains: [..]}

    for j in range(1, n_lambda):
        active = [ch for ch in chains if ch.alive]
        roots = columns[j]
        pairs, un_c, un_r = _match_columns(
            [ch.x_now for ch in active], [e.x for e in roots], jump_tol
        )
        for ci, ri in pairs:
            ch = active[ci]
            ch.xs.append(roots[ri].x)
            ch.cols.append(j)
            ch.eqs.append(roots[ri])
        died = []
        for ci in un_c:
            active[ci].alive = False
            died.append(active[ci])
        born_roots = [roots[ri] for ri in un_r]
        if died or born_roots:
            events.append(
                {
                    "lam_a": float(lams[j - 1]),
                    "lam_b": float(lams[j]),
                    "died": died,
                    "born": born_roots,
                }
            )
        for e in born_roots:
            chains.append(_Chain([e.x], [j], [e]))

    # --- localize events ---------------------------------------------------
    points: list[BifurcationPoint] = []
    # map chain object id -> (point index, side) to attach after branch build
    death_links: dict[int, tuple[int, str]] = {}
    birth_links: dict[int, tuple[int, str]] = {}
    grid_step = float(lams[1] - lams[0])
    merge_lam_tol = max(100 * lam_tol, 1e-9)
    merge_x_tol = 0.02 * span

    def _add_point(x: float, lam: float, klass: PointClass) -> int:
        for k, p in enumerate(points):
            if abs(p.lam - lam) <= merge_lam_tol and abs(p.x - x) <= merge_x_tol:
                return k
        points.append(BifurcationPoint(x, lam, klass))
        return len(points) - 1

    def _locate_pair_event(lam_a: float, lam_b: float, xs_pair: list[float], appearing: bool):
        """Bisect for the lambda where a local root pair (dis)appears.

        Counting is restricted to a window around the pair, recentred as the
        bracket shrinks: near the event the pair gap scales like sqrt(dlam),
        so a fixed window would stop resolving the two roots.
        """
        gap0 = max(max(xs_pair) - min(xs_pair), 1e-7 * span)
        center = 0.5 * (min(xs_pair) + max(xs_pair))
        width = max(4 * gap0, 8 * (x_hi - x_lo) / n_scan, 1e-6 * span)

        def window():
            return (max(x_lo, center - width), min(x_hi, center + width))

        n_at_a = len(_count_in_window(field, lam_a, window()))
        n_at_b = len(_count_in_window(field, lam_b, window()))
        n_with = n_at_b if appearing else n_at_a
        a, b = lam_a, lam_b
        x_star = center
        for _ in range(200):
            if b - a <= lam_tol:
                break
            m = 0.5 * (a + b)
            found = _count_in_window(field, m, window())
            has_pair = len(found) >= n_with
            if has_pair and len(found) >= 2:
                fs = sorted(found)
                gaps = [(fs[i + 1] - fs[i], i) for i in range(len(fs) - 1)]
                g, i0 = min(gaps)
                center = 0.5 * (fs[i0] + fs[i0 + 1])
                width = max(4 * g, 1e-7 * span)
                x_star = center
            if has_pair == appearing:
                b = m
            else:
                a = m
        return 0.5 * (a + b), x_star

    def _passing_chain(lam_star: float, x_star: float) -> _Chain | None:
        """A chain strictly spanning lam_star whose root passes through x_star."""
        margin = 0.25 * grid_step
        for ch in chains:
            if len(ch.cols) < 2:
                continue
            lam_vals = [float(lams[k]) for k in ch.cols]
            if lam_vals[0] + margin <= lam_star <= lam_vals[-1] - margin:
                x_here = float(np.interp(lam_star, lam_vals, ch.xs))
                if abs(x_here - x_star) < merge_x_tol:
                    return ch
        return None

    def _link(member, idx: int):
        if isinstance(member, _Chain):
            death_links[id(member)] = (idx, "left")  # the chain lies left of the point
        else:
            for ch in chains:
                if ch.eqs and ch.eqs[0] is member:
                    birth_links[id(ch)] = (idx, "right")
                    break

    deferred: list[tuple[object, float, float]] = []  # (member, lam_a, lam_b)

    for ev in events:
        for group, appearing in ((ev["died"], False), (ev["born"], True)):
            if not group:
                continue
            def _mx(m):
                return m.x_now if isinstance(m, _Chain) else m.x

            remaining = sorted(group, key=_mx)
            clusters: list[list] = []
            for m in remaining:
                if clusters and _mx(m) - _mx(clusters[-1][-1]) <= jump_tol:
                    clusters[-1].append(m)
                else:
                    clusters.append([m])
            for cluster in clusters:
                # peel off closest adjacent pairs; at most one singleton remains
                while len(cluster) >= 2:
                    gaps = [(_mx(cluster[i + 1]) - _mx(cluster[i]), i) for i in range(len(cluster) - 1)]
                    _, i0 = min(gaps)
                    pair = [cluster[i0], cluster[i0 + 1]]
                    del cluster[i0 : i0 + 2]
                    lam_star, x_star = _locate_pair_event(
                        ev["lam_a"], ev["lam_b"], [_mx(pair[0]), _mx(pair[1])], appearing
                    )
                    passing = _passing_chain(lam_star, x_star)
                    klass = PointClass.EXCHANGE if passing is not None else PointClass.SADDLE_NODE
                    idx = _add_point(x_star, lam_star, klass)
                    for m in pair:
                        _link(m, idx)
                if cluster:
                    m = cluster[0]
                    xv = _mx(m)
                    if _near_domain_edge(field, xv, edge_tol):
                        continue  # the root crossed the state-domain boundary
                    if isinstance(m, _Chain):
                        last = m.eqs[-1]
                        if last.kind is Kind.BIFURCATION:
                            # tangent root at the grid column: the fold sits there
                            idx = _add_point(last.x, float(lams[m.cols[-1]]), PointClass.SADDLE_NODE)
                            _link(m, idx)
                            continue
                    else:
                        if m.kind is Kind.BIFURCATION:
                            idx = _add_point(m.x, ev["lam_b"], PointClass.SADDLE_NODE)
                            _link(m, idx)
                            continue
                    deferred.append((m, ev["lam_a"], ev["lam_b"]))

    # lone births/deaths next to an already-located point are its companions
    # (this happens when an event lambda lands exactly on a grid column)
    for m, lam_a, lam_b in deferred:
        xv = m.x_now if isinstance(m, _Chain) else m.x
        best, best_d = None, math.inf
        for k, p in enumerate(points):
            if lam_a - 1.5 * grid_step <= p.lam <= lam_b + 1.5 * grid_step and abs(p.x - xv) <= jump_tol:
                d = abs(p.x - xv)
                if d < best_d:
                    best, best_d = k, d
        if best is None:
            best = _add_point(xv, 0.5 * (lam_a + lam_b), PointClass.OTHER)
        _link(m, best)

    if len(points) > max_bif:
        raise DiagramIrregularError(
            f"{len(points)} bifurcation events exceed the regularity cap {max_bif}"
        )

    # --- stability crossings along chains -----------------------------------
    # (df sign change with the root persisting: exchange point on the chain)
    split_requests: list[tuple[_Chain, float, float, int]] = []  # chain, lam*, x*, point idx

    def _df_on_chain(ch: _Chain, lam: float, x_guess: float) -> tuple[float, float] | None:
        width = max(0.25 * jump_tol, 1e-4 * span)
        x_root = _polish_root(field, lam, x_guess, width)
        if x_root is None:
            return None
        return x_root, eval_field_dx(field, x_root, lam)

    for ch in chains:
        if len(ch.eqs) < 2:
            continue
        i = 0
        while i < len(ch.eqs) - 1:
            e0, e1 = ch.eqs[i], ch.eqs[i + 1]
            lam0, lam1 = lams[ch.cols[i]], lams[ch.cols[i + 1]]
            crossing = None
            if abs(e0.df) <= bif_tol and e0.kind is Kind.BIFURCATION:
                if i == 0 and id(ch) in birth_links:
                    i += 1
                    continue  # birth endpoint (fold on the grid), not a crossing
                crossing = (float(lam0), e0.x)
            elif e0.df * e1.df < 0.0 and abs(e0.df) > bif_tol and abs(e1.df) > bif_tol:
                a, b = float(lam0), float(lam1)
                xa = e0.x
                da = e0.df
                for _ in range(200):
                    if b - a <= lam_tol:
                        break
                    m = 0.5 * (a + b)
                    res = _df_on_chain(ch, m, float(np.interp(m, [a, b], [xa, e1.x])))
                    if res is None:
                        break
                    xm, dm = res
                    if da * dm <= 0.0:
                        b = m
                    else:
                        a, xa, da = m, xm, dm
                res = _df_on_chain(ch, 0.5 * (a + b), xa)
                if res is not None:
                    crossing = (0.5 * (a + b), res[0])
            if crossing is not None:
                lam_star, x_star = crossing
                # merge with an existing point if one sits at the same location;
                # the crossing refinement is the sharper estimate, so its
                # coordinates win, and a crossing on a persisting chain means
                # exchange rather than fold
                merged = None
                for k, p in enumerate(points):
                    if abs(p.lam - lam_star) < max(200 * lam_tol, 1e-9) and abs(p.x - x_star) < merge_x_tol:
                        merged = k
                        break
                if merged is None:
                    points.append(BifurcationPoint(x_star, lam_star, PointClass.EXCHANGE))
                    merged = len(points) - 1
                else:
                    points[merged] = BifurcationPoint(
                        x_star, lam_star, PointClass.EXCHANGE, points[merged].incident
                    )
                split_requests.append((ch, lam_star, x_star, merged))
            i += 1

    if len(points) > max_bif:
        raise DiagramIrregularError(
            f"{len(points)} bifurcation events exceed the regularity cap {max_bif}"
        )
    for p in points:
        if p.lam <= lmin + lam_tol or p.lam >= lmax - lam_tol:
            raise DiagramInvalidError(
                f"bifurcation point at the range endpoint (x={p.x:.6g}, lambda={p.lam:.6g})"
            )

    # --- cut chains into branches -------------------------------------------
    branches: list[Branch] = []

    def _close_piece(
        samples: list[Equilibrium],
        start_link: tuple[int, str] | None,
        end_link: tuple[int, str] | None,
    ):
        interior = [s for s in samples if s.kind is not Kind.BIFURCATION]
        if len(interior) == 0:
            return
        stab = Kind.STABLE if all(s.df < 0 for s in interior) else Kind.UNSTABLE
        if not all((s.df < 0) == (stab is Kind.STABLE) for s in interior):
            # mixed interior stability means an undetected crossing; keep the
            # majority label but this should not happen on regular diagrams
            n_stab = sum(1 for s in interior if s.df < 0)
            stab = Kind.STABLE if n_stab * 2 >= len(interior) else Kind.UNSTABLE
        b = Branch(
            id=len(branches),
            samples=samples,
            stability=stab,
            start_point=start_link[0] if start_link else None,
            end_point=end_link[0] if end_link else None,
        )
        branches.append(b)
        if start_link:
            points[start_link[0]].incident.append((b.id, "right"))
        if end_link:
            points[end_link[0]].incident.append((b.id, "left"))

    for ch in chains:
        cuts = sorted(
            [(lam_star, x_star, idx) for c2, lam_star, x_star, idx in split_requests if c2 is ch]
        )
        samples = [
            Equilibrium(x, float(lams[c]), e.df, e.kind)
            for x, c, e in zip(ch.xs, ch.cols, ch.eqs)
        ]
        start_link = birth_links.get(id(ch))
        final_end_link = death_links.get(id(ch))
        if start_link is not None:
            p = points[start_link[0]]
            if abs(samples[0].lam - p.lam) <= 1e-15 + 1e-12 * abs(p.lam):
                samples[0] = Equilibrium(p.x, p.lam, 0.0, Kind.BIFURCATION)
            elif samples[0].lam > p.lam:
                samples.insert(0, Equilibrium(p.x, p.lam, 0.0, Kind.BIFURCATION))
        if final_end_link is not None:
            p = points[final_end_link[0]]
            if abs(samples[-1].lam - p.lam) <= 1e-15 + 1e-12 * abs(p.lam):
                samples[-1] = Equilibrium(p.x, p.lam, 0.0, Kind.BIFURCATION)
            elif samples[-1].lam < p.lam:
                samples.append(Equilibrium(p.x, p.lam, 0.0, Kind.BIFURCATION))

        current = samples
        cur_start = start_link
        for lam_star, x_star, idx in cuts:
            left = [s for s in current if s.lam < lam_star - 1e-15]
            right = [s for s in current if s.lam > lam_star + 1e-15]
            cut_eq = Equilibrium(x_star, lam_star, 0.0, Kind.BIFURCATION)
            _close_piece(left + [cut_eq], cur_start, (idx, "left"))
            current = [cut_eq] + right
            cur_start = (idx, "right")
        _close_piece(current, cur_start, final_end_link)

    # drop points that ended up with no incident branches (spurious)
    keep = [i for i, p in enumerate(points) if p.incident]
    remap = {old: new for new, old in enumerate(keep)}
    points = [points[i] for i in keep]
    for b in branches:
        b.start_point = remap.get(b.start_point) if b.start_point is not None else None
        b.end_point = remap.get(b.end_point) if b.end_point is not None else None

    diagram = BifurcationDiagram(
        field, (lmin, lmax), n_lambda, branches, points, n_scan, root_tol, bif_tol
    )
    return diagram


# ---------------------------------------------------------------------------
# basins


def basin(diagram: BifurcationDiagram, attractor: Equilibrium, n_probe: int = 64) -> BasinInterval:
    """Basin of a stable equilibrium at its frozen lambda, delimited by neighbours."""
    if attractor.kind is not Kind.STABLE:
        raise ValueError("basin() requires a stable attractor")
    field = diagram.field
    lam = attractor.lam
    eqs = diagram.equilibria_at(lam)
    lo_dom, hi_dom = field.state_domain

    below = [e for e in eqs if e.x < attractor.x - 1e-12]
    above = [e for e in eqs if e.x > attractor.x + 1e-12]
    lo_b = below[-1] if below else None
    hi_b = above[0] if above else None
    lo = lo_b.x if lo_b else lo_dom
    hi = hi_b.x if hi_b else hi_dom

    # sign conditions: f > 0 left of the attractor, f < 0 right of it
    for a, b, sign in ((lo, attractor.x, +1.0), (attractor.x, hi, -1.0)):
        width = b - a
        if width <= 0:
            continue
        for k in range(1, n_probe):
            xp = a + width * k / n_probe
            if abs(xp - attractor.x) < 1e-9 * max(1.0, abs(attractor.x)):
                continue
            v = field.rhs(xp, lam)
            if v * sign < 0 and abs(v) > diagram.root_tol:
                raise DiagramInvalidError(
                    f"basin sign condition failed at x={xp:.6g} (f={v:.3g}) for "
                    f"attractor x={attractor.x:.6g}, lambda={lam:.6g}"
                )
    return BasinInterval(
        attractor=attractor,
        lo=lo,
        hi=hi,
        lo_boundary=lo_b,
        hi_boundary=hi_b,
        lo_unbounded=lo_b is None,
        hi_unbounded=hi_b is None,
    )


# ---------------------------------------------------------------------------
# positive-rescaling invariance


def check_bifurcation_equivalence(
    field: ScalarField,
    rho: Callable[[float], float],
    lam: float,
    n_scan: int = 400,
    match_tol: float = MATCH_TOL,
    rho_min: float = 1e-12,
) -> dict:
    """Equilibria and classification must be unchanged under x -> rho(x) f.

    rho must be strictly positive on the state domain.
    """
    lo, hi = field.state_domain
    for x in np.linspace(lo, hi, 101):
        if not (rho(float(x)) > rho_min):
            raise ValueError(f"rho must be positive on the domain; rho({float(x):.6g}) <= {rho_min:g}")

    scaled = ScalarField(
        rhs=lambda x, l2: rho(x) * field.rhs(x, l2),
        name=f"{field.name}*rho",
        state_domain=field.state_domain,
    )
    eq_a = find_equilibria(field, lam, n_scan)
    eq_b = find_equilibria(scaled, lam, n_scan)
    mismatches: list[str] = []
    if len(eq_a) != len(eq_b):
        mismatches.append(f"equilibrium count {len(eq_a)} vs {len(eq_b)}")
    else:
        for ea, eb in zip(eq_a, eq_b):
            if abs(ea.x - eb.x) > match_tol:
                mismatches.append(f"root moved: {ea.x:.9g} vs {eb.x:.9g}")
            elif ea.kind != eb.kind:
                mismatches.append(
                    f"classification changed at x={ea.x:.6g}: {ea.kind.value} vs {eb.kind.value}"
                )
    return {
        "equivalent": not mismatches,
        "mismatches": mismatches,
        "n_equilibria": len(eq_a),
        "lambda": lam,
    }


# ---------------------------------------------------------------------------
# export


def export_diagram_csv(diagram: BifurcationDiagram) -> str:
    rows = []
    for b in diagram.branches:
        for s in b.samples:
            rows.append((b.id, s.lam, s.x, s.df, s.kind.value))
    return csv_lines("branch_id,lambda,x,df,kind", rows)


def export_bif_points_json(diagram: BifurcationDiagram, indent: int = 2) -> str:
    payload = [
        {
            "x": p.x,
            "lambda": p.lam,
            "class": p.klass.value,
            "incident": [{"branch": bid, "side": side} for bid, side in p.incident],
        }
        for p in diagram.points
    ]
    return to_json17(payload, indent=indent)
