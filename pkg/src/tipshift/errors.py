"""Exception hierarchy shared by all analysis modules.

Every failure that a caller is expected to handle (as opposed to a plain
programming error) derives from :class:`TipshiftError` and carries a short
machine-readable ``kind`` used by the service and CLI error records.
"""

from __future__ import annotations


class TipshiftError(Exception):
    """Base class for reportable numerical/analysis failures."""

    kind = "error"

    def payload(self) -> dict:
        return {"kind": self.kind, "message": str(self)}


class DomainViolationError(TipshiftError):
    """A field evaluated to a non-finite value on its declared domain."""

    kind = "domain-violation"

    def __init__(self, name: str, x: float, lam: float, value: float):
        super().__init__(
            f"field {name!r} returned non-finite value {value!r} at x={x!r}, lambda={lam!r}"
        )
        self.x = x
        self.lam = lam


class ShiftValidationError(TipshiftError):
    kind = "shift-invalid"


class DivergenceError(TipshiftError):
    """Trajectory left the escape bound: the state is running away."""

    kind = "divergence"

    def __init__(self, escape_time: float, x: float, bound: float):
        direction = "+inf" if x > 0 else "-inf"
        super().__init__(
            f"trajectory escaped |x| > {bound:g} at t={escape_time:.6g} (toward {direction})"
        )
        self.escape_time = escape_time
        self.x = x
        self.bound = bound


class StiffnessError(TipshiftError):
    """Adaptive step size underflowed; the problem is stiff at this point."""

    kind = "stiffness"

    def __init__(self, t: float, h: float):
        super().__init__(f"step size underflow (h={h:.3e}) at t={t:.6g}")
        self.t = t
        self.h = h


class NotAnEquilibriumError(TipshiftError):
    kind = "not-an-equilibrium"


class DiagramIrregularError(TipshiftError):
    """Bifurcation points accumulate beyond the configured cap."""

    kind = "diagram-irregular"


class DiagramInvalidError(TipshiftError):
    """Hard diagram validation failure (e.g. bifurcation at a range endpoint)."""

    kind = "diagram-invalid"


class DeadEndError(TipshiftError):
    """A stable path terminated at a fold with no stable continuation."""

    kind = "path-dead-end"

    def __init__(self, x: float, lam: float):
        super().__init__(
            f"stable branch terminates at ({x:.6g}, {lam:.6g}) with no stable continuation"
        )
        self.x = x
        self.lam = lam


class AmbiguousRoutingError(TipshiftError):
    kind = "ambiguous-routing"


class NeedsManualRoutingError(TipshiftError):
    """Connectivity refused: an unclassified bifurcation touches candidate routes."""

    kind = "needs-manual-routing"


class PullbackUnresolvedError(TipshiftError):
    kind = "pullback-unresolved"


class ConstructionFailureError(TipshiftError):
    """Pseudo-orbit segment drifted too far within its minimum duration."""

    kind = "pseudo-orbit-construction"

    def __init__(self, s: float, drift: float, eps: float):
        super().__init__(
            f"segment drifted {drift:.3g} >= eps={eps:g} within the minimum duration "
            f"near s={s:.6g}; the rate is too large for this eps"
        )
        self.s = s


class ExpressionError(TipshiftError):
    """Lexical/syntax/semantic error in a user expression, with 1-based column."""

    kind = "expression"

    def __init__(self, message: str, column: int):
        super().__init__(f"{message} (column {column})")
        self.column = column
