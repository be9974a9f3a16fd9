"""Built-in model registry and shift families.

Three stock fields exercise the full range of tipping behaviour:

* ``changeover`` -- pitchfork lattice with flow-invariant integer lines;
  stability is exchanged along the curve cos(pi x) = -lambda.
* ``bump`` -- a stable hump branch passing over a fold pair; exhibits a finite
  window of rates that tip the system onto the lower branch.
* ``energy-balance`` -- quadratic global-temperature balance -X^2 + b X - c
  whose branches meet at a fold when b^2 = 4c.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from typing import Callable

from .dynamics import ParameterShift, ScalarField, logistic_shift, tanh_shift

__all__ = [
    "changeover_field",
    "bump_field",
    "energy_balance_field",
    "BUMP_CONSTANTS",
    "BuiltinModel",
    "BUILTINS",
    "build_model",
    "build_shift",
    "SHIFT_FAMILIES",
]

PI = math.pi

BUMP_CONSTANTS = {"a": -0.25, "b": 1.2, "c": -0.4, "d": -0.3, "e": 3.0, "K": 2.0}


def changeover_field(state_domain: tuple[float, float] = (-4.5, 4.5)) -> ScalarField:
    def rhs(x: float, lam: float) -> float:
        return math.sin(x * PI) * (lam + math.cos(x * PI))

    def rhs_dx(x: float, lam: float) -> float:
        s, c = math.sin(x * PI), math.cos(x * PI)
        return PI * (c * (lam + c) - s * s)

    return ScalarField(rhs, "changeover", state_domain, rhs_dx)


def bump_field(
    a: float = BUMP_CONSTANTS["a"],
    b: float = BUMP_CONSTANTS["b"],
    c: float = BUMP_CONSTANTS["c"],
    d: float = BUMP_CONSTANTS["d"],
    e: float = BUMP_CONSTANTS["e"],
    K: float = BUMP_CONSTANTS["K"],
    state_domain: tuple[float, float] = (-4.0, 4.0),
) -> ScalarField:
    def rhs(x: float, lam: float) -> float:
        u = x + a + b * lam
        return -((u * u + c * math.tanh(lam - d)) * (x - K / math.cosh(e * lam)))

    def rhs_dx(x: float, lam: float) -> float:
        u = x + a + b * lam
        hump = x - K / math.cosh(e * lam)
        return -(2.0 * u * hump + u * u + c * math.tanh(lam - d))

    return ScalarField(rhs, "bump", state_domain, rhs_dx)


def energy_balance_field(
    b: float | Callable[[float], float] = 2.5,
    c: float | Callable[[float], float] = 1.0,
    state_domain: tuple[float, float] = (0.0, 5.0),
) -> ScalarField:
    """dX/dt = -X^2 + b(lambda) X - c(lambda); b, c constants or curves."""
    b_of = b if callable(b) else (lambda lam, _v=float(b): _v)
    c_of = c if callable(c) else (lambda lam, _v=float(c): _v)

    def rhs(x: float, lam: float) -> float:
        return -x * x + b_of(lam) * x - c_of(lam)

    def rhs_dx(x: float, lam: float) -> float:
        return -2.0 * x + b_of(lam)

    return ScalarField(rhs, "energy-balance", state_domain, rhs_dx)


@dataclass(frozen=True)
class BuiltinModel:
    name: str
    description: str
    constants: dict
    default_domain: tuple[float, float]
    default_lambda_range: tuple[float, float]
    builder: Callable[..., ScalarField]
    expression_template: Callable[[dict], str]

    def build(self, constants: dict | None = None, state_domain: tuple[float, float] | None = None) -> ScalarField:
        merged = dict(self.constants)
        merged.update(constants or {})
        return self.builder(state_domain=state_domain or self.default_domain, **merged)

    def expression(self, constants: dict | None = None) -> str:
        merged = dict(self.constants)
        merged.update(constants or {})
        return self.expression_template(merged)


def _num(v: float) -> str:
    return repr(float(v))


BUILTINS: dict[str, BuiltinModel] = {
    "changeover": BuiltinModel(
        name="changeover",
        description=(
            "sin(pi x)(lambda + cos(pi x)): integer lines stay flow-invariant while "
            "stability is exchanged along cos(pi x) = -lambda"
        ),
        constants={},
        default_domain=(-4.5, 4.5),
        default_lambda_range=(-2.0, 2.0),
        builder=lambda state_domain: changeover_field(state_domain),
        expression_template=lambda k: "sin(x*pi)*(lambda + cos(x*pi))",
    ),
    "bump": BuiltinModel(
        name="bump",
        description=(
            "stable hump branch over a fold pair; tips to the lower branch only in a "
            "finite window of rates"
        ),
        constants=dict(BUMP_CONSTANTS),
        default_domain=(-4.0, 4.0),
        default_lambda_range=(-1.0, 1.0),
        builder=lambda state_domain, **k: bump_field(state_domain=state_domain, **k),
        expression_template=lambda k: (
            f"-(((x + {_num(k['a'])} + {_num(k['b'])}*lambda)^2 + "
            f"{_num(k['c'])}*tanh(lambda - {_num(k['d'])}))"
            f"*(x - {_num(k['K'])}/cosh({_num(k['e'])}*lambda)))"
        ),
    ),
    "energy-balance": BuiltinModel(
        name="energy-balance",
        description=(
            "quadratic temperature balance -X^2 + b X - c; branches (b +- sqrt(b^2-4c))/2 "
            "meet at a fold when b^2 = 4c"
        ),
        constants={"b": 2.5, "c": 1.0},
        default_domain=(0.0, 5.0),
        default_lambda_range=(0.0, 1.0),
        builder=lambda state_domain, b, c: energy_balance_field(b, c, state_domain),
        expression_template=lambda k: f"-(x^2) + {_num(k['b'])}*x - {_num(k['c'])}",
    ),
}


def build_model(
    name: str,
    constants: dict | None = None,
    state_domain: tuple[float, float] | None = None,
) -> ScalarField:
    if name not in BUILTINS:
        raise ValueError(f"unknown builtin model {name!r}; known: {sorted(BUILTINS)}")
    return BUILTINS[name].build(constants, state_domain)


SHIFT_FAMILIES = ("tanh", "logistic")


def build_shift(family: str, lambda_minus: float, lambda_plus: float) -> ParameterShift:
    if family == "tanh":
        return tanh_shift(lambda_minus, lambda_plus)
    if family in ("logistic", "logistic-ode"):
        return logistic_shift(lambda_minus, lambda_plus)
    raise ValueError(f"unknown shift family {family!r}; known: tanh, logistic")
