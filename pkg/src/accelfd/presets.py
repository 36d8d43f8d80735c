"""Catalog of ready-made problems, most with a manufactured exact solution."""

from __future__ import annotations

from dataclasses import dataclass, field

from .elliptic import EllipticProblem
from .fields import CoefficientField, as_field
from .grid import GridSpec
from .operators import OperatorContext, Stencil
from .parabolic import ParabolicProblem


class PresetError(KeyError):
    pass


@dataclass(frozen=True)
class Preset:
    name: str
    description: str
    kind: str
    directions: tuple[tuple[int, ...], ...]
    q: dict = field(default_factory=dict)
    p: dict = field(default_factory=dict)
    c: str = "0"
    period: float = 1.0
    origin: float = 0.0
    mesh: float = 1 / 16
    # parabolic data
    f: str | None = None
    g: str | None = None
    horizon: float | None = None
    exact: str | None = None
    # elliptic data
    elliptic_f: str | None = None
    elliptic_exact: str | None = None
    c_floor: float | None = None

    @property
    def dim(self) -> int:
        return len(self.directions[0])

    def stencil(self) -> Stencil:
        return Stencil.build(self.directions, self.q, self.p, self.c)

    def grid(self, mesh: float | None = None) -> GridSpec:
        return GridSpec.from_period((self.period,) * self.dim, mesh or self.mesh, (self.origin,) * self.dim)

    def context(self, mesh: float | None = None) -> OperatorContext:
        return OperatorContext(self.stencil(), self.grid(mesh))

    @property
    def has_parabolic(self) -> bool:
        return self.g is not None

    @property
    def has_elliptic(self) -> bool:
        return self.elliptic_f is not None

    def parabolic(self, mesh: float | None = None) -> ParabolicProblem:
        if not self.has_parabolic:
            raise PresetError(f"preset {self.name!r} has no time-dependent problem")
        return ParabolicProblem(self.context(mesh), as_field(self.f or "0"), as_field(self.g), self.horizon)

    def elliptic(self, mesh: float | None = None, f: str | None = None) -> EllipticProblem:
        if not self.has_elliptic:
            raise PresetError(f"preset {self.name!r} has no stationary problem")
        return EllipticProblem(self.context(mesh), as_field(f or self.elliptic_f), self.c_floor)

    def exact_field(self, kind: str | None = None) -> CoefficientField | None:
        kind = kind or self.kind
        src = self.exact if kind == "parabolic" else self.elliptic_exact
        return None if src is None else as_field(src)


E1 = ((1,), (-1,))

# u = exp(-t) (sin 2 pi x + cos(4 pi x) / 2), used by several 1D presets
_U = "exp(-t)*(sin(2*pi*x1) + 0.5*cos(4*pi*x1))"
_U_T = "(-exp(-t)*(sin(2*pi*x1) + 0.5*cos(4*pi*x1)))"
_U_X = "exp(-t)*(2*pi*cos(2*pi*x1) - 2*pi*sin(4*pi*x1))"
_U_XX = "exp(-t)*(-4*pi^2*sin(2*pi*x1) - 8*pi^2*cos(4*pi*x1))"

_DRIFT_Q = "0.05*(1 + cos(2*pi*x1))"
_SKEW_Q = "(0.2 + 0.1*sin(2*pi*x1))"
_POS = "(((1 - x1^2) + abs(1 - x1^2))/2)"

_HEAT_F = "exp(-t)*((pi^2 - 1)*sin(2*pi*x1) + (2*pi^2 - 0.5)*cos(4*pi*x1))"

PRESETS: dict[str, Preset] = {}


def _add(p: Preset) -> None:
    PRESETS[p.name] = p


_add(Preset(
    "freeflow", "zero operator: u = g + t f exactly", "parabolic", E1,
    f="cos(2*pi*x1)", g="sin(2*pi*x1)", horizon=0.5, exact="sin(2*pi*x1) + t*cos(2*pi*x1)",
))
_add(Preset(
    "decay", "pure absorption c = 1: u = g exp(-t); stationary v = f", "parabolic", E1,
    c="1", f="0", g="1 + 0.5*sin(2*pi*x1)", horizon=1.0, exact="(1 + 0.5*sin(2*pi*x1))*exp(-t)",
    elliptic_f="2 + sin(2*pi*x1)", elliptic_exact="2 + sin(2*pi*x1)", c_floor=1.0,
))
_add(Preset(
    "heat1d-sym", "symmetric constant diffusion u_t = u_xx/4 + f", "parabolic", E1,
    q={(1,): "0.25", (-1,): "0.25"}, f=_HEAT_F, g="sin(2*pi*x1) + 0.5*cos(4*pi*x1)", horizon=0.1, exact=_U,
))
_add(Preset(
    "heat1d-biased", "negative control: q(e1) != q(-e1), so sum l q_l != 0", "parabolic", E1,
    q={(1,): "0.26", (-1,): "0.24"}, f=_HEAT_F, g="sin(2*pi*x1) + 0.5*cos(4*pi*x1)", horizon=0.1, exact=_U,
))
_add(Preset(
    "drift-upwind", "variable diffusion with one-sided drift: first order", "parabolic", E1,
    q={(1,): _DRIFT_Q, (-1,): _DRIFT_Q}, p={(1,): "1"},
    f=f"{_U_T} - {_DRIFT_Q}*{_U_XX} - {_U_X}", g="sin(2*pi*x1) + 0.5*cos(4*pi*x1)", horizon=0.2, exact=_U,
))
_add(Preset(
    "skew", "symmetric q with antisymmetric p: odd coefficients vanish", "parabolic", E1,
    q={(1,): _SKEW_Q, (-1,): _SKEW_Q}, p={(1,): "0.5*cos(2*pi*x1)", (-1,): "-0.5*cos(2*pi*x1)"}, c="0.5",
    f=f"{_U_T} - {_SKEW_Q}*{_U_XX} - cos(2*pi*x1)*{_U_X} + 0.5*{_U}",
    g="sin(2*pi*x1) + 0.5*cos(4*pi*x1)", horizon=0.1, exact=_U,
))
_add(Preset(
    "aniso2d", "2D anisotropic diffusion with diagonal directions, c = 1", "elliptic",
    ((1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (-1, -1), (1, -1), (-1, 1)),
    q={(1, 0): "0.3", (-1, 0): "0.3", (0, 1): "0.1", (0, -1): "0.1",
       (1, 1): "0.1", (-1, -1): "0.1", (1, -1): "0.05", (-1, 1): "0.05"},
    c="1",
    elliptic_f="1 + (1 + 2.8*pi^2)*sin(2*pi*x1)*cos(2*pi*x2) + 0.4*pi^2*cos(2*pi*x1)*sin(2*pi*x2)",
    elliptic_exact="1 + sin(2*pi*x1)*cos(2*pi*x2)", c_floor=1.0,
))
_add(Preset(
    "degenerate-ode", "(1 - x^2)_+^2 v'' - v + f = 0 on [-2, 2); diffusion vanishes at |x| >= 1", "elliptic", E1,
    q={(1,): f"{_POS}^2", (-1,): f"{_POS}^2"}, c="1", period=4.0, origin=-2.0,
    elliptic_f="1 + x1^2", c_floor=1.0,
))

ALIASES = {"heat1d": "heat1d-sym"}

# added to f outside [-1, 1] in the decoupling check
DEGENERATE_PERTURBATION = "5*((x1^2 - 1) + abs(x1^2 - 1))"


def get_preset(name: str) -> Preset:
    key = ALIASES.get(name, name)
    if key not in PRESETS:
        raise PresetError(f"unknown preset {name!r}; available: {', '.join(sorted(PRESETS))}")
    return PRESETS[key]


def preset_names() -> list[str]:
    return list(PRESETS)
