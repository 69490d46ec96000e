"""Named hypersurface families with known lambda values.

The lambda values come from the constant-mean-curvature reduction of the
biharmonic system: with ``Delta H = 0`` and ``T`` or ``theta`` vanishing
suitably, the normal equation reads ``|A|^2 - c(m-1) sin^2(alpha) + lambda = 0``.
"""

from __future__ import annotations

import ast
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import jets as J
from .ambient import AmbientSpace, ChartDomainError
from .immersion import Immersion

ANGLE_HALF_WIDTH = 0.5
FLAT_HALF_WIDTH = 0.5
GRAPH_HALF_WIDTH = 0.4
LAMBDA_DECIMALS = 12


def _clean_lambda(value: float) -> float:
    """Round away trigonometric noise so exact cases (such as 0) stay exact."""
    return round(float(value), LAMBDA_DECIMALS) + 0.0


@dataclass(frozen=True)
class CatalogEntry:
    name: str
    params: dict
    immersion: Immersion
    lambda_star: float | str | None
    minimal: bool = False
    closed_form: bool = True
    note: str = ""
    extra: dict = field(default_factory=dict)

    @property
    def numeric_lambda(self) -> float | None:
        if isinstance(self.lambda_star, (int, float)):
            return float(self.lambda_star)
        return None

    def describe(self) -> dict:
        return {
            "name": self.name,
            "params": dict(self.params),
            "ambient": self.immersion.space.describe(),
            "lambda_star": self.lambda_star,
            "minimal": self.minimal,
            "note": self.note,
        }


# ---------------------------------------------------------------------------
# chart conversions


def _embedding_to_chart(space: AmbientSpace, ys: list):
    """Base embedding components (y_0 polar) to conformal chart components."""
    if space.c == 0:
        return list(ys)
    y0, rest = ys[0], ys[1:]
    denom = 1.0 + y0
    return [2.0 * y / denom for y in rest]


def embedding_chart_convert(space: AmbientSpace, point) -> np.ndarray:
    """Map ``(y, t)`` with y on the model base to chart coordinates ``(x, t)``.

    c = 1: y on the unit sphere in R^{m+1}; stereographic projection from
    ``-e_0`` so ``e_0`` lands at the chart origin and the equator on |x| = 2.
    c = -1: y on the upper hyperboloid ``y_0^2 - |y'|^2 = 1``.
    c = 0: y is already a point of R^m.
    """
    p = np.asarray(point, dtype=float)
    m = space.m
    if space.c == 0:
        if p.shape[-1] != m + 1:
            raise ValueError("flat base expects m + 1 components (x, t)")
        return p.copy()
    if p.shape[-1] != m + 2:
        raise ValueError("curved base expects m + 2 components (y_0..y_m, t)")
    y, t = p[..., : m + 1], p[..., m + 1]
    if space.c == 1:
        if np.any(np.abs(np.sum(y * y, axis=-1) - 1.0) > 1e-9):
            raise ValueError("point is not on the unit sphere")
        if np.any(1.0 + y[..., 0] < 1e-12):
            raise ChartDomainError("projection pole: antipode of the chart centre")
    else:
        q = y[..., 0] ** 2 - np.sum(y[..., 1:] ** 2, axis=-1)
        if np.any(np.abs(q - 1.0) > 1e-9) or np.any(y[..., 0] <= 0):
            raise ValueError("point is not on the upper hyperboloid")
    x = 2.0 * y[..., 1:] / (1.0 + y[..., :1])
    return np.concatenate([x, t[..., None]], axis=-1)


def chart_embedding_convert(space: AmbientSpace, point) -> np.ndarray:
    """Inverse of :func:`embedding_chart_convert`."""
    p = np.asarray(point, dtype=float)
    m = space.m
    if space.c == 0:
        return p.copy()
    x, t = p[..., :m], p[..., m]
    r2 = np.sum(x * x, axis=-1)
    if space.c == 1:
        d = 4.0 + r2
        y0 = (4.0 - r2) / d
        yr = 4.0 * x / d[..., None]
    else:
        if np.any(r2 >= 4.0):
            raise ChartDomainError("hyperbolic chart requires |x|^2 < 4")
        d = 4.0 - r2
        y0 = (4.0 + r2) / d
        yr = 4.0 * x / d[..., None]
    return np.concatenate([y0[..., None], yr, t[..., None]], axis=-1)


def unit_sphere(angles: list) -> list:
    """Hyperspherical coordinates of S^n from n angles (works on jets)."""
    n = len(angles)
    if n == 0:
        raise ValueError("need at least one angle")
    out = []
    prod = 1.0
    for i, a in enumerate(angles):
        if i < n - 1:
            out.append(prod * J.cos(a))
            prod = prod * J.sin(a)
        else:
            out.append(prod * J.cos(a))
            out.append(prod * J.sin(a))
    return out


def _angle_box(n: int):
    c = math.pi / 2
    return [c - ANGLE_HALF_WIDTH] * n, [c + ANGLE_HALF_WIDTH] * n


# ---------------------------------------------------------------------------
# builders


def slice_entry(space: AmbientSpace, t0: float = 0.0, half_width: float = FLAT_HALF_WIDTH) -> CatalogEntry:
    m = space.m

    def f(u):
        return list(u) + [t0]

    imm = Immersion(space, (-half_width,) * m, (half_width,) * m, f, name="slice")
    return CatalogEntry(
        "slice",
        {"t0": t0},
        imm,
        "any",
        minimal=True,
        note="level set L^m x {t0}; totally geodesic",
    )


def euclidean_cylinder(m: int, k: int, a: float, tilt: float = 0.0) -> CatalogEntry:
    """R^k x S^{m-k}(a) in R^{m+1} = L^m(0) x R.

    With ``tilt = 0`` the first flat direction is the height axis, so theta
    vanishes. A nonzero tilt rotates the cylinder in the plane of the height
    axis and one sphere direction; theta then varies but lambda is unchanged.
    """
    if not (1 <= k <= m - 1):
        raise ValueError("need 1 <= k <= m - 1")
    if a <= 0:
        raise ValueError("radius must be positive")
    space = AmbientSpace(0, m)
    n = m - k
    alo, ahi = _angle_box(n)
    lo = [-FLAT_HALF_WIDTH] * k + alo
    hi = [FLAT_HALF_WIDTH] * k + ahi
    cb, sb = math.cos(tilt), math.sin(tilt)

    def f(u):
        flat, ang = list(u[:k]), list(u[k:])
        sph = [a * w for w in unit_sphere(ang)]
        x = flat[1:] + sph
        t = flat[0]
        if tilt:
            j = k - 1  # slot of the first sphere coordinate
            xj = x[j]
            x[j] = sb * t + cb * xj
            t = cb * t - sb * xj
        return x + [t]

    imm = Immersion(space, tuple(lo), tuple(hi), f, name="euclidean_cylinder")
    return CatalogEntry(
        "euclidean_cylinder",
        {"m": m, "k": k, "a": a, "tilt": tilt},
        imm,
        _clean_lambda(-(m - k) / a**2),
        note="R^k x S^(m-k)(a); lambda = -(m-k)/a^2",
    )


def _vertical_cylinder(space: AmbientSpace, rho: float, name: str) -> Immersion:
    m = space.m
    alo, ahi = _angle_box(m - 1)
    lo = alo + [-FLAT_HALF_WIDTH]
    hi = ahi + [FLAT_HALF_WIDTH]
    if space.c == 1:
        cr, sr = math.cos(rho), math.sin(rho)
    else:
        cr, sr = math.cosh(rho), math.sinh(rho)

    def f(u):
        omega = unit_sphere(list(u[: m - 1]))
        ys = [cr] + [sr * w for w in omega]
        return _embedding_to_chart(space, ys) + [u[m - 1]]

    return Immersion(space, tuple(lo), tuple(hi), f, name=name)


def spherical_vertical_cylinder(m: int, rho: float) -> CatalogEntry:
    """Distance sphere of radius rho in S^m, times R."""
    if not (0 < rho < math.pi):
        raise ValueError("rho must lie in (0, pi)")
    space = AmbientSpace(1, m)
    cot2 = (math.cos(rho) / math.sin(rho)) ** 2
    lam = (m - 1) * (1.0 - cot2)
    minimal = abs(math.cos(rho)) < 1e-12
    return CatalogEntry(
        "spherical_vertical_cylinder",
        {"m": m, "rho": rho},
        _vertical_cylinder(space, rho, "spherical_vertical_cylinder"),
        _clean_lambda(lam),
        minimal=minimal,
        note="S^(m-1)(rho) x R in S^m x R; lambda = (m-1)(1 - cot^2 rho)",
    )


def hyperbolic_vertical_cylinder(m: int, rho: float) -> CatalogEntry:
    """Distance sphere of radius rho in H^m, times R."""
    if rho <= 0:
        raise ValueError("rho must be positive")
    space = AmbientSpace(-1, m)
    coth2 = (math.cosh(rho) / math.sinh(rho)) ** 2
    return CatalogEntry(
        "hyperbolic_vertical_cylinder",
        {"m": m, "rho": rho},
        _vertical_cylinder(space, rho, "hyperbolic_vertical_cylinder"),
        _clean_lambda(-(m - 1) * (1.0 + coth2)),
        note="S^(m-1)(rho) x R in H^m x R; lambda = -(m-1)(1 + coth^2 rho)",
    )


def rotation_minimal(
    c: int = 1,
    m: int = 3,
    initial_slope: float = 0.5,
    s0: float = 1.0,
    s1: float = 1.4,
    step: float = 1e-3,
) -> CatalogEntry:
    """Minimal rotation hypersurface from an integrated profile.

    The default range keeps away from s = 0, where the profile inherits the
    cot singularity and stencil truncation error grows like s^-7.
    """
    from .rotation import minimal_profile_integrate, rotation_immersion

    space = AmbientSpace(c, m)
    profile = minimal_profile_integrate(space, initial_slope, s0, s1, step)
    return CatalogEntry(
        "rotation_minimal",
        {"c": c, "m": m, "initial_slope": initial_slope, "s0": s0, "s1": s1, "step": step},
        rotation_immersion(profile),
        "any",
        minimal=True,
        closed_form=False,
        note="rotation hypersurface with an RK4-integrated H = 0 profile",
        extra={"profile": profile},
    )


def graph(space: AmbientSpace, f: Callable, lo=None, hi=None, name: str = "graph") -> CatalogEntry:
    """Graph ``x -> (x, f(x))`` over a box in the base chart."""
    m = space.m
    lo = tuple(lo) if lo is not None else (-GRAPH_HALF_WIDTH,) * m
    hi = tuple(hi) if hi is not None else (GRAPH_HALF_WIDTH,) * m

    def phi(u):
        return list(u) + [f(u)]

    imm = Immersion(space, lo, hi, phi, name=name)
    return CatalogEntry(name, {}, imm, None, closed_form=False, note="generic graph")


@dataclass(frozen=True)
class TrigPolynomial:
    """``t0 + sum_j a_j sin(k_j . u + p_j)``; picklable and jet-friendly."""

    amplitudes: tuple
    wavevectors: tuple
    phases: tuple
    t0: float = 0.0

    def __call__(self, u):
        out = self.t0
        for a, k, p in zip(self.amplitudes, self.wavevectors, self.phases):
            arg = p
            for ki, ui in zip(k, u):
                arg = arg + ki * ui
            out = out + a * J.sin(arg)
        return out


def random_trig_polynomial(m: int, seed: int, terms: int = 3, amplitude: float = 0.25,
                           max_wavenumber: float = 1.5) -> TrigPolynomial:
    rng = np.random.default_rng(seed)
    amps = rng.uniform(-amplitude, amplitude, terms)
    ks = rng.uniform(-max_wavenumber, max_wavenumber, (terms, m))
    ph = rng.uniform(0, 2 * math.pi, terms)
    return TrigPolynomial(
        tuple(float(a) for a in amps),
        tuple(tuple(float(v) for v in k) for k in ks),
        tuple(float(p) for p in ph),
    )


def random_graph(space: AmbientSpace, seed: int) -> CatalogEntry:
    f = random_trig_polynomial(space.m, seed)
    entry = graph(space, f, name="graph")
    return CatalogEntry(
        "graph",
        {"seed": seed},
        entry.immersion,
        None,
        closed_form=False,
        note="seeded random trigonometric graph",
    )


# ---------------------------------------------------------------------------
# graph expressions


_ALLOWED_FUNCS = {
    "sin": J.sin,
    "cos": J.cos,
    "tan": J.tan,
    "exp": J.exp,
    "log": J.log,
    "sqrt": J.sqrt,
    "sinh": J.sinh,
    "cosh": J.cosh,
    "tanh": J.tanh,
    "arctan": J.arctan,
}
_ALLOWED_CONSTS = {"pi": math.pi, "e": math.e}
_ALLOWED_NODES = (
    ast.Expression, ast.BinOp, ast.UnaryOp, ast.Call, ast.Name, ast.Load, ast.Constant,
    ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow, ast.USub, ast.UAdd,
)


def compile_expression(expr: str, m: int) -> Callable:
    """Turn ``"0.2*sin(x0) + x1**2"`` into a jet-aware function of u."""
    tree = ast.parse(expr, mode="eval")
    names = {f"x{i}" for i in range(m)}
    for node in ast.walk(tree):
        if not isinstance(node, _ALLOWED_NODES):
            raise ValueError(f"disallowed syntax in expression: {type(node).__name__}")
        if isinstance(node, ast.Name) and node.id not in names | set(_ALLOWED_FUNCS) | set(_ALLOWED_CONSTS):
            raise ValueError(f"unknown name {node.id!r} in expression")
        if isinstance(node, ast.Call) and not (
            isinstance(node.func, ast.Name) and node.func.id in _ALLOWED_FUNCS
        ):
            raise ValueError("only whitelisted functions may be called")
        if isinstance(node, ast.Constant) and not isinstance(node.value, (int, float)):
            raise ValueError("only numeric constants are allowed")
    code = compile(tree, "<graph-expression>", "eval")

    def f(u):
        env = dict(_ALLOWED_FUNCS)
        env.update(_ALLOWED_CONSTS)
        env.update({f"x{i}": u[i] for i in range(m)})
        return eval(code, {"__builtins__": {}}, env)  # noqa: S307 - whitelisted AST

    return f


def expression_graph(space: AmbientSpace, expr: str, lo=None, hi=None) -> CatalogEntry:
    entry = graph(space, compile_expression(expr, space.m), lo, hi, name="custom_graph")
    return CatalogEntry(
        "custom_graph", {"expression": expr}, entry.immersion, None, closed_form=False,
        note="user graph expression",
    )


def default_entries() -> list[CatalogEntry]:
    """Entries listed by the CLI ``catalog`` subcommand."""
    out = []
    for c in (-1, 0, 1):
        for m in (2, 3):
            out.append(slice_entry(AmbientSpace(c, m)))
    for m, k, a in [(2, 1, 0.5), (2, 1, 1.0), (2, 1, 2.0), (3, 1, 2.0), (3, 1, 1.0), (3, 2, 1.0), (4, 2, 1.0)]:
        out.append(euclidean_cylinder(m, k, a))
    for m in (2, 3):
        for rho in (math.pi / 4, math.pi / 3, math.pi / 2):
            out.append(spherical_vertical_cylinder(m, rho))
    for rho in (0.5, 1.0):
        out.append(hyperbolic_vertical_cylinder(3, rho))
    for c in (1, -1):
        out.append(rotation_minimal(c, 3))
    return out
