"""Rotation hypersurfaces of S^m x R and H^m x R.

The profile curve is ``s -> (cos s, sin s * e, h(s))`` in the sphere case
and ``s -> (cosh s, sinh s * e, h(s))`` in the hyperbolic case. Its angle
``alpha`` is fixed by ``tan(alpha) = h'``, so ``cos(alpha) = 1/sqrt(1+h'^2)``.

Principal curvatures, with ``cot_c`` equal to ``cot`` for c = 1 and
``coth`` for c = -1::

    lambda_1 = -h'' / (1 + h'^2)^(3/2)          (profile direction)
    lambda_2 = -h' cot_c(s) / (1 + h'^2)^(1/2)  (orbit directions, m - 1 times)

These hold for the normal returned by :func:`rotation_immersion`.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import brentq

from . import jets as J
from .ambient import AmbientSpace
from .catalog import ANGLE_HALF_WIDTH, _embedding_to_chart, unit_sphere
from .immersion import Immersion
from .jets import Taylor

COT_BOUND = 1e6
BLOWUP_SLOPE = 1e6
TRACE_COLUMNS = ("s", "h", "h_prime", "alpha", "H", "lambda1", "lambda2", "ode_5_2_residual")


class RotationDomainError(ValueError):
    """Parameter outside the profile domain or at a cot singularity."""


class IntegrationError(RuntimeError):
    """The profile ODE blew up or started at a singular point."""


def _cot_c(c: int, s):
    if c == 1:
        return J.cos(s) / J.sin(s)
    return J.cosh(s) / J.sinh(s)


def _singular(c: int, s: float) -> bool:
    if c == 1:
        sn = math.sin(s)
        return sn == 0.0 or abs(math.cos(s) / sn) > COT_BOUND or not (0.0 < s < math.pi)
    return s <= 0.0 or abs(math.cosh(s) / math.sinh(s)) > COT_BOUND


def clip_domain(c: int, s0: float, s1: float) -> tuple[float, float]:
    """Shrink ``[s0, s1]`` to where ``|cot_c s|`` stays within the bound."""
    eps = math.atan(1.0 / COT_BOUND) if c == 1 else math.atanh(1.0 / COT_BOUND)
    lo = max(s0, eps)
    hi = min(s1, math.pi - eps) if c == 1 else s1
    return lo, hi


@dataclass(frozen=True)
class RotationProfile:
    """Height profile ``h(s)`` of a rotation hypersurface.

    ``h`` must accept floats, arrays, Jets and Taylor series (write it with
    the functions from :mod:`lambda_biharmonic.jets`).
    """

    space: AmbientSpace
    h: Callable
    s_domain: tuple
    name: str = "profile"

    def __post_init__(self):
        if self.space.c not in (1, -1):
            raise ValueError("rotation profiles need a curved base (c = 1 or -1)")
        s0, s1 = map(float, self.s_domain)
        if not s0 < s1:
            raise ValueError("empty profile domain")
        if _singular(self.space.c, s0) or _singular(self.space.c, s1):
            raise RotationDomainError(f"domain [{s0}, {s1}] reaches a cot singularity")

    @property
    def m(self) -> int:
        return self.space.m

    def _check(self, s: float):
        s0, s1 = self.s_domain
        if not (s0 - 1e-12 <= s <= s1 + 1e-12):
            raise RotationDomainError(f"s = {s} outside [{s0}, {s1}]")
        if _singular(self.space.c, s):
            raise RotationDomainError(f"s = {s} is at a cot singularity")

    def series(self, s: float, order: int = 3) -> Taylor:
        self._check(float(s))
        out = self.h(Taylor.variable(float(s), order))
        if not isinstance(out, Taylor):
            out = Taylor.constant(out, order)
        return out

    def derivatives(self, s: float, order: int = 3) -> np.ndarray:
        """``[h, h', ..., h^(order)]`` at s."""
        t = self.series(s, order)
        return np.array([float(t.derivative(k)) for k in range(order + 1)])

    def angle(self, s: float) -> tuple[float, float]:
        """``(sin alpha, cos alpha)`` with ``tan alpha = h'``."""
        hp = self.derivatives(s, 1)[1]
        w = math.sqrt(1.0 + hp * hp)
        return hp / w, 1.0 / w


def _curvature_series(profile: RotationProfile, s: float, order: int):
    """Taylor series of sin(alpha), lambda_1, lambda_2 and H at s."""
    c, m = profile.space.c, profile.m
    h = profile.series(s, order + 2)
    # series of h' and h'' by shifting coefficients
    hp_full = [h.c[k + 1] * (k + 1) for k in range(order + 2)]
    hpp = Taylor(np.array([hp_full[k + 1] * (k + 1) for k in range(order + 1)]))
    hp = Taylor(np.array(hp_full[: order + 1]))
    sv = Taylor.variable(float(s), order)
    w = J.sqrt(1.0 + hp * hp)
    lam1 = -hpp / (w * w * w)
    lam2 = -hp * _cot_c(c, sv) / w
    H = (lam1 + (m - 1) * lam2) * (1.0 / m)
    return hp / w, lam1, lam2, H


def rotation_principal_curvatures(profile: RotationProfile, s: float) -> tuple[float, float]:
    """``(lambda_1, lambda_2)`` at s; lambda_2 has multiplicity m - 1."""
    _, lam1, lam2, _ = _curvature_series(profile, s, 1)
    return float(lam1.val), float(lam2.val)


def mean_curvature(profile: RotationProfile, s: float) -> float:
    lam1, lam2 = rotation_principal_curvatures(profile, s)
    return (lam1 + (profile.m - 1) * lam2) / profile.m


def ode_5_2_value(c: int, m: int, H, dH, lam1, sin_alpha):
    """Left side ``(m/2 H + lambda_1) H' - c(m-1) sin(alpha) H``."""
    return (0.5 * m * H + lam1) * dH - c * (m - 1) * sin_alpha * H


def ode_5_2_residual(profile: RotationProfile, s: float) -> float:
    """The profile ODE residual at s, with ``lambda_1 = -alpha' cos(alpha)``."""
    sa, lam1, _, H = _curvature_series(profile, s, 1)
    return float(ode_5_2_value(profile.space.c, profile.m, H.val, H.derivative(1), lam1.val, sa.val))


def profile_trace(profile: RotationProfile, s_values: Sequence[float]) -> list[dict]:
    rows = []
    for s in s_values:
        s = float(s)
        sa, lam1, lam2, H = _curvature_series(profile, s, 1)
        hp = profile.derivatives(s, 1)
        rows.append(
            {
                "s": s,
                "h": hp[0],
                "h_prime": hp[1],
                "alpha": math.atan(hp[1]),
                "H": float(H.val),
                "lambda1": float(lam1.val),
                "lambda2": float(lam2.val),
                "ode_5_2_residual": float(
                    ode_5_2_value(profile.space.c, profile.m, H.val, H.derivative(1), lam1.val, sa.val)
                ),
            }
        )
    return rows


def trace_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=TRACE_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for r in rows:
        writer.writerow({k: repr(float(r[k])) for k in TRACE_COLUMNS})
    return buf.getvalue()


def rotation_immersion(profile: RotationProfile, half_width: float = ANGLE_HALF_WIDTH) -> Immersion:
    """Chart immersion with parameters ``(s, phi_1, ..., phi_{m-1})``.

    The orbit sphere is parametrized by hyperspherical angles in a box around
    pi/2; the normal is oriented so the closed-form curvature signs hold.
    """
    space = profile.space
    m = space.m
    s0, s1 = profile.s_domain
    lo = (float(s0),) + (math.pi / 2 - half_width,) * (m - 1)
    hi = (float(s1),) + (math.pi / 2 + half_width,) * (m - 1)
    cs, sn = (J.cos, J.sin) if space.c == 1 else (J.cosh, J.sinh)

    def f(u):
        s = u[0]
        omega = unit_sphere(list(u[1:]))
        ys = [cs(s)] + [sn(s) * w for w in omega]
        return _embedding_to_chart(space, ys) + [profile.h(s)]

    # the cofactor normal of this parametrization points against the
    # closed-form convention; flip once here
    return Immersion(space, lo, hi, f, orientation=-1, name=f"rotation-{profile.name}")


# ---------------------------------------------------------------------------
# minimal profiles


class HermiteInterpolant:
    """Piecewise Hermite interpolant from nodal derivatives.

    ``derivs[k]`` holds the k-th derivative at every node; with r rows the
    pieces are polynomials of degree ``2r - 1``. Callable on floats, arrays,
    Jets and Taylor series; the interval is chosen from the plain value of
    the argument.
    """

    def __init__(self, nodes, derivs):
        self.nodes = np.asarray(nodes, dtype=float)
        self.step = float(self.nodes[1] - self.nodes[0])
        d = np.asarray(derivs, dtype=float)
        r = d.shape[0]
        scaled = d * self.step ** np.arange(r)[:, None]
        left, right = scaled[:, :-1], scaled[:, 1:]
        fact = np.array([math.factorial(k) for k in range(r)], dtype=float)
        low = left / fact[:, None]  # Taylor coefficients at the left node
        # upper coefficients: match the derivatives at the right node
        M = np.zeros((r, r))
        Mlow = np.zeros((r, r))
        for j in range(r):
            for k in range(2 * r):
                falling = math.perm(k, j) if k >= j else 0
                if k < r:
                    Mlow[j, k] = falling
                else:
                    M[j, k - r] = falling
        high = np.linalg.solve(M, right - Mlow @ low)
        self.coeffs = np.concatenate([low, high], axis=0).T  # (intervals, 2r)

    def __call__(self, s):
        sv = J.value(s)
        lo, hi = self.nodes[0], self.nodes[-1]
        if np.any(sv < lo - 1e-12) or np.any(sv > hi + 1e-12):
            raise RotationDomainError("evaluation outside the integrated range")
        idx = np.clip(np.searchsorted(self.nodes, sv, side="right") - 1, 0, len(self.nodes) - 2)
        tau = (s - self.nodes[idx]) * (1.0 / self.step)
        cf = self.coeffs[idx]
        deg = cf.shape[-1] - 1
        out = cf[..., deg]
        for k in range(deg - 1, -1, -1):
            out = tau * out + cf[..., k]
        return out


@dataclass(frozen=True)
class SampledProfile(RotationProfile):
    """A profile produced by integration, with its nodal samples."""

    samples: dict = field(default_factory=dict)
    events: tuple = ()


def _minimal_rhs(c: int, m: int):
    cot = (lambda s: math.cos(s) / math.sin(s)) if c == 1 else (lambda s: math.cosh(s) / math.sinh(s))

    def rhs(s, y):
        hp = y[1]
        return np.array([hp, -(m - 1) * hp * cot(s) * (1.0 + hp * hp)])

    return rhs


def _minimal_third(c: int, m: int, s: float, hp: float, hpp: float) -> float:
    """Third derivative of h from differentiating the H = 0 equation."""
    if c == 1:
        cot, dcot = math.cos(s) / math.sin(s), -1.0 / math.sin(s) ** 2
    else:
        cot, dcot = math.cosh(s) / math.sinh(s), -1.0 / math.sinh(s) ** 2
    k = m - 1
    return -k * hp * (1.0 + hp * hp) * dcot - k * cot * (1.0 + 3.0 * hp * hp) * hpp


def _rk4(rhs, s0: float, y0, n: int, step: float):
    ys = np.empty((n + 1, len(y0)))
    ys[0] = y0
    s = s0
    y = np.asarray(y0, dtype=float)
    for i in range(n):
        k1 = rhs(s, y)
        k2 = rhs(s + 0.5 * step, y + 0.5 * step * k1)
        k3 = rhs(s + 0.5 * step, y + 0.5 * step * k2)
        k4 = rhs(s + step, y + step * k3)
        y = y + (step / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        s = s0 + (i + 1) * step
        if not np.all(np.isfinite(y)) or abs(y[1]) > BLOWUP_SLOPE:
            raise IntegrationError(f"profile slope blew up near s = {s:.6g}")
        ys[i + 1] = y
    return ys


def minimal_profile_integrate(
    space: AmbientSpace,
    initial_slope: float,
    s0: float,
    s1: float,
    step: float,
    h0: float = 0.0,
) -> SampledProfile:
    """Integrate the H = 0 profile equation ``h'' = -(m-1) h' cot_c(s) (1+h'^2)``.

    Classical fixed-step RK4 on ``(h, h')``. Between nodes the profile is a
    septic Hermite interpolant of h and its first three derivatives, the
    upper two taken from the equation itself, so curvature derivatives stay
    consistent at the nodes. The end of the range is clipped
    where ``|cot_c s|`` exceeds the bound (recorded in ``events``); a
    singular starting point is an error.
    """
    c, m = space.c, space.m
    if c not in (1, -1):
        raise ValueError("rotation profiles need a curved base (c = 1 or -1)")
    if not (math.isfinite(initial_slope) and math.isfinite(h0)):
        raise IntegrationError("initial data must be finite")
    if step <= 0 or s1 <= s0:
        raise ValueError("need step > 0 and s1 > s0")
    if _singular(c, s0):
        raise IntegrationError(f"starting point s0 = {s0} is singular")
    events = []
    lo, hi = clip_domain(c, s0, s1)
    if hi < s1:
        events.append(f"range clipped at s = {hi:.12g} (cot bound)")
        s1 = hi
    n = int(round((s1 - s0) / step))
    if n < 2:
        raise ValueError("step too large for the range")
    step = (s1 - s0) / n
    rhs = _minimal_rhs(c, m)
    ys = _rk4(rhs, s0, [h0, initial_slope], n, step)
    s = s0 + step * np.arange(n + 1)
    hpp = np.array([rhs(si, yi)[1] for si, yi in zip(s, ys)])
    hppp = np.array([_minimal_third(c, m, si, yi[1], a) for si, yi, a in zip(s, ys, hpp)])
    interp = HermiteInterpolant(s, [ys[:, 0], ys[:, 1], hpp, hppp])
    return SampledProfile(
        space,
        interp,
        (float(s[0]), float(s[-1])),
        name="minimal",
        samples={"s": s, "h": ys[:, 0], "h_prime": ys[:, 1], "h_second": hpp, "h_third": hppp, "step": step},
        events=tuple(events),
    )


@dataclass(frozen=True)
class ConvergenceResult:
    steps: tuple
    endpoint_values: tuple
    differences: tuple
    observed_order: float


def integration_convergence(
    space: AmbientSpace, initial_slope: float, s0: float, s1: float, step: float
) -> ConvergenceResult:
    """Step-halving self-check: ``h(s1)`` at steps ``step, step/2, step/4``."""
    steps = (step, step / 2, step / 4)
    vals = tuple(
        float(minimal_profile_integrate(space, initial_slope, s0, s1, st).samples["h"][-1]) for st in steps
    )
    d1, d2 = abs(vals[0] - vals[1]), abs(vals[1] - vals[2])
    order = math.log2(d1 / d2) if d1 > 0 and d2 > 0 else float("inf")
    return ConvergenceResult(steps, vals, (d1, d2), order)


# ---------------------------------------------------------------------------
# semi-parallel candidates


@dataclass(frozen=True)
class SemiParallelReport:
    C: float
    m: int
    s_range: tuple
    samples: int
    identity_max: float
    residual_min: float
    residual_max: float
    roots: tuple

    @property
    def sign_change(self) -> bool:
        return len(self.roots) > 0

    @property
    def excluded(self) -> bool:
        """True when the ODE residual stays away from zero on the whole range."""
        return self.residual_min > 0.0 and not self.roots


def semi_parallel_candidate(C: float, s):
    """``u = sqrt(1 + C sec^2 s)`` on Taylor series or plain values."""
    if isinstance(s, Taylor):
        cs = J.cos(s)
        return J.sqrt(1.0 + C / (cs * cs))
    sv = np.asarray(s, dtype=float)
    arg = 1.0 + C / np.cos(sv) ** 2
    if np.any(arg <= 0):
        raise RotationDomainError("1 + C sec^2 s must stay positive")
    return np.sqrt(arg)


def semi_parallel_residual(C: float, s, m: int):
    """Profile ODE residual of the candidate with ``u = -sin(alpha)``.

    In terms of u: ``lambda_1 = u'``, ``lambda_2 = u cot s`` and
    ``H = (u' + (m-1) u cot s) / m``. This stays real for every C with
    ``1 + C sec^2 s > 0``, including C > 0 where |u| > 1.
    """
    sv = np.asarray(s, dtype=float)
    if np.any(1.0 + C / np.cos(sv) ** 2 <= 0):
        raise RotationDomainError("1 + C sec^2 s must stay positive")
    t = Taylor.variable(sv, 2)
    u = semi_parallel_candidate(C, t)
    cot = J.cos(t) / J.sin(t)
    lam1 = Taylor(np.array([u.c[1], 2.0 * u.c[2]]))  # u' as a first-order series
    u1 = Taylor(u.c[:2])
    H = (lam1 + (m - 1) * u1 * Taylor(cot.c[:2])) * (1.0 / m)
    return ode_5_2_value(1, m, H.val, H.derivative(1), lam1.val, -u1.val)


def semi_parallel_candidate_check(
    C: float, s_range: tuple, m: int, samples: int = 1000
) -> SemiParallelReport:
    """Test ``u = sqrt(1 + C sec^2 s)`` against the profile ODE.

    Reports (i) the largest ``|u u' cot s - (u^2 - 1)|`` on the sample grid,
    (ii) the extreme moduli of the ODE residual over the grid and every
    root of the residual bracketed by a sign change.
    """
    if m < 2:
        raise ValueError("m must be at least 2")
    s0, s1 = map(float, s_range)
    if _singular(1, s0) or _singular(1, s1) or s1 <= s0:
        raise RotationDomainError("s_range must lie inside (0, pi) away from cot singularities")
    s = np.linspace(s0, s1, samples)
    if np.any(np.abs(np.cos(s)) < 1e-12) or np.any(1.0 + C / np.cos(s) ** 2 <= 0):
        raise RotationDomainError("1 + C sec^2 s must stay positive on s_range")
    t = Taylor.variable(s, 1)
    u = semi_parallel_candidate(C, t)
    cot = J.cos(t) / J.sin(t)
    ident = u.val * u.derivative(1) * cot.val - (u.val**2 - 1.0)
    res = semi_parallel_residual(C, s, m)
    flips = np.nonzero(np.sign(res[1:]) != np.sign(res[:-1]))[0]
    roots = tuple(
        float(brentq(lambda x: float(semi_parallel_residual(C, x, m)), s[i], s[i + 1], xtol=1e-14))
        for i in flips
    )
    return SemiParallelReport(
        float(C),
        int(m),
        (s0, s1),
        int(samples),
        float(np.max(np.abs(ident))),
        float(np.min(np.abs(res))),
        float(np.max(np.abs(res))),
        roots,
    )


# ---------------------------------------------------------------------------
# umbilical chain


def umbilic_coefficient(m: int) -> int:
    return 4 * m * m + 3 * m - 4


def coefficient_positivity(m_max: int) -> bool:
    """``4m^2 + 3m - 4 > 0`` for every integer ``1 <= m <= m_max``.

    Also confirms the quadratic has no positive integer root: its
    discriminant 73 is not a perfect square.
    """
    if m_max < 1:
        raise ValueError("m_max must be at least 1")
    m = np.arange(1, int(m_max) + 1, dtype=np.int64)
    positive = bool(np.all(4 * m * m + 3 * m - 4 > 0))
    disc = 3 * 3 + 4 * 4 * 4
    return positive and math.isqrt(disc) ** 2 != disc


@dataclass(frozen=True)
class UmbilicState:
    """Point on an umbilical chain: arclength s, angle alpha, ``H = e_1(alpha)``."""

    s: float
    alpha: float
    H: float

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.s, self.alpha, self.H)):
            raise ValueError("umbilic state must be finite")


@dataclass(frozen=True)
class UmbilicChainReport:
    m: int
    c: int
    step: float
    states: tuple
    max_discrepancy: float
    min_abs_derivative: float
    degenerate: bool
    coefficient: int


def constraint_value(m: int, c: int, alpha, dalpha, lam: float = 0.0):
    """Left side of the umbilical constraint on ``(alpha, e_1(alpha))``."""
    k = 2.0 * c * (m - 1) / (m + 2)
    return (
        k * np.cos(2 * alpha)
        + k * (m - 1) * np.cos(alpha) ** 2
        - c * (m - 1) * np.sin(alpha) ** 2
        + m * dalpha**2
        + lam
    )


def constraint_derivative_closed_form(m: int, c: int, alpha, dalpha):
    """``-e_1(alpha) * 2c sin(alpha) cos(alpha) (4m^2+3m-4)/(m+2)``."""
    return -dalpha * 2.0 * c * np.sin(alpha) * np.cos(alpha) * umbilic_coefficient(m) / (m + 2)


def umbilic_chain_check(
    m: int,
    c: int,
    alpha0: float,
    dalpha0: float,
    s_range: tuple = (0.0, 0.5),
    step: float = 1e-3,
    lam: float = 0.0,
) -> UmbilicChainReport:
    """Integrate ``e_1 e_1(2 alpha) + c sin(2 alpha) = 0`` and differentiate the constraint.

    Along the trajectory, (i) the stencil derivative of the constraint value
    is compared with (ii) its closed form. A nonzero (i) everywhere means the
    constraint cannot hold on any interval.
    """
    if c not in (-1, 0, 1):
        raise ValueError("c must be -1, 0 or 1")
    s0, s1 = map(float, s_range)
    n = int(round((s1 - s0) / step))
    if n < 8:
        raise ValueError("need at least 8 steps")
    step = (s1 - s0) / n

    def rhs(_s, y):
        return np.array([y[1], -0.5 * c * math.sin(2.0 * y[0])])

    ys = _rk4(rhs, s0, [alpha0, dalpha0], n, step)
    s = s0 + step * np.arange(n + 1)
    alpha, dalpha = ys[:, 0], ys[:, 1]
    E = constraint_value(m, c, alpha, dalpha, lam)
    dE = (E[:-4] - 8 * E[1:-3] + 8 * E[3:-1] - E[4:]) / (12.0 * step)
    closed = constraint_derivative_closed_form(m, c, alpha[2:-2], dalpha[2:-2])
    sc = np.sin(alpha) * np.cos(alpha)
    degenerate = bool(np.min(np.abs(sc)) <= 1e-12 or np.any(np.sign(sc[1:]) != np.sign(sc[:-1])))
    states = tuple(UmbilicState(float(a), float(b), float(d)) for a, b, d in zip(s, alpha, dalpha))
    return UmbilicChainReport(
        m,
        c,
        step,
        states,
        float(np.max(np.abs(dE - closed))),
        float(np.min(np.abs(dE))),
        degenerate,
        umbilic_coefficient(m),
    )
