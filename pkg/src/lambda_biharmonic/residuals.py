"""Pointwise residuals of the lambda-biharmonic system and of the
identities a hypersurface in L^m(c) x R must satisfy.

Residual magnitudes are normalized as ``max|r| / max(1, scale)`` where
``scale`` is the largest magnitude among the terms of the identity over
the evaluated points: relative for large fields, absolute for small ones.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from . import ambient
from .calculus import (
    ChartGrid,
    GridGeometry,
    ScalarField,
    bilaplacian_field,
    codazzi_field,
    ambient_codazzi_term,
    gradient_field,
    intrinsic_scalar_curvature,
    laplacian_field,
    nabla_T_field,
    partials,
)
from .immersion import Immersion

CMC_THRESHOLD = 1e-8
LOCAL_SPACING = 1e-2

IDENTITY_CHECKS = (
    "height_laplacian",
    "angle_laplacian",
    "dt_parallel_T",
    "dt_parallel_theta",
    "scalar_curvature",
    "biharmonic_htheta",
    "biharmonic_height",
    "codazzi",
)
LAMBDA_CHECKS = ("lambda_residual", "lambda_residual_einstein")
OTHER_CHECKS = ("cmc_cross_check", "umbilicity")
ALL_CHECKS = LAMBDA_CHECKS + IDENTITY_CHECKS + OTHER_CHECKS

# checks that only make sense on a lambda-biharmonic input
BIHARMONIC_ONLY = ("biharmonic_htheta", "biharmonic_height")

DEFAULT_TOLERANCES = {
    "height_laplacian": 1e-6,
    "dt_parallel_T": 1e-6,
    "dt_parallel_theta": 1e-6,
    "scalar_curvature": 1e-6,
    "angle_laplacian": 1e-5,
    "codazzi": 1e-5,
    "biharmonic_htheta": 1e-6,
    "biharmonic_height": 1e-5,
    "lambda_residual": 1e-5,
    "lambda_residual_einstein": 1e-5,
    "cmc_cross_check": 1e-5,
    "umbilicity": 1e-5,
}
CLOSED_FORM_TOLERANCE = 1e-8


class NotCMCError(ValueError):
    """Mean curvature is not constant to the certification threshold."""


@dataclass(frozen=True)
class LambdaResidual:
    normal: float
    tangent: np.ndarray
    tangent_norm: float
    lam: float


@dataclass
class ResidualReport:
    check: str
    max_residual: float
    tolerance: float
    passed: bool
    grid: dict = field(default_factory=dict)
    ambient: str = ""
    max_abs: float = 0.0
    scale: float = 0.0
    error: str | None = None

    @classmethod
    def from_arrays(cls, check, residual, terms, tolerance, grid, space) -> "ResidualReport":
        max_abs = float(np.max(np.abs(residual))) if np.size(residual) else 0.0
        scale = max((float(np.max(np.abs(t))) for t in terms if np.size(t)), default=0.0)
        value = max_abs / max(1.0, scale)
        return cls(
            check,
            value,
            float(tolerance),
            bool(value <= tolerance),
            grid.describe() if isinstance(grid, ChartGrid) else dict(grid),
            space.describe(),
            max_abs,
            scale,
        )

    @classmethod
    def failure(cls, check, tolerance, grid, space, message) -> "ResidualReport":
        return cls(
            check,
            float("nan"),
            float(tolerance),
            False,
            grid.describe() if isinstance(grid, ChartGrid) else dict(grid),
            space.describe(),
            float("nan"),
            float("nan"),
            message,
        )

    def to_dict(self) -> dict:
        d = asdict(self)
        d["passed"] = bool(d["passed"])
        return d


# ---------------------------------------------------------------------------
# lambda-biharmonic residual fields


@dataclass
class LambdaFields:
    """Residual components over ``grid.crop(2)`` plus the terms behind them."""

    normal: np.ndarray
    tangent: np.ndarray
    tangent_norm: np.ndarray
    normal_terms: list
    tangent_terms: list
    grid: ChartGrid


def _mean_curvature_derivatives(geom: GridGeometry):
    Hf = geom.field("H")
    lapH = laplacian_field(Hf, geom)
    gradH = gradient_field(Hf, geom)
    return lapH.values, gradH


def _g_norm(fr, v):
    return np.sqrt(np.maximum(np.einsum("...i,...ij,...j->...", v, fr.g, v), 0.0))


def lambda_fields_spaceform(geom: GridGeometry, lam: float) -> LambdaFields:
    space = geom.space
    m = space.m
    c = space.c
    lapH, gradH = _mean_curvature_derivatives(geom)
    fr = geom.crop(2).frame
    H, A2, theta = fr.H, fr.A2, fr.theta
    sin2 = 1.0 - theta**2
    normal = lapH - H * (A2 - c * (m - 1) * sin2 + lam)
    AgradH = np.einsum("...ij,...j->...i", fr.A, gradH)
    t2 = 0.5 * m * H[..., None] * gradH
    t3 = (c * (m - 1) * theta * H)[..., None] * fr.T
    tangent = AgradH + t2 + t3
    return LambdaFields(
        normal,
        tangent,
        _g_norm(fr, tangent),
        [lapH, H * A2, H * c * (m - 1) * sin2, lam * H],
        [_g_norm(fr, AgradH), _g_norm(fr, t2), _g_norm(fr, t3)],
        geom.grid.crop(2),
    )


def lambda_fields_einstein(geom: GridGeometry, lam: float, mu: float) -> LambdaFields:
    m = geom.m
    lapH, gradH = _mean_curvature_derivatives(geom)
    fr = geom.crop(2).frame
    H, A2, theta = fr.H, fr.A2, fr.theta
    ric_nn = mu * (1.0 - theta**2)
    normal = lapH - H * A2 + H * ric_nn - lam * H
    t1 = 2.0 * np.einsum("...ij,...j->...i", fr.A, gradH)
    t2 = 0.5 * m * (2.0 * H[..., None] * gradH)
    # -2H (Ric(xi))^T with (Ric(xi))^T = -mu theta T
    t3 = (2.0 * mu * theta * H)[..., None] * fr.T
    tangent = t1 + t2 + t3
    return LambdaFields(
        normal,
        tangent,
        _g_norm(fr, tangent),
        [lapH, H * A2, H * ric_nn, lam * H],
        [_g_norm(fr, t1), _g_norm(fr, t2), _g_norm(fr, t3)],
        geom.grid.crop(2),
    )


def _local_geometry(imm: Immersion, x, spacing: float) -> GridGeometry:
    x = np.asarray(x, dtype=float)
    r = 4
    grid = ChartGrid.regular(x - r * spacing, x + r * spacing, 2 * r + 1)
    return GridGeometry.build(imm, grid)


def _at_centre(lf: LambdaFields, lam: float) -> LambdaResidual:
    mid = tuple(k // 2 for k in lf.normal.shape)
    return LambdaResidual(
        float(lf.normal[mid]), lf.tangent[mid].copy(), float(lf.tangent_norm[mid]), float(lam)
    )


def lambda_residual_spaceform(imm: Immersion, x, lam: float, spacing: float = LOCAL_SPACING) -> LambdaResidual:
    """Both components of the L^m(c) x R system at chart point x."""
    geom = _local_geometry(imm, x, spacing)
    return _at_centre(lambda_fields_spaceform(geom, lam), lam)


def lambda_residual_einstein(
    imm: Immersion, x, lam: float, mu: float | None = None, spacing: float = LOCAL_SPACING
) -> LambdaResidual:
    """Both components of the Einstein-product system at chart point x."""
    if mu is None:
        mu = imm.space.mu
    geom = _local_geometry(imm, x, spacing)
    return _at_centre(lambda_fields_einstein(geom, lam, mu), lam)


# ---------------------------------------------------------------------------
# identity suite


def _interior(a: np.ndarray, have: ChartGrid, want: ChartGrid) -> np.ndarray:
    k = (have.n[0] - want.n[0]) // 2
    if k == 0:
        return a
    sl = tuple(slice(k, -k) for _ in range(have.m))
    return a[sl]


class _Suite:
    """Shared intermediate fields for one (immersion, grid) pair."""

    def __init__(self, geom: GridGeometry, lam: float | None):
        self.full = geom
        self.space = geom.space
        self.lam = lam
        self.interior = geom.grid.crop(geom.grid.margin)
        # two layers beyond the interior is all a one-step stencil needs
        self.geom = geom.crop(geom.grid.margin - 2)
        self.g2 = self.interior
        self.fr2 = self.geom.crop(2).frame

    def cut(self, a, have=None):
        return _interior(a, have or self.g2, self.interior)

    def height_laplacian(self):
        m = self.space.m
        lap = laplacian_field(self.geom.field("h"), self.geom).values
        rhs = m * self.fr2.theta * self.fr2.H
        return self.cut(lap - rhs), [self.cut(lap), self.cut(rhs)]

    def angle_laplacian(self):
        m = self.space.m
        fr = self.fr2
        lap = laplacian_field(self.geom.field("theta"), self.geom).values
        dH = partials(self.geom.frame.H, self.geom.grid)
        grad_dt = m * np.einsum("...j,...j->...", dH, fr.T)
        ric = ambient.ricci_normal_scalar(self.space, fr.theta)
        last = fr.theta * (fr.A2 + ric)
        r = lap + grad_dt + last
        return self.cut(r), [self.cut(lap), self.cut(grad_dt), self.cut(last)]

    def dt_parallel_T(self):
        fr = self.fr2
        nT = nabla_T_field(self.geom)  # [k, i]
        rhs = fr.theta[..., None, None] * np.swapaxes(fr.A, -1, -2)
        return self.cut(nT - rhs), [self.cut(nT), self.cut(rhs)]

    def dt_parallel_theta(self):
        fr = self.fr2
        dth = partials(self.geom.frame.theta, self.geom.grid)
        AT = np.einsum("...kj,...j->...k", fr.b, fr.T)
        return self.cut(dth + AT), [self.cut(dth), self.cut(AT)]

    def scalar_curvature(self):
        space = self.space
        m = space.m
        fr = self.fr2
        S = intrinsic_scalar_curvature(self.geom)
        ric = normal_ricci_from_curvature(space, fr)
        St = space.scalar_curvature
        r = St - S - fr.A2 + m * m * fr.H**2 - 2.0 * ric
        terms = [np.full_like(S, St), S, fr.A2, m * m * fr.H**2, 2.0 * ric]
        return self.cut(r), [self.cut(t) for t in terms]

    def biharmonic_htheta(self):
        if self.lam is None:
            raise ValueError("needs a lambda-biharmonic input with numeric lambda")
        f = self.geom.field("Htheta")
        lap = laplacian_field(f, self.geom).values
        rhs = self.lam * f.crop(2).values
        return self.cut(lap - rhs), [self.cut(lap), self.cut(rhs)]

    def biharmonic_height(self):
        if self.lam is None:
            raise ValueError("needs a lambda-biharmonic input with numeric lambda")
        if self.full.grid.margin < 4:
            raise ValueError("the bilaplacian needs a grid margin of at least 4")
        geom = self.full.crop(self.full.grid.margin - 4)
        h = geom.field("h")
        lap = laplacian_field(h, geom)
        bil = laplacian_field(lap, geom)
        g4 = geom.grid.crop(4)
        rhs = self.lam * lap.crop(2).values
        return (
            _interior(bil.values - rhs, g4, self.interior),
            [_interior(bil.values, g4, self.interior), _interior(rhs, g4, self.interior)],
        )

    def codazzi(self):
        anti, amb = codazzi_field(self.geom, parts=True)
        return self.cut(anti - amb), [self.cut(anti), self.cut(amb)]

    def lambda_residual(self):
        lf = lambda_fields_spaceform(self.geom, self._lam())
        return _lambda_pair(self, lf)

    def lambda_residual_einstein(self):
        lf = lambda_fields_einstein(self.geom, self._lam(), self.space.mu)
        return _lambda_pair(self, lf)

    def umbilicity(self):
        fr = self.fr2
        d = np.max(np.abs(fr.b - fr.H[..., None, None] * fr.g), axis=(-2, -1))
        return self.cut(d), [self.cut(np.abs(fr.b).max(axis=(-2, -1)))]

    def cmc_cross_check(self):
        return cmc_pivot(self.geom, self._lam(), self.interior)

    def _lam(self) -> float:
        if self.lam is None:
            raise ValueError("lambda required")
        return self.lam

    def run(self, name: str):
        return getattr(self, name)()


def _lambda_pair(suite: _Suite, lf: LambdaFields):
    r = np.maximum(np.abs(lf.normal), lf.tangent_norm)
    return suite.cut(r), [suite.cut(t) for t in lf.normal_terms + lf.tangent_terms]


def normal_ricci_from_curvature(space, fr) -> np.ndarray:
    """Ric(xi, xi) as the trace of ``X -> R(X, xi) xi`` over the tangent space."""
    R = ambient.curvature_normal_pair(space, fr.position, fr.tangents, fr.xi)
    return np.einsum("...ij,...ij->...", fr.g_inv, R)


def cmc_pivot(geom: GridGeometry, lam: float, interior: ChartGrid | None = None):
    """Pivot ``theta (|A|^2 + lambda)`` from the two Laplacian forms of theta.

    Raises :class:`NotCMCError` unless ``max|grad H| <= 1e-8``.
    """
    if interior is None:
        interior = geom.grid.crop(geom.grid.margin)
    g2 = geom.grid.crop(2)
    gradH = gradient_field(geom.field("H"), geom)
    fr = geom.crop(2).frame
    gnorm = _g_norm(fr, gradH)
    if np.max(gnorm) > CMC_THRESHOLD:
        raise NotCMCError(f"max |grad H| = {np.max(gnorm):.3e} exceeds {CMC_THRESHOLD}")
    lap = laplacian_field(geom.field("theta"), geom).values
    r1 = lap - lam * fr.theta
    r2 = lap + fr.theta * (2.0 * fr.A2 + lam)
    pivot = 0.5 * (r2 - r1)
    terms = [fr.theta * fr.A2, lam * fr.theta]
    return _interior(pivot, g2, interior), [_interior(t, g2, interior) for t in terms]


def evaluate_checks(
    geom: GridGeometry,
    checks,
    lam: float | None,
    tolerances: dict | None = None,
) -> list[ResidualReport]:
    """Run named checks on one geometry; failures become error entries."""
    tolerances = tolerances or {}
    suite = _Suite(geom, lam)
    reports = []
    for name in checks:
        if name not in ALL_CHECKS:
            raise KeyError(f"unknown check {name!r}")
        tol = tolerances.get(name, DEFAULT_TOLERANCES[name])
        try:
            r, terms = suite.run(name)
            reports.append(ResidualReport.from_arrays(name, r, terms, tol, suite.interior, geom.space))
        except (ValueError, ArithmeticError) as exc:
            reports.append(ResidualReport.failure(name, tol, suite.interior, geom.space, str(exc)))
    return reports


def identity_suite(
    imm: Immersion,
    grid: ChartGrid,
    lam: float | None = None,
    tolerances: dict | None = None,
    jobs: int = 1,
) -> list[ResidualReport]:
    """All identity checks over the grid interior.

    The two biharmonic checks run only when ``lam`` is given.
    """
    geom = GridGeometry.build(imm, grid, jobs=jobs)
    checks = [c for c in IDENTITY_CHECKS if lam is not None or c not in BIHARMONIC_ONLY]
    return evaluate_checks(geom, checks, lam, tolerances)


def cmc_cross_check(
    imm: Immersion, grid: ChartGrid, lam: float, tolerance: float = DEFAULT_TOLERANCES["cmc_cross_check"]
) -> ResidualReport:
    geom = GridGeometry.build(imm, grid)
    interior = grid.crop(grid.margin)
    pivot, terms = cmc_pivot(geom, lam, interior)
    return ResidualReport.from_arrays("cmc_cross_check", pivot, terms, tolerance, interior, imm.space)


# ---------------------------------------------------------------------------
# grid refinement


REFINEMENT_FLOOR_DEFAULT = 1e-12


@dataclass(frozen=True)
class RefinementResult:
    check: str
    coarse: float
    fine: float
    ratio: float
    passed: bool
    floor: float = REFINEMENT_FLOOR_DEFAULT
    fine_report: ResidualReport | None = None


REFINEMENT_FLOOR = REFINEMENT_FLOOR_DEFAULT
# sum of |weights| of the fourth-order second-derivative stencil
_D2_WEIGHT_SUM = (1 + 16 + 30 + 16 + 1) / 12.0


def rounding_floor(grid: ChartGrid) -> float:
    """Residual level below which stencil rounding noise dominates.

    Ten times ``eps * sum|w| * m / h^2`` for the second-derivative stencil;
    residuals under this cannot exhibit a truncation-error rate.
    """
    h = float(np.min(grid.spacing))
    noise = np.finfo(float).eps * _D2_WEIGHT_SUM * grid.m / h**2
    return max(REFINEMENT_FLOOR, 10.0 * noise)


def _shared_points(fine: np.ndarray, fine_grid: ChartGrid, coarse_grid: ChartGrid) -> np.ndarray:
    h = fine_grid.spacing
    off = np.rint((np.asarray(coarse_grid.lo) - np.asarray(fine_grid.lo)) / h).astype(int)
    sl = tuple(slice(o, o + 2 * (k - 1) + 1, 2) for o, k in zip(off, coarse_grid.n))
    return fine[sl]


def refinement_study(
    imm: Immersion,
    grid: ChartGrid,
    checks,
    lam: float | None = None,
    min_ratio: float = 8.0,
    jobs: int = 1,
    tolerances: dict | None = None,
) -> list[RefinementResult]:
    """Compare residuals on ``grid`` against the grid with twice its spacing.

    Both are measured on the coarse interior lattice points, normalized by
    the fine-grid term scale. A check whose fine residual is already at the
    rounding floor passes regardless of the ratio. ``fine_report`` holds
    the ordinary tolerance verdict over the whole fine interior.
    """
    tol = dict(DEFAULT_TOLERANCES)
    tol.update(tolerances or {})
    coarse = grid.coarsened()
    floor = rounding_floor(grid)
    geo_f = GridGeometry.build(imm, grid, jobs=jobs)
    geo_c = GridGeometry.build(imm, coarse, jobs=jobs)
    sf, sc = _Suite(geo_f, lam), _Suite(geo_c, lam)
    out = []
    for name in checks:
        rf, terms = sf.run(name)
        rc, _ = sc.run(name)
        scale = max(1.0, max(float(np.max(np.abs(t))) for t in terms))
        rf_shared = _shared_points(rf, sf.interior, sc.interior)
        ef = float(np.max(np.abs(rf_shared))) / scale
        ec = float(np.max(np.abs(rc))) / scale
        ratio = ec / ef if ef > 0 else float("inf")
        ok = ef <= floor or ratio >= min_ratio
        report = ResidualReport.from_arrays(name, rf, terms, tol[name], sf.interior, imm.space)
        out.append(RefinementResult(name, ec, ef, ratio, ok, floor, report))
    return out
