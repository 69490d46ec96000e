"""Hypersurface charts and their pointwise extrinsic geometry.

Sign conventions: ``b_ij = <nabla_i d_j phi, xi>``, ``A = g^-1 b``
(so ``A X = -(nabla_X xi)^T``), ``H = tr(A) / m`` and
``theta = <dt, xi>``. With these, ``Delta h = m theta H``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from . import ambient
from .ambient import AmbientSpace
from .jets import Jet

DET_MIN = 1e-10
ORIENT_TOL = 1e-10


class ImmersionError(ValueError):
    """Rank deficiency or normalization failure of an immersion."""


MapFn = Callable[[Sequence[Jet]], Sequence]


@dataclass(frozen=True)
class Immersion:
    """A chart map from a parameter box into ambient conformal coordinates.

    ``map`` receives a list of m coordinate jets and returns m + 1 ambient
    components (base first, height last). Constants are allowed.
    ``orientation`` flips the default normal when -1; ``reference`` is the
    chart point where the default normal sign is fixed (box centre if None).
    """

    space: AmbientSpace
    lo: tuple
    hi: tuple
    map: MapFn
    orientation: int = 1
    reference: tuple | None = None
    name: str = "immersion"

    def __post_init__(self):
        if len(self.lo) != self.space.m or len(self.hi) != self.space.m:
            raise ValueError("domain box must have m = %d axes" % self.space.m)
        if any(h <= l for l, h in zip(self.lo, self.hi)):
            raise ValueError("domain box has empty axis")
        if self.orientation not in (1, -1):
            raise ValueError("orientation must be +1 or -1")

    @property
    def m(self) -> int:
        return self.space.m

    @property
    def center(self) -> np.ndarray:
        if self.reference is not None:
            return np.asarray(self.reference, dtype=float)
        return 0.5 * (np.asarray(self.lo, float) + np.asarray(self.hi, float))

    def flipped(self) -> "Immersion":
        return replace(self, orientation=-self.orientation)

    def reparametrized(self, matrix, offset) -> "Immersion":
        """Compose with the affine change ``u = matrix @ v + offset``.

        The new domain is the box of v-values whose image covers the old
        reference point; callers evaluate at explicitly mapped points.
        """
        M = np.asarray(matrix, dtype=float)
        o = np.asarray(offset, dtype=float)
        Minv = np.linalg.inv(M)
        ref = Minv @ (self.center - o)
        half = 0.5 * (np.asarray(self.hi, float) - np.asarray(self.lo, float))
        span = np.abs(Minv) @ half
        inner_map = self.map

        def new_map(v):
            u = [sum(M[i, j] * v[j] for j in range(len(v))) + o[i] for i in range(len(v))]
            return inner_map(u)

        return Immersion(
            self.space,
            tuple(ref - span),
            tuple(ref + span),
            new_map,
            self.orientation,
            tuple(ref),
            self.name + "-reparam",
        )

    def jets(self, points) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Position, first and second derivatives of the map at ``points``.

        Returns arrays of shapes ``S+(m+1,)``, ``S+(m, m+1)``,
        ``S+(m, m, m+1)`` with derivative axes before the component axis.
        """
        points = np.asarray(points, dtype=float)
        batch = points.shape[:-1]
        m = self.m
        comps = self.map(Jet.variables(points))
        if len(comps) != m + 1:
            raise ValueError(f"map returned {len(comps)} components, expected {m + 1}")
        P = np.empty(batch + (m + 1,))
        D = np.zeros(batch + (m, m + 1))
        D2 = np.zeros(batch + (m, m, m + 1))
        for a, comp in enumerate(comps):
            if isinstance(comp, Jet):
                P[..., a] = comp.val
                D[..., :, a] = comp.grad
                D2[..., :, :, a] = comp.hess
            else:
                P[..., a] = np.broadcast_to(np.asarray(comp, dtype=float), batch)
        return P, D, D2


@dataclass(frozen=True)
class GeometryFrame:
    """Extrinsic data at one chart point (or a batch of them)."""

    g: np.ndarray
    g_inv: np.ndarray
    b: np.ndarray
    A: np.ndarray
    H: np.ndarray
    A2: np.ndarray
    kappa: np.ndarray
    theta: np.ndarray
    T: np.ndarray
    xi: np.ndarray
    # ingredients kept for the grid calculus
    position: np.ndarray = field(repr=False, default=None)
    tangents: np.ndarray = field(repr=False, default=None)
    christoffel: np.ndarray = field(repr=False, default=None)

    @property
    def m(self) -> int:
        return self.g.shape[-1]

    def at(self, index) -> "GeometryFrame":
        """Single-point frame out of a batch."""
        kw = {}
        for name in self.__dataclass_fields__:
            v = getattr(self, name)
            kw[name] = None if v is None else v[index]
        return GeometryFrame(**kw)


def _cofactor_normal(D: np.ndarray) -> np.ndarray:
    """Covector annihilating the m rows of D (generalized cross product)."""
    m = D.shape[-2]
    n = m + 1
    nu = np.empty(D.shape[:-2] + (n,))
    for a in range(n):
        cols = [k for k in range(n) if k != a]
        nu[..., a] = (-1) ** a * np.linalg.det(D[..., :, cols])
    return nu


def _priority_sign(space: AmbientSpace, xi: np.ndarray) -> float:
    # t-component first, then base components in order
    m = space.m
    order = [m] + list(range(m))
    scale = np.max(np.abs(xi))
    for a in order:
        if abs(xi[a]) > ORIENT_TOL * max(scale, 1.0):
            return float(np.sign(xi[a]))
    raise ImmersionError("normal vanishes at the reference point")


def _orientation_sign(imm: Immersion) -> float:
    P, D, _ = imm.jets(imm.center[None, :])
    nu = _cofactor_normal(D)[0]
    xi = ambient.raise_index(imm.space, P[0], nu)
    return _priority_sign(imm.space, xi) * imm.orientation


def frames(imm: Immersion, points, sign: float | None = None, principal: bool = True) -> GeometryFrame:
    """Vectorized frame computation over a batch of chart points.

    ``principal=False`` skips the principal curvatures (``kappa`` is None).
    """
    space = imm.space
    m = space.m
    points = np.asarray(points, dtype=float)
    P, D, D2 = imm.jets(points)
    space.check_domain(P)
    if sign is None:
        sign = _orientation_sign(imm)

    # induced metric
    Dlow = ambient.lower(space, P[..., None, :], D)  # covectors g~ d_i phi
    g = Dlow @ np.swapaxes(D, -1, -2)
    det = np.linalg.det(g)
    if np.any(det <= DET_MIN):
        raise ImmersionError(f"rank deficiency: min det(g) = {det.min():.3e}")
    g_inv = np.linalg.inv(g)

    # unit normal
    nu = sign * _cofactor_normal(D)
    xi_raw = ambient.raise_index(space, P, nu)
    norm2 = np.sum(nu * xi_raw, axis=-1)
    if np.any(norm2 <= 0) or not np.all(np.isfinite(norm2)):
        raise ImmersionError("normal normalization failed")
    nrm = np.sqrt(norm2)
    nu = nu / nrm[..., None]
    xi = xi_raw / nrm[..., None]

    # ambient covariant second derivatives  V_ij = d_i d_j phi + Gamma(d_i phi, d_j phi)
    V = D2 + ambient.christoffel_contract(
        space, P[..., None, None, :], D[..., :, None, :], D[..., None, :, :]
    )
    b = np.einsum("...ija,...a->...ij", V, nu)
    b = 0.5 * (b + np.swapaxes(b, -1, -2))
    batch = V.shape[:-3]
    # christ[..., k, i, j] = g^kl <V_ij, d_l phi>
    gam_low = Dlow @ np.swapaxes(V.reshape(batch + (m * m, m + 1)), -1, -2)
    christ = (g_inv @ gam_low).reshape(batch + (m, m, m))

    A = g_inv @ b
    H = np.trace(A, axis1=-2, axis2=-1) / m
    A2 = np.einsum("...ij,...ji->...", A, A)
    kappa = principal_curvatures(g, b) if principal else None

    theta = xi[..., m]
    T = np.einsum("...ij,...j->...i", g_inv, D[..., :, m])
    return GeometryFrame(g, g_inv, b, A, H, A2, kappa, theta, T, xi, P, D, christ)


def principal_curvatures(g: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Eigenvalues of ``b`` relative to ``g`` via a Cholesky reduction, ascending."""
    L = np.linalg.cholesky(g)
    Y = np.linalg.solve(L, b)
    M = np.linalg.solve(L, np.swapaxes(Y, -1, -2))
    return np.linalg.eigvalsh(0.5 * (M + np.swapaxes(M, -1, -2)))


def frame_at(imm: Immersion, x) -> GeometryFrame:
    """Extrinsic geometry at a single chart point."""
    x = np.asarray(x, dtype=float)
    if x.shape != (imm.m,):
        raise ValueError(f"chart point must have {imm.m} coordinates")
    return frames(imm, x[None, :]).at(0)


def normal_flip(frame: GeometryFrame) -> GeometryFrame:
    """The same frame seen from the opposite unit normal."""
    return replace(
        frame,
        b=-frame.b,
        A=-frame.A,
        H=-frame.H,
        kappa=None if frame.kappa is None else np.sort(-frame.kappa, axis=-1),
        theta=-frame.theta,
        xi=-frame.xi,
    )


def umbilicity_defect(frame: GeometryFrame) -> np.ndarray:
    """``max_ij |b_ij - H g_ij|``; zero exactly at umbilical points."""
    d = np.abs(frame.b - frame.H[..., None, None] * frame.g)
    return np.max(d, axis=(-2, -1))
