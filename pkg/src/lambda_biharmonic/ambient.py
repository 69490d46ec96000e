"""The product space L^m(c) x R in conformal coordinates.

Points are ``(x, t)`` with ``x`` in R^m and metric ``F(x)^2 |dx|^2 + dt^2``
where ``F(x) = 1 / (1 + c|x|^2/4)``. The chart origin is an orthonormal
point for every c. All functions accept a trailing component axis of
length ``m + 1`` (base components first, ``t`` last) and any leading batch
shape.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DOMAIN_EPS = 1e-12


class ChartDomainError(ValueError):
    """Point lies outside the conformal chart of L^m(c)."""


class FrameDefectError(ValueError):
    """An angle function left [-1, 1] by more than the tolerance."""


@dataclass(frozen=True)
class AmbientSpace:
    c: int
    m: int
    mu: float | None = None

    def __post_init__(self):
        if self.c not in (-1, 0, 1):
            raise ValueError(f"c must be -1, 0 or 1, got {self.c}")
        if self.m < 2:
            raise ValueError(f"m must be at least 2, got {self.m}")
        if self.mu is None:
            object.__setattr__(self, "mu", float(self.c * (self.m - 1)))
        elif abs(self.mu - self.c * (self.m - 1)) > 1e-12:
            raise ValueError("mu must equal c(m-1) for a constant-curvature base")

    @property
    def dim(self) -> int:
        return self.m + 1

    @property
    def scalar_curvature(self) -> float:
        return float(self.c * self.m * (self.m - 1))

    def describe(self) -> str:
        base = {1: "S", 0: "R", -1: "H"}[self.c]
        return f"{base}^{self.m} x R"

    def conformal_factor(self, base: np.ndarray) -> np.ndarray:
        """F evaluated on base coordinates (trailing axis of length m)."""
        r2 = np.sum(np.asarray(base) ** 2, axis=-1)
        return 1.0 / (1.0 + 0.25 * self.c * r2)

    def check_domain(self, p: np.ndarray) -> None:
        p = np.asarray(p, dtype=float)
        if p.shape[-1] != self.dim:
            raise ValueError(f"expected {self.dim} ambient components, got {p.shape[-1]}")
        if not np.all(np.isfinite(p)):
            raise ChartDomainError("non-finite ambient coordinates")
        if self.c == -1:
            r2 = np.sum(p[..., : self.m] ** 2, axis=-1)
            if np.any(r2 >= 4.0 - DOMAIN_EPS):
                raise ChartDomainError("hyperbolic chart requires |x|^2 < 4")


def _split(p: np.ndarray, m: int):
    p = np.asarray(p, dtype=float)
    return p[..., :m], p[..., m]


def metric_at(space: AmbientSpace, p) -> np.ndarray:
    """Metric matrix ``F^2 I_m (+) 1`` at p, shape ``batch + (m+1, m+1)``."""
    space.check_domain(p)
    p = np.asarray(p, dtype=float)
    x, _ = _split(p, space.m)
    f2 = space.conformal_factor(x) ** 2
    g = np.zeros(p.shape[:-1] + (space.dim, space.dim))
    idx = np.arange(space.m)
    g[..., idx, idx] = f2[..., None]
    g[..., space.m, space.m] = 1.0
    return g


def log_factor_gradient(space: AmbientSpace, x: np.ndarray) -> np.ndarray:
    """Gradient of ln F with respect to the base coordinates."""
    f = space.conformal_factor(x)
    return -0.5 * space.c * x * f[..., None]


def christoffel_at(space: AmbientSpace, p) -> np.ndarray:
    """Christoffel symbols ``G[..., A, B, C]`` = Gamma^A_{BC}."""
    space.check_domain(p)
    p = np.asarray(p, dtype=float)
    m = space.m
    x, _ = _split(p, m)
    dphi = log_factor_gradient(space, x)
    gam = np.zeros(p.shape[:-1] + (m + 1,) * 3)
    eye = np.eye(m)
    # Gamma^k_ij = d_ik phi_j + d_jk phi_i - d_ij phi_k
    base = (
        eye[:, :, None] * dphi[..., None, None, :]
        + eye[:, None, :] * dphi[..., None, :, None]
        - eye[None, :, :] * dphi[..., :, None, None]
    )
    gam[..., :m, :m, :m] = base
    return gam


def christoffel_contract(space: AmbientSpace, p, u, w) -> np.ndarray:
    """``Gamma^A_{BC} u^B w^C`` without forming the rank-3 array."""
    m = space.m
    x, _ = _split(p, m)
    dphi = log_factor_gradient(space, x)
    ub, wb = np.asarray(u)[..., :m], np.asarray(w)[..., :m]
    out = np.zeros(np.broadcast_shapes(np.shape(u), np.shape(w), np.shape(p)))
    du = np.sum(dphi * ub, axis=-1)
    dw = np.sum(dphi * wb, axis=-1)
    uw = np.sum(ub * wb, axis=-1)
    out[..., :m] = ub * dw[..., None] + wb * du[..., None] - uw[..., None] * dphi
    return out


def inner(space: AmbientSpace, p, u, v) -> np.ndarray:
    """Metric pairing of two ambient vectors at p."""
    m = space.m
    x, _ = _split(p, m)
    f2 = space.conformal_factor(x) ** 2
    u, v = np.asarray(u), np.asarray(v)
    return f2 * np.sum(u[..., :m] * v[..., :m], axis=-1) + u[..., m] * v[..., m]


def lower(space: AmbientSpace, p, u) -> np.ndarray:
    """Index lowering: covector ``g u``."""
    m = space.m
    x, _ = _split(p, m)
    f2 = space.conformal_factor(x) ** 2
    u = np.asarray(u, dtype=float)
    out = u.copy()
    out[..., :m] = u[..., :m] * f2[..., None]
    return out


def raise_index(space: AmbientSpace, p, w) -> np.ndarray:
    m = space.m
    x, _ = _split(p, m)
    f2 = space.conformal_factor(x) ** 2
    w = np.asarray(w, dtype=float)
    out = w.copy()
    out[..., :m] = w[..., :m] / f2[..., None]
    return out


def curvature_op(space: AmbientSpace, X, Y, Z, p) -> np.ndarray:
    """R(X,Y)Z from the six-term product-space formula.

    Vectors are given in coordinate components at p; ``<., dt>`` is the
    t-component since dt is unit and orthogonal to the base.
    """
    space.check_domain(p)
    X, Y, Z = (np.asarray(v, dtype=float) for v in (X, Y, Z))
    m = space.m
    if space.c == 0:
        return np.zeros(np.broadcast_shapes(X.shape, Y.shape, Z.shape))
    yz = inner(space, p, Y, Z)[..., None]
    xz = inner(space, p, X, Z)[..., None]
    xt, yt, zt = X[..., m, None], Y[..., m, None], Z[..., m, None]
    dt = np.zeros(X.shape[-1])
    dt[m] = 1.0
    out = yz * X - xz * Y - yt * zt * X + xt * zt * Y + xz * yt * dt - yz * xt * dt
    return space.c * out


def _gram(space: AmbientSpace, p, vecs) -> np.ndarray:
    x = np.asarray(p, dtype=float)[..., : space.m]
    f2 = space.conformal_factor(x)[..., None, None] ** 2
    base = vecs[..., : space.m]
    tc = vecs[..., space.m]
    return f2 * (base @ np.swapaxes(base, -1, -2)) + tc[..., :, None] * tc[..., None, :]


def curvature_on_vectors(space: AmbientSpace, p, vecs) -> np.ndarray:
    """``<R(V_a, V_b) V_c, V_d>`` for a family of vectors ``vecs[..., a, :]``.

    The six-term formula needs only the Gram matrix of the family and the
    t-components, so the whole tensor comes out of broadcasting.
    """
    vecs = np.asarray(vecs, dtype=float)
    r = vecs.shape[-2]
    if space.c == 0:
        return np.zeros(vecs.shape[:-2] + (r, r, r, r))
    G = _gram(space, p, vecs)
    tc = vecs[..., space.m]
    Gbc = G[..., None, :, :, None]
    Gad = G[..., :, None, None, :]
    Gac = G[..., :, None, :, None]
    Gbd = G[..., None, :, None, :]
    ta = tc[..., :, None, None, None]
    tb = tc[..., None, :, None, None]
    tcc = tc[..., None, None, :, None]
    td = tc[..., None, None, None, :]
    out = (
        Gbc * Gad
        - Gac * Gbd
        - tb * tcc * Gad
        + ta * tcc * Gbd
        + Gac * tb * td
        - Gbc * ta * td
    )
    return space.c * out


def curvature_against(space: AmbientSpace, p, vecs, w) -> np.ndarray:
    """``<R(V_a, V_b) V_c, W>`` for all index triples and one extra vector W.

    Equal to ``curvature_on_vectors`` on the family ``vecs + [W]`` restricted
    to the last slot, without forming the full rank-4 array.
    """
    vecs = np.asarray(vecs, dtype=float)
    w = np.asarray(w, dtype=float)
    r = vecs.shape[-2]
    if space.c == 0:
        return np.zeros(vecs.shape[:-2] + (r, r, r))
    m = space.m
    fam = np.concatenate([vecs, w[..., None, :]], axis=-2)
    full = _gram(space, p, fam)
    G = full[..., :r, :r]
    n = full[..., :r, r]
    tc = vecs[..., m]
    tw = w[..., m]
    Gbc = G[..., None, :, :]
    Gac = G[..., :, None, :]
    na = n[..., :, None, None]
    nb = n[..., None, :, None]
    ta = tc[..., :, None, None]
    tb = tc[..., None, :, None]
    tcc = tc[..., None, None, :]
    td = tw[..., None, None, None]
    out = Gbc * na - Gac * nb - tb * tcc * na + ta * tcc * nb + Gac * tb * td - Gbc * ta * td
    return space.c * out


def curvature_normal_pair(space: AmbientSpace, p, vecs, w) -> np.ndarray:
    """``<R(V_a, W) W, V_b>`` for all index pairs."""
    vecs = np.asarray(vecs, dtype=float)
    w = np.asarray(w, dtype=float)
    r = vecs.shape[-2]
    if space.c == 0:
        return np.zeros(vecs.shape[:-2] + (r, r))
    m = space.m
    fam = np.concatenate([vecs, w[..., None, :]], axis=-2)
    full = _gram(space, p, fam)
    G = full[..., :r, :r]
    n = full[..., :r, r]
    ww = full[..., r, r][..., None, None]
    tc = vecs[..., m]
    tw = w[..., m][..., None, None]
    na, nb = n[..., :, None], n[..., None, :]
    ta, tb = tc[..., :, None], tc[..., None, :]
    out = ww * G - na * nb - tw * tw * G + ta * tw * nb + na * tw * tb - ww * ta * tb
    return space.c * out


def riemann_tensor_at(space: AmbientSpace, p) -> np.ndarray:
    """Fully covariant tensor ``R[a, b, c, d] = <R(E_a, E_b) E_c, E_d>``."""
    p = np.asarray(p, dtype=float)
    n = space.dim
    eye = np.eye(n)
    out = np.zeros(p.shape[:-1] + (n,) * 4)
    for a in range(n):
        for b in range(n):
            for c in range(n):
                r = curvature_op(space, eye[a], eye[b], eye[c], p)
                out[..., a, b, c, :] = lower(space, p, r)
    return out


def ricci_normal_scalar(space: AmbientSpace, theta, tol: float = 1e-9) -> np.ndarray:
    """Ric(xi, xi) = mu (1 - theta^2) for a unit normal with angle function theta."""
    theta = np.asarray(theta, dtype=float)
    if np.any(np.abs(theta) > 1.0 + tol):
        raise FrameDefectError("|theta| > 1: upstream frame defect")
    return space.mu * (1.0 - theta**2)


def ricci_normal_tangential_coefficient(space: AmbientSpace, theta, tol: float = 1e-9) -> np.ndarray:
    """Coefficient of T in the tangential part of Ric(xi): ``-mu * theta``."""
    theta = np.asarray(theta, dtype=float)
    if np.any(np.abs(theta) > 1.0 + tol):
        raise FrameDefectError("|theta| > 1: upstream frame defect")
    return -space.mu * theta
