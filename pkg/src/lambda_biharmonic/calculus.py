"""Scalar-field calculus on chart lattices.

Pointwise quantities (metric, second fundamental form, H, theta, the
induced Christoffel symbols) come exactly from order-2 jets; everything
that needs a further derivative uses 4th-order central differences on the
lattice. Every stencil application returns data on a grid cropped by two
layers per side, so derived fields never carry invalid boundary values.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import ambient
from .immersion import GeometryFrame, Immersion, _orientation_sign, frames

STENCIL_RADIUS = 2
MIN_RESOLUTION = 9


class StencilBoundaryError(IndexError):
    """A stencil would read outside the lattice."""


@dataclass(frozen=True)
class ChartGrid:
    lo: tuple
    hi: tuple
    n: tuple
    margin: int = 4

    def __post_init__(self):
        if not (len(self.lo) == len(self.hi) == len(self.n)):
            raise ValueError("lo, hi and n must have the same length")
        if any(k < MIN_RESOLUTION for k in self.n):
            raise ValueError(f"resolution must be at least {MIN_RESOLUTION} per axis")
        if self.margin < STENCIL_RADIUS:
            raise ValueError("margin must be at least 2")

    @classmethod
    def regular(cls, lo, hi, n: int, margin: int = 4) -> "ChartGrid":
        return cls(tuple(map(float, lo)), tuple(map(float, hi)), (int(n),) * len(lo), margin)

    @classmethod
    def cropped(cls, lo, hi, n, margin):
        # crops may fall below the resolution floor; skip validation
        obj = object.__new__(cls)
        object.__setattr__(obj, "lo", tuple(lo))
        object.__setattr__(obj, "hi", tuple(hi))
        object.__setattr__(obj, "n", tuple(n))
        object.__setattr__(obj, "margin", margin)
        return obj

    @property
    def m(self) -> int:
        return len(self.n)

    @property
    def shape(self) -> tuple:
        return tuple(self.n)

    @property
    def spacing(self) -> np.ndarray:
        return (np.asarray(self.hi) - np.asarray(self.lo)) / (np.asarray(self.n) - 1)

    def axes(self) -> list[np.ndarray]:
        return [np.linspace(l, h, k) for l, h, k in zip(self.lo, self.hi, self.n)]

    def points(self) -> np.ndarray:
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack(mesh, axis=-1)

    def point(self, index) -> np.ndarray:
        return np.asarray(self.lo) + np.asarray(index) * self.spacing

    def crop(self, k: int) -> "ChartGrid":
        if k == 0:
            return self
        h = self.spacing
        n = tuple(v - 2 * k for v in self.n)
        if any(v < 1 for v in n):
            raise StencilBoundaryError("grid too small for the requested crop")
        lo = tuple(np.asarray(self.lo) + k * h)
        hi = tuple(np.asarray(self.hi) - k * h)
        return ChartGrid.cropped(lo, hi, n, max(self.margin - k, 0))

    def refined(self) -> "ChartGrid":
        """Same box, half the spacing."""
        return ChartGrid(self.lo, self.hi, tuple(2 * k - 1 for k in self.n), self.margin)

    def coarsened(self) -> "ChartGrid":
        """Same box, double the spacing; lattice points are a subset."""
        if any(k % 2 == 0 for k in self.n):
            raise ValueError("coarsening needs odd resolutions")
        return ChartGrid(self.lo, self.hi, tuple((k + 1) // 2 for k in self.n), self.margin)

    def describe(self) -> dict:
        return {
            "lo": [float(v) for v in self.lo],
            "hi": [float(v) for v in self.hi],
            "n": [int(v) for v in self.n],
            "margin": int(self.margin),
        }


@dataclass(frozen=True)
class ScalarField:
    grid: ChartGrid
    values: np.ndarray
    name: str = "f"

    def __post_init__(self):
        if self.values.shape != self.grid.shape:
            raise ValueError(f"values shape {self.values.shape} != grid {self.grid.shape}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError(f"field {self.name!r} has non-finite values")

    def crop(self, k: int) -> "ScalarField":
        if k == 0:
            return self
        sl = tuple(slice(k, -k) for _ in range(self.grid.m))
        return ScalarField(self.grid.crop(k), self.values[sl], self.name)

    def crop_to(self, grid: ChartGrid) -> "ScalarField":
        return self.crop((self.grid.n[0] - grid.n[0]) // 2)


def _crop_array(a: np.ndarray, k: int, m: int, skip=()) -> np.ndarray:
    sl = tuple(slice(None) if ax in skip else slice(k, a.shape[ax] - k) for ax in range(m))
    return a[sl]


def _d1_axis(a: np.ndarray, axis: int, h: float) -> np.ndarray:
    """4th-order first derivative along one axis; that axis shrinks by 4."""
    n = a.shape[axis]

    def s(lo):
        idx = [slice(None)] * a.ndim
        idx[axis] = slice(lo, n - 4 + lo)
        return a[tuple(idx)]

    return (s(0) - 8.0 * s(1) + 8.0 * s(3) - s(4)) / (12.0 * h)


def _d2_axis(a: np.ndarray, axis: int, h: float) -> np.ndarray:
    n = a.shape[axis]

    def s(lo):
        idx = [slice(None)] * a.ndim
        idx[axis] = slice(lo, n - 4 + lo)
        return a[tuple(idx)]

    return (-s(0) + 16.0 * s(1) - 30.0 * s(2) + 16.0 * s(3) - s(4)) / (12.0 * h * h)


def partials(values: np.ndarray, grid: ChartGrid) -> np.ndarray:
    """First partials on ``grid.crop(2)``; trailing derivative axis.

    ``values`` may carry extra trailing component axes.
    """
    m = grid.m
    h = grid.spacing
    out = []
    for i in range(m):
        d = _d1_axis(values, i, h[i])
        out.append(_crop_array(d, 2, m, skip=(i,)))
    return np.stack(out, axis=-1)


def second_partials(values: np.ndarray, grid: ChartGrid) -> np.ndarray:
    """Matrix of second partials of a scalar lattice on ``grid.crop(2)``."""
    m = grid.m
    h = grid.spacing
    out = np.empty(tuple(k - 4 for k in grid.n) + (m, m))
    for i in range(m):
        out[..., i, i] = _crop_array(_d2_axis(values, i, h[i]), 2, m, skip=(i,))
        for j in range(i + 1, m):
            dij = _d1_axis(_d1_axis(values, j, h[j]), i, h[i])
            dij = _crop_array(dij, 2, m, skip=(i, j))
            out[..., i, j] = dij
            out[..., j, i] = dij
    return out


def _map_frame(fr: GeometryFrame, fn) -> GeometryFrame:
    return GeometryFrame(
        **{
            k: None if getattr(fr, k) is None else fn(getattr(fr, k))
            for k in GeometryFrame.__dataclass_fields__
        }
    )


class GridGeometry:
    """Frames of an immersion evaluated on every lattice point."""

    def __init__(self, imm: Immersion, grid: ChartGrid, frame: GeometryFrame):
        self.imm = imm
        self.grid = grid
        self.frame = frame

    @classmethod
    def build(cls, imm: Immersion, grid: ChartGrid, jobs: int = 1) -> "GridGeometry":
        if grid.m != imm.m:
            raise ValueError("grid dimension does not match immersion")
        pts = grid.points()
        sign = _orientation_sign(imm)
        flat = pts.reshape(-1, grid.m)
        if jobs <= 1 or flat.shape[0] < 2 * jobs:
            fr = frames(imm, flat, sign, principal=False)
        else:
            chunks = np.array_split(flat, jobs)
            with ThreadPoolExecutor(max_workers=jobs) as pool:
                parts = list(pool.map(lambda c: frames(imm, c, sign, principal=False), chunks))
            fr = GeometryFrame(
                **{
                    k: None
                    if getattr(parts[0], k) is None
                    else np.concatenate([getattr(p, k) for p in parts], axis=0)
                    for k in GeometryFrame.__dataclass_fields__
                }
            )
        return cls(imm, grid, _map_frame(fr, lambda a: a.reshape(grid.shape + a.shape[1:])))

    @property
    def space(self):
        return self.imm.space

    @property
    def m(self) -> int:
        return self.grid.m

    def crop(self, k: int) -> "GridGeometry":
        if k == 0:
            return self
        sl = tuple(slice(k, -k) for _ in range(self.m))
        fr = _map_frame(self.frame, lambda a: a[sl])
        return GridGeometry(self.imm, self.grid.crop(k), fr)

    def crop_to(self, grid: ChartGrid) -> "GridGeometry":
        return self.crop((self.grid.n[0] - grid.n[0]) // 2)

    def window(self, index, radius: int) -> "GridGeometry":
        """Sub-geometry of side 2*radius+1 centred on a lattice index."""
        index = tuple(int(i) for i in index)
        for i, k in zip(index, self.grid.n):
            if i - radius < 0 or i + radius >= k:
                raise StencilBoundaryError(f"index {index} within {radius} of the boundary")
        sl = tuple(slice(i - radius, i + radius + 1) for i in index)
        lo = self.grid.point([i - radius for i in index])
        hi = self.grid.point([i + radius for i in index])
        g = ChartGrid.cropped(tuple(lo), tuple(hi), (2 * radius + 1,) * self.m, radius)
        fr = _map_frame(self.frame, lambda a: a[sl])
        return GridGeometry(self.imm, g, fr)

    def field(self, name: str) -> ScalarField:
        fr = self.frame
        m = self.m
        if name == "H":
            v = fr.H
        elif name == "theta":
            v = fr.theta
        elif name == "h":
            v = fr.position[..., m]
        elif name == "Htheta":
            v = fr.H * fr.theta
        elif name == "A2":
            v = fr.A2
        else:
            raise KeyError(f"unknown field {name!r}")
        return ScalarField(self.grid, np.array(v), name)


def _check_grid(field: ScalarField, geom: GridGeometry) -> GridGeometry:
    if field.grid.shape != geom.grid.shape:
        geom = geom.crop_to(field.grid)
    if field.grid.shape != geom.grid.shape:
        raise ValueError("field and geometry grids do not align")
    return geom


def gradient_field(field: ScalarField, geom: GridGeometry) -> np.ndarray:
    """Contravariant gradient ``g^ij d_j f`` on ``field.grid.crop(2)``."""
    geom = _check_grid(field, geom)
    df = partials(field.values, field.grid)
    g_inv = geom.crop(2).frame.g_inv
    return np.einsum("...ij,...j->...i", g_inv, df)


def laplacian_field(field: ScalarField, geom: GridGeometry) -> ScalarField:
    """Laplace-Beltrami (div grad) on ``field.grid.crop(2)``.

    Uses the identity ``(1/sqrt g) d_i(sqrt g g^ij d_j f) =
    g^ij (d_i d_j f - Gamma^k_ij d_k f)`` with exact induced Christoffels.
    """
    geom = _check_grid(field, geom)
    inner_geom = geom.crop(2).frame
    df = partials(field.values, field.grid)
    ddf = second_partials(field.values, field.grid)
    corr = np.einsum("...kij,...k->...ij", inner_geom.christoffel, df)
    lap = np.einsum("...ij,...ij->...", inner_geom.g_inv, ddf - corr)
    return ScalarField(field.grid.crop(2), lap, f"lap({field.name})")


def bilaplacian_field(field: ScalarField, geom: GridGeometry) -> ScalarField:
    return laplacian_field(laplacian_field(field, geom), geom)


def _window_field(field: ScalarField, index, radius: int) -> ScalarField:
    index = tuple(int(i) for i in index)
    for i, k in zip(index, field.grid.n):
        if i - radius < 0 or i + radius >= k:
            raise StencilBoundaryError(f"index {index} within {radius} of the boundary")
    sl = tuple(slice(i - radius, i + radius + 1) for i in index)
    lo = field.grid.point([i - radius for i in index])
    hi = field.grid.point([i + radius for i in index])
    g = ChartGrid.cropped(tuple(lo), tuple(hi), (2 * radius + 1,) * field.grid.m, radius)
    return ScalarField(g, field.values[sl], field.name)


def _centre(a: np.ndarray, m: int):
    return a[(0,) * m] if a.shape[:m] == (1,) * m else a


def grad(field: ScalarField, index, geom: GridGeometry) -> np.ndarray:
    """Contravariant gradient at one lattice index."""
    geom = _check_grid(field, geom)
    w = _window_field(field, index, 2)
    return _centre(gradient_field(w, geom.window(index, 2)), field.grid.m)


def laplace_beltrami(field: ScalarField, index, geom: GridGeometry) -> float:
    geom = _check_grid(field, geom)
    w = _window_field(field, index, 2)
    return float(laplacian_field(w, geom.window(index, 2)).values.reshape(-1)[0])


def bilaplacian(field: ScalarField, index, geom: GridGeometry) -> float:
    geom = _check_grid(field, geom)
    w = _window_field(field, index, 4)
    return float(bilaplacian_field(w, geom.window(index, 4)).values.reshape(-1)[0])


def nabla_T_field(geom: GridGeometry) -> np.ndarray:
    """``(nabla_k T)^i`` on ``geom.grid.crop(2)``; trailing axes (k, i)."""
    fr = geom.frame
    dT = partials(fr.T, geom.grid)  # axes (..., i, k)
    dT = np.swapaxes(dT, -1, -2)
    inner_fr = geom.crop(2).frame
    return dT + np.einsum("...ikj,...j->...ki", inner_fr.christoffel, inner_fr.T)


def covariant_derivative_T(geom: GridGeometry, index, direction) -> np.ndarray:
    """``nabla_X T`` at a lattice index for chart direction X."""
    win = geom.window(index, 2)
    nt = nabla_T_field(win)[(0,) * geom.m]
    return np.asarray(direction, dtype=float) @ nt


def codazzi_field(geom: GridGeometry, parts: bool = False):
    """Codazzi defect for all coordinate triples on ``geom.grid.crop(2)``.

    Entry ``[..., k, i, j]`` is
    ``(nabla_k b)_ij - (nabla_i b)_kj - <R(d_k, d_i) d_j, xi>``.
    With ``parts=True`` the two pieces are returned separately.
    """
    fr = geom.frame
    db = partials(fr.b, geom.grid)  # (..., i, j, k) = d_k b_ij
    db = np.moveaxis(db, -1, -3)  # (..., k, i, j)
    inner_fr = geom.crop(2).frame
    G, b = inner_fr.christoffel, inner_fr.b
    # nabla_k b_ij = d_k b_ij - G^l_ki b_lj - G^l_kj b_il
    m = geom.m
    # Gb[..., k, i, j] = G^l_ki b_lj
    Gb = (np.swapaxes(G.reshape(G.shape[:-3] + (m, m * m)), -1, -2) @ b).reshape(G.shape)
    nb = db - Gb - np.swapaxes(Gb, -1, -2)
    anti = nb - np.swapaxes(nb, -3, -2)
    amb = ambient_codazzi_term(geom.space, inner_fr)
    if parts:
        return anti, amb
    return anti - amb


def ambient_codazzi_term(space, fr: GeometryFrame) -> np.ndarray:
    """``<R(d_k, d_i) d_j, xi>`` for all coordinate triples."""
    return ambient.curvature_against(space, fr.position, fr.tangents, fr.xi)


def codazzi_residual(geom: GridGeometry, index, X: int, Y: int, Z: int) -> float:
    """Codazzi defect at a lattice index for coordinate directions X, Y, Z."""
    win = geom.window(index, 2)
    return float(abs(codazzi_field(win)[(0,) * geom.m + (X, Y, Z)]))


def intrinsic_scalar_curvature(geom: GridGeometry) -> np.ndarray:
    """Scalar curvature of the induced metric on ``geom.grid.crop(2)``.

    Built from the exact Christoffel symbols and one stencil derivative.
    """
    G_full = geom.frame.christoffel
    dG = partials(G_full, geom.grid)  # (..., i, k, j, l) = d_l G^i_kj
    inner_fr = geom.crop(2).frame
    G = inner_fr.christoffel
    # R^i_{jkl} = d_k G^i_lj - d_l G^i_kj + G^i_kp G^p_lj - G^i_lp G^p_kj
    dk_G_lj = np.einsum("...iljk->...ijkl", dG)
    dl_G_kj = np.einsum("...ikjl->...ijkl", dG)
    m = geom.m
    batch = G.shape[:-3]
    # quad[..., i, j, k, l] = G^i_kp G^p_lj
    prod = G.reshape(batch + (m * m, m)) @ G.reshape(batch + (m, m * m))
    quad = np.swapaxes(prod.reshape(batch + (m,) * 4), -3, -2)
    R = dk_G_lj - dl_G_kj + quad - np.swapaxes(quad, -1, -2)
    ric = np.einsum("...ijil->...jl", R)
    return np.einsum("...jl,...jl->...", inner_fr.g_inv, ric)
