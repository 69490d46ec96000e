"""Extrinsic frames of hypersurface charts."""

import math

import numpy as np
import pytest

from lambda_biharmonic import jets as J
from lambda_biharmonic import ambient as A
from lambda_biharmonic.ambient import AmbientSpace
from lambda_biharmonic.catalog import euclidean_cylinder, random_graph, slice_entry
from lambda_biharmonic.immersion import (
    Immersion,
    ImmersionError,
    frame_at,
    frames,
    normal_flip,
    umbilicity_defect,
)


def sphere_graph(r=2.0, w=0.5):
    space = AmbientSpace(0, 2)

    def f(u):
        return [u[0], u[1], J.sqrt(r * r - u[0] * u[0] - u[1] * u[1])]

    return Immersion(space, (-w, -w), (w, w), f, name="sphere")


def affine_reparam(imm, M, shift):
    """Same surface through the chart change u = centre + M v + shift."""
    centre = 0.5 * (np.asarray(imm.lo) + np.asarray(imm.hi))
    Minv = np.linalg.inv(M)
    m = imm.m

    def f(v):
        u = [centre[i] + shift[i] + sum(M[i, j] * v[j] for j in range(m)) for i in range(m)]
        return imm.map(u)

    w = 0.05
    return Immersion(imm.space, (-w,) * m, (w,) * m, f, imm.orientation, None, imm.name), Minv


class TestFrameInvariants:
    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_random_graph_invariants(self, space, rng, seed):
        imm = random_graph(space, seed).immersion
        pts = rng.uniform(imm.lo, imm.hi, size=(25, space.m))
        fr = frames(imm, pts)
        G = A.metric_at(space, fr.position)
        xi = fr.xi
        np.testing.assert_allclose(np.einsum("...a,...ab,...b->...", xi, G, xi), 1.0, atol=1e-10)
        tang = np.einsum("...ia,...ab,...b->...i", fr.tangents, G, xi)
        np.testing.assert_allclose(tang, 0.0, atol=1e-10)
        T2 = np.einsum("...i,...ij,...j->...", fr.T, fr.g, fr.T)
        np.testing.assert_allclose(fr.theta**2 + T2, 1.0, atol=1e-10)
        np.testing.assert_allclose(fr.A, np.einsum("...ij,...jk->...ik", fr.g_inv, fr.b), atol=1e-12)
        np.testing.assert_allclose(fr.H, np.trace(fr.A, axis1=-2, axis2=-1) / space.m, atol=1e-12)
        np.testing.assert_allclose(fr.kappa.sum(-1), np.trace(fr.A, axis1=-2, axis2=-1), atol=1e-10)
        np.testing.assert_allclose((fr.kappa**2).sum(-1), fr.A2, atol=1e-10)
        # <B(X,Y), xi> = <A X, Y>
        np.testing.assert_allclose(fr.b, np.einsum("...ki,...kj->...ij", fr.A, fr.g), atol=1e-12)
        assert np.all(np.diff(fr.kappa, axis=-1) >= 0)

    def test_rank_deficiency_is_an_error(self):
        space = AmbientSpace(0, 2)
        imm = Immersion(space, (-1, -1), (1, 1), lambda u: [u[0], u[0], u[1] * 0.0])
        with pytest.raises(ImmersionError):
            frame_at(imm, [0.1, 0.2])


class TestExamples:
    def test_slice_is_totally_geodesic(self, space, rng):
        imm = slice_entry(space, 0.3).immersion
        fr = frame_at(imm, rng.uniform(-0.4, 0.4, size=space.m))
        assert fr.H == 0.0
        assert fr.theta == pytest.approx(1.0, abs=1e-15)
        np.testing.assert_array_equal(fr.A, 0.0)
        np.testing.assert_allclose(fr.T, 0.0, atol=1e-15)
        assert umbilicity_defect(fr) == 0.0

    def test_circular_cylinder(self):
        imm = euclidean_cylinder(2, 1, 1.0).immersion
        c = 0.5 * (np.asarray(imm.lo) + np.asarray(imm.hi))
        fr = frame_at(imm, c + 0.1)
        assert fr.theta == pytest.approx(0.0, abs=1e-14)
        assert fr.A2 == pytest.approx(1.0, abs=1e-12)
        assert abs(fr.H) == pytest.approx(0.5, abs=1e-12)
        np.testing.assert_allclose(np.sort(np.abs(fr.kappa)), [0.0, 1.0], atol=1e-12)
        assert umbilicity_defect(fr) == pytest.approx(0.5, abs=1e-12)

    def test_round_sphere(self):
        r = 2.0
        imm = sphere_graph(r)
        fr = frame_at(imm, [0.0, 0.0])
        assert fr.H == pytest.approx(-1.0 / r, abs=1e-12)
        assert fr.theta == pytest.approx(1.0, abs=1e-14)
        np.testing.assert_allclose(fr.T, 0.0, atol=1e-14)
        for x in ([0.3, -0.2], [0.45, 0.4]):
            assert umbilicity_defect(frame_at(imm, x)) <= 1e-10


class TestNormalFlip:
    def test_slice_flip(self):
        fr = normal_flip(frame_at(slice_entry(AmbientSpace(1, 2)).immersion, [0.1, 0.1]))
        assert fr.theta == pytest.approx(-1.0)
        np.testing.assert_array_equal(fr.A, 0.0)

    def test_cylinder_flip(self):
        imm = euclidean_cylinder(2, 1, 1.0).immersion
        x = 0.5 * (np.asarray(imm.lo) + np.asarray(imm.hi))
        fr = frame_at(imm, x)
        fl = normal_flip(fr)
        assert fl.H == pytest.approx(-fr.H)
        assert fl.A2 == pytest.approx(fr.A2)
        np.testing.assert_allclose(fl.kappa, np.sort(-fr.kappa))
        np.testing.assert_array_equal(fl.g, fr.g)
        np.testing.assert_array_equal(fl.T, fr.T)

    def test_involution(self, space, rng):
        imm = random_graph(space, 5).immersion
        fr = frame_at(imm, rng.uniform(imm.lo, imm.hi))
        back = normal_flip(normal_flip(fr))
        for name in ("b", "A", "H", "kappa", "theta", "xi", "g", "T"):
            np.testing.assert_allclose(getattr(back, name), getattr(fr, name), atol=1e-15)

    def test_orientation_flag(self, space):
        imm = random_graph(space, 2).immersion
        flipped = Immersion(imm.space, imm.lo, imm.hi, imm.map, orientation=-1)
        x = 0.5 * (np.asarray(imm.lo) + np.asarray(imm.hi)) + 0.05
        a, b = frame_at(imm, x), frame_at(flipped, x)
        assert b.H == pytest.approx(-a.H, abs=1e-15)
        assert b.theta == pytest.approx(-a.theta, abs=1e-15)


class TestReparametrization:
    @pytest.mark.parametrize("seed", [0, 7])
    def test_affine_chart_change(self, space, seed):
        rng = np.random.default_rng(seed)
        imm = random_graph(space, seed).immersion
        M = np.eye(space.m) + 0.3 * rng.normal(size=(space.m, space.m))
        shift = rng.uniform(-0.05, 0.05, size=space.m)
        new, Minv = affine_reparam(imm, M, shift)
        centre = 0.5 * (np.asarray(imm.lo) + np.asarray(imm.hi))
        for v in rng.uniform(-0.04, 0.04, size=(4, space.m)):
            a = frame_at(imm, centre + shift + M @ v)
            b = frame_at(new, v)
            for name in ("H", "A2", "theta"):
                assert getattr(b, name) == pytest.approx(getattr(a, name), abs=1e-8)
            np.testing.assert_allclose(b.kappa, a.kappa, atol=1e-8)
            # max|b - H g| is chart dependent; its invariant counterpart is max|kappa_i - H|
            spread_a = np.max(np.abs(a.kappa - a.H))
            spread_b = np.max(np.abs(b.kappa - b.H))
            assert spread_b == pytest.approx(spread_a, abs=1e-8)

    def test_umbilicity_zero_set_is_chart_independent(self):
        imm = sphere_graph(2.0)
        M = np.array([[1.2, 0.4], [-0.3, 0.9]])
        new, _ = affine_reparam(imm, M, np.zeros(2))
        assert umbilicity_defect(frame_at(new, [0.02, -0.03])) <= 1e-10
