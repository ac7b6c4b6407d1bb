import math

import numpy as np
import pytest

from carnotkit import (
    BallSpec,
    CharacteristicPointError,
    Domain,
    HalfSpaceH,
    ScalarField,
    characteristic_scan,
    coordinate_plane_patch,
    cylinder_patch,
    dilate_patch,
    disk_patch,
    dist_box,
    gauge_sphere_patch,
    h_perimeter,
    halfspace_side,
    horizontal_gradient,
    horizontal_normal,
    implicit_graph_patch,
    multiply,
    perimeter_density,
    revolution_graph_patch,
    translate_domain,
    translate_patch,
)
from conftest import gauge_ball_domain, halfspace_domain, paraboloid_domain

# independent 1d reduction of the unit gauge sphere H-perimeter:
# (pi/2) * int_0^pi sqrt(sin u (16 sin^2 u + cos^2 u)) du, mpmath/quad agree
GAUGE_SPHERE_PERIMETER_H1 = 11.415825050032065


def dome_patch(spec, radius=1.0, dom=None):
    dom = dom or paraboloid_domain()
    return revolution_graph_patch(
        spec, lambda r: 1.0 - r**2, lambda r: -2.0 * r, radius, domain=dom
    )


class TestHorizontalNormal:
    def test_halfspace(self, h1):
        dom = halfspace_domain()
        nu = horizontal_normal(h1, dom, np.array([0.0, 0.3, -0.7]))
        assert np.allclose(nu, [-1.0, 0.0], atol=0)  # inward convention

    def test_characteristic_error(self, h1):
        dom = Domain(ScalarField(lambda p: p[..., 2]), [[-1, 1], [-1, 1], [-1, 1]])
        with pytest.raises(CharacteristicPointError):
            horizontal_normal(h1, dom, np.zeros(3))

    def test_paraboloid_value(self, h1):
        dom = paraboloid_domain()
        p = np.array([1.0, 0.0, 0.0])
        hg = horizontal_gradient(h1, dom.phi, p)
        assert np.allclose(hg, [2.0, 0.5], atol=1e-12)
        nu = horizontal_normal(h1, dom, p)
        assert np.allclose(nu, [-0.97014250014533188, -0.24253562503633297], rtol=1e-12)
        assert np.linalg.norm(nu) == pytest.approx(1.0, abs=1e-14)


class TestHPerimeter:
    def test_plane_unit_square(self, h1):
        patch = coordinate_plane_patch(h1, 0, 0.0, [[0, 1], [0, 1]])
        est = h_perimeter(h1, patch, order=4)
        assert est.value == pytest.approx(1.0, abs=1e-14)

    def test_disk(self, h1):
        for R in (1.0, 0.35):
            est = h_perimeter(h1, disk_patch(h1, 0.7, R), order=8)
            assert est.value == pytest.approx(math.pi / 3 * R**3, rel=1e-13)

    def test_plane_in_ball_window(self, h1):
        # aligned parameter box: the constant 4/eps^2 at every radius
        eps = h1.eps
        values = []
        for r in (1.0, 0.5, 0.25):
            box = [[-r, r], [-((r / eps) ** 2), (r / eps) ** 2]]
            est = h_perimeter(h1, coordinate_plane_patch(h1, 0, 0.0, box), order=4)
            values.append(est.value / r**3)
        assert np.allclose(values, 4.0 / eps**2, rtol=1e-12)

    def test_dome_closed_form(self, h1):
        # paraboloid wall above radius R carries (pi sqrt(17) / 3) R^3
        for R in (1.0, 0.1):
            est = h_perimeter(h1, dome_patch(h1, R), order=16)
            assert est.value == pytest.approx(math.pi * math.sqrt(17) / 3 * R**3, rel=1e-12)

    def test_integrand_identity(self, h1):
        # sqrt(sum <X_i, n>^2) == |grad_H phi| / |grad phi| on the zero set
        dom = paraboloid_domain()
        patch = dome_patch(h1, 1.0, dom)
        u = np.stack(
            np.meshgrid(np.linspace(0.05, 0.95, 9), np.linspace(0.1, 6.0, 9), indexing="ij"),
            axis=-1,
        ).reshape(-1, 2)
        pts = patch.points(u)
        dens = perimeter_density(h1, pts, patch.normals(u))
        hg = np.linalg.norm(horizontal_gradient(h1, dom.phi, pts), axis=-1)
        eg = np.linalg.norm(dom.phi.grad(pts), axis=-1)
        assert np.abs(dens - hg / eg).max() < 1e-10
        assert np.abs(dom.phi(pts)).max() < 1e-8  # patch lies on the zero set

    def test_translation_invariance(self, h1):
        z = np.array([0.3, -0.4, 0.25])
        patch = dome_patch(h1, 1.0)
        ball = BallSpec(np.zeros(3), 0.8, "box-d")
        ball_z = BallSpec(z, 0.8, "box-d")
        base = h_perimeter(h1, patch, window=ball, order=64)
        moved = h_perimeter(h1, translate_patch(h1, z, patch), window=ball_z, order=64)
        assert moved.value == pytest.approx(base.value, rel=1e-8)

    def test_dilation_scaling(self, h1):
        patch = dome_patch(h1, 1.0)
        r = 0.5
        a = h_perimeter(h1, patch, order=16).value
        b = h_perimeter(h1, dilate_patch(h1, r, patch), order=16).value
        assert b == pytest.approx(a * r ** (h1.Q - 1), rel=1e-9)

    def test_gauge_sphere_vs_oracle(self, h1):
        est = h_perimeter(h1, gauge_sphere_patch(h1, np.zeros(3), 1.0), order=32, rtol=1e-10)
        assert est.value == pytest.approx(GAUGE_SPHERE_PERIMETER_H1, rel=1e-10)

    def test_gauge_sphere_scaling(self, h1):
        r = 0.7
        est = h_perimeter(h1, gauge_sphere_patch(h1, np.zeros(3), r), order=32, rtol=1e-10)
        assert est.value == pytest.approx(GAUGE_SPHERE_PERIMETER_H1 * r**3, rel=1e-9)

    @pytest.mark.filterwarnings("ignore:invalid value encountered")
    def test_nonfinite_jacobian_rejected(self, h1):
        patch = coordinate_plane_patch(h1, 0, 0.0, [[0, 1], [0, 1]])
        bad = type(patch)(patch.box, patch.chart, lambda u: np.full(u.shape[:-1] + (3, 2), np.inf))
        with pytest.raises(ValueError, match="non-finite"):
            h_perimeter(h1, bad, order=4)

    def test_window_kinds(self, h1):
        # indicator windows on unaligned boxes are first-order accurate only;
        # aligned boxes (the recommended path) are exact elsewhere in the suite
        patch = coordinate_plane_patch(h1, 0, 0.0, [[-1, 1], [-4, 4]])
        ball = BallSpec(np.zeros(3), 0.5, "box-d")
        box = np.array([[-1, 1], [-0.5, 0.5], [-1.0, 1.0]])
        dom = halfspace_domain()
        v_ball = h_perimeter(h1, patch, window=ball, order=128, max_order=128).value
        v_box = h_perimeter(h1, patch, window=box, order=128, max_order=128).value
        v_dom = h_perimeter(h1, patch, window=translate_domain(h1, [0.5, 0, 0], dom), order=16).value
        assert v_ball == pytest.approx(4 * 0.5**3 / h1.eps**2, rel=0.06)
        assert v_box == pytest.approx(1.0 * 2.0, rel=0.06)
        # the whole 2 x 8 patch lies inside the translated half-space {x1 < 0.5}
        assert v_dom == pytest.approx(16.0, rel=1e-8)


class TestImplicitGraph:
    def test_matches_explicit_graph(self, h1):
        dom = paraboloid_domain()
        patch = implicit_graph_patch(h1, dom, 2, [[-0.6, 0.6], [-0.6, 0.6]], (-0.5, 1.5))
        u = np.random.default_rng(0).uniform(-0.6, 0.6, (64, 2))
        pts = patch.points(u)
        assert np.abs(pts[:, 2] - (1.0 - pts[:, 0] ** 2 - pts[:, 1] ** 2)).max() < 1e-10
        J = patch.jac(u)
        assert np.abs(J[:, 2, 0] - (-2.0 * pts[:, 0])).max() < 1e-8

    def test_perimeter_against_closed_form(self, h1):
        # over the square, the wall integrand projects to (sqrt(17)/2) |xi|,
        # whose integral over [-a, a]^2 is 4 a^3 (sqrt 2 + asinh 1) / 3
        dom = paraboloid_domain()
        a = 0.5
        imp = implicit_graph_patch(h1, dom, 2, [[-a, a], [-a, a]], (-0.5, 1.5))
        est = h_perimeter(h1, imp, order=64, max_order=512).value
        expect = math.sqrt(17) / 2 * 4 * a**3 * (math.sqrt(2) + math.asinh(1.0)) / 3
        assert est == pytest.approx(expect, rel=1e-5)


class TestCharacteristicScan:
    def test_paraboloid_single_pole_cluster(self, h1):
        dom = paraboloid_domain()
        patch = revolution_graph_patch(
            h1, lambda r: 1 - r**2, lambda r: -2 * r, 1.1, domain=dom
        )
        scan = characteristic_scan(h1, dom, patch, (12, 24, 48))
        assert scan.monotone
        assert all(f > 0 for f in scan.fractions)
        pole = np.array([0.0, 0.0, 1.0])
        for pts in scan.points:
            assert len(pts) > 0
            assert dist_box(h1, pts, pole).max() < 0.3

    def test_halfspace_scan_empty(self, h1):
        dom = halfspace_domain()
        patch = coordinate_plane_patch(h1, 0, 0.0, [[-1, 1], [-4, 4]], domain=dom)
        scan = characteristic_scan(h1, dom, patch, (8, 16), tol_ref=0.5)
        assert scan.fractions == (0.0, 0.0)
        assert all(len(p) == 0 for p in scan.points)

    def test_gauge_ball_two_poles(self, h1):
        dom = gauge_ball_domain()
        patch = gauge_sphere_patch(h1, np.zeros(3), 1.0, domain=dom)
        scan = characteristic_scan(h1, dom, patch, (12, 24, 48))
        assert scan.monotone and all(f > 0 for f in scan.fractions)
        top, bottom = np.array([0.0, 0.0, 1.0]), np.array([0.0, 0.0, -1.0])
        for pts in scan.points:
            near = np.minimum(dist_box(h1, pts, top), dist_box(h1, pts, bottom))
            assert near.max() < 0.5
            # both poles are represented
            assert (pts[:, 2] > 0).any() and (pts[:, 2] < 0).any()


class TestHalfSpaces:
    def test_sides_at_origin(self, h1):
        hs = HalfSpaceH(np.zeros(3), np.array([1.0, 0.0]))
        assert halfspace_side(h1, hs, np.array([1.0, 2.0, 5.0])) == 1
        assert halfspace_side(h1, hs, np.array([0.0, 0.0, 7.0])) == 0

    def test_translated_base(self, h1):
        hs = HalfSpaceH(np.array([1.0, 0.0, 0.0]), np.array([1.0, 0.0]))
        # base^-1 q = (0, 1, 1/2): first layer orthogonal to the normal
        assert halfspace_side(h1, hs, np.array([1.0, 1.0, 0.0])) == 0

    def test_unit_normal_required(self):
        with pytest.raises(ValueError):
            HalfSpaceH(np.zeros(3), np.array([2.0, 0.0]))

    def test_translation_consistency(self, h1):
        rng = np.random.default_rng(1)
        base = rng.uniform(-1, 1, 3)
        nu = np.array([0.6, 0.8])
        hs = HalfSpaceH(base, nu)
        z = rng.uniform(-1, 1, (50, 3))
        lhs = halfspace_side(h1, hs, multiply(h1, base, z))
        rhs = halfspace_side(h1, HalfSpaceH(np.zeros(3), nu), z)
        assert np.array_equal(lhs, rhs)
