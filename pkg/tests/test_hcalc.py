import numpy as np
import pytest

from carnotkit import (
    HorizontalSection,
    ScalarField,
    bracket_adjoint,
    horizontal_divergence,
    horizontal_gradient,
    horizontal_gradient_split,
    swirl_field,
)
from carnotkit.hcalc import fd_gradient


def t_field():
    return ScalarField(lambda p: p[..., 2])


class TestHorizontalGradient:
    def test_vertical_coordinate(self, h1):
        out = horizontal_gradient(h1, t_field(), [1.0, 2.0, 0.0])
        assert np.allclose(out, [-1.0, 0.5], atol=1e-10)

    def test_first_layer_coordinate(self, h1):
        f = ScalarField(lambda p: p[..., 0])
        rng = np.random.default_rng(0)
        pts = rng.uniform(-2, 2, (50, 3))
        assert np.abs(horizontal_gradient(h1, f, pts) - [1.0, 0.0]).max() < 1e-9

    def test_first_layer_function_equals_euclidean(self, quat):
        # functions of the horizontal coordinates alone: frame block is identity
        f = ScalarField(lambda p: p[..., 0] * p[..., 1] + p[..., 3] ** 2)
        rng = np.random.default_rng(1)
        pts = rng.uniform(-1, 1, (50, quat.dim))
        hg = horizontal_gradient(quat, f, pts)
        eg = fd_gradient(f.f, pts)[..., : quat.m]
        assert np.abs(hg - eg).max() < 1e-8

    def test_split_form_identity(self, h1):
        # f = t + s^2 exercises both layers
        f = ScalarField(
            lambda p: p[..., 2] + p[..., 0] ** 2 + p[..., 1] ** 2,
            lambda p: np.stack([2 * p[..., 0], 2 * p[..., 1], np.ones(p.shape[:-1])], axis=-1),
        )
        rng = np.random.default_rng(2)
        pts = rng.uniform(-2, 2, (100, 3))
        a = horizontal_gradient(h1, f, pts)
        b = horizontal_gradient_split(h1, f, pts)
        assert np.abs(a - b).max() < 1e-10

    def test_norm_split_identity_on_htype(self, h1, quat):
        # |grad_H phi|^2 = |D_xi phi|^2 + <D_xi phi, A(eta) xi> + |eta|^2 |xi|^2 / 4
        rng = np.random.default_rng(3)
        for spec in (h1, quat):
            coef = rng.uniform(-1, 1, (spec.dim, spec.dim))

            def f(p, coef=coef):
                quad = np.einsum("...i,ij,...j->...", p, coef, p)
                return quad + p[..., -1]

            field = ScalarField(f)
            pts = rng.uniform(-1, 1, (40, spec.dim))
            hg = horizontal_gradient(spec, field, pts)
            g = field.grad(pts)
            dxi, eta = g[..., : spec.m], g[..., spec.m :]
            xi = pts[..., : spec.m]
            rhs = (
                np.sum(dxi**2, axis=-1)
                + np.einsum("...i,...i->...", dxi, bracket_adjoint(spec, eta, xi))
                + 0.25 * np.sum(eta**2, axis=-1) * np.sum(xi**2, axis=-1)
            )
            assert np.abs(np.sum(hg**2, axis=-1) - rhs).max() < 1e-9

    def test_fd_gradient_second_order(self, h1):
        f = ScalarField(lambda p: np.exp(p[..., 0]) * np.sin(p[..., 2]))
        exact = lambda p: np.stack(
            [
                np.exp(p[..., 0]) * np.sin(p[..., 2]),
                np.zeros(p.shape[:-1]),
                np.exp(p[..., 0]) * np.cos(p[..., 2]),
            ],
            axis=-1,
        )
        p = np.array([0.4, -0.2, 0.9])
        errs = [np.abs(fd_gradient(f.f, p, h) - exact(p)).max() for h in (1e-3, 5e-4)]
        order = np.log2(errs[0] / errs[1])
        assert order > 1.8


class TestHorizontalDivergence:
    def test_coordinate_section(self, h1):
        sec = HorizontalSection(lambda p: np.stack([p[..., 0], np.zeros(p.shape[:-1])], axis=-1))
        rng = np.random.default_rng(4)
        pts = rng.uniform(-2, 2, (30, 3))
        assert np.abs(horizontal_divergence(h1, sec, pts) - 1.0).max() < 1e-8

    def test_constant_section(self, h1):
        sec = HorizontalSection(lambda p: np.broadcast_to([0.3, -0.7], p.shape[:-1] + (2,)))
        pts = np.random.default_rng(5).uniform(-2, 2, (30, 3))
        assert np.abs(horizontal_divergence(h1, sec, pts)).max() < 1e-8

    def test_step_guard(self, h1):
        sec = HorizontalSection(lambda p: p[..., :2])
        with pytest.raises(ValueError):
            horizontal_divergence(h1, sec, np.zeros(3), step=0.0)


class TestSwirlField:
    def test_unit_value(self, h1):
        V = swirl_field(h1, 0.1)
        assert np.allclose(V(np.array([1.0, 0.0, 0.3])), [0.0, -1.0], atol=0)

    def test_zero_at_axis(self, h1):
        V = swirl_field(h1, 0.1)
        assert np.array_equal(V(np.array([0.0, 0.0, 0.5])), np.zeros(2))

    def test_unit_bound_on_htype(self, h1, quat):
        rng = np.random.default_rng(6)
        for spec in (h1, quat):
            V = swirl_field(spec, 0.1)
            pts = rng.uniform(-2, 2, (10**4, spec.dim))
            assert np.linalg.norm(V(pts), axis=-1).max() <= 1.0 + 1e-12

    def test_divergence_free_both_branches(self, h1, quat):
        rng = np.random.default_rng(7)
        delta = 0.3
        for spec in (h1, quat):
            V = swirl_field(spec, delta)
            pts = rng.uniform(-2, 2, (500, spec.dim))
            s = np.linalg.norm(pts[..., : spec.m], axis=-1)
            probes = pts[np.abs(s - delta) > 5e-3]
            div = horizontal_divergence(spec, V, probes, step=1e-4)
            assert np.abs(div).max() < 1e-5

    def test_warns_off_htype(self, free3):
        with pytest.warns(UserWarning, match="non-Heisenberg-type"):
            swirl_field(free3, 0.1)

    def test_delta_guard(self, h1):
        with pytest.raises(ValueError):
            swirl_field(h1, 0.0)
