import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from carnotkit import (
    GroupSpec,
    ScalarField,
    bracket_adjoint,
    bracket_adjoint_matrix,
    dilate,
    dilation_jacobian,
    frame,
    group_from_entries,
    heisenberg_group,
    horizontal_gradient,
    inverse,
    is_heisenberg_type,
    multiply,
    validate_spec,
)


class TestValidation:
    def test_h1_passes(self, h1):
        report = validate_spec(h1)
        assert report.ok
        assert report.generation_rank == 1

    def test_antisymmetry_violation(self):
        b = np.zeros((2, 2, 1))
        b[0, 1, 0] = 1.0
        b[1, 0, 0] = 1.0  # should be -1
        report = validate_spec(GroupSpec(2, 1, b))
        assert not report.ok
        assert any("antisymmetry" in msg for msg in report.failures)

    def test_generation_rank_deficiency(self):
        b = np.zeros((2, 2, 2))
        b[0, 1, 0] = 1.0
        b[1, 0, 0] = -1.0
        report = validate_spec(GroupSpec(2, 2, b))
        assert not report.ok
        assert any("rank 1 < 2" in msg for msg in report.failures)

    def test_eps_range(self, h1):
        bad = GroupSpec(h1.m, h1.n, h1.b, eps=1.5)
        assert any("eps" in msg for msg in validate_spec(bad).failures)

    def test_builtins_valid(self, all_specs):
        for spec in all_specs.values():
            assert validate_spec(spec).ok

    def test_entries_conflict(self):
        with pytest.raises(ValueError, match="conflicting"):
            group_from_entries(2, 1, [(1, 2, 1, 1.0), (2, 1, 1, 1.0)])

    def test_entries_diagonal(self):
        with pytest.raises(ValueError, match="diagonal"):
            group_from_entries(2, 1, [(1, 1, 1, 1.0)])


class TestGroupLaw:
    def test_h1_product(self, h1):
        out = multiply(h1, [1.0, 0.0, 0.0], [0.0, 1.0, 0.0])
        assert np.allclose(out, [1.0, 1.0, 0.5], atol=0)

    def test_inverse(self, all_specs):
        rng = np.random.default_rng(1)
        for spec in all_specs.values():
            p = rng.uniform(-1, 1, (1000, spec.dim))
            assert np.abs(multiply(spec, p, inverse(spec, p))).max() < 1e-12

    def test_associativity_batch(self, all_specs):
        rng = np.random.default_rng(2)
        for spec in all_specs.values():
            p, q, r = rng.uniform(-1, 1, (3, 1000, spec.dim))
            lhs = multiply(spec, multiply(spec, p, q), r)
            rhs = multiply(spec, p, multiply(spec, q, r))
            assert np.abs(lhs - rhs).max() < 1e-12

    def test_h1_assoc_example(self, h1):
        lhs = multiply(h1, multiply(h1, [1, 2, 3], [4, 5, 6]), [7, 8, 9])
        rhs = multiply(h1, [1, 2, 3], multiply(h1, [4, 5, 6], [7, 8, 9]))
        assert np.abs(lhs - rhs).max() < 1e-12

    @given(
        st.lists(st.floats(-10, 10), min_size=9, max_size=9),
    )
    @settings(max_examples=100, deadline=None)
    def test_associativity_hypothesis(self, coords):
        h1 = heisenberg_group(1)
        p, q, r = (np.array(coords[i : i + 3]) for i in (0, 3, 6))
        lhs = multiply(h1, multiply(h1, p, q), r)
        rhs = multiply(h1, p, multiply(h1, q, r))
        assert np.abs(lhs - rhs).max() <= 1e-9 * max(1.0, np.abs(lhs).max())


class TestDilations:
    def test_example(self, h1):
        assert np.allclose(dilate(h1, 2.0, [1, 1, 1]), [2, 2, 4], atol=0)
        p = np.array([0.3, -0.4, 0.7])
        assert np.array_equal(dilate(h1, 1.0, p), p)

    def test_automorphism_example(self, h1):
        a = dilate(h1, 3.0, multiply(h1, [1, 0, 0], [0, 1, 0]))
        b = multiply(h1, dilate(h1, 3.0, [1, 0, 0]), dilate(h1, 3.0, [0, 1, 0]))
        assert np.allclose(a, [3, 3, 4.5], atol=0)
        assert np.allclose(b, [3, 3, 4.5], atol=0)

    def test_automorphism_and_composition(self, all_specs):
        rng = np.random.default_rng(3)
        for spec in all_specs.values():
            p, q = rng.uniform(-1, 1, (2, 500, spec.dim))
            lhs = dilate(spec, 1.7, multiply(spec, p, q))
            rhs = multiply(spec, dilate(spec, 1.7, p), dilate(spec, 1.7, q))
            assert np.abs(lhs - rhs).max() < 1e-12
            assert np.abs(dilate(spec, 1.3, dilate(spec, 0.6, p)) - dilate(spec, 0.78, p)).max() < 1e-12

    def test_rejects_nonpositive(self, h1):
        with pytest.raises(ValueError):
            dilate(h1, 0.0, [1, 1, 1])
        with pytest.raises(ValueError):
            dilate(h1, -2.0, [1, 1, 1])

    def test_jacobian_is_r_pow_Q(self, all_specs):
        for spec in all_specs.values():
            for r in (0.25, 1.0, 3.0):
                assert dilation_jacobian(spec, r) == pytest.approx(r**spec.Q, rel=1e-12)


class TestFrame:
    def test_h1_values(self, h1):
        X = frame(h1, [1.0, 2.0, 0.0])
        assert np.allclose(X[0], [1, 0, -1], atol=0)
        assert np.allclose(X[1], [0, 1, 0.5], atol=0)

    def test_identity_at_origin(self, all_specs):
        for spec in all_specs.values():
            X = frame(spec, np.zeros(spec.dim))
            assert np.array_equal(X, np.eye(spec.dim)[: spec.m])

    def test_vertical_block_matches_group_law(self, all_specs):
        # X_i(p) is the derivative of t -> p * (t e_i) at t = 0
        h = 1e-6
        rng = np.random.default_rng(4)
        for spec in all_specs.values():
            p = rng.uniform(-1, 1, spec.dim)
            X = frame(spec, p)
            for i in range(spec.m):
                e = np.zeros(spec.dim)
                e[i] = h
                fd = (multiply(spec, p, e) - multiply(spec, p, -e)) / (2 * h)
                assert np.abs(X[i] - fd).max() < 1e-9

    def test_left_invariance(self, h1):
        # X_i(f o tau_p)(q) = (X_i f)(p q) probed with finite differences
        def f(x):
            return x[..., 0] ** 2 * x[..., 2] + 3 * x[..., 1] * x[..., 2] + x[..., 0] * x[..., 1] ** 2

        rng = np.random.default_rng(5)
        for _ in range(5):
            p = rng.uniform(-1, 1, 3)
            q = rng.uniform(-1, 1, 3)
            composed = ScalarField(lambda x, p=p: f(multiply(h1, p, x)))
            lhs = horizontal_gradient(h1, composed, q)
            rhs = horizontal_gradient(h1, ScalarField(f), multiply(h1, p, q))
            assert np.abs(lhs - rhs).max() < 1e-8


class TestBracketAdjoint:
    def test_h1_rotation(self, h1):
        assert np.allclose(bracket_adjoint(h1, [1.0], [1.0, 0.0]), [0.0, 1.0], atol=0)
        assert np.allclose(bracket_adjoint(h1, [1.0], [0.0, 1.0]), [-1.0, 0.0], atol=0)

    def test_skew_pairing_vanishes(self, all_specs):
        rng = np.random.default_rng(6)
        for spec in all_specs.values():
            eta = rng.uniform(-1, 1, (1000, spec.n))
            xi = rng.uniform(-1, 1, (1000, spec.m))
            pair = np.einsum("...i,...i->...", bracket_adjoint(spec, eta, xi), xi)
            assert np.abs(pair).max() < 1e-12

    def test_zero_vertical_vector(self, all_specs):
        for spec in all_specs.values():
            out = bracket_adjoint(spec, np.zeros(spec.n), np.ones(spec.m))
            assert np.array_equal(out, np.zeros(spec.m))

    def test_bilinearity(self, h1):
        rng = np.random.default_rng(7)
        a, b = rng.uniform(-1, 1, (2, 1))
        xi, zeta = rng.uniform(-1, 1, (2, 2))
        lhs = bracket_adjoint(h1, 2.0 * a + b, xi + 3.0 * zeta)
        rhs = (
            2.0 * bracket_adjoint(h1, a, xi)
            + 6.0 * bracket_adjoint(h1, a, zeta)
            + bracket_adjoint(h1, b, xi)
            + 3.0 * bracket_adjoint(h1, b, zeta)
        )
        assert np.abs(lhs - rhs).max() < 1e-12

    def test_norm_identity_on_htype(self, h1, quat):
        rng = np.random.default_rng(8)
        for spec in (h1, quat):
            eta = rng.uniform(-1, 1, (1000, spec.n))
            xi = rng.uniform(-1, 1, (1000, spec.m))
            lhs = np.linalg.norm(bracket_adjoint(spec, eta, xi), axis=-1)
            rhs = np.linalg.norm(eta, axis=-1) * np.linalg.norm(xi, axis=-1)
            assert np.abs(lhs - rhs).max() < 1e-12

    def test_polarized_identity_on_htype(self, h1, quat):
        rng = np.random.default_rng(9)
        for spec in (h1, quat):
            eta, etap = rng.uniform(-1, 1, (2, 500, spec.n))
            xi = rng.uniform(-1, 1, (500, spec.m))
            lhs = np.einsum(
                "...i,...i->...",
                bracket_adjoint(spec, eta, xi),
                bracket_adjoint(spec, etap, xi),
            )
            rhs = np.einsum("...l,...l->...", eta, etap) * np.sum(xi**2, axis=-1)
            assert np.abs(lhs - rhs).max() < 1e-12


class TestHeisenbergType:
    def test_flags(self, h1, quat, free3):
        ok1, r1 = is_heisenberg_type(h1)
        ok2, r2 = is_heisenberg_type(quat)
        ok3, r3 = is_heisenberg_type(free3)
        assert ok1 and r1 == 0.0
        assert ok2 and r2 == 0.0
        assert not ok3 and r3 >= 1.0

    def test_free3_kernel(self, free3):
        # each vertical direction acts through only two of three generators
        J1 = bracket_adjoint_matrix(free3, np.array([1.0, 0.0, 0.0]))
        assert np.allclose(J1 @ np.array([0.0, 0.0, 1.0]), 0.0, atol=0)
