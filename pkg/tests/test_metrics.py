import math

import numpy as np
import pytest

from carnotkit import (
    BallSpec,
    ball_diameter_estimate,
    ball_volume,
    ball_volume_exact,
    dilate,
    dist_box,
    dist_gauge,
    equivalence_interval,
    multiply,
    theta_candidates,
    triangle_violation,
    unit_ball_volume,
)

GAUGE_BALL_VOLUME_H1 = math.pi**2 / 2  # 2*pi*int_0^1 2 s sqrt(1-s^4) ds, w = s^2


class TestDistances:
    def test_box_examples(self, h1):
        assert dist_box(h1, [3.0, 4.0, 0.0]) == 5.0
        assert dist_box(h1, [0.0, 0.0, 4.0]) == 1.0  # 0.5 * sqrt(4)

    def test_gauge_examples(self, h1):
        assert dist_gauge(h1, [1.0, 0.0, 0.0]) == 1.0
        assert dist_gauge(h1, [0.0, 0.0, 1.0]) == 1.0

    def test_identity_of_indiscernibles(self, h1):
        rng = np.random.default_rng(0)
        p = rng.uniform(-2, 2, (100, 3))
        assert np.all(dist_box(h1, p, p) == 0.0)
        assert np.all(dist_box(h1, p, np.roll(p, 1, axis=0)) > 0.0)

    def test_left_invariance_exact(self, all_specs):
        rng = np.random.default_rng(1)
        for spec in all_specs.values():
            p, q, z = rng.uniform(-2, 2, (3, 2000, spec.dim))
            for dist in (dist_box, dist_gauge):
                res = np.abs(
                    dist(spec, multiply(spec, z, p), multiply(spec, z, q)) - dist(spec, p, q)
                )
                assert res.max() < 1e-12

    def test_homogeneity(self, h1):
        rng = np.random.default_rng(2)
        p, q = rng.uniform(-2, 2, (2, 2000, 3))
        for r in (0.5, 2.0):
            res = np.abs(dist_box(h1, dilate(h1, r, p), dilate(h1, r, q)) - r * dist_box(h1, p, q))
            assert res.max() < 1e-12

    def test_triangle_inequality_sampled(self, all_specs):
        # recorded on built-in groups, not assumed: worst violation stays at noise level
        for name, spec in all_specs.items():
            for kind in ("box-d", "gauge"):
                worst = triangle_violation(spec, kind, samples=10**5, seed=3, scale=2.0)
                assert worst <= 1e-12, f"{name}/{kind}: violation {worst}"


class TestBalls:
    def test_box_volume_closed_form(self, h1):
        est = ball_volume(h1, BallSpec(np.zeros(3), 1.0, "box-d"))
        assert est.value == pytest.approx(8 * math.pi, rel=1e-14)
        assert est.error == 0.0

    def test_volume_scaling_r_pow_Q(self, h1):
        v1 = ball_volume_exact(h1, 1.0)
        v2 = ball_volume_exact(h1, 2.0)
        assert v2 == pytest.approx(2**h1.Q * v1, rel=1e-14)

    def test_sample_count_guard(self, h1):
        with pytest.raises(ValueError):
            ball_volume(h1, BallSpec(np.zeros(3), 1.0, "gauge"), samples=100)

    def test_gauge_volume_monte_carlo(self, h1):
        est = ball_volume(h1, BallSpec(np.zeros(3), 1.0, "gauge"), samples=10**6, seed=5)
        assert abs(est.value - GAUGE_BALL_VOLUME_H1) <= 3 * est.error
        assert len(est.trail) == 3
        # the running trail converges toward the final value
        assert abs(est.trail[-1][1] - est.value) == 0.0

    def test_gauge_volume_scaling(self, h1):
        r = 0.5
        est = ball_volume(h1, BallSpec(np.zeros(3), r, "gauge"), samples=2 * 10**5, seed=6)
        assert est.value == pytest.approx(r**h1.Q * GAUGE_BALL_VOLUME_H1, abs=4 * est.error)

    def test_diameter_approaches_2r(self, h1):
        for r in (1.0, 0.5):
            diam = ball_diameter_estimate(h1, BallSpec(np.zeros(3), r, "box-d"), samples=10**5, seed=7)
            assert diam <= 2.0 * r + 1e-12
            assert diam >= 2.0 * r * 0.99

    def test_ball_kind_validation(self):
        with pytest.raises(ValueError):
            BallSpec(np.zeros(3), 1.0, "euclidean")
        with pytest.raises(ValueError):
            BallSpec(np.zeros(3), -1.0)


class TestEquivalence:
    def test_interval_excludes_zero(self, h1):
        lo, hi = equivalence_interval(h1, samples=10**5, seed=8)
        assert 0.0 < lo < hi
        assert np.isfinite(hi)
        # d <= rho on the unit gauge sphere for this eps: interval inside (0, 1]
        assert hi <= 1.0 + 1e-12

    def test_theta_candidates_disagree(self, h1):
        # both candidate normalizations are recorded; they differ for eps < 1
        cands = theta_candidates(h1)
        omega3 = unit_ball_volume(3)
        assert cands["halfspace_area"] * omega3 == pytest.approx(4.0 / h1.eps**2, rel=1e-12)
        assert cands["product_formula"] * omega3 == pytest.approx(4.0 * h1.eps, rel=1e-12)
        assert cands["halfspace_area"] != pytest.approx(cands["product_formula"], rel=0.01)
