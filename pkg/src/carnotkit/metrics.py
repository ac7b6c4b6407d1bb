"""Homogeneous distances, balls, volumes and sampling.

Two equivalent left-invariant distances are provided: the box distance
``max(|first|, eps * |second|^(1/2))`` and the quartic gauge
``(|first|^4 + |second|^2)^(1/4)``.  Box balls are products of two
Euclidean balls, so they admit closed-form volumes and direct uniform
sampling; gauge balls are sampled by rejection from their bounding box
ball.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .groups import GroupSpec, inverse, multiply
from .quad import MeasureEstimate

__all__ = [
    "BallSpec",
    "box_norm",
    "gauge_norm",
    "dist_box",
    "dist_gauge",
    "unit_ball_volume",
    "ball_volume_exact",
    "ball_volume",
    "sample_ball",
    "ball_diameter_estimate",
    "equivalence_interval",
    "theta_candidates",
    "triangle_violation",
]

BALL_KINDS = ("box-d", "gauge")


@dataclass(frozen=True)
class BallSpec:
    """A metric ball: center point, radius and which distance to use."""

    center: np.ndarray
    radius: float
    kind: str = "box-d"

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))
        if self.radius <= 0:
            raise ValueError("radius must be positive")
        if self.kind not in BALL_KINDS:
            raise ValueError(f"kind must be one of {BALL_KINDS}")


def box_norm(spec: GroupSpec, p) -> np.ndarray:
    """Homogeneous box norm of a point (distance to the identity)."""
    pf, ps = spec.split(p)
    return np.maximum(
        np.linalg.norm(pf, axis=-1),
        spec.eps * np.sqrt(np.linalg.norm(ps, axis=-1)),
    )


def gauge_norm(spec: GroupSpec, p) -> np.ndarray:
    """Quartic gauge norm of a point."""
    pf, ps = spec.split(p)
    sq = np.sum(pf**2, axis=-1)
    return (sq**2 + np.sum(ps**2, axis=-1)) ** 0.25


def dist_box(spec: GroupSpec, p, q=None) -> np.ndarray:
    """Left-invariant box distance; ``q`` defaults to the identity."""
    if q is None:
        return box_norm(spec, p)
    return box_norm(spec, multiply(spec, inverse(spec, q), p))


def dist_gauge(spec: GroupSpec, p, q=None) -> np.ndarray:
    """Left-invariant gauge distance; ``q`` defaults to the identity."""
    if q is None:
        return gauge_norm(spec, p)
    return gauge_norm(spec, multiply(spec, inverse(spec, q), p))


def _dist(spec: GroupSpec, kind: str, p, q=None) -> np.ndarray:
    return dist_box(spec, p, q) if kind == "box-d" else dist_gauge(spec, p, q)


def unit_ball_volume(k: int) -> float:
    """Lebesgue volume of the Euclidean unit ball in R^k."""
    return math.pi ** (k / 2) / math.gamma(k / 2 + 1)


def ball_volume_exact(spec: GroupSpec, radius: float) -> float:
    """Closed-form volume of a box ball.

    The ball is the product of a horizontal ball of radius r and a
    vertical ball of radius (r/eps)^2, hence
    ``omega_m * omega_n * eps^(-2n) * r^Q``.
    """
    return (
        unit_ball_volume(spec.m)
        * unit_ball_volume(spec.n)
        * spec.eps ** (-2 * spec.n)
        * radius**spec.Q
    )


def _sample_euclidean_ball(rng: np.random.Generator, k: int, radius: float, size: int) -> np.ndarray:
    """Uniform points in a Euclidean k-ball (direction x radial inverse cdf)."""
    x = rng.standard_normal((size, k))
    x /= np.linalg.norm(x, axis=-1, keepdims=True)
    r = radius * rng.random(size) ** (1.0 / k)
    return x * r[:, None]


def sample_ball(spec: GroupSpec, ball: BallSpec, size: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform samples in a metric ball.

    Box balls are sampled exactly; gauge balls by rejection from the
    product of their bounding horizontal/vertical balls (acceptance is
    dimension-dependent but bounded away from zero).
    """
    r = ball.radius
    if ball.kind == "box-d":
        first = _sample_euclidean_ball(rng, spec.m, r, size)
        second = _sample_euclidean_ball(rng, spec.n, (r / spec.eps) ** 2, size)
        pts = np.concatenate([first, second], axis=-1)
    else:
        chunks = []
        have = 0
        while have < size:
            want = max(size - have, 1024)
            first = _sample_euclidean_ball(rng, spec.m, r, want)
            second = _sample_euclidean_ball(rng, spec.n, r**2, want)
            cand = np.concatenate([first, second], axis=-1)
            keep = cand[gauge_norm(spec, cand) < r]
            chunks.append(keep)
            have += len(keep)
        pts = np.concatenate(chunks, axis=0)[:size]
    if np.any(ball.center != 0.0):
        pts = multiply(spec, ball.center, pts)
    return pts


def _bounding_product_volume(spec: GroupSpec, ball: BallSpec) -> float:
    r = ball.radius
    if ball.kind == "box-d":
        return ball_volume_exact(spec, r)
    return unit_ball_volume(spec.m) * r**spec.m * unit_ball_volume(spec.n) * r ** (2 * spec.n)


def ball_volume(
    spec: GroupSpec,
    ball: BallSpec,
    samples: int = 10**6,
    seed: int = 0,
) -> MeasureEstimate:
    """Lebesgue volume of a metric ball.

    Box balls use the closed form (zero error).  Gauge balls are measured
    by Monte Carlo rejection against the bounding product ball; the trail
    records the running estimate at quarter, half and full sample count.
    """
    if samples < 10**3:
        raise ValueError("need at least 1e3 samples")
    if ball.kind == "box-d":
        v = ball_volume_exact(spec, ball.radius)
        return MeasureEstimate(v, 0.0, 0, ((0, v),))
    rng = np.random.default_rng(seed)
    r = ball.radius
    bound_vol = _bounding_product_volume(spec, ball)
    first = _sample_euclidean_ball(rng, spec.m, r, samples)
    second = _sample_euclidean_ball(rng, spec.n, r**2, samples)
    inside = gauge_norm(spec, np.concatenate([first, second], axis=-1)) < r
    trail = []
    for frac in (samples // 4, samples // 2, samples):
        p = inside[:frac].mean()
        trail.append((frac, bound_vol * float(p)))
    p = inside.mean()
    stderr = bound_vol * math.sqrt(p * (1.0 - p) / samples)
    return MeasureEstimate(bound_vol * float(p), stderr, samples, tuple(trail))


def ball_diameter_estimate(
    spec: GroupSpec, ball: BallSpec, samples: int = 10**5, seed: int = 0, extremes: int = 256
) -> float:
    """Sampled diameter sup d(p, q) over pairs in the ball.

    Random pairs rarely come close to antipodal, so the estimate also
    checks all pairs among the points of largest horizontal norm.
    """
    rng = np.random.default_rng(seed)
    pts = sample_ball(spec, ball, samples, rng)
    half = samples // 2
    d = _dist(spec, ball.kind, pts[:half], pts[half : 2 * half])
    best = float(d.max())
    pf, _ = spec.split(pts)
    idx = np.argsort(np.linalg.norm(pf, axis=-1))[-extremes:]
    ext = pts[idx]
    pairwise = _dist(spec, ball.kind, ext[:, None, :], ext[None, :, :])
    return max(best, float(pairwise.max()))


def equivalence_interval(
    spec: GroupSpec, samples: int = 10**5, seed: int = 0, scale: float = 1.0
) -> tuple[float, float]:
    """Sampled range of d/rho over points of unit gauge norm."""
    rng = np.random.default_rng(seed)
    raw = rng.standard_normal((samples, spec.dim)) * scale
    rho = gauge_norm(spec, raw)
    raw = raw[rho > 1e-12]
    lam = 1.0 / gauge_norm(spec, raw)
    pf, ps = spec.split(raw)
    unit = np.concatenate([lam[:, None] * pf, lam[:, None] ** 2 * ps], axis=-1)
    ratio = box_norm(spec, unit)
    return float(ratio.min()), float(ratio.max())


def triangle_violation(
    spec: GroupSpec, kind: str = "box-d", samples: int = 10**5, seed: int = 0, scale: float = 1.0
) -> float:
    """Worst sampled violation of the triangle inequality (<=0 means none)."""
    rng = np.random.default_rng(seed)
    x, y, z = rng.standard_normal((3, samples, spec.dim)) * scale
    lhs = _dist(spec, kind, x, z)
    rhs = _dist(spec, kind, x, y) + _dist(spec, kind, y, z)
    return float((lhs - rhs).max())


def theta_candidates(spec: GroupSpec) -> dict[str, float]:
    """Both candidate normalizations of the spherical-measure density.

    ``product_formula`` follows the printed closed form
    ``omega_{m-1} omega_n eps^n / omega_{Q-1}``; ``halfspace_area`` is the
    Euclidean area of the vertical hyperplane inside the unit box ball,
    divided by the same omega_{Q-1}.  They disagree for eps != 1; all
    admissibility ratios are independent of either choice.
    """
    om = unit_ball_volume
    denom = om(spec.Q - 1)
    product_formula = om(spec.m - 1) * om(spec.n) * spec.eps**spec.n / denom
    halfspace_area = om(spec.m - 1) * om(spec.n) * spec.eps ** (-2 * spec.n) / denom
    return {"product_formula": product_formula, "halfspace_area": halfspace_area}
