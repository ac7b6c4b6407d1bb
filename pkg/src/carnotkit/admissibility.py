"""Boundary-versus-interior perimeter experiments.

The central quantity is the ratio of the H-perimeter a small set carries
on the boundary of a domain to the H-perimeter it carries inside; a
domain admits a zero-extension bound exactly when this ratio stays
bounded over all admissible sets near every boundary point.  The module
measures such ratios for cap families over rotationally symmetric
profiles ``t = 1 - s^(2-e)``, runs the flattened-cap divergence sweep,
and evaluates the partial-symmetry and non-characteristic bounds.

All spherical-measure normalization constants cancel in every ratio
reported here, so none is ever applied.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import (
    Domain,
    SurfacePatch,
    disk_patch,
    h_perimeter,
    horizontal_normal,
    revolution_graph_patch,
)
from .groups import GroupSpec
from .hcalc import ScalarField
from .quad import MeasureEstimate, integrate

__all__ = [
    "RatioResult",
    "admissibility_ratio",
    "cap_domain",
    "cap_patches",
    "f_integral",
    "SweepRow",
    "SweepResult",
    "counterexample_sweep",
    "SymmetryBoundReport",
    "partial_symmetry_bound",
    "NonCharacteristicReport",
    "noncharacteristic_bound",
]


# ---------------------------------------------------------------------------
# perimeter ratios


@dataclass(frozen=True)
class RatioResult:
    """Boundary-to-interior perimeter ratio with both measurements."""

    numerator: MeasureEstimate
    denominator: MeasureEstimate
    ratio: float

    @property
    def infinite(self) -> bool:
        return not math.isfinite(self.ratio)


def admissibility_ratio(
    spec: GroupSpec,
    boundary_patch: SurfacePatch,
    interior_patch: SurfacePatch,
    window=None,
    order: int = 16,
    rtol: float = 1e-9,
) -> RatioResult:
    """Ratio of boundary-carried to interior-carried H-perimeter.

    ``boundary_patch`` parameterizes the part of the test set's boundary
    lying on the domain wall, ``interior_patch`` the part inside the
    domain.  A vanishing denominator yields an infinite ratio.
    """
    num = h_perimeter(spec, boundary_patch, window=window, order=order, rtol=rtol)
    den = h_perimeter(spec, interior_patch, window=window, order=order, rtol=rtol)
    ratio = num.value / den.value if den.value > 0 else math.inf
    return RatioResult(num, den, ratio)


def cap_domain(spec: GroupSpec, profile_eps: float) -> Domain:
    """Rotationally symmetric domain ``{t < 1 - s^(2-e)}`` (m = 2, n = 1).

    For ``e > 0`` the wall is C^(1, 1-e) but not C^(1,1) at the pole
    (0, 0, 1); ``e = 0`` gives the round paraboloid cap.
    """
    if not (spec.m == 2 and spec.n == 1):
        raise ValueError("cap domains require m=2, n=1 coordinates")
    if not (0.0 <= profile_eps < 1.0):
        raise ValueError("profile exponent parameter must lie in [0, 1)")
    pw = 2.0 - profile_eps

    def f(p):
        s = np.hypot(p[..., 0], p[..., 1])
        return p[..., 2] + s**pw - 1.0

    def egrad(p):
        s = np.hypot(p[..., 0], p[..., 1])
        fac = np.where(s > 0.0, pw * s ** (pw - 2.0), 0.0)
        g = np.empty(p.shape)
        g[..., 0] = fac * p[..., 0]
        g[..., 1] = fac * p[..., 1]
        g[..., 2] = 1.0
        return g

    bbox = [[-1.5, 1.5], [-1.5, 1.5], [-1.0, 1.5]]
    return Domain(ScalarField(f, egrad), bbox)


def cap_patches(
    spec: GroupSpec, profile_eps: float, N: float
) -> tuple[SurfacePatch, SurfacePatch]:
    """Boundary pieces of the cap set ``{t > 1 - 1/N}`` inside the domain.

    Returns the wall piece (on the domain boundary, above the cut) and
    the flat interior piece (the disk at the cut level); both extend to
    horizontal radius ``N^(-1/(2-e))`` where the cut meets the wall.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    pw = 2.0 - profile_eps
    R = float(N) ** (-1.0 / pw)
    dom = cap_domain(spec, profile_eps)
    wall = revolution_graph_patch(
        spec,
        lambda r: 1.0 - r**pw,
        lambda r: -pw * np.where(r > 0, r ** (pw - 1.0), 0.0),
        R,
        domain=dom,
        graded=True,
    )
    cut = disk_patch(spec, 1.0 - 1.0 / float(N), R)
    return wall, cut


# ---------------------------------------------------------------------------
# flattened-cap sweep


def f_integral(profile_eps: float, x: float, rtol: float = 1e-10) -> float:
    """Scale-free side-wall integral of the cap family.

    ``F(x) = x^(-3/(2-e)) * int_0^(x^(1/(2-e))) r sqrt((2-e)^2 r^(2-2e)
    + r^2/4) dr``; after substituting out the scale it becomes an
    integral over [0, 1], evaluated with a squared (graded) variable to
    absorb the Hoelder behavior at zero.  ``F`` is constant sqrt(17)/6
    at e = 0 and grows like ``x^(-e/(2-e))`` as x -> 0.
    """
    if not (0.0 <= profile_eps < 1.0):
        raise ValueError("profile exponent parameter must lie in [0, 1)")
    if x <= 0.0:
        raise ValueError("x must be positive")
    pw = 2.0 - profile_eps
    c = pw**2 * x ** (-2.0 * profile_eps / pw)

    def integrand(v: np.ndarray) -> np.ndarray:
        v = v[..., 0]
        u = v**2
        return 2.0 * v * u * np.sqrt(c * u ** (2.0 - 2.0 * profile_eps) + u**2 / 4.0)

    return integrate(integrand, [[0.0, 1.0]], order=32, rtol=rtol, max_order=4096).value


@dataclass(frozen=True)
class SweepRow:
    eps: float
    N: float
    perim_top: float  # cut disk, interior to the domain
    perim_side: float  # domain wall above the cut
    ratio: float
    F: float
    closed_form: float
    rel_err: float


@dataclass(frozen=True)
class SweepResult:
    rows: tuple[SweepRow, ...]

    def for_eps(self, eps: float) -> list[SweepRow]:
        return [r for r in self.rows if r.eps == eps]

    def slope(self, eps: float) -> float:
        """Fitted log-log slope of F against N for one profile exponent."""
        rows = self.for_eps(eps)
        if len(rows) < 2:
            raise ValueError("need at least two N values to fit a slope")
        x = np.log([r.N for r in rows])
        y = np.log([r.F for r in rows])
        return float(np.polyfit(x, y, 1)[0])


def counterexample_sweep(eps_list, N_list, rtol: float = 1e-10) -> SweepResult:
    """Cap-family perimeter table over profile exponents and cut levels.

    Per cell: the interior disk perimeter by radial quadrature against
    its closed form ``(pi/3) N^(-3/(2-e))``, the wall perimeter via the
    scale-free integral, their ratio (equal to ``6 F``), and ``F``
    itself.  The ratio diverging along N is the failure of the
    boundedness condition for e > 0.
    """
    rows = []
    for eps in eps_list:
        eps = float(eps)
        if not (0.0 <= eps < 1.0):
            raise ValueError("profile exponents must lie in [0, 1)")
        pw = 2.0 - eps
        for N in N_list:
            N = float(N)
            if N < 1:
                raise ValueError("N must be >= 1")
            x = 1.0 / N
            R = x ** (1.0 / pw)
            # interior disk: integrand r^2/2 in the radius, angle integrated out
            disk = integrate(
                lambda v: (R * v[..., 0]) ** 2 / 2.0 * R, [[0.0, 1.0]], order=16, rtol=rtol
            ).value * (2.0 * math.pi)
            F = f_integral(eps, x, rtol=rtol)
            side = 2.0 * math.pi * x ** (3.0 / pw) * F
            closed = math.pi / 3.0 * x ** (3.0 / pw)
            rows.append(
                SweepRow(
                    eps=eps,
                    N=N,
                    perim_top=disk,
                    perim_side=side,
                    ratio=side / disk,
                    F=F,
                    closed_form=closed,
                    rel_err=abs(disk - closed) / closed,
                )
            )
    return SweepResult(tuple(rows))


# ---------------------------------------------------------------------------
# partial symmetry


@dataclass(frozen=True)
class SymmetryBoundReport:
    """Partial-symmetry constants of a boundary profile near its pole.

    ``M`` is the supremum of ``|dg/ds| / s``, ``L`` the supremum of
    ``1 + |dg/dy|^2`` and ``bound = sqrt(M^2 + L/4)``.  ``satisfied`` is
    False when the quotient diverges as s -> 0 (detected from the fitted
    slope of its log against log s), which is the counterexample regime.
    """

    M: float
    L: float
    bound: float
    satisfied: bool
    quotient_slope: float
    s_grid: np.ndarray
    quotients: np.ndarray


def partial_symmetry_bound(
    spec: GroupSpec,
    dg_ds,
    dg_dy=None,
    s_range=(1e-4, 1.0),
    y_box=None,
    s_points: int = 33,
    y_points: int = 9,
    diverge_slope: float = -0.05,
) -> SymmetryBoundReport:
    """Measure the partial-symmetry constants of a profile ``y_n = -g(s, y)``.

    ``dg_ds(s, y)`` and optionally ``dg_dy(s, y) -> (..., n-1)`` are the
    profile partials after translating the characteristic point to the
    identity.  The s-quotient is probed on a log grid down to the lower
    end of ``s_range``; a systematically increasing quotient as s -> 0
    fails the verdict (no finite M exists).
    """
    s = np.geomspace(s_range[0], s_range[1], s_points)
    if y_box is None or spec.n == 1:
        ys = np.zeros((1, max(spec.n - 1, 0)))
    else:
        y_box = np.asarray(y_box, dtype=float)
        axes = [np.linspace(a, b, y_points) for a, b in y_box]
        mesh = np.meshgrid(*axes, indexing="ij")
        ys = np.stack([g.reshape(-1) for g in mesh], axis=-1)
    quot = np.empty((len(s), len(ys)))
    lsum = np.empty((len(s), len(ys)))
    for j, y in enumerate(ys):
        gs = np.abs(np.asarray(dg_ds(s, y), dtype=float))
        quot[:, j] = gs / s
        if dg_dy is None:
            lsum[:, j] = 1.0
        else:
            gy = np.asarray(dg_dy(s, y), dtype=float)
            lsum[:, j] = 1.0 + np.sum(np.atleast_2d(gy) ** 2, axis=-1)
    qmax = quot.max(axis=1)
    # slope of the quotient against s near zero, over the lower half grid
    half = max(len(s) // 2, 2)
    with np.errstate(divide="ignore"):
        logs = np.log(s[:half])
        logq = np.log(np.maximum(qmax[:half], 1e-300))
    slope = float(np.polyfit(logs, logq, 1)[0])
    diverging = slope < diverge_slope
    M = math.inf if diverging else float(qmax.max())
    L = float(lsum.max())
    bound = math.inf if diverging else math.sqrt(M**2 + L / 4.0)
    return SymmetryBoundReport(M, L, bound, not diverging, slope, s, qmax)


# ---------------------------------------------------------------------------
# non-characteristic bound


@dataclass(frozen=True)
class NonCharacteristicReport:
    """Lower bound on the largest normal component over a boundary patch."""

    K: float
    location: np.ndarray
    ratio_bound: float


def noncharacteristic_bound(
    spec: GroupSpec, dom: Domain, patch: SurfacePatch, resolution: int = 64
) -> NonCharacteristicReport:
    """Infimum over the patch of the best horizontal normal component.

    ``K = inf_p max_i |nu_i(p)|`` over a midpoint grid; characteristic
    points in the patch raise.  The reciprocal bounds the boundary
    perimeter ratio on non-characteristic patches.
    """
    axes = [(np.arange(resolution) + 0.5) / resolution * (b - a) + a for a, b in patch.box]
    mesh = np.meshgrid(*axes, indexing="ij")
    u = np.stack([g.reshape(-1) for g in mesh], axis=-1)
    pts = patch.points(u)
    nu = horizontal_normal(spec, dom, pts)  # raises at characteristic samples
    comp = np.abs(nu).max(axis=-1)
    i = int(np.argmin(comp))
    K = float(comp[i])
    return NonCharacteristicReport(K, pts[i], 1.0 / K)
