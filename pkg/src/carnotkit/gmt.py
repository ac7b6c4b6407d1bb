"""Pointwise measure-theoretic probes: densities, approximate limits,
traces and blow-up profiles.

All Monte Carlo paths draw from metric balls with seeds derived from a
root seed, and every estimator reports its per-radius trail so limits
are always read off a recorded sequence, never assumed.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .geometry import Domain, SurfacePatch, h_perimeter, horizontal_normal
from .groups import GroupSpec, multiply
from .hcalc import ScalarField
from .metrics import BallSpec, sample_ball
from .quad import MeasureEstimate

__all__ = [
    "DensityProfile",
    "ApproxLimits",
    "TraceResult",
    "BlowupProfile",
    "NormalAverageProfile",
    "default_radii",
    "density",
    "averaged_normal",
    "approx_limits",
    "zero_extension",
    "trace_at",
    "blowup_profile",
]

ZERO_DENSITY = 0.01


def default_radii(r0: float = 1.0, levels: int = 7) -> np.ndarray:
    """Geometric radius ladder r0 * 2^-k, k = 0..levels-1."""
    return r0 * 0.5 ** np.arange(levels)


def _check_radii(radii) -> np.ndarray:
    radii = np.asarray(radii, dtype=float)
    if radii.ndim != 1 or len(radii) < 1:
        raise ValueError("radii must be a non-empty 1d sequence")
    if np.any(radii <= 0) or np.any(np.diff(radii) >= 0):
        raise ValueError("radii must be positive and strictly decreasing")
    return radii


def _as_member(E) -> Callable[[np.ndarray], np.ndarray]:
    if isinstance(E, Domain):
        return E.member
    if callable(E):
        return lambda pts: np.asarray(E(pts), dtype=bool)
    raise TypeError("E must be a Domain or a membership predicate")


@dataclass(frozen=True)
class DensityProfile:
    """Volume-fraction estimates of a set in shrinking balls."""

    point: np.ndarray
    radii: np.ndarray
    values: np.ndarray
    stderrs: np.ndarray
    samples: int

    @property
    def extrapolated(self) -> float:
        return float(self.values[-1])


def density(
    spec: GroupSpec,
    E,
    x,
    radii=None,
    samples: int = 10**5,
    seed: int = 0,
    kind: str = "box-d",
) -> DensityProfile:
    """Monte Carlo density profile ``|E cap B(x, r)| / |B(x, r)|``.

    Balls are sampled uniformly (exactly for box balls, by rejection for
    gauge balls), so the density estimate is a plain acceptance fraction
    with binomial standard error.
    """
    if samples < 10**3:
        raise ValueError("need at least 1e3 samples per radius")
    radii = _check_radii(default_radii() if radii is None else radii)
    member = _as_member(E)
    x = np.asarray(x, dtype=float)
    seeds = np.random.SeedSequence(seed).spawn(len(radii))
    vals, errs = [], []
    for r, ss in zip(radii, seeds):
        pts = sample_ball(spec, BallSpec(x, float(r), kind), samples, np.random.default_rng(ss))
        inside = member(pts)
        p = float(np.mean(inside))
        vals.append(p)
        errs.append(float(np.sqrt(max(p * (1.0 - p), 0.0) / samples)))
    return DensityProfile(x, radii, np.array(vals), np.array(errs), samples)


@dataclass(frozen=True)
class NormalAverageProfile:
    """Norm of the perimeter-averaged inward normal per radius."""

    radii: np.ndarray
    norms: np.ndarray
    perimeters: np.ndarray

    @property
    def approaching_one(self) -> bool:
        n = self.norms
        return bool(np.all(np.diff(n) >= -1e-9) and n[-1] <= 1.0 + 1e-9)


def averaged_normal(
    spec: GroupSpec,
    patch,
    x,
    radii,
    order: int = 32,
    kind: str = "box-d",
) -> NormalAverageProfile:
    """Perimeter-weighted average of the inward normal over balls at ``x``.

    ``patch`` is either a domain-attached :class:`SurfacePatch` covering
    the largest ball or a callable ``r -> patch`` producing a patch sized
    to each radius (preferred for deep radius ladders, where a fixed
    quadrature grid would under-resolve small windows).  At reduced
    boundary points the reported norms increase to 1 as radii shrink.
    """
    radii = _check_radii(radii)
    x = np.asarray(x, dtype=float)
    factory = patch if callable(patch) else (lambda r: patch)
    from .geometry import as_window, perimeter_density
    from .hcalc import horizontal_gradient
    from .quad import tensor_rule

    norms, perims = [], []
    for r in radii:
        pc = factory(float(r))
        if pc.domain is None:
            raise ValueError("averaged_normal needs patches with an attached domain")
        horizontal_normal(spec, pc.domain, x)  # raises at characteristic points
        pts_w, wts = tensor_rule(pc.box, order)
        pts = pc.points(pts_w)
        dens = perimeter_density(spec, pts, pc.normals(pts_w)) * pc.area_element(pts_w)
        hg = horizontal_gradient(spec, pc.domain.phi, pts)
        # safe normalization: weights vanish where the window masks points out
        nu = -hg / np.maximum(np.linalg.norm(hg, axis=-1, keepdims=True), 1e-300)
        mask = as_window(spec, BallSpec(x, float(r), kind))(pts)
        w = wts * dens * mask
        tot = float(w.sum())
        vec = w @ nu
        norms.append(float(np.linalg.norm(vec) / tot) if tot > 0 else np.nan)
        perims.append(tot)
    return NormalAverageProfile(radii, np.array(norms), np.array(perims))


# ---------------------------------------------------------------------------
# approximate limits


@dataclass(frozen=True)
class ApproxLimits:
    """Upper and lower approximate limits with jump diagnostics.

    ``resolved`` is False when the finite-sample zero-density rule is not
    monotone across the threshold grid; the bracketing intervals are then
    the honest answer.
    """

    mu: float
    lam: float
    resolution: float
    mu_interval: tuple[float, float]
    lam_interval: tuple[float, float]
    resolved: bool
    jump_tol: float

    @property
    def U(self) -> float:
        return 0.5 * (self.mu + self.lam)

    @property
    def is_jump(self) -> bool:
        return (self.mu - self.lam) > self.jump_tol


def _density_zero(frac: np.ndarray) -> bool:
    """Finite-sample surrogate for vanishing density.

    The tail of the per-radius density sequence must sit inside the
    geometric envelope 0.01 * 2^k counted from the smallest radius, which
    forces smallness at the finest scales and is monotone under pointwise
    domination (unlike a literal pairwise-decrease test).
    """
    k = min(3, len(frac))
    return all(frac[-1 - i] < ZERO_DENSITY * 2**i for i in range(k))


def approx_limits(
    spec: GroupSpec,
    u,
    x,
    radii=None,
    samples: int = 10**5,
    seed: int = 0,
    kind: str = "box-d",
    grid: int = 256,
    resolution: float | None = None,
    jump_tol: float | None = None,
) -> ApproxLimits:
    """Approximate upper/lower limits of ``u`` at ``x`` from ball samples.

    For each radius the ball is sampled once and all superlevel/sublevel
    densities are read from the same draw, so density is exactly monotone
    in the threshold.  The upper limit is the infimum threshold whose
    superlevel densities pass the zero rule (bisected to ``resolution``,
    default 1e-3 of the sampled range); the lower limit is symmetric.
    """
    radii = _check_radii(default_radii() if radii is None else radii)
    uf = u if callable(u) else u.f
    x = np.asarray(x, dtype=float)
    seeds = np.random.SeedSequence(seed).spawn(len(radii))
    values = []
    for r, ss in zip(radii, seeds):
        pts = sample_ball(spec, BallSpec(x, float(r), kind), samples, np.random.default_rng(ss))
        values.append(np.asarray(uf(pts), dtype=float))
    lo = min(float(v.min()) for v in values)
    hi = max(float(v.max()) for v in values)
    rng_u = hi - lo
    pad = 0.05 * rng_u if rng_u > 0 else 0.5
    lo, hi = lo - pad, hi + pad
    res = resolution if resolution is not None else 1e-3 * max(hi - lo, 1e-12)
    jt = jump_tol if jump_tol is not None else 0.1 * max(hi - lo, 1e-12)

    def super_zero(t: float) -> bool:
        return _density_zero(np.array([np.mean(v > t) for v in values]))

    def sub_zero(t: float) -> bool:
        return _density_zero(np.array([np.mean(v < t) for v in values]))

    ts = np.linspace(lo, hi, grid)
    sup_flags = np.array([super_zero(t) for t in ts])
    sub_flags = np.array([sub_zero(t) for t in ts])
    resolved = True

    # mu: infimum of the terminal satisfied segment of sup_flags
    if sup_flags.all():
        mu, mu_iv = lo, (lo, lo)
    elif not sup_flags[-1]:
        mu, mu_iv, resolved = hi, (hi, hi), False
    else:
        last_false = int(np.max(np.nonzero(~sup_flags)))
        if sup_flags[:last_false].any():  # rule oscillates across the grid
            resolved = False
        a, b = ts[last_false], ts[last_false + 1]
        while b - a > res:
            mid = 0.5 * (a + b)
            if super_zero(mid):
                b = mid
            else:
                a = mid
        mu, mu_iv = b, (a, b)

    # lam: supremum of the initial satisfied segment of sub_flags
    if sub_flags.all():
        lam, lam_iv = hi, (hi, hi)
    elif not sub_flags[0]:
        lam, lam_iv, resolved = lo, (lo, lo), False
    else:
        first_false = int(np.min(np.nonzero(~sub_flags)))
        if sub_flags[first_false:].any():
            resolved = False
        a, b = ts[first_false - 1], ts[first_false]
        while b - a > res:
            mid = 0.5 * (a + b)
            if sub_zero(mid):
                a = mid
            else:
                b = mid
        lam, lam_iv = a, (a, b)

    if lam > mu:  # numerical crossing within resolution
        mid = 0.5 * (lam + mu)
        mu = lam = mid
    return ApproxLimits(float(mu), float(lam), res, mu_iv, lam_iv, resolved, jt)


def zero_extension(u, dom: Domain) -> ScalarField:
    """Extend ``u`` by zero outside the domain (evaluated lazily)."""
    uf = u if callable(u) else u.f

    def f(pts: np.ndarray) -> np.ndarray:
        inside = dom.member(pts)
        return np.where(inside, np.asarray(uf(pts), dtype=float), 0.0)

    return ScalarField(f)


@dataclass(frozen=True)
class TraceResult:
    """Boundary trace mu + lambda of the zero extension, with consistency."""

    point: np.ndarray
    limits: ApproxLimits
    value: float
    consistent: bool


def trace_at(
    spec: GroupSpec,
    u,
    dom: Domain,
    x,
    warn_tol: float = 0.05,
    **limit_kwargs,
) -> TraceResult:
    """Trace of ``u`` on the boundary: sum of the approximate limits of
    the zero extension.

    At non-characteristic boundary points one of the two limits must be
    approximately zero; ``consistent`` is False when both stay away from
    zero (suggesting the point is not on the reduced boundary or the
    radii do not resolve it).
    """
    u0 = zero_extension(u, dom)
    lim = approx_limits(spec, u0, x, **limit_kwargs)
    scale = max(abs(lim.mu), abs(lim.lam), 1.0)
    consistent = min(abs(lim.mu), abs(lim.lam)) <= warn_tol * scale
    return TraceResult(np.asarray(x, dtype=float), lim, lim.mu + lim.lam, consistent)


# ---------------------------------------------------------------------------
# blow-up profiles


@dataclass(frozen=True)
class BlowupProfile:
    """Per-radius blow-up diagnostics at a reduced-boundary point."""

    point: np.ndarray
    normal: np.ndarray
    radii: np.ndarray
    mismatch_minus: np.ndarray  # density of E on the minus half-space
    mismatch_plus: np.ndarray  # density of E^c on the plus half-space
    perimeter_ratios: np.ndarray | None
    mean_minus: np.ndarray | None  # p-mean of |u - mu| over the minus side
    mean_plus: np.ndarray | None  # p-mean of |u - lambda| over the plus side


def blowup_profile(
    spec: GroupSpec,
    dom: Domain,
    x,
    radii=None,
    samples: int = 10**5,
    seed: int = 0,
    patch_factory: Callable[[float], tuple[SurfacePatch, object]] | None = None,
    u=None,
    u_limits: tuple[float, float] | None = None,
    order: int = 32,
) -> BlowupProfile:
    """Blow-up behavior of a domain at a non-characteristic boundary point.

    Reports, per radius: the ball-volume fraction of the domain lying on
    the wrong side of its tangent horizontal half-space (and of the
    complement on the other side); optionally the perimeter growth ratio
    ``|bd E|_H(B(x, r)) / r^(Q-1)`` from a caller-supplied patch factory
    ``r -> (patch, window)``; and optionally gauge-ball means of
    ``|u - mu|^(Q/(Q-1))`` / ``|u - lambda|^(Q/(Q-1))`` on the two sides.
    """
    radii = _check_radii(default_radii() if radii is None else radii)
    x = np.asarray(x, dtype=float)
    nu = horizontal_normal(spec, dom, x)
    seeds = np.random.SeedSequence(seed).spawn(2 * len(radii))
    mm, mp = [], []
    for i, r in enumerate(radii):
        z = sample_ball(spec, BallSpec(np.zeros(spec.dim), float(r), "box-d"), samples,
                        np.random.default_rng(seeds[i]))
        zf, _ = spec.split(z)
        side = zf @ nu
        pts = multiply(spec, x, z)
        inside = dom.member(pts)
        mm.append(float(np.mean(inside & (side <= 0))))
        mp.append(float(np.mean(~inside & (side >= 0))))
    ratios = None
    if patch_factory is not None:
        ratios = []
        for r in radii:
            made = patch_factory(float(r))
            patch, window = made if isinstance(made, tuple) else (made, None)
            est = h_perimeter(spec, patch, window=window, order=order)
            ratios.append(est.value / float(r) ** (spec.Q - 1))
        ratios = np.array(ratios)
    mean_m = mean_p = None
    if u is not None:
        uf = u if callable(u) else u.f
        if u_limits is None:
            lim = approx_limits(spec, uf, x, radii=radii, samples=samples, seed=seed)
            u_limits = (lim.mu, lim.lam)
        mu, lam = u_limits
        ex = spec.Q / (spec.Q - 1)
        mean_m, mean_p = [], []
        for i, r in enumerate(radii):
            z = sample_ball(spec, BallSpec(np.zeros(spec.dim), float(r), "gauge"), samples,
                            np.random.default_rng(seeds[len(radii) + i]))
            zf, _ = spec.split(z)
            side = zf @ nu
            vals = np.asarray(uf(multiply(spec, x, z)), dtype=float)
            minus = side <= 0
            plus = side >= 0
            mean_m.append(float(np.mean(np.abs(vals[minus] - mu) ** ex)) if minus.any() else np.nan)
            mean_p.append(float(np.mean(np.abs(vals[plus] - lam) ** ex)) if plus.any() else np.nan)
        mean_m, mean_p = np.array(mean_m), np.array(mean_p)
    return BlowupProfile(x, nu, radii, np.array(mm), np.array(mp), ratios, mean_m, mean_p)
