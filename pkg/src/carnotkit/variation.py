"""Horizontal variation functionals and their consistency checks.

The smooth route integrates ``|grad_H u|`` over a curvilinear volume
region; the variational route maximizes ``int u div_H phi`` over a
dictionary of compactly supported horizontal test fields with sup norm
at most one, which bounds the smooth value from below.  Coarea,
Poincare/isoperimetric ratios and the divergence-theorem residual tie
the volume and surface machinery together.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .geometry import Domain, SurfacePatch, as_window, h_perimeter, perimeter_density
from .groups import GroupSpec, multiply
from .hcalc import HorizontalSection, ScalarField, frame_pairing
from .metrics import BallSpec, ball_volume, sample_ball
from .quad import MeasureEstimate, gauss_legendre, integrate, tensor_rule

__all__ = [
    "VolumeRegion",
    "box_region",
    "cylinder_region",
    "gauge_ball_region",
    "volume_integrate",
    "PlateauBump",
    "dictionary_section",
    "VariationReport",
    "var_h",
    "CoareaReport",
    "coarea_check",
    "PiReport",
    "pi_report",
    "GaussGreenReport",
    "gauss_green_residual",
]


# ---------------------------------------------------------------------------
# volume regions


@dataclass(frozen=True)
class VolumeRegion:
    """Curvilinear chart of a solid region with its volume density.

    ``chart`` maps an (..., k) parameter array into points, ``jacobian``
    gives the absolute Jacobian determinant including all coordinate
    weights; ``bounds`` is a coordinate bounding box of the image.
    """

    box: np.ndarray
    chart: Callable[[np.ndarray], np.ndarray]
    jacobian: Callable[[np.ndarray], np.ndarray]
    bounds: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "box", np.asarray(self.box, dtype=float))
        object.__setattr__(self, "bounds", np.asarray(self.bounds, dtype=float))


def box_region(box) -> VolumeRegion:
    box = np.asarray(box, dtype=float)
    return VolumeRegion(box, lambda u: u, lambda u: np.ones(u.shape[:-1]), box)


def cylinder_region(spec: GroupSpec, radius: float, t_range) -> VolumeRegion:
    """Solid round cylinder ``{|xi| < radius} x t_range`` (m = 2, n = 1)."""
    _require_3d(spec)
    t0, t1 = map(float, t_range)

    def chart(u):
        v, th, t = u[..., 0], u[..., 1], u[..., 2]
        r = radius * v
        return np.stack([r * np.cos(th), r * np.sin(th), t], axis=-1)

    def jacobian(u):
        return radius**2 * u[..., 0]

    box = [[0.0, 1.0], [0.0, 2.0 * np.pi], [t0, t1]]
    bounds = [[-radius, radius], [-radius, radius], [t0, t1]]
    return VolumeRegion(box, chart, jacobian, bounds)


def gauge_ball_region(spec: GroupSpec, center, radius: float) -> VolumeRegion:
    """Solid gauge ball of a given radius, centered by group translation
    (m = 2, n = 1)."""
    _require_3d(spec)
    center = np.asarray(center, dtype=float)
    r = float(radius)

    def chart(u):
        a, th, w = u[..., 0], u[..., 1], u[..., 2]
        s = r * a
        t = r**2 * np.sqrt(np.maximum(1.0 - a**4, 0.0)) * w
        pts = np.stack([s * np.cos(th), s * np.sin(th), t], axis=-1)
        if np.any(center != 0.0):
            pts = multiply(spec, center, pts)  # volume preserving
        return pts

    def jacobian(u):
        a = u[..., 0]
        return r**4 * a * np.sqrt(np.maximum(1.0 - a**4, 0.0))

    box = [[0.0, 1.0], [0.0, 2.0 * np.pi], [-1.0, 1.0]]
    lo = multiply(spec, center, -np.array([r, r, r**2]))
    hi = multiply(spec, center, np.array([r, r, r**2]))
    bounds = np.stack([np.minimum(lo, hi) - r**2, np.maximum(lo, hi) + r**2], axis=-1)
    return VolumeRegion(box, chart, jacobian, bounds)


def volume_integrate(
    f: Callable[[np.ndarray], np.ndarray],
    region: VolumeRegion,
    order: int = 16,
    rtol: float = 1e-8,
    max_order: int = 256,
) -> MeasureEstimate:
    """Integrate a pointwise function of position over a region."""

    def integrand(u: np.ndarray) -> np.ndarray:
        return np.asarray(f(region.chart(u)), dtype=float) * region.jacobian(u)

    return integrate(integrand, region.box, order=order, rtol=rtol, max_order=max_order)


def _require_3d(spec: GroupSpec) -> None:
    if not (spec.m == 2 and spec.n == 1):
        raise ValueError("this built-in region requires m=2, n=1 coordinates")


# ---------------------------------------------------------------------------
# test-field dictionary


@dataclass(frozen=True)
class PlateauBump:
    """C^1 box bump: 1 on the inner plateau, smoothstep ramps to 0 at the
    box faces.  Wide plateaus let dictionary fields certify most of a
    surface measure through the divergence pairing."""

    box: np.ndarray
    plateau: float = 0.9

    def __post_init__(self):
        object.__setattr__(self, "box", np.asarray(self.box, dtype=float))
        if not 0.0 < self.plateau < 1.0:
            raise ValueError("plateau must be in (0, 1)")

    def _axis(self, x: np.ndarray, a: float, b: float) -> tuple[np.ndarray, np.ndarray]:
        xi = (2.0 * x - (a + b)) / (b - a)  # [-1, 1] across the box
        w = 1.0 - self.plateau
        y = np.clip((1.0 - np.abs(xi)) / w, 0.0, 1.0)
        val = y * y * (3.0 - 2.0 * y)
        dval = 6.0 * y * (1.0 - y) * (-np.sign(xi) / w) * (2.0 / (b - a))
        dval = np.where((y <= 0.0) | (y >= 1.0), 0.0, dval)
        return val, dval

    def value_and_grad(self, p: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        p = np.asarray(p, dtype=float)
        vals, dvals = [], []
        for k, (a, b) in enumerate(self.box):
            v, dv = self._axis(p[..., k], float(a), float(b))
            vals.append(v)
            dvals.append(dv)
        total = np.prod(np.stack(vals, axis=-1), axis=-1)
        grad = np.empty(p.shape)
        for k in range(len(self.box)):
            others = np.prod(
                np.stack([vals[j] for j in range(len(self.box)) if j != k], axis=-1), axis=-1
            ) if len(self.box) > 1 else 1.0
            grad[..., k] = dvals[k] * others
        return total, grad

    def __call__(self, p: np.ndarray) -> np.ndarray:
        return self.value_and_grad(p)[0]


def _monomial_basis(dim: int, degree: int = 2):
    """Coordinate monomials up to the given total degree, as exponent tuples."""
    exps = [tuple([0] * dim)]
    for k in range(dim):
        e = [0] * dim
        e[k] = 1
        exps.append(tuple(e))
    if degree >= 2:
        for k in range(dim):
            for j in range(k, dim):
                e = [0] * dim
                e[k] += 1
                e[j] += 1
                exps.append(tuple(e))
    return exps


def _monomial_values(p: np.ndarray, exps) -> np.ndarray:
    out = np.empty(p.shape[:-1] + (len(exps),))
    for q, e in enumerate(exps):
        v = np.ones(p.shape[:-1])
        for k, ek in enumerate(e):
            if ek:
                v = v * p[..., k] ** ek
        out[..., q] = v
    return out


def _monomial_grads(p: np.ndarray, exps) -> np.ndarray:
    dim = p.shape[-1]
    out = np.zeros(p.shape[:-1] + (len(exps), dim))
    for q, e in enumerate(exps):
        for k, ek in enumerate(e):
            if ek:
                v = np.full(p.shape[:-1], float(ek))
                for j, ej in enumerate(e):
                    pw = ej - (1 if j == k else 0)
                    if pw:
                        v = v * p[..., j] ** pw
                out[..., q, k] = v
    return out


def dictionary_section(
    spec: GroupSpec, coeff: np.ndarray, bump: PlateauBump, exps
) -> HorizontalSection:
    """Assemble the horizontal test field ``sum_q coeff[i, q] m_q(p) B(p)``."""
    coeff = np.asarray(coeff, dtype=float)

    def f(p: np.ndarray) -> np.ndarray:
        B, _ = bump.value_and_grad(p)
        mono = _monomial_values(p, exps)
        return np.einsum("iq,...q->...i", coeff, mono) * B[..., None]

    def jac(p: np.ndarray) -> np.ndarray:
        B, dB = bump.value_and_grad(p)
        mono = _monomial_values(p, exps)
        dmono = _monomial_grads(p, exps)
        comp = np.einsum("iq,...q->...i", coeff, mono)
        dcomp = np.einsum("iq,...qk->...ik", coeff, dmono)
        return dcomp * B[..., None, None] + comp[..., :, None] * dB[..., None, :]

    return HorizontalSection(f=f, jac=jac, support=bump.box)


# ---------------------------------------------------------------------------
# variation


@dataclass(frozen=True)
class VariationReport:
    """Value of the horizontal variation with its provenance."""

    value: float
    method: str
    error: float
    witness: dict | None = None


def var_h(
    spec: GroupSpec,
    u: ScalarField,
    region: VolumeRegion,
    method: str = "smooth",
    order: int = 16,
    rtol: float = 1e-8,
    field_box=None,
    plateau: float = 0.94,
    degree: int = 2,
    sweeps: int = 3,
    probe: int = 17,
) -> VariationReport:
    """Horizontal variation of ``u`` over a region.

    ``smooth`` integrates ``|grad_H u|`` (valid for C^1 data; the field
    must supply or tolerate gradients).  ``sup`` maximizes the divergence
    pairing over monomial-times-bump fields clamped to unit sup norm; the
    result is a certified lower bound up to quadrature error.
    """
    if method == "smooth":

        def integrand(pts: np.ndarray) -> np.ndarray:
            hg = frame_pairing(spec, pts, u.grad(pts))
            return np.linalg.norm(hg, axis=-1)

        est = volume_integrate(integrand, region, order=order, rtol=rtol)
        return VariationReport(est.value, "smooth-integral", est.error)
    if method != "sup":
        raise ValueError("method must be 'smooth' or 'sup'")

    box = np.asarray(field_box if field_box is not None else region.bounds, dtype=float)
    bump = PlateauBump(box, plateau)
    exps = _monomial_basis(spec.dim, degree)
    nb = len(exps)

    # the raw pairing is linear in the coefficients: precompute its basis vector
    uf = u if callable(u) else u.f

    def basis_pairings(order_: int) -> np.ndarray:
        pts_w, wts = tensor_rule(region.box, order_)
        pts = region.chart(pts_w)
        jac = region.jacobian(pts_w)
        uv = np.asarray(uf(pts), dtype=float) * jac * wts
        B, dB = bump.value_and_grad(pts)
        mono = _monomial_values(pts, exps)
        dmono = _monomial_grads(pts, exps)
        # d(m_q B)/dx_k paired against the frame rows
        g = np.empty((spec.m, nb))
        grad_qk = dmono * B[..., None, None] + mono[..., :, None] * dB[..., None, :]
        for q in range(nb):
            paired = frame_pairing(spec, pts, grad_qk[..., q, :])  # (..., m)
            g[:, q] = paired.T @ uv
        return g

    g = basis_pairings(order)
    g2 = basis_pairings(2 * order)
    quad_err = float(np.abs(g2 - g).max())
    g = g2

    # probe grid for the sup-norm normalization
    axes = [np.linspace(a, b, probe) for a, b in box]
    mesh = np.meshgrid(*axes, indexing="ij")
    probe_pts = np.stack([mm.reshape(-1) for mm in mesh], axis=-1)
    Bp = bump(probe_pts)
    monop = _monomial_values(probe_pts, exps)

    def objective(c: np.ndarray) -> float:
        comp = np.einsum("iq,pq->pi", c, monop) * Bp[:, None]
        sup = float(np.linalg.norm(comp, axis=-1).max())
        if sup <= 0.0:
            return 0.0
        return float(np.sum(c * g)) / sup

    c = g.copy()
    if not np.any(c):
        return VariationReport(0.0, "sup-dictionary", quad_err, {"coefficients": c, "exponents": exps})
    best = objective(c)
    step = 0.5 * float(np.abs(c).max())
    for _ in range(sweeps):
        for i in range(spec.m):
            for q in range(nb):
                for s in (+step, -step):
                    trial = c.copy()
                    trial[i, q] += s
                    val = objective(trial)
                    if val > best:
                        best, c = val, trial
        step *= 0.5
    comp = np.einsum("iq,pq->pi", c, monop) * Bp[:, None]
    scale = float(np.linalg.norm(comp, axis=-1).max())
    witness = {"coefficients": c / scale, "exponents": exps, "plateau": plateau}
    return VariationReport(best, "sup-dictionary", quad_err, witness)


# ---------------------------------------------------------------------------
# coarea


@dataclass(frozen=True)
class CoareaReport:
    lhs: float
    rhs: float
    slices: int
    gap: float
    levels: np.ndarray
    perimeters: np.ndarray


def coarea_check(
    spec: GroupSpec,
    u: ScalarField,
    region: VolumeRegion,
    levelset: Callable[[float], SurfacePatch | tuple],
    t_range,
    slices: int = 64,
    order: int = 16,
    surface_order: int = 32,
) -> CoareaReport:
    """Compare the variation of ``u`` with the integral of level-set perimeters.

    The right side integrates ``|bd {u > t}|_H`` over ``slices`` uniform
    trapezoid panels, Richardson-refined once (so effectively order 2 in
    the slice count).  ``levelset`` maps a level to a patch or a
    ``(patch, window)`` pair parameterizing ``{u = t}`` inside the region.
    """
    lhs = var_h(spec, u, region, "smooth", order=order).value
    t0, t1 = map(float, t_range)

    def perim(t: float) -> float:
        made = levelset(float(t))
        patch, window = made if isinstance(made, tuple) else (made, None)
        return h_perimeter(spec, patch, window=window, order=surface_order, rtol=1e-9).value

    def trapezoid(k: int) -> tuple[np.ndarray, np.ndarray, float]:
        ts = np.linspace(t0, t1, k + 1)
        ps = np.array([perim(t) for t in ts])
        h = (t1 - t0) / k
        return ts, ps, float(h * (0.5 * ps[0] + ps[1:-1].sum() + 0.5 * ps[-1]))

    ts, ps, coarse = trapezoid(slices)
    _, _, fine = trapezoid(2 * slices)
    rhs = (4.0 * fine - coarse) / 3.0
    gap = abs(lhs - rhs) / max(abs(lhs), abs(rhs), 1e-300)
    return CoareaReport(lhs, rhs, slices, gap, ts, ps)


# ---------------------------------------------------------------------------
# Poincare / isoperimetric ratios


@dataclass(frozen=True)
class PiReport:
    """Empirical Poincare or isoperimetric ratio on a gauge ball.

    ``ratio`` is None when the denominator vanishes (constant function or
    perimeter-free set); no universal constant is asserted anywhere.
    """

    kind: str
    numerator: float
    denominator: float
    ratio: float | None
    details: dict


def pi_report(
    spec: GroupSpec,
    ball: BallSpec,
    u: ScalarField | None = None,
    E=None,
    patch: SurfacePatch | None = None,
    samples: int = 10**5,
    seed: int = 0,
    order: int = 32,
) -> PiReport:
    """Poincare ratio for a function or isoperimetric ratio for a set."""
    if ball.kind != "gauge":
        raise ValueError("pi_report is stated on gauge balls")
    exp_ = spec.Q / (spec.Q - 1)
    vol = ball_volume(spec, ball, samples=max(samples, 10**5), seed=seed)
    if u is not None:
        rng = np.random.default_rng(np.random.SeedSequence(seed).spawn(1)[0])
        pts = sample_ball(spec, ball, samples, rng)
        vals = np.asarray(u(pts) if callable(u) else u.f(pts), dtype=float)
        ubar = float(vals.mean())
        num = float((np.mean(np.abs(vals - ubar) ** exp_) * vol.value) ** (1.0 / exp_))
        hg = frame_pairing(spec, pts, u.grad(pts))
        den = float(np.mean(np.linalg.norm(hg, axis=-1)) * vol.value)
        details = {"average": ubar, "volume": vol.value, "exponent": exp_}
        ratio = num / den if den > 1e-12 * max(num, 1.0) else None
        return PiReport("poincare", num, den, ratio, details)
    if E is None or patch is None:
        raise ValueError("provide a ScalarField u, or a set E with its boundary patch")
    member = E.member if isinstance(E, Domain) else E
    rng = np.random.default_rng(np.random.SeedSequence(seed).spawn(2)[1])
    pts = sample_ball(spec, ball, samples, rng)
    frac = float(np.mean(member(pts)))
    num = (min(frac, 1.0 - frac) * vol.value) ** ((spec.Q - 1) / spec.Q)
    den = h_perimeter(spec, patch, window=ball, order=order).value
    details = {"fraction": frac, "volume": vol.value}
    ratio = num / den if den > 1e-12 * max(num, 1.0) else None
    return PiReport("isoperimetric", num, den, ratio, details)


# ---------------------------------------------------------------------------
# divergence theorem residual


@dataclass(frozen=True)
class GaussGreenReport:
    orders: tuple[int, ...]
    volume_terms: np.ndarray
    surface_terms: np.ndarray
    residuals: np.ndarray

    @property
    def final(self) -> float:
        return float(self.residuals[-1])

    @property
    def rate(self) -> float:
        """Least-squares slope of log residual against log order (sign
        flipped), fitted over the prefix above the rounding floor."""
        res = np.maximum(self.residuals, 1e-16)
        keep = res > 1e-14
        if keep.sum() < 2:
            return float("inf")
        x = np.log(np.asarray(self.orders, dtype=float)[keep])
        y = np.log(res[keep])
        slope = np.polyfit(x, y, 1)[0]
        return float(-slope)


def gauss_green_residual(
    spec: GroupSpec,
    dom: Domain,
    patch: SurfacePatch,
    section: HorizontalSection,
    region: VolumeRegion,
    orders=(4, 8, 16, 32, 64),
    support_tol: float = 1e-10,
) -> GaussGreenReport:
    """Residual of the horizontal divergence theorem at increasing orders.

    Checks ``int_E div_H phi + int_{bd E} <nu_E, phi> d|bd E|_H = 0``
    with the inward normal from the defining function.  The section must
    vanish on the faces of its declared support box (probed; violations
    raise), and the region must cover the intersection of that box with
    the domain.
    """
    if section.support is None:
        raise ValueError("section needs a declared support box")
    from .hcalc import horizontal_divergence, horizontal_gradient

    faces = _box_face_points(np.asarray(section.support, dtype=float), 9)
    leak = float(np.linalg.norm(section(faces), axis=-1).max())
    if leak > support_tol:
        raise ValueError(f"section leaks outside its chart: |phi| = {leak:.3g} on support faces")

    vols, surfs, resid = [], [], []
    for order_ in orders:
        pts_w, wts = tensor_rule(region.box, int(order_))
        pts = region.chart(pts_w)
        div = horizontal_divergence(spec, section, pts)
        vol = float(np.dot(wts, div * region.jacobian(pts_w)))

        spts_w, swts = tensor_rule(patch.box, int(order_))
        spts = patch.points(spts_w)
        dens = perimeter_density(spec, spts, patch.normals(spts_w)) * patch.area_element(spts_w)
        hg = horizontal_gradient(spec, dom.phi, spts)
        nu = -hg / np.maximum(np.linalg.norm(hg, axis=-1, keepdims=True), 1e-300)
        pairing = np.einsum("...i,...i->...", nu, section(spts))
        surf = float(np.dot(swts, pairing * dens))
        vols.append(vol)
        surfs.append(surf)
        resid.append(abs(vol + surf))
    return GaussGreenReport(tuple(int(o) for o in orders), np.array(vols), np.array(surfs), np.array(resid))


def _box_face_points(box: np.ndarray, per_axis: int) -> np.ndarray:
    """Probe points covering all faces of a coordinate box."""
    dim = box.shape[0]
    axes = [np.linspace(a, b, per_axis) for a, b in box]
    pts = []
    for k in range(dim):
        for side in (0, 1):
            grids = [axes[j] if j != k else np.array([box[k, side]]) for j in range(dim)]
            mesh = np.meshgrid(*grids, indexing="ij")
            pts.append(np.stack([mm.reshape(-1) for mm in mesh], axis=-1))
    return np.concatenate(pts, axis=0)
