"""Domains, hypersurface patches and H-perimeter quadrature.

A domain is the strict sublevel set of a defining function.  Surfaces
are explicit parameterizations over a rectangular parameter box with
analytic chart Jacobians, so area elements, Euclidean normals, group
translations and dilations are all exact.  The H-perimeter of a patch is
the surface integral of the frame-pairing density
``sqrt(sum_i <X_i, n>^2)``, which for a defining function equals
``|grad_H phi| / |grad phi|`` on the zero level set.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .groups import GroupSpec, dilate, inverse, multiply
from .hcalc import ScalarField, frame_pairing, horizontal_gradient
from .metrics import BallSpec, dist_box, dist_gauge
from .quad import MeasureEstimate, integrate

__all__ = [
    "CharacteristicPointError",
    "Domain",
    "SurfacePatch",
    "HalfSpaceH",
    "horizontal_normal",
    "perimeter_density",
    "h_perimeter",
    "characteristic_scan",
    "ScanReport",
    "halfspace_value",
    "halfspace_side",
    "left_jacobian",
    "translate_domain",
    "dilate_domain",
    "translate_patch",
    "dilate_patch",
    "coordinate_plane_patch",
    "graph_patch",
    "disk_patch",
    "cylinder_patch",
    "revolution_graph_patch",
    "gauge_sphere_patch",
    "implicit_graph_patch",
    "as_window",
]


class CharacteristicPointError(ValueError):
    """The horizontal gradient of the defining function vanishes here."""


@dataclass(frozen=True)
class Domain:
    """Sublevel-set domain ``{phi < 0}`` with a bounding box of interest."""

    phi: ScalarField
    bbox: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "bbox", np.asarray(self.bbox, dtype=float))

    def member(self, pts) -> np.ndarray:
        return self.phi(pts) < 0.0

    def boundary_residual(self, pts) -> np.ndarray:
        return np.abs(self.phi(pts))


def horizontal_normal(spec: GroupSpec, dom: Domain, p, tol: float = 1e-10) -> np.ndarray:
    """Unit inward horizontal normal ``-grad_H phi / |grad_H phi|``.

    Raises :class:`CharacteristicPointError` when the horizontal gradient
    is below ``tol``.
    """
    hg = horizontal_gradient(spec, dom.phi, p)
    nrm = np.linalg.norm(hg, axis=-1)
    if np.any(nrm < tol):
        raise CharacteristicPointError(f"|grad_H phi| = {float(np.min(nrm)):.3g} below tol {tol}")
    return -hg / nrm[..., None]


# ---------------------------------------------------------------------------
# surface patches


@dataclass(frozen=True)
class SurfacePatch:
    """Parameterized hypersurface piece.

    ``chart`` maps parameter arrays of shape (..., k) to points
    (..., m+n) with k = m+n-1; ``chart_jac`` returns the (..., m+n, k)
    Jacobian.  Normals come from the attached domain's defining function
    when present (oriented outward, i.e. along grad phi), otherwise from
    the null space of the Jacobian transposed, flipped by ``orient``.
    """

    box: np.ndarray
    chart: Callable[[np.ndarray], np.ndarray]
    chart_jac: Callable[[np.ndarray], np.ndarray]
    domain: Domain | None = None
    orient: float = 1.0

    def __post_init__(self):
        box = np.asarray(self.box, dtype=float)
        if box.ndim == 1:
            box = box[None, :]
        object.__setattr__(self, "box", box)

    def points(self, u) -> np.ndarray:
        return self.chart(np.asarray(u, dtype=float))

    def jac(self, u) -> np.ndarray:
        return self.chart_jac(np.asarray(u, dtype=float))

    def area_element(self, u) -> np.ndarray:
        J = self.jac(u)
        G = np.einsum("...di,...dj->...ij", J, J)
        if G.shape[-1] == 1:
            det = G[..., 0, 0]
        elif G.shape[-1] == 2:
            det = G[..., 0, 0] * G[..., 1, 1] - G[..., 0, 1] * G[..., 1, 0]
        else:
            det = np.linalg.det(G)
        return np.sqrt(np.maximum(det, 0.0))

    def normals(self, u) -> np.ndarray:
        """Euclidean unit normals at chart(u)."""
        if self.domain is not None:
            pts = self.points(u)
            g = self.domain.phi.grad(pts)
            return g / np.linalg.norm(g, axis=-1, keepdims=True)
        J = self.jac(u)
        if J.shape[-2] == 3 and J.shape[-1] == 2:
            n = np.cross(J[..., :, 0], J[..., :, 1])
        else:
            # smallest left-singular vector spans the Jacobian's conull space
            U, _, _ = np.linalg.svd(J)
            n = U[..., :, -1]
        n = n / np.linalg.norm(n, axis=-1, keepdims=True)
        return self.orient * n


def perimeter_density(spec: GroupSpec, pts, normals) -> np.ndarray:
    """H-perimeter surface density ``sqrt(sum_i <X_i(p), n>^2)``."""
    v = frame_pairing(spec, np.asarray(pts, dtype=float), np.asarray(normals, dtype=float))
    return np.linalg.norm(v, axis=-1)


def as_window(spec: GroupSpec, window) -> Callable[[np.ndarray], np.ndarray] | None:
    """Normalize a window argument into a boolean mask over points.

    Accepts None, a callable mask, a :class:`BallSpec`, a
    :class:`Domain`, or an (m+n, 2) coordinate box.
    """
    if window is None:
        return None
    if isinstance(window, BallSpec):
        dist = dist_box if window.kind == "box-d" else dist_gauge
        return lambda pts: dist(spec, pts, window.center) < window.radius
    if isinstance(window, Domain):
        return window.member
    if isinstance(window, np.ndarray) or (
        isinstance(window, (list, tuple)) and np.asarray(window).ndim == 2
    ):
        box = np.asarray(window, dtype=float)

        def in_box(pts: np.ndarray) -> np.ndarray:
            pts = np.asarray(pts, dtype=float)
            return np.all((pts >= box[:, 0]) & (pts <= box[:, 1]), axis=-1)

        return in_box
    if callable(window):
        return window
    raise TypeError(f"cannot interpret window of type {type(window)!r}")


def h_perimeter(
    spec: GroupSpec,
    patch: SurfacePatch,
    window=None,
    order: int = 16,
    rtol: float = 1e-8,
    max_order: int = 1024,
) -> MeasureEstimate:
    """H-perimeter carried by a patch, optionally restricted to a window.

    Tensor Gauss-Legendre quadrature of density times area element over
    the parameter box, refined by order doubling.  Windows are applied as
    characteristic functions inside the quadrature, so boxes aligned with
    the window converge fastest.
    """
    mask = as_window(spec, window)

    def integrand(u: np.ndarray) -> np.ndarray:
        pts = patch.points(u)
        val = perimeter_density(spec, pts, patch.normals(u)) * patch.area_element(u)
        if mask is not None:
            val = val * mask(pts)
        return val

    return integrate(integrand, patch.box, order=order, rtol=rtol, max_order=max_order)


# ---------------------------------------------------------------------------
# group transformations of domains and patches


def left_jacobian(spec: GroupSpec, z) -> np.ndarray:
    """Euclidean Jacobian of left translation by ``z`` (constant in q)."""
    zf, _ = spec.split(z)
    J = np.eye(spec.dim)
    # d[z,q]_l / dq_j = sum_i b[i,j,l] z_i
    J[spec.m :, : spec.m] = 0.5 * np.einsum("i,ijl->lj", zf, spec.b)
    return J


def translate_domain(spec: GroupSpec, z, dom: Domain) -> Domain:
    """The domain translated by ``z``: defining function ``phi(z^-1 q)``."""
    z = np.asarray(z, dtype=float)
    zinv = inverse(spec, z)
    Jt = left_jacobian(spec, zinv).T

    def f(q):
        return dom.phi(multiply(spec, zinv, q))

    def egrad(q):
        return dom.phi.grad(multiply(spec, zinv, q)) @ Jt.T

    corners = _box_corners(dom.bbox)
    moved = multiply(spec, z, corners)
    bbox = np.stack([moved.min(axis=0), moved.max(axis=0)], axis=-1)
    return Domain(ScalarField(f, egrad), bbox)


def dilate_domain(spec: GroupSpec, r: float, dom: Domain) -> Domain:
    """The domain dilated by ``r``: defining function ``phi(delta_{1/r} q)``."""
    scale = np.concatenate([np.full(spec.m, 1.0 / r), np.full(spec.n, 1.0 / r**2)])

    def f(q):
        return dom.phi(dilate(spec, 1.0 / r, q))

    def egrad(q):
        return dom.phi.grad(dilate(spec, 1.0 / r, q)) * scale

    corners = dilate(spec, r, _box_corners(dom.bbox))
    bbox = np.stack([corners.min(axis=0), corners.max(axis=0)], axis=-1)
    return Domain(ScalarField(f, egrad), bbox)


def _box_corners(box: np.ndarray) -> np.ndarray:
    box = np.asarray(box, dtype=float)
    k = box.shape[0]
    idx = np.indices((2,) * k).reshape(k, -1).T
    return box[np.arange(k), idx]


def translate_patch(spec: GroupSpec, z, patch: SurfacePatch) -> SurfacePatch:
    """Compose a patch with left translation by ``z`` (exact Jacobians)."""
    z = np.asarray(z, dtype=float)
    DL = left_jacobian(spec, z)

    def chart(u):
        return multiply(spec, z, patch.chart(u))

    def chart_jac(u):
        return np.einsum("ab,...bk->...ak", DL, patch.chart_jac(u))

    dom = translate_domain(spec, z, patch.domain) if patch.domain is not None else None
    return replace(patch, chart=chart, chart_jac=chart_jac, domain=dom)


def dilate_patch(spec: GroupSpec, r: float, patch: SurfacePatch) -> SurfacePatch:
    """Compose a patch with the dilation by ``r`` (exact Jacobians)."""
    scale = np.concatenate([np.full(spec.m, r), np.full(spec.n, r**2)])

    def chart(u):
        return dilate(spec, r, patch.chart(u))

    def chart_jac(u):
        return patch.chart_jac(u) * scale[:, None]

    dom = dilate_domain(spec, r, patch.domain) if patch.domain is not None else None
    return replace(patch, chart=chart, chart_jac=chart_jac, domain=dom)


# ---------------------------------------------------------------------------
# built-in patches


def coordinate_plane_patch(
    spec: GroupSpec, axis: int, level: float, box, domain: Domain | None = None, orient: float = 1.0
) -> SurfacePatch:
    """The hyperplane ``{p[axis] = level}`` over a box in the other coordinates."""
    dim = spec.dim
    others = [i for i in range(dim) if i != axis]

    def chart(u):
        out = np.empty(u.shape[:-1] + (dim,))
        out[..., axis] = level
        for c, i in enumerate(others):
            out[..., i] = u[..., c]
        return out

    J = np.zeros((dim, dim - 1))
    for c, i in enumerate(others):
        J[i, c] = 1.0

    def chart_jac(u):
        return np.broadcast_to(J, u.shape[:-1] + J.shape)

    patch = SurfacePatch(np.asarray(box, dtype=float), chart, chart_jac, domain, orient)
    if domain is None:
        # null-space normal of the coordinate plane is +-e_axis; fix the sign
        e = np.zeros(dim)
        e[axis] = 1.0
        probe = patch.normals(0.5 * (patch.box[:, 0] + patch.box[:, 1]))
        if float(probe @ e) < 0:
            patch = replace(patch, orient=-orient)
    return patch


def graph_patch(
    spec: GroupSpec,
    g: Callable[[np.ndarray], np.ndarray],
    ggrad: Callable[[np.ndarray], np.ndarray],
    box,
    domain: Domain | None = None,
    orient: float = 1.0,
) -> SurfacePatch:
    """The vertical graph ``y_n = g(x_1 .. x_m, y_1 .. y_{n-1})``.

    ``g`` and its gradient take the first m+n-1 coordinates.
    """
    dim = spec.dim

    def chart(u):
        out = np.empty(u.shape[:-1] + (dim,))
        out[..., : dim - 1] = u
        out[..., dim - 1] = g(u)
        return out

    def chart_jac(u):
        k = dim - 1
        J = np.zeros(u.shape[:-1] + (dim, k))
        J[..., :k, :] = np.eye(k)
        J[..., k, :] = ggrad(u)
        return J

    return SurfacePatch(np.asarray(box, dtype=float), chart, chart_jac, domain, orient)


def disk_patch(
    spec: GroupSpec, level: float, radius: float, center_first=None, orient: float = 1.0
) -> SurfacePatch:
    """Flat horizontal disk ``{y_1 = level, |xi - c| < radius}`` (m = 2, n = 1)."""
    _require_3d(spec)
    c = np.zeros(2) if center_first is None else np.asarray(center_first, dtype=float)

    def chart(u):
        v, th = u[..., 0], u[..., 1]
        r = radius * v
        return np.stack([c[0] + r * np.cos(th), c[1] + r * np.sin(th), np.full_like(v, level)], axis=-1)

    def chart_jac(u):
        v, th = u[..., 0], u[..., 1]
        r = radius * v
        J = np.zeros(u.shape[:-1] + (3, 2))
        J[..., 0, 0] = radius * np.cos(th)
        J[..., 1, 0] = radius * np.sin(th)
        J[..., 0, 1] = -r * np.sin(th)
        J[..., 1, 1] = r * np.cos(th)
        return J

    box = [[0.0, 1.0], [0.0, 2.0 * np.pi]]
    return SurfacePatch(box, chart, chart_jac, None, orient)


def cylinder_patch(spec: GroupSpec, radius: float, t_range, orient: float = 1.0) -> SurfacePatch:
    """Vertical round cylinder ``{|xi| = radius}`` over a y-interval (m = 2, n = 1)."""
    _require_3d(spec)

    def chart(u):
        th, t = u[..., 0], u[..., 1]
        return np.stack([radius * np.cos(th), radius * np.sin(th), t], axis=-1)

    def chart_jac(u):
        th = u[..., 0]
        J = np.zeros(u.shape[:-1] + (3, 2))
        J[..., 0, 0] = -radius * np.sin(th)
        J[..., 1, 0] = radius * np.cos(th)
        J[..., 2, 1] = 1.0
        return J

    box = [[0.0, 2.0 * np.pi], list(t_range)]
    return SurfacePatch(box, chart, chart_jac, None, orient)


def revolution_graph_patch(
    spec: GroupSpec,
    profile: Callable[[np.ndarray], np.ndarray],
    dprofile: Callable[[np.ndarray], np.ndarray],
    radius: float,
    domain: Domain | None = None,
    graded: bool = False,
    orient: float = 1.0,
) -> SurfacePatch:
    """Rotationally symmetric graph ``t = profile(|xi|)`` over a disk (m = 2, n = 1).

    With ``graded`` the radial parameter is squared, clustering quadrature
    nodes at the axis; use it for profiles that are only Hoelder there.
    """
    _require_3d(spec)

    def radial(v):
        return (radius * v**2, 2.0 * radius * v) if graded else (radius * v, np.full_like(v, radius))

    def chart(u):
        v, th = u[..., 0], u[..., 1]
        r, _ = radial(v)
        return np.stack([r * np.cos(th), r * np.sin(th), profile(r)], axis=-1)

    def chart_jac(u):
        v, th = u[..., 0], u[..., 1]
        r, dr = radial(v)
        J = np.zeros(u.shape[:-1] + (3, 2))
        J[..., 0, 0] = dr * np.cos(th)
        J[..., 1, 0] = dr * np.sin(th)
        J[..., 2, 0] = dr * dprofile(r)
        J[..., 0, 1] = -r * np.sin(th)
        J[..., 1, 1] = r * np.cos(th)
        return J

    box = [[0.0, 1.0], [0.0, 2.0 * np.pi]]
    return SurfacePatch(box, chart, chart_jac, domain, orient)


def _smootherstep(v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    s = v * v * (3.0 - 2.0 * v)
    ds = 6.0 * v * (1.0 - v)
    return s, ds


def gauge_sphere_patch(
    spec: GroupSpec, center, radius: float, domain: Domain | None = None, orient: float = 1.0
) -> SurfacePatch:
    """The gauge sphere ``{rho(center^-1 q) = radius}`` (m = 2, n = 1).

    Parameterized by a graded polar angle (nodes cluster at both poles,
    where the surface is only Hoelder in the parameter) and the
    revolution angle.  Centering is by group translation.
    """
    _require_3d(spec)
    center = np.asarray(center, dtype=float)

    def polar(v):
        s01, ds01 = _smootherstep(v)
        return np.pi * s01, np.pi * ds01

    def chart(u):
        v, th = u[..., 0], u[..., 1]
        a, _ = polar(v)
        s = radius * np.sqrt(np.sin(a))
        t = radius**2 * np.cos(a)
        return np.stack([s * np.cos(th), s * np.sin(th), t], axis=-1)

    def chart_jac(u):
        v, th = u[..., 0], u[..., 1]
        a, da = polar(v)
        sina = np.sin(a)
        root = np.sqrt(sina)
        s = radius * root
        # ds/dv = radius * cos(a) / (2 sqrt(sin a)) * da ; finite interior
        dsdv = radius * np.cos(a) / np.maximum(2.0 * root, 1e-300) * da
        dtdv = -(radius**2) * sina * da
        J = np.zeros(u.shape[:-1] + (3, 2))
        J[..., 0, 0] = dsdv * np.cos(th)
        J[..., 1, 0] = dsdv * np.sin(th)
        J[..., 2, 0] = dtdv
        J[..., 0, 1] = -s * np.sin(th)
        J[..., 1, 1] = s * np.cos(th)
        return J

    box = [[0.0, 1.0], [0.0, 2.0 * np.pi]]
    patch = SurfacePatch(box, chart, chart_jac, domain, orient)
    if np.any(center != 0.0):
        patch = translate_patch(spec, center, patch)
    return patch


def implicit_graph_patch(
    spec: GroupSpec,
    dom: Domain,
    solve_axis: int,
    box,
    bracket_interval,
    newton_iters: int = 30,
) -> SurfacePatch:
    """Graph parameterization of ``{phi = 0}`` solving for one coordinate.

    For each parameter point the missing coordinate is located by
    bisection inside ``bracket_interval`` followed by Newton polishing;
    the chart Jacobian uses implicit differentiation, so it is exact at
    solved points.  The defining function must be monotone in the solved
    coordinate across the bracket.
    """
    dim = spec.dim
    others = [i for i in range(dim) if i != solve_axis]
    lo, hi = map(float, bracket_interval)

    def embed(u, w):
        out = np.empty(u.shape[:-1] + (dim,))
        for c, i in enumerate(others):
            out[..., i] = u[..., c]
        out[..., solve_axis] = w
        return out

    def solve(u):
        a = np.full(u.shape[:-1], lo)
        b = np.full(u.shape[:-1], hi)
        fa = dom.phi(embed(u, a))
        for _ in range(40):
            mid = 0.5 * (a + b)
            fm = dom.phi(embed(u, mid))
            takes = (fa * fm) <= 0.0
            b = np.where(takes, mid, b)
            a = np.where(takes, a, mid)
            fa = dom.phi(embed(u, a))
        w = 0.5 * (a + b)
        for _ in range(newton_iters):
            pts = embed(u, w)
            g = dom.phi.grad(pts)[..., solve_axis]
            val = dom.phi(pts)
            stepped = np.where(np.abs(g) > 1e-14, w - val / np.where(g == 0, 1.0, g), w)
            w = np.clip(stepped, lo, hi)
        return w

    def chart(u):
        return embed(u, solve(u))

    def chart_jac(u):
        pts = chart(u)
        g = dom.phi.grad(pts)
        gw = g[..., solve_axis]
        k = dim - 1
        J = np.zeros(u.shape[:-1] + (dim, k))
        for c, i in enumerate(others):
            J[..., i, c] = 1.0
            J[..., solve_axis, c] = -g[..., i] / gw
        return J

    return SurfacePatch(np.asarray(box, dtype=float), chart, chart_jac, dom)


def _require_3d(spec: GroupSpec) -> None:
    if not (spec.m == 2 and spec.n == 1):
        raise ValueError("this built-in patch requires m=2, n=1 coordinates")


# ---------------------------------------------------------------------------
# characteristic scan


@dataclass(frozen=True)
class ScanReport:
    """Characteristic scan outcome across grid resolutions."""

    resolutions: tuple[int, ...]
    fractions: tuple[float, ...]
    tolerances: tuple[float, ...]
    points: tuple[np.ndarray, ...]

    @property
    def monotone(self) -> bool:
        f = self.fractions
        return all(f[i + 1] <= f[i] for i in range(len(f) - 1))


def characteristic_scan(
    spec: GroupSpec,
    dom: Domain,
    patch: SurfacePatch,
    resolutions=(12, 24, 48),
    tol_ref: float | None = None,
    tol_scale: float = 2.0,
) -> ScanReport:
    """Locate near-characteristic boundary points on a midpoint grid.

    A sample is flagged when ``|grad_H phi| < tol_ref / resolution``; the
    default ``tol_ref`` is ``tol_scale`` times the area-weighted median
    of ``|grad_H phi|`` at the coarsest resolution.  The flagged band
    then shrinks proportionally to the grid spacing (staying just wide
    enough to keep the nearest grid nodes resolvable), so its
    surface-measure fraction must vanish for C^1 domains with a
    negligible characteristic set.
    """

    def grid(res: int):
        axes = [
            (np.arange(res) + 0.5) / res * (b - a) + a for a, b in patch.box
        ]
        mesh = np.meshgrid(*axes, indexing="ij")
        u = np.stack([g.reshape(-1) for g in mesh], axis=-1)
        cell = np.prod([(b - a) / res for a, b in patch.box])
        return u, cell

    if tol_ref is None:
        u, cell = grid(int(resolutions[0]))
        w = patch.area_element(u) * cell
        hn = np.linalg.norm(horizontal_gradient_raw(spec, dom, patch, u), axis=-1)
        order = np.argsort(hn)
        cum = np.cumsum(w[order])
        tol_ref = tol_scale * float(hn[order][np.searchsorted(cum, 0.5 * cum[-1])])

    fractions, tols, points = [], [], []
    for res in resolutions:
        u, cell = grid(int(res))
        pts = patch.points(u)
        w = patch.area_element(u) * cell
        hn = np.linalg.norm(horizontal_gradient_raw(spec, dom, patch, u), axis=-1)
        tol = tol_ref / res
        flag = hn < tol
        fractions.append(float(w[flag].sum() / w.sum()))
        tols.append(tol)
        points.append(pts[flag])
    return ScanReport(tuple(int(r) for r in resolutions), tuple(fractions), tuple(tols), tuple(points))


def horizontal_gradient_raw(
    spec: GroupSpec, dom: Domain, patch: SurfacePatch, u: np.ndarray
) -> np.ndarray:
    """Horizontal gradient of the defining function at patch points."""
    return horizontal_gradient(spec, dom.phi, patch.points(u))


# ---------------------------------------------------------------------------
# blow-up half-spaces


@dataclass(frozen=True)
class HalfSpaceH:
    """Horizontal half-space through ``base`` with unit normal ``normal``."""

    base: np.ndarray
    normal: np.ndarray

    def __post_init__(self):
        base = np.asarray(self.base, dtype=float)
        normal = np.asarray(self.normal, dtype=float)
        nrm = np.linalg.norm(normal)
        if not np.isclose(nrm, 1.0, atol=1e-9):
            raise ValueError("half-space normal must be a unit vector")
        object.__setattr__(self, "base", base)
        object.__setattr__(self, "normal", normal)


def halfspace_value(spec: GroupSpec, hs: HalfSpaceH, q) -> np.ndarray:
    """Pairing ``<pi(base^-1 q), normal>`` deciding the side of ``q``."""
    z = multiply(spec, inverse(spec, hs.base), q)
    zf, _ = spec.split(z)
    return zf @ hs.normal


def halfspace_side(spec: GroupSpec, hs: HalfSpaceH, q, tol: float = 1e-12) -> np.ndarray:
    """Side of the half-space: +1, -1 or 0 (on the dividing plane)."""
    v = halfspace_value(spec, hs, q)
    return np.where(v > tol, 1, np.where(v < -tol, -1, 0))
