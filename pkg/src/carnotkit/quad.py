"""Gauss-Legendre quadrature with order-doubling refinement.

Rules are tensor products over a rectangular parameter box.  Refinement
doubles the order until the relative change drops below a tolerance; the
last change is kept as the error estimate and the whole trail is
recorded so reports can show convergence.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np

__all__ = ["MeasureEstimate", "gauss_legendre", "tensor_rule", "integrate", "integrate_fixed"]


@dataclass(frozen=True)
class MeasureEstimate:
    """A numeric measurement with an error estimate and its history.

    ``trail`` holds ``(effort, value)`` pairs where effort is a quadrature
    order or a sample count, depending on the producing method.
    """

    value: float
    error: float
    effort: int
    trail: tuple[tuple[int, float], ...] = ()

    def __float__(self) -> float:
        return self.value


@lru_cache(maxsize=64)
def gauss_legendre(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights on [-1, 1]."""
    x, w = np.polynomial.legendre.leggauss(order)
    return x, w


def tensor_rule(box, order: int) -> tuple[np.ndarray, np.ndarray]:
    """Tensor-product rule on a box given as an (k, 2) array of bounds.

    Returns points of shape (order**k, k) and matching weights.
    """
    box = np.asarray(box, dtype=float)
    if box.ndim == 1:
        box = box[None, :]
    k = box.shape[0]
    x, w = gauss_legendre(order)
    axes_pts = []
    axes_wts = []
    for a, bnd in box:
        axes_pts.append(0.5 * (bnd - a) * x + 0.5 * (a + bnd))
        axes_wts.append(0.5 * (bnd - a) * w)
    grids = np.meshgrid(*axes_pts, indexing="ij")
    pts = np.stack([g.reshape(-1) for g in grids], axis=-1)
    wts = axes_wts[0]
    for aw in axes_wts[1:]:
        wts = np.multiply.outer(wts, aw)
    return pts.reshape(-1, k), wts.reshape(-1)


def integrate_fixed(f: Callable[[np.ndarray], np.ndarray], box, order: int) -> float:
    """Integral of a vectorized integrand at one fixed order."""
    pts, wts = tensor_rule(box, order)
    vals = np.asarray(f(pts), dtype=float)
    if not np.all(np.isfinite(vals)):
        raise ValueError("integrand returned non-finite values")
    return float(np.dot(wts, vals))


def integrate(
    f: Callable[[np.ndarray], np.ndarray],
    box,
    order: int = 8,
    rtol: float = 1e-8,
    max_order: int = 1024,
) -> MeasureEstimate:
    """Integrate with order doubling until the relative delta is small.

    The error estimate is the last inter-order change (absolute), which
    is conservative for smooth integrands.
    """
    if order < 1:
        raise ValueError("order must be >= 1")
    trail = []
    prev = integrate_fixed(f, box, order)
    trail.append((order, prev))
    err = abs(prev) if prev != 0.0 else 1.0
    while order < max_order:
        order *= 2
        cur = integrate_fixed(f, box, order)
        trail.append((order, cur))
        err = abs(cur - prev)
        scale = max(abs(cur), 1e-300)
        prev = cur
        if err <= rtol * scale:
            break
    return MeasureEstimate(prev, err, order, tuple(trail))
