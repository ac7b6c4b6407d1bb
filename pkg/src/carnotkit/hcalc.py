"""Horizontal differential calculus on scalar fields and sections.

A scalar field carries a vectorized evaluator and, optionally, an
analytic Euclidean gradient; when the gradient is missing, scaled
central finite differences are used.  The horizontal gradient contracts
the Euclidean gradient against the left-invariant frame; equivalently it
splits as the horizontal Euclidean gradient plus half the skew action of
the vertical gradient on the base point.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .groups import GroupSpec, bracket_adjoint, is_heisenberg_type

__all__ = [
    "ScalarField",
    "HorizontalSection",
    "fd_gradient",
    "frame_pairing",
    "horizontal_gradient",
    "horizontal_gradient_split",
    "horizontal_divergence",
    "swirl_field",
]

DEFAULT_FD_STEP = 1e-5


def fd_gradient(f: Callable, p: np.ndarray, step: float = DEFAULT_FD_STEP) -> np.ndarray:
    """Central finite-difference gradient, step scaled by 1 + |p|."""
    p = np.asarray(p, dtype=float)
    h = step * (1.0 + np.linalg.norm(p, axis=-1))
    dim = p.shape[-1]
    out = np.empty(p.shape)
    for i in range(dim):
        e = np.zeros(dim)
        e[i] = 1.0
        hp = h[..., None] * e if np.ndim(h) else h * e
        out[..., i] = (np.asarray(f(p + hp)) - np.asarray(f(p - hp))) / (2.0 * np.asarray(h))
    return out


@dataclass(frozen=True)
class ScalarField:
    """A real function of points with an evaluable Euclidean gradient.

    ``f`` must accept arrays of shape (..., m+n) and return shape (...).
    ``egrad`` (same input, output (..., m+n)) is optional; finite
    differences with ``fd_step`` fill in when absent.
    """

    f: Callable[[np.ndarray], np.ndarray]
    egrad: Callable[[np.ndarray], np.ndarray] | None = None
    fd_step: float = DEFAULT_FD_STEP

    def __call__(self, p) -> np.ndarray:
        return np.asarray(self.f(np.asarray(p, dtype=float)), dtype=float)

    def grad(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        if self.egrad is not None:
            return np.asarray(self.egrad(p), dtype=float)
        return fd_gradient(self.f, p, self.fd_step)


@dataclass(frozen=True)
class HorizontalSection:
    """A horizontal vector field given by frame components.

    ``f`` maps (..., m+n) points to (..., m) components.  ``jac``, when
    supplied, maps points to the (..., m, m+n) Euclidean Jacobian of the
    components and makes divergences exact.
    """

    f: Callable[[np.ndarray], np.ndarray]
    jac: Callable[[np.ndarray], np.ndarray] | None = None
    support: np.ndarray | None = None

    def __call__(self, p) -> np.ndarray:
        return np.asarray(self.f(np.asarray(p, dtype=float)), dtype=float)


def horizontal_gradient(spec: GroupSpec, field: ScalarField, p) -> np.ndarray:
    """Frame components of the horizontal gradient at ``p``."""
    p = np.asarray(p, dtype=float)
    g = field.grad(p)
    return frame_pairing(spec, p, g)


def frame_pairing(spec: GroupSpec, p: np.ndarray, covec: np.ndarray) -> np.ndarray:
    """Pair a Euclidean covector with the frame fields: <X_i(p), covec>."""
    pf, _ = spec.split(p)
    cf, cs = covec[..., : spec.m], covec[..., spec.m :]
    vert = 0.5 * np.einsum("...j,jil,...l->...i", pf, spec.b, cs)
    return cf + vert


def horizontal_gradient_split(spec: GroupSpec, field: ScalarField, p) -> np.ndarray:
    """Horizontal gradient via the split form D_xi + (1/2) A(eta) xi.

    Algebraically identical to :func:`horizontal_gradient`; kept separate
    so the identity can be exercised as a test.
    """
    p = np.asarray(p, dtype=float)
    pf, _ = spec.split(p)
    g = field.grad(p)
    eta = g[..., spec.m :]
    return g[..., : spec.m] + 0.5 * bracket_adjoint(spec, eta, pf)


def horizontal_divergence(
    spec: GroupSpec, section: HorizontalSection, p, step: float = 1e-5
) -> np.ndarray:
    """Sum of frame derivatives of the section components.

    Uses the analytic Jacobian when the section has one, otherwise
    central finite differences with the given step (scaled by 1 + |p|).
    """
    if step <= 0:
        raise ValueError("step must be positive")
    p = np.asarray(p, dtype=float)
    if section.jac is not None:
        J = np.asarray(section.jac(p), dtype=float)
    else:
        h = step * (1.0 + np.linalg.norm(p, axis=-1))
        J = np.empty(p.shape[:-1] + (spec.m, spec.dim))
        for k in range(spec.dim):
            e = np.zeros(spec.dim)
            e[k] = 1.0
            hp = (h[..., None] if np.ndim(h) else h) * e
            J[..., :, k] = (section(p + hp) - section(p - hp)) / (2.0 * np.asarray(h)[..., None] if np.ndim(h) else 2.0 * h)
    # div = sum_i <X_i(p), grad phi_i>
    total = np.zeros(p.shape[:-1])
    for i in range(spec.m):
        total = total + frame_pairing(spec, p, J[..., i, :])[..., i]
    return total


def swirl_field(spec: GroupSpec, delta: float) -> HorizontalSection:
    """Divergence-free rotational test field used near characteristic points.

    On the horizontal layer it is the skew action of the last vertical
    basis direction, normalized by max(|xi|, delta); on Heisenberg-type
    groups the field has pointwise norm min(|xi|, delta)/delta <= 1.
    Both branches are divergence free; only the interface |xi| = delta is
    not smooth.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    htype, _ = is_heisenberg_type(spec)
    if not htype:
        warnings.warn(
            "swirl_field on a non-Heisenberg-type group: the unit bound on "
            "the field is not guaranteed",
            stacklevel=2,
        )
    eta = np.zeros(spec.n)
    eta[-1] = 1.0

    def f(p: np.ndarray) -> np.ndarray:
        pf, _ = spec.split(p)
        s = np.linalg.norm(pf, axis=-1)
        return -bracket_adjoint(spec, eta, pf) / np.maximum(s, delta)[..., None]

    return HorizontalSection(f=f)
