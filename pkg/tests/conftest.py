import numpy as np
import pytest

from carnotkit import (
    Domain,
    ScalarField,
    free_step2_group,
    heisenberg_group,
    quaternion_htype_group,
)


@pytest.fixture(scope="session")
def h1():
    return heisenberg_group(1)


@pytest.fixture(scope="session")
def quat():
    return quaternion_htype_group()


@pytest.fixture(scope="session")
def free3():
    return free_step2_group(3)


@pytest.fixture(scope="session")
def all_specs(h1, quat, free3):
    return {"h1": h1, "quat": quat, "free3": free3}


def halfspace_domain():
    """The vertical half-space {x1 < 0} with its flat defining function."""

    def f(p):
        return p[..., 0]

    def egrad(p):
        g = np.zeros(p.shape)
        g[..., 0] = 1.0
        return g

    return Domain(ScalarField(f, egrad), [[-1.0, 1.0], [-1.0, 1.0], [-4.0, 4.0]])


def paraboloid_domain():
    """The cap {t < 1 - s^2}, characteristic exactly at (0, 0, 1)."""

    def f(p):
        return p[..., 2] + p[..., 0] ** 2 + p[..., 1] ** 2 - 1.0

    def egrad(p):
        g = np.empty(p.shape)
        g[..., 0] = 2.0 * p[..., 0]
        g[..., 1] = 2.0 * p[..., 1]
        g[..., 2] = 1.0
        return g

    return Domain(ScalarField(f, egrad), [[-1.5, 1.5], [-1.5, 1.5], [-1.0, 2.0]])


def gauge_ball_domain():
    """The unit gauge ball, characteristic exactly at (0, 0, +-1)."""

    def f(p):
        s2 = p[..., 0] ** 2 + p[..., 1] ** 2
        return s2**2 + p[..., 2] ** 2 - 1.0

    def egrad(p):
        s2 = p[..., 0] ** 2 + p[..., 1] ** 2
        g = np.empty(p.shape)
        g[..., 0] = 4.0 * s2 * p[..., 0]
        g[..., 1] = 4.0 * s2 * p[..., 1]
        g[..., 2] = 2.0 * p[..., 2]
        return g

    return Domain(ScalarField(f, egrad), [[-1.2, 1.2], [-1.2, 1.2], [-1.2, 1.2]])


def mollifier_section(half_widths, center=None):
    """Horizontal test field (bump, 0) with an analytic Jacobian.

    The bump is the classical exp(1 - 1/(1 - x^2)) profile per axis,
    compactly supported in the centered box of the given half widths.
    """
    from carnotkit import HorizontalSection

    a = np.asarray(half_widths, dtype=float)
    c = np.zeros(len(a)) if center is None else np.asarray(center, dtype=float)

    def value_and_grad(p):
        x = (np.asarray(p, dtype=float) - c) / a
        inside = np.all(np.abs(x) < 1.0, axis=-1)
        q = np.maximum(1.0 - x**2, 1e-300)
        comp = np.where(np.abs(x) < 1.0, np.exp(1.0 - 1.0 / q), 0.0)
        val = np.prod(comp, axis=-1) * inside
        dlog = -2.0 * x / q**2 / a
        grad = np.where(inside[..., None], val[..., None] * dlog, 0.0)
        return val, grad

    def f(p):
        v, _ = value_and_grad(p)
        return np.stack([v, np.zeros_like(v)], axis=-1)

    def jac(p):
        _, g = value_and_grad(p)
        J = np.zeros(p.shape[:-1] + (2, p.shape[-1]))
        J[..., 0, :] = g
        return J

    support = np.stack([c - a, c + a], axis=-1)
    return HorizontalSection(f, jac, support=support)
