"""Step-2 stratified (Carnot) group algebra from structure constants.

Points live in exponential coordinates: an element is an ndarray whose
first ``m`` entries span the horizontal layer and whose remaining ``n``
entries span the vertical layer.  Every operation here is a pure function
of such arrays and broadcasts over leading axes.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "GroupSpec",
    "ValidationReport",
    "validate_spec",
    "group_from_entries",
    "heisenberg_group",
    "quaternion_htype_group",
    "free_step2_group",
    "multiply",
    "inverse",
    "dilate",
    "dilation_jacobian",
    "frame",
    "bracket",
    "bracket_adjoint",
    "bracket_adjoint_matrix",
    "is_heisenberg_type",
]


@dataclass(frozen=True, eq=False)
class GroupSpec:
    """Structure constants and metric parameter of a step-2 group.

    ``b[i, j, l]`` is the vertical component ``l`` of the bracket of the
    horizontal basis vectors ``i`` and ``j`` (0-based indices,
    antisymmetric in ``i, j``).  ``eps`` is the box-distance parameter,
    a constant in (0, 1).
    """

    m: int
    n: int
    b: np.ndarray
    eps: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "b", np.ascontiguousarray(self.b, dtype=float))

    @property
    def Q(self) -> int:
        """Homogeneous dimension m + 2n."""
        return self.m + 2 * self.n

    @property
    def dim(self) -> int:
        """Topological dimension m + n."""
        return self.m + self.n

    def split(self, p) -> tuple[np.ndarray, np.ndarray]:
        """Split point array(s) into horizontal and vertical parts."""
        p = np.asarray(p, dtype=float)
        if p.shape[-1] != self.dim:
            raise ValueError(f"expected points of dimension {self.dim}, got shape {p.shape}")
        return p[..., : self.m], p[..., self.m :]

    def point(self, first, second) -> np.ndarray:
        """Assemble a point from horizontal and vertical coordinates."""
        return _assemble(
            np.atleast_1d(np.asarray(first, dtype=float)),
            np.atleast_1d(np.asarray(second, dtype=float)),
        )


@dataclass(frozen=True)
class ValidationReport:
    """Outcome of structure-constant validation; passes iff no failures."""

    failures: tuple[str, ...] = ()
    generation_rank: int = 0

    @property
    def ok(self) -> bool:
        return not self.failures


def validate_spec(spec: GroupSpec, tol: float = 1e-12) -> ValidationReport:
    """Check the stratification invariants of ``spec``.

    Verifies positive layer dimensions, the expected shape of ``b``,
    antisymmetry in the first two indices, that the bracket generates the
    whole vertical layer (rank condition), and that ``eps`` is in (0, 1).
    Failures are reported, never raised.
    """
    failures = []
    rank = 0
    if spec.m < 1 or spec.n < 1:
        failures.append(f"layer dimensions must be positive, got m={spec.m}, n={spec.n}")
        return ValidationReport(tuple(failures), rank)
    if spec.b.shape != (spec.m, spec.m, spec.n):
        failures.append(f"b has shape {spec.b.shape}, expected {(spec.m, spec.m, spec.n)}")
        return ValidationReport(tuple(failures), rank)
    if not np.all(np.isfinite(spec.b)):
        failures.append("b contains non-finite entries")
        return ValidationReport(tuple(failures), rank)
    skew = np.abs(spec.b + np.swapaxes(spec.b, 0, 1)).max()
    if skew > tol:
        failures.append(f"antisymmetry violated: max |b_ij + b_ji| = {skew:.3g}")
    iu, ju = np.triu_indices(spec.m, k=1)
    pair_rows = spec.b[iu, ju, :]  # (#pairs, n)
    rank = int(np.linalg.matrix_rank(pair_rows)) if pair_rows.size else 0
    if rank < spec.n:
        failures.append(f"bracket does not generate the vertical layer: rank {rank} < {spec.n}")
    if not (0.0 < spec.eps < 1.0):
        failures.append(f"eps must lie in (0, 1), got {spec.eps}")
    return ValidationReport(tuple(failures), rank)


def group_from_entries(m: int, n: int, entries, eps: float = 0.5) -> GroupSpec:
    """Build a spec from sparse 1-based entries ``(i, j, l, value)``.

    Each entry also sets the antisymmetric counterpart ``(j, i, l)``.
    Conflicting duplicates raise ``ValueError``.
    """
    b = np.zeros((m, m, n))
    seen: dict[tuple[int, int, int], float] = {}
    for i, j, l, v in entries:
        if not (1 <= i <= m and 1 <= j <= m and 1 <= l <= n):
            raise ValueError(f"entry ({i},{j},{l}) out of range for m={m}, n={n}")
        if i == j and v != 0.0:
            raise ValueError(f"diagonal entry ({i},{i},{l}) must vanish")
        for key, val in (((i, j, l), float(v)), ((j, i, l), -float(v))):
            if key in seen and seen[key] != val:
                raise ValueError(f"conflicting values for b{key}: {seen[key]} vs {val}")
            seen[key] = val
            b[key[0] - 1, key[1] - 1, key[2] - 1] = val
    return GroupSpec(m, n, b, eps)


def heisenberg_group(k: int = 1, eps: float = 0.5) -> GroupSpec:
    """The Heisenberg group with a 2k-dimensional horizontal layer."""
    b = np.zeros((2 * k, 2 * k, 1))
    for i in range(k):
        b[i, k + i, 0] = 1.0
        b[k + i, i, 0] = -1.0
    return GroupSpec(2 * k, 1, b, eps)


def quaternion_htype_group(eps: float = 0.5) -> GroupSpec:
    """The quaternionic Heisenberg-type group (m=4, n=3).

    The horizontal layer is the quaternions, the vertical layer their
    imaginary part; the bracket pairing is left quaternion multiplication.
    """
    b = np.zeros((4, 4, 3))
    # pairs (i, j, l) with b = +1, from i*1=i, i*j=k, j*k=i, k*i=j
    plus = [(0, 1, 0), (2, 3, 0), (0, 2, 1), (3, 1, 1), (0, 3, 2), (1, 2, 2)]
    for i, j, l in plus:
        b[i, j, l] = 1.0
        b[j, i, l] = -1.0
    return GroupSpec(4, 3, b, eps)


def free_step2_group(k: int, eps: float = 0.5) -> GroupSpec:
    """The free step-2 group on ``k`` generators (n = k(k-1)/2)."""
    n = k * (k - 1) // 2
    b = np.zeros((k, k, n))
    l = 0
    for i in range(k):
        for j in range(i + 1, k):
            b[i, j, l] = 1.0
            b[j, i, l] = -1.0
            l += 1
    return GroupSpec(k, n, b, eps)


def _assemble(first: np.ndarray, second: np.ndarray) -> np.ndarray:
    """Concatenate layer blocks, broadcasting leading axes only."""
    lead = np.broadcast_shapes(first.shape[:-1], second.shape[:-1])
    first = np.broadcast_to(first, lead + first.shape[-1:])
    second = np.broadcast_to(second, lead + second.shape[-1:])
    return np.concatenate([first, second], axis=-1)


def bracket(spec: GroupSpec, xf, yf) -> np.ndarray:
    """Vertical components of the bracket of two horizontal vectors."""
    xf = np.asarray(xf, dtype=float)
    yf = np.asarray(yf, dtype=float)
    return np.einsum("...i,ijl,...j->...l", xf, spec.b, yf)


def multiply(spec: GroupSpec, p, q) -> np.ndarray:
    """Group product in exponential coordinates.

    The step-2 Campbell-Hausdorff series terminates:
    ``p * q = p + q + [p, q]/2`` with the bracket feeding only the
    vertical layer.
    """
    pf, ps = spec.split(p)
    qf, qs = spec.split(q)
    return _assemble(pf + qf, ps + qs + 0.5 * bracket(spec, pf, qf))


def inverse(spec: GroupSpec, p) -> np.ndarray:
    """Group inverse; in exponential coordinates simply ``-p``."""
    return -np.asarray(p, dtype=float)


def dilate(spec: GroupSpec, r, p) -> np.ndarray:
    """Anisotropic dilation: horizontal layer scales by r, vertical by r^2."""
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise ValueError("dilation factor must be positive")
    pf, ps = spec.split(p)
    rf = r[..., None] if r.ndim else r
    return _assemble(rf * pf, rf**2 * ps)


def dilation_jacobian(spec: GroupSpec, r: float) -> float:
    """Jacobian determinant of the dilation by ``r`` (equals r**Q)."""
    return float(r) ** spec.m * (float(r) ** 2) ** spec.n


def frame(spec: GroupSpec, p) -> np.ndarray:
    """Left-invariant horizontal frame at ``p``.

    Returns an array of shape ``(..., m, m+n)`` whose row ``i`` holds the
    coordinate vector of the i-th frame field: identity in the horizontal
    block and ``(1/2) sum_j b[j, i, l] p_j`` in vertical column ``l``.
    """
    pf, _ = spec.split(p)
    vert = 0.5 * np.einsum("...j,jil->...il", pf, spec.b)
    shape = pf.shape[:-1] + (spec.m, spec.dim)
    out = np.zeros(shape)
    out[..., : spec.m, : spec.m] = np.eye(spec.m)
    out[..., : spec.m, spec.m :] = vert
    return out


def bracket_adjoint(spec: GroupSpec, eta, xi) -> np.ndarray:
    """Apply the skew action of a vertical vector to a horizontal one.

    This is the linear map defined by pairing against the bracket:
    ``<A(eta) x, y> = <[x, y], eta>``; antisymmetry of the structure
    constants makes every ``A(eta)`` skew-symmetric.
    """
    eta = np.asarray(eta, dtype=float)
    xi = np.asarray(xi, dtype=float)
    return np.einsum("...l,ijl,...i->...j", eta, spec.b, xi)


def bracket_adjoint_matrix(spec: GroupSpec, eta) -> np.ndarray:
    """Matrix of the skew action of ``eta`` on the horizontal layer."""
    eta = np.asarray(eta, dtype=float)
    return np.tensordot(spec.b, eta, axes=([2], [0])).T


def is_heisenberg_type(spec: GroupSpec, tol: float = 1e-10) -> tuple[bool, float]:
    """Decide whether every unit vertical direction acts orthogonally.

    Checks the polarized orthogonality conditions
    ``A_l^T A_k + A_k^T A_l = 2 delta_lk I`` over all vertical basis
    pairs and returns the flag together with the worst residual.
    """
    mats = [bracket_adjoint_matrix(spec, np.eye(spec.n)[l]) for l in range(spec.n)]
    eye = np.eye(spec.m)
    worst = 0.0
    for l in range(spec.n):
        for k in range(l, spec.n):
            target = 2.0 * eye if l == k else np.zeros((spec.m, spec.m))
            res = np.abs(mats[l].T @ mats[k] + mats[k].T @ mats[l] - target).max()
            worst = max(worst, float(res))
    return worst <= tol, worst
