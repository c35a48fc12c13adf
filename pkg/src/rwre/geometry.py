"""Directions, rotations, boxes, and exit predicates on the lattice.

A box is specified by a rotation R with R(e_1) = l and three positive
lengths: B = R((-L_minus, L_plus) x (-L_tilde, L_tilde)^{d-1}) intersected
with Z^d.  Its positive boundary is the part of the outer boundary beyond
the L_plus face but still inside the transverse tube:

    boundary(B)  = sites outside B with a nearest neighbor in B
    positive     = boundary and x.l >= L_plus and |x.R(e_i)| < L_tilde (i>=2)

The rotation completing l to an orthonormal frame is not unique; we fix the
Householder reflection through (e_1 + l)/|e_1 + l|, which is deterministic,
orthogonal, and reduces to the identity at l = e_1.  Only the box shape
depends on this convention, never quantities defined through l alone.

Membership tests run in double precision.  For axis-aligned directions with
half-integer thresholds everything is exact; for general l a site can land
on a face up to rounding, so a small snap tolerance pushes ties on the
positive side toward the positive-boundary label (one fixed choice,
recorded in run metadata).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .env import direction_vectors

UNIT_NORM_TOL = 1e-9
SNAP = 1e-9
ENUM_LIMIT = 30_000_000


def build_rotation(l) -> np.ndarray:
    """Orthonormal matrix R (columns R(e_1)..R(e_d)) with R(e_1) = l.

    Householder reflection through (e_1 + l)/|e_1 + l|; identity when
    l = e_1; the fixed fallback diag(-1, -1, 1, ..., 1) when l = -e_1.
    Any axis-aligned l yields an exact signed permutation.
    """
    l = np.asarray(l, dtype=np.float64)
    d = l.shape[0]
    if d < 2:
        raise ValueError("need dimension >= 2")
    if abs(np.linalg.norm(l) - 1.0) > UNIT_NORM_TOL:
        raise ValueError(f"direction must be a unit vector, |l| = {np.linalg.norm(l)!r}")
    e1 = np.zeros(d)
    e1[0] = 1.0
    if np.linalg.norm(l - e1) <= UNIT_NORM_TOL:
        return np.eye(d)
    w = e1 + l
    nw = np.linalg.norm(w)
    if nw <= UNIT_NORM_TOL:  # l = -e_1
        diag = np.ones(d)
        diag[0] = diag[1] = -1.0
        return np.diag(diag)
    u = w / nw
    R = 2.0 * np.outer(u, u) - np.eye(d)
    # axis-aligned l makes R a signed permutation in exact arithmetic;
    # snap away the float fuzz so integer-frame comparisons stay exact
    Rr = np.rint(R)
    if (
        np.abs(R - Rr).max() <= 1e-12
        and np.all(np.abs(Rr).sum(axis=0) == 1)
        and np.all(np.abs(Rr).sum(axis=1) == 1)
    ):
        return Rr
    return R


def _is_signed_permutation(R: np.ndarray) -> bool:
    return bool(np.all((R == 0) | (np.abs(R) == 1)) and np.all(np.abs(R).sum(axis=0) == 1))


@dataclass(frozen=True)
class BoxSpec:
    """Box specification (R, L_minus, L_plus, L_tilde); lengths in lattice units."""

    rotation: np.ndarray
    L_minus: float
    L_plus: float
    L_tilde: float
    snap: float = field(init=False)

    def __post_init__(self):
        R = np.asarray(self.rotation, dtype=np.float64)
        d = R.shape[0]
        if R.shape != (d, d):
            raise ValueError("rotation must be square")
        if np.abs(R.T @ R - np.eye(d)).max() > 1e-12:
            raise ValueError("rotation columns are not orthonormal to 1e-12")
        if min(self.L_minus, self.L_plus, self.L_tilde) <= 0:
            raise ValueError("box lengths must be positive")
        object.__setattr__(self, "rotation", R)
        # exact integer comparisons need no snap
        object.__setattr__(self, "snap", 0.0 if _is_signed_permutation(R) else SNAP)

    @property
    def d(self) -> int:
        return self.rotation.shape[0]

    @property
    def l(self) -> np.ndarray:
        return self.rotation[:, 0]


def box_spec(l, L_minus: float, L_plus: float, L_tilde: float) -> BoxSpec:
    return BoxSpec(build_rotation(l), L_minus, L_plus, L_tilde)


@dataclass(frozen=True)
class PolyBox:
    """Symmetric box B_{l, L, L_tilde} for the polynomial condition."""

    l: tuple
    L: float
    L_tilde: float

    def __post_init__(self):
        if self.L <= 0:
            raise ValueError("L must be positive")
        if not 0 < self.L_tilde <= 70.0 * self.L**3:
            raise ValueError(
                f"L_tilde must lie in (0, 70 L^3] = (0, {70.0 * self.L**3}], got {self.L_tilde!r}"
            )

    def spec(self) -> BoxSpec:
        return box_spec(self.l, self.L, self.L, self.L_tilde)


def box_frame_coords(B: BoxSpec, xs) -> tuple[np.ndarray, np.ndarray]:
    """(x.l, transverse coords) for an (n, d) site array."""
    xs = np.asarray(xs, dtype=np.float64)
    xi = xs @ B.rotation  # column i of R dotted with each row
    return xi[..., 0], xi[..., 1:]


def in_box(B: BoxSpec, xs) -> np.ndarray:
    f, t = box_frame_coords(B, xs)
    return (
        (-B.L_minus < f)
        & (f < B.L_plus - B.snap)
        & (np.abs(t) < B.L_tilde).all(axis=-1)
    )


def on_positive_side(B: BoxSpec, xs) -> np.ndarray:
    """x.l >= L_plus and transverse coordinates inside the tube."""
    f, t = box_frame_coords(B, xs)
    return (f >= B.L_plus - B.snap) & (np.abs(t) < B.L_tilde).all(axis=-1)


INTERIOR = "interior"
POSITIVE_BOUNDARY = "positive_boundary"
OTHER_BOUNDARY = "other_boundary"
FAR = "far"


def classify(B: BoxSpec, x) -> str:
    x = np.asarray(x, dtype=np.int64)
    if bool(in_box(B, x[None, :])[0]):
        return INTERIOR
    nbrs = x[None, :] + direction_vectors(B.d)
    if not bool(in_box(B, nbrs).any()):
        return FAR
    if bool(on_positive_side(B, x[None, :])[0]):
        return POSITIVE_BOUNDARY
    return OTHER_BOUNDARY


def box_sites(B: BoxSpec) -> np.ndarray:
    """All lattice sites of B, lexicographically ordered, shape (n, d)."""
    R = B.rotation
    d = B.d
    half = np.abs(R[:, 0]) * max(B.L_minus, B.L_plus) + np.abs(R[:, 1:]).sum(axis=1) * B.L_tilde
    los = np.ceil(-half).astype(np.int64)
    his = np.floor(half).astype(np.int64)
    total = np.prod((his - los + 1).astype(np.float64))
    if total > ENUM_LIMIT:
        raise ValueError(f"bounding grid has {total:.3g} candidate sites, above {ENUM_LIMIT}")
    axes = [np.arange(lo, hi + 1, dtype=np.int64) for lo, hi in zip(los, his)]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
    sites = grid[in_box(B, grid)]
    return sites  # meshgrid 'ij' order is already lexicographic


def boundary_sites(B: BoxSpec, interior: np.ndarray | None = None) -> np.ndarray:
    """Sites outside B adjacent to B, lexicographically ordered."""
    if interior is None:
        interior = box_sites(B)
    steps = direction_vectors(B.d)
    nbrs = (interior[:, None, :] + steps[None, :, :]).reshape(-1, B.d)
    nbrs = np.unique(nbrs, axis=0)
    return nbrs[~in_box(B, nbrs)]


def slab_exit_test(l, b_minus: float, b_plus: float, x) -> str:
    """'plus' once x.l >= b_plus, 'minus' once x.l <= -b_minus, else 'none'."""
    if b_minus <= 0 or b_plus <= 0:
        raise ValueError("slab thresholds must be positive")
    f = float(np.asarray(x, dtype=np.float64) @ np.asarray(l, dtype=np.float64))
    if f >= b_plus:
        return "plus"
    if f <= -b_minus:
        return "minus"
    return "none"
