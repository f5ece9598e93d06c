"""Subspace geometry: orthonormal bases, projectors, and metrics.

A k-dimensional subspace of R^n is represented by an n x k matrix with
orthonormal columns (a Stiefel representative). Projectors are materialized
only on demand; distances are computed from k x k overlap matrices, never
from n x n products.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, RankDeficient

__all__ = [
    "StiefelPoint",
    "Projector",
    "SubspaceBall",
    "orthonormalize",
    "projector",
    "chordal_distance",
    "gap_distance",
    "tangent_project",
    "fix_signs",
    "random_stiefel",
]

_ORTHO_TOL = 1e-10


def fix_signs(basis: np.ndarray) -> np.ndarray:
    """Flip column signs so the first entry of largest magnitude is positive.

    Deterministic convention used everywhere a basis is emitted, so fixtures
    and persisted files are reproducible.
    """
    basis = np.array(basis, dtype=float)
    if basis.size == 0:
        return basis
    lead = np.argmax(np.abs(basis), axis=0)
    signs = np.where(basis[lead, np.arange(basis.shape[1])] < 0, -1.0, 1.0)
    return basis * signs


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class StiefelPoint:
    """Orthonormal basis of a k-dimensional subspace of R^n_amb."""

    basis: np.ndarray

    def __post_init__(self):
        b = _frozen(np.atleast_2d(self.basis))
        object.__setattr__(self, "basis", b)
        n, k = b.shape
        if not (1 <= k <= n):
            raise ValueError(f"need 1 <= k <= n_amb, got k={k}, n_amb={n}")
        gram = b.T @ b
        if np.max(np.abs(gram - np.eye(k))) > _ORTHO_TOL:
            raise ValueError("columns are not orthonormal to 1e-10")

    @property
    def n_amb(self) -> int:
        return self.basis.shape[0]

    @property
    def k(self) -> int:
        return self.basis.shape[1]


@dataclass(frozen=True)
class Projector:
    """Symmetric idempotent matrix of rank k."""

    matrix: np.ndarray
    rank: int

    def __post_init__(self):
        object.__setattr__(self, "matrix", _frozen(self.matrix))


@dataclass(frozen=True)
class SubspaceBall:
    """Chordal-distance ball of given radius around a center subspace."""

    center: StiefelPoint
    radius: float

    def __post_init__(self):
        rmax = np.sqrt(self.center.k)
        if not (0.0 <= self.radius <= rmax + 1e-12):
            raise ValueError(
                f"radius must lie in [0, sqrt(k)] = [0, {rmax:.6g}], got {self.radius}"
            )


def orthonormalize(raw: np.ndarray) -> StiefelPoint:
    """Orthonormal basis of the column space of ``raw``.

    Raises RankDeficient when the numerical rank (singular values above
    1e-12 times the largest) is below the column count. Column signs follow
    the module convention.
    """
    raw = np.atleast_2d(np.asarray(raw, dtype=float))
    n, k = raw.shape
    u, s, _ = np.linalg.svd(raw, full_matrices=False)
    if s.size == 0 or np.sum(s > 1e-12 * s[0]) < k:
        raise RankDeficient(f"numerical rank {int(np.sum(s > 1e-12 * (s[0] if s.size else 1.0)))} < k={k}")
    return StiefelPoint(fix_signs(u[:, :k]))


def projector(Y: StiefelPoint) -> Projector:
    """Orthogonal projector onto span(Y), i.e. Y Y^T."""
    return Projector(matrix=Y.basis @ Y.basis.T, rank=Y.k)


def _check_pair(Y1: StiefelPoint, Y2: StiefelPoint) -> None:
    if (Y1.n_amb, Y1.k) != (Y2.n_amb, Y2.k):
        raise DimensionMismatch(
            f"({Y1.n_amb},{Y1.k}) vs ({Y2.n_amb},{Y2.k})"
        )


def _sine_residual(Y1: StiefelPoint, Y2: StiefelPoint) -> np.ndarray:
    """(I - Y1 Y1^T) Y2, whose singular values are the sines of the principal
    angles. Evaluating distances through this residual realizes the trace
    identity k - ||Y1^T Y2||_F^2 without the cancellation that floors the
    direct formula at sqrt(eps) for coincident subspaces."""
    return Y2.basis - Y1.basis @ (Y1.basis.T @ Y2.basis)


def chordal_distance(Y1: StiefelPoint, Y2: StiefelPoint) -> float:
    """sqrt(k - ||Y1^T Y2||_F^2) = sqrt(Tr(P1_perp P2)), the root-sum-square
    of the principal-angle sines; symmetric and bounded by sqrt(k)."""
    _check_pair(Y1, Y2)
    d = float(np.linalg.norm(_sine_residual(Y1, Y2)))
    return min(d, float(np.sqrt(Y1.k)))


def gap_distance(Y1: StiefelPoint, Y2: StiefelPoint) -> float:
    """Spectral norm of the projector difference (sine of the largest
    principal angle), in [0, 1]."""
    _check_pair(Y1, Y2)
    s = np.linalg.svd(_sine_residual(Y1, Y2), compute_uv=False)
    return min(float(s[0]) if s.size else 0.0, 1.0)


def tangent_project(Y: StiefelPoint, G: np.ndarray) -> np.ndarray:
    """Project G onto the horizontal tangent space at Y: (I - Y Y^T) G."""
    G = np.atleast_2d(np.asarray(G, dtype=float))
    if G.shape != (Y.n_amb, Y.k):
        raise DimensionMismatch(f"G has shape {G.shape}, expected {(Y.n_amb, Y.k)}")
    return G - Y.basis @ (Y.basis.T @ G)


def random_stiefel(n: int, k: int, rng: np.random.Generator) -> StiefelPoint:
    """Haar-ish random subspace representative (orthonormalized Gaussian)."""
    return orthonormalize(rng.standard_normal((n, k)))
