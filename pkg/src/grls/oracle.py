"""Brute-force verifiers. Nothing in the production path depends on this
module; it exists so every closed-form claim can be checked independently at
desk scale (exhaustive line grids, finite differences, dense eigensolvers).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .manifold import StiefelPoint, chordal_distance
from .solver import FactoredSymmetric, RobustLsqProblem, TopKResult, top_k_eigs

__all__ = [
    "GridSpec",
    "brute_force_inner_max",
    "grid_cell_error",
    "fd_gradient",
    "dense_eig_crosscheck",
    "dense_top_k",
]


@dataclass(frozen=True)
class GridSpec:
    """Exhaustive line grid: lines in R^n_amb parametrized by hyperspherical
    angles, resolution points per angular dimension."""

    resolution: int
    dims: tuple

    def __post_init__(self):
        n, k = self.dims
        if k != 1:
            raise ValueError("the grid oracle only covers one-dimensional subspaces")
        if not 2 <= n <= 4:
            raise ValueError("the grid oracle only covers ambient dimensions 2..4")
        if self.resolution < 100 and self.resolution ** (n - 1) < 100:
            raise ValueError("resolution too coarse for a meaningful oracle")

    @property
    def angle_step(self) -> float:
        return np.pi / self.resolution

    def directions(self) -> np.ndarray:
        """All grid lines as unit row vectors, shape (G, n)."""
        n = self.dims[0]
        res = self.resolution
        if n == 2:
            th = np.linspace(0.0, np.pi, res, endpoint=False)
            return np.column_stack([np.cos(th), np.sin(th)])
        axes = [np.linspace(0.0, np.pi, res, endpoint=False) for _ in range(n - 2)]
        axes.append(np.linspace(0.0, 2 * np.pi, res, endpoint=False))
        grids = np.meshgrid(*axes, indexing="ij")
        angles = np.stack([g.ravel() for g in grids], axis=1)
        G = angles.shape[0]
        y = np.empty((G, n))
        sin_prod = np.ones(G)
        for i in range(n - 1):
            y[:, i] = sin_prod * np.cos(angles[:, i])
            sin_prod = sin_prod * np.sin(angles[:, i])
        y[:, n - 1] = sin_prod
        return y


def _line_values(x: np.ndarray, prob: RobustLsqProblem, Y: np.ndarray) -> np.ndarray:
    """f(x, span(y)) for every unit row y of Y, vectorized."""
    t = Y @ x
    R = t[:, None] * Y - prob.b[None, :]
    vals = np.sum(R * R, axis=1)
    if prob.m_index.size:
        Rm = R[:, prob.m_index]
        vals = vals + prob.gamma * np.sum(Rm * Rm, axis=1)
    else:
        vals = vals + 0.0
    return vals


def brute_force_inner_max(
    x: np.ndarray, prob: RobustLsqProblem, grid: GridSpec
) -> tuple[StiefelPoint, float]:
    """Exhaustive maximization of the inner objective over all grid lines
    inside the ball. Ball membership for lines is |sin(angle to center)|
    <= radius."""
    x = np.asarray(x, dtype=float).reshape(-1)
    Y = grid.directions()
    yh = prob.ball.center.basis[:, 0]
    cosang = Y @ yh
    dist = np.sqrt(np.clip(1.0 - cosang**2, 0.0, None))
    inside = dist <= prob.ball.radius
    if not np.any(inside):
        # the center itself is always feasible; fall back to it
        best = yh
        return StiefelPoint(best[:, None]), float(
            _line_values(x, prob, best[None, :])[0]
        )
    Yin = Y[inside]
    vals = _line_values(x, prob, Yin)
    j = int(np.argmax(vals))
    return StiefelPoint(Yin[j][:, None]), float(vals[j])


def grid_cell_error(x: np.ndarray, prob: RobustLsqProblem, grid: GridSpec) -> float:
    """Analytic bound on the value gap between the grid maximum and the true
    ball maximum: Lipschitz constant of the line objective in arc length
    times the worst distance from a ball point to an in-ball grid point.

    |df/dy| <= (2 + 4 gamma) ||x||^2 + (4 + 4 gamma) ||x|| ||b|| on the unit
    sphere. A product-angle grid of step h covers the sphere to half a cell
    diagonal; the last axis spans a full turn (step 2h) and points near the
    ball boundary may lose their nearest neighbor to the ball filter, so the
    arc gap is bounded by h sqrt(n + 2).
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    nx = float(np.linalg.norm(x))
    nb = float(np.linalg.norm(prob.b))
    g = prob.gamma
    lip = (2.0 + 4.0 * g) * nx * nx + (4.0 + 4.0 * g) * nx * nb
    n = grid.dims[0]
    gap = np.sqrt(n + 2.0) * grid.angle_step
    return float(lip * gap)


def fd_gradient(
    objective: Callable[[np.ndarray], float], x: np.ndarray, h: float
) -> np.ndarray:
    """Central differences, component by component."""
    if h <= 0:
        raise ValueError("h must be positive")
    x = np.asarray(x, dtype=float).reshape(-1)
    g = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (objective(x + e) - objective(x - e)) / (2.0 * h)
    return g


def dense_top_k(
    A_factored: FactoredSymmetric, lam: float, Y_hat: StiefelPoint, k: int
) -> tuple[StiefelPoint, np.ndarray]:
    """Reference path: materialize B densely and take the top-k eigenvectors
    of a full symmetric eigendecomposition."""
    B = A_factored.dense() + lam * (Y_hat.basis @ Y_hat.basis.T)
    w, v = np.linalg.eigh(B)
    idx = np.argsort(-w, kind="stable")
    return StiefelPoint(v[:, idx[:k]]), w[idx]


def dense_eig_crosscheck(
    A_factored: FactoredSymmetric, lam: float, Y_hat: StiefelPoint, k: int
) -> float:
    """Chordal distance between the structured top-k subspace and the dense
    decomposition's."""
    if A_factored.n > 512:
        raise ValueError("dense cross-check capped at ambient dimension 512")
    structured: TopKResult = top_k_eigs(A_factored, lam, Y_hat, k)
    dense, _ = dense_top_k(A_factored, lam, Y_hat, k)
    return chordal_distance(structured.subspace, dense)
