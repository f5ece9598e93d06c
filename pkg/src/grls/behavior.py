"""Behavioral data handling: Hankel matrices, excitation checks, and subspace
identification of finite-horizon behaviors from trajectory data.

A length-L window of a q-channel trajectory, stacked sample-by-sample, lives
in R^(qL). For a minimal LTI system with m inputs and n_x states the set of
all such windows is an (m L + n_x)-dimensional subspace once L exceeds the
lag, and it equals the column space of the depth-L Hankel matrix whenever the
data is exciting enough (rank m L + n_x).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import HorizonTooShort, InsufficientColumns, NotDetectable
from .manifold import StiefelPoint, fix_signs

__all__ = [
    "Trajectory",
    "BehaviorEstimate",
    "GpeResult",
    "hankel",
    "behavior_dimension",
    "gpe_check",
    "identify_subspace",
    "lag",
    "read_trajectory_csv",
    "write_trajectory_csv",
    "save_estimate",
    "load_estimate",
]


@dataclass(frozen=True)
class Trajectory:
    """T samples of a q-dimensional signal, stored as a (T, q) array."""

    samples: np.ndarray

    def __post_init__(self):
        s = np.atleast_2d(np.asarray(self.samples, dtype=float))
        if s.shape[0] < 1:
            raise ValueError("need at least one sample")
        s = np.ascontiguousarray(s)
        s.flags.writeable = False
        object.__setattr__(self, "samples", s)

    @property
    def T(self) -> int:
        return self.samples.shape[0]

    @property
    def q(self) -> int:
        return self.samples.shape[1]


@dataclass(frozen=True)
class BehaviorEstimate:
    """Identified restricted behavior plus the singular-value diagnostics of
    the Hankel matrix it was cut from."""

    subspace: StiefelPoint
    L: int
    k: int
    singular_values: np.ndarray

    def __post_init__(self):
        if self.k != self.subspace.k:
            raise ValueError("k must match the subspace dimension")
        if self.subspace.n_amb % self.L != 0:
            raise ValueError("ambient dimension must be q * L")

    @property
    def q(self) -> int:
        return self.subspace.n_amb // self.L


class GpeResult(NamedTuple):
    passed: bool
    rank: int


def hankel(w: Trajectory, L: int) -> np.ndarray:
    """Depth-L block Hankel matrix of shape (q L) x (T - L + 1); column j
    stacks the window w(j), ..., w(j + L - 1)."""
    if L < 1:
        raise ValueError("L must be at least 1")
    if w.T < L:
        raise HorizonTooShort(f"T = {w.T} < L = {L}")
    T, q = w.T, w.q
    cols = T - L + 1
    H = np.empty((q * L, cols))
    for i in range(L):
        H[i * q : (i + 1) * q, :] = w.samples[i : i + cols, :].T
    return H


def behavior_dimension(m: int, n_x: int, L: int) -> int:
    """Dimension m L + n_x of the restricted behavior for window length L at
    or above the lag."""
    if L < 1 or m < 0 or n_x < 0:
        raise ValueError("need L >= 1, m >= 0, n_x >= 0")
    return m * L + n_x


def gpe_check(H: np.ndarray, expected_rank: int, rel_tol: float = 1e-8) -> GpeResult:
    """Numerical-rank excitation check: rank = number of singular values above
    rel_tol times the largest; passes iff it equals expected_rank."""
    H = np.atleast_2d(np.asarray(H, dtype=float))
    if H.size == 0:
        raise ValueError("empty matrix")
    if rel_tol <= 0:
        raise ValueError("rel_tol must be positive")
    s = np.linalg.svd(H, compute_uv=False)
    rank = int(np.sum(s > rel_tol * s[0])) if s[0] > 0 else 0
    return GpeResult(passed=rank == expected_rank, rank=rank)


def identify_subspace(w_data: Trajectory, L: int, k: int) -> BehaviorEstimate:
    """Truncated SVD of the Hankel matrix: the estimate spans the top-k left
    singular vectors, sign-fixed for reproducibility. All singular values are
    kept for diagnostics."""
    H = hankel(w_data, L)
    if H.shape[1] < k:
        raise InsufficientColumns(
            f"{H.shape[1]} Hankel columns < k = {k}; lengthen the data horizon"
        )
    U, s, _ = np.linalg.svd(H, full_matrices=False)
    basis = fix_signs(U[:, :k])
    return BehaviorEstimate(
        subspace=StiefelPoint(basis), L=L, k=k, singular_values=s
    )


def lag(system) -> int:
    """Smallest window depth at which the observability rank stabilizes.

    Raises NotDetectable when the stabilized rank is below the state
    dimension.
    """
    A, C, n_x = system.A, system.C, system.n_x
    blocks = [C]
    for _ in range(n_x):
        blocks.append(blocks[-1] @ A)

    def obs_rank(ell: int) -> int:
        O = np.vstack(blocks[:ell])
        s = np.linalg.svd(O, compute_uv=False)
        return int(np.sum(s > 1e-10 * s[0])) if s.size and s[0] > 0 else 0

    prev = obs_rank(1)
    for ell in range(1, n_x + 1):
        nxt = obs_rank(ell + 1)
        if nxt == prev:
            if prev < n_x:
                raise NotDetectable(prev, n_x)
            return ell
        prev = nxt
    if prev < n_x:
        raise NotDetectable(prev, n_x)
    return n_x


def write_trajectory_csv(w: Trajectory, path) -> None:
    """Header t,w_1,...,w_q; one row per time step, full precision."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t"] + [f"w_{i + 1}" for i in range(w.q)])
        for t in range(w.T):
            writer.writerow([t + 1] + [repr(float(v)) for v in w.samples[t]])


def read_trajectory_csv(path) -> Trajectory:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        q = len(header) - 1
        rows = [[float(v) for v in row[1 : q + 1]] for row in reader if row]
    return Trajectory(np.asarray(rows))


def save_estimate(est: BehaviorEstimate, path) -> None:
    """Binary persistence (exact round trip)."""
    np.savez(
        path,
        basis=est.subspace.basis,
        L=est.L,
        k=est.k,
        singular_values=est.singular_values,
    )


def load_estimate(path) -> BehaviorEstimate:
    with np.load(path) as data:
        return BehaviorEstimate(
            subspace=StiefelPoint(data["basis"]),
            L=int(data["L"]),
            k=int(data["k"]),
            singular_values=data["singular_values"],
        )
