"""Robust least-squares over a subspace uncertainty ball.

Solves

    min_x  max_{Y in ball(Yh, rho)}  ||P_Y x - b||^2 + gamma ||M (P_Y x - b)||^2

by gradient descent on x with a closed-form worst-case subspace per iterate:
Y*(x) spans the top-k eigenvectors of B(x, lam*) = A(x) + lam* Yh Yh^T, where
A(x) is a symmetric matrix with three generator vectors {x, b, M^T M b} and
lam* >= 0 enforces complementary slackness on the ball constraint. Everything
n x n stays in factored form; per-iterate cost is O(n (k + 3)^2).
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from . import _inner
from ._backend import lambda_search
from ._inner import KIND_BLOCK, KIND_CENTER
from .errors import BracketFailure, DimensionMismatch
from .manifold import StiefelPoint, SubspaceBall, fix_signs

__all__ = [
    "RobustLsqProblem",
    "SolverOptions",
    "InnerSolution",
    "SolverResult",
    "FactoredSymmetric",
    "TopKResult",
    "cost",
    "build_A",
    "top_k_eigs",
    "structured_top_k",
    "find_lambda",
    "grad_x",
    "solve",
    "riemannian_residual",
    "write_trace_csv",
]


def _as_row_index(M, n: int) -> np.ndarray:
    """Selector rows as an index vector; accepts a dense 0/1 selector matrix
    or an iterable of row indices."""
    M = np.asarray(M)
    if M.ndim == 2:
        if M.shape[1] != n:
            raise DimensionMismatch(f"selector has {M.shape[1]} columns, expected {n}")
        idx = []
        for row in M:
            ones = np.flatnonzero(row == 1.0)
            if ones.size != 1 or np.count_nonzero(row) != 1:
                raise ValueError("selector rows must be distinct standard basis vectors")
            idx.append(int(ones[0]))
        idx = np.asarray(idx, dtype=np.intp)
    else:
        idx = M.astype(np.intp).reshape(-1)
    if idx.size and (np.unique(idx).size != idx.size or idx.min() < 0 or idx.max() >= n):
        raise ValueError("selector indices must be distinct and within range")
    return idx


@dataclass(frozen=True)
class RobustLsqProblem:
    """One robust least-squares instance.

    M may be given as a dense selector matrix (one unit entry per row, at most
    one per column) or directly as the selected coordinate indices.
    """

    ball: SubspaceBall
    b: np.ndarray
    M: np.ndarray | Sequence[int]
    gamma: float
    mu: float = 0.0

    def __post_init__(self):
        b = np.asarray(self.b, dtype=float).reshape(-1)
        n = self.ball.center.n_amb
        if b.size != n:
            raise DimensionMismatch(f"b has size {b.size}, expected {n}")
        if self.gamma < 0:
            raise ValueError("gamma must be nonnegative")
        if self.mu < 0:
            raise ValueError("mu must be nonnegative")
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "_m_index", _as_row_index(self.M, n))

    @property
    def m_index(self) -> np.ndarray:
        return self._m_index

    @property
    def selector(self) -> np.ndarray:
        """Dense l x n selector matrix."""
        n = self.ball.center.n_amb
        M = np.zeros((self._m_index.size, n))
        M[np.arange(self._m_index.size), self._m_index] = 1.0
        return M

    @property
    def n_amb(self) -> int:
        return self.ball.center.n_amb

    @property
    def k(self) -> int:
        return self.ball.center.k

    def masked(self, r: np.ndarray) -> np.ndarray:
        """M^T M r: zero out the unselected coordinates."""
        out = np.zeros_like(r)
        out[self._m_index] = r[self._m_index]
        return out


@dataclass(frozen=True)
class SolverOptions:
    alpha: float = 0.1
    tolx: float = 1e-6
    max_iter: int = 20000
    lambda_tol: float | None = None  # default 1e-8 * sqrt(k), set per problem
    x0: np.ndarray | None = None
    clamp_alpha: bool = False
    record_iterates: bool = False
    profile: bool = False

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if self.tolx <= 0:
            raise ValueError("tolx must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be positive")
        if self.lambda_tol is not None and self.lambda_tol <= 0:
            raise ValueError("lambda_tol must be positive")


@dataclass(frozen=True)
class InnerSolution:
    Y_star: StiefelPoint
    lambda_star: float
    value: float
    boundary: bool
    degenerate: bool = False
    degenerate_jump: bool = False


@dataclass
class SolverResult:
    x_star: np.ndarray
    inner: InnerSolution
    w_star: np.ndarray
    iterations: int
    cost_trace: np.ndarray
    gradnorm_trace: np.ndarray
    lambda_trace: np.ndarray
    boundary_trace: np.ndarray
    converged: bool
    nonmonotone_steps: int = 0
    iterates: list = field(default_factory=list)
    timings: dict = field(default_factory=dict)


class TopKResult(NamedTuple):
    subspace: StiefelPoint
    degenerate: bool
    eigenvalues: np.ndarray


@dataclass(frozen=True)
class FactoredSymmetric:
    """Symmetric matrix V C V^T kept as generators plus a small coefficient
    matrix; dense materialization is reserved for oracles and tests."""

    V: np.ndarray
    C: np.ndarray
    x: np.ndarray | None = None  # the iterate the matrix was built from, if any

    def dense(self) -> np.ndarray:
        A = self.V @ self.C @ self.V.T
        return 0.5 * (A + A.T)

    def matmat(self, X: np.ndarray) -> np.ndarray:
        return self.V @ (self.C @ (self.V.T @ X))

    @property
    def n(self) -> int:
        return self.V.shape[0]


def cost(x: np.ndarray, Y: StiefelPoint, prob: RobustLsqProblem) -> float:
    """f(x, Y) = ||P_Y x - b||^2 + gamma ||M(P_Y x - b)||^2 (+ mu ||x||^2),
    computed through Y (Y^T x) without forming the projector."""
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.size != prob.n_amb:
        raise DimensionMismatch(f"x has size {x.size}, expected {prob.n_amb}")
    if Y.n_amb != prob.n_amb:
        raise DimensionMismatch("Y lives in the wrong ambient dimension")
    r = Y.basis @ (Y.basis.T @ x) - prob.b
    val = float(r @ r + prob.gamma * float(r[prob.m_index] @ r[prob.m_index]))
    if prob.mu > 0:
        val += prob.mu * float(x @ x)
    return val


def build_A(x: np.ndarray, prob: RobustLsqProblem) -> FactoredSymmetric:
    """A(x) = (1+gamma) x x^T - x g^T - g x^T with g = b + gamma M^T M b,
    stored over the generators {x, b, M^T M b}."""
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.size != prob.n_amb:
        raise DimensionMismatch(f"x has size {x.size}, expected {prob.n_amb}")
    c = prob.masked(prob.b)
    V = np.column_stack([x, prob.b, c])
    g = prob.gamma
    C = np.array(
        [
            [1.0 + g, -1.0, -g],
            [-1.0, 0.0, 0.0],
            [-g, 0.0, 0.0],
        ]
    )
    return FactoredSymmetric(V=V, C=C, x=x)


def _default_lambda_tol(k: int) -> float:
    return 1e-8 * np.sqrt(k)


def structured_top_k(
    A_factored: FactoredSymmetric,
    lam: float,
    Y_hat: StiefelPoint,
    k: int,
) -> TopKResult:
    """Production top-k eigensolve through the interaction-block split.

    Same invariant subspace as top_k_eigs, computed from an eigenproblem of
    size at most twice the generator count instead of k + generators; this is
    the per-iteration path of the solver loop.
    """
    Yh = Y_hat.basis
    if k != Y_hat.k:
        raise DimensionMismatch("structured_top_k expects k to match the center")
    block = _inner.build_block(A_factored.V, A_factored.C, Yh)
    sel = _inner.eval_distance(block, lam)
    basis = fix_signs(_inner.materialize(block, sel, Yh))
    values = np.empty(k)
    j = 0
    for kind, val in sel.picks:
        if kind == KIND_BLOCK:
            values[j] = sel.theta[val]
            j += 1
        elif kind == KIND_CENTER:
            values[j : j + val] = lam
            j += val
        else:
            values[j : j + val] = 0.0
            j += val
    return TopKResult(
        subspace=StiefelPoint(basis), degenerate=sel.degenerate, eigenvalues=values
    )


def top_k_eigs(
    A_factored: FactoredSymmetric,
    lam: float,
    Y_hat: StiefelPoint,
    k: int,
) -> TopKResult:
    """Orthonormal basis of the invariant subspace of B = A + lam Yh Yh^T for
    its k algebraically largest eigenvalues.

    Eigenvectors with nonzero eigenvalue lie in S = span{Yh, generators of A},
    so the dense eigenproblem is solved on the (k + j)-dimensional compression
    Q^T B Q. When fewer than k eigenvalues exceed zero the basis is padded
    from the zero eigenspace, larger overlap with Yh first.
    """
    Yh = Y_hat.basis
    n, kc = Yh.shape
    if k > n:
        raise DimensionMismatch(f"k={k} exceeds ambient dimension {n}")
    V = A_factored.V
    YtV = Yh.T @ V
    scale = float(max(np.max(np.linalg.norm(V, axis=0), initial=0.0), 1e-300))
    ext = _inner.resnap_span(
        _inner.orth_cols(V - Yh @ YtV, scale), Yh, inside=False
    )
    m = kc + ext.shape[1]
    QV = np.vstack([YtV, ext.T @ V])
    T = QV @ A_factored.C @ QV.T
    T = 0.5 * (T + T.T)
    if lam:
        T[np.arange(kc), np.arange(kc)] += lam
    tau, Wt = np.linalg.eigh(T)
    # unit columns: overlap with span(Yh) = 1 - energy in the extension rows
    ov = 1.0 - np.sum(Wt[kc:, :] ** 2, axis=0)
    np.clip(ov, 0.0, 1.0, out=ov)
    spec = max(float(np.max(np.abs(tau), initial=0.0)), 1e-30)
    sel = _inner.select_top_k(
        tau, ov, Wt, 0.0, m_center=0, m_zero=n - m, k=k, tie_tol=1e-10 * spec
    )
    if sel.n_zero == 0:
        idx = np.asarray(sel.block_sel, dtype=np.intp)
        values = sel.theta[idx]
        Wsel = sel.W[:, idx]
        cols = Yh @ Wsel[:kc] + ext @ Wsel[kc:]
    else:
        cols = np.empty((n, k))
        j = 0
        zero_basis = _inner.complete_orthogonal(np.hstack([Yh, ext]), sel.n_zero)
        z_used = 0
        values = np.empty(k)
        block_cols, block_pos = [], []
        for kind, val in sel.picks:
            if kind == KIND_BLOCK:
                block_cols.append(val)
                block_pos.append(j)
                values[j] = sel.theta[val]
                j += 1
            else:  # zero pad (no separate center group in this compression)
                cols[:, j : j + val] = zero_basis[:, z_used : z_used + val]
                values[j : j + val] = 0.0
                z_used += val
                j += val
        if block_cols:
            Wsel = sel.W[:, block_cols]
            cols[:, block_pos] = Yh @ Wsel[:kc] + ext @ Wsel[kc:]
    return TopKResult(
        subspace=StiefelPoint(fix_signs(cols)),
        degenerate=sel.degenerate,
        eigenvalues=values,
    )


class _InnerState:
    """Worst-case subspace at one iterate, in lifted factored form."""

    __slots__ = (
        "engine",
        "block",
        "sel",
        "lam",
        "dist",
        "boundary",
        "degenerate",
        "degenerate_jump",
        "rotation",
        "_fast",
        "_Bsel",
        "_full",
    )

    def __init__(self, engine, block, sel, lam, dist, boundary, jump, rotation):
        self.engine = engine
        self.block = block
        self.sel = sel
        self.lam = lam
        self.dist = dist
        self.boundary = boundary
        self.degenerate = bool(sel.degenerate) if sel is not None else False
        self.degenerate_jump = jump
        self.rotation = rotation
        self._full = None
        if sel is None:  # rho = 0 shortcut: worst case is the center itself
            self._fast = True
            self._Bsel = np.zeros((engine.n, 0))
            return
        whole_center = sel.n_center == block.k - block.r
        self._fast = whole_center and sel.n_zero == 0 and rotation is None
        if self._fast:
            Wsel = sel.W[:, sel.block_sel] if sel.block_sel else np.zeros((block.s, 0))
            self._Bsel = block.U @ Wsel if block.s else np.zeros((engine.n, 0))
        else:
            self._Bsel = None

    def apply_proj(self, X: np.ndarray) -> np.ndarray:
        """P_{Y*} X for stacked column vectors X."""
        if self._fast:
            Yh = self.engine.Yh
            out = Yh @ (Yh.T @ X)
            if self.sel is not None and self.block is not None:
                r = self.block.r
                if r:
                    R = self.block.U[:, :r]
                    out -= R @ (R.T @ X)
                if self._Bsel.shape[1]:
                    out += self._Bsel @ (self._Bsel.T @ X)
            return out
        L = self.basis_matrix()
        return L @ (L.T @ X)

    def basis_matrix(self) -> np.ndarray:
        if self._full is None:
            if self.sel is None:
                self._full = self.engine.Yh
            else:
                self._full = _inner.materialize(
                    self.block, self.sel, self.engine.Yh, self.rotation
                )
        return self._full

    def to_solution(self, x: np.ndarray | None, prob: RobustLsqProblem) -> InnerSolution:
        basis = fix_signs(self.basis_matrix())
        Y = StiefelPoint(basis)
        if x is not None:
            r = basis @ (basis.T @ x) - prob.b
            value = float(r @ r + prob.gamma * float(r[prob.m_index] @ r[prob.m_index]))
        else:
            # trace objective Tr(P_Y A) plus the Y-independent constant
            bm = prob.masked(prob.b)
            const = float(prob.b @ prob.b + prob.gamma * float(bm @ bm))
            W = basis.T @ self.engine.V_for_value
            value = float(np.trace(W @ self.engine.C_for_value @ W.T)) + const
        return InnerSolution(
            Y_star=Y,
            lambda_star=self.lam,
            value=value,
            boundary=self.boundary,
            degenerate=self.degenerate,
            degenerate_jump=self.degenerate_jump,
        )


class _Engine:
    """Per-problem machinery shared across iterates."""

    def __init__(self, prob: RobustLsqProblem, lambda_tol: float):
        self.prob = prob
        self.Yh = prob.ball.center.basis
        self.n, self.k = self.Yh.shape
        self.rho = float(prob.ball.radius)
        self.lambda_tol = lambda_tol
        self.V_for_value = None
        self.C_for_value = None

    def inner(self, A_factored: FactoredSymmetric) -> _InnerState:
        if A_factored.n != self.n:
            raise DimensionMismatch(
                f"factored matrix lives in R^{A_factored.n}, expected R^{self.n}"
            )
        self.V_for_value = A_factored.V
        self.C_for_value = A_factored.C
        if self.rho == 0.0:
            return _InnerState(self, None, None, 0.0, 0.0, True, False, None)
        block = _inner.build_block(A_factored.V, A_factored.C, self.Yh)
        sel0 = _inner.eval_distance(block, 0.0)
        d0 = float(np.sqrt(sel0.dist_sq))
        if d0 <= self.rho:
            return _InnerState(self, block, sel0, 0.0, d0, False, False, None)
        lam_start = 1.0 + block.trace_norm
        lam_cap = 1e12 * max(1.0, block.trace_norm)
        lam, dist, status, nonmono = lambda_search(
            np.ascontiguousarray(block.A2),
            block.r,
            self.k,
            self.n,
            self.rho,
            self.lambda_tol,
            lam_start,
            lam_cap,
        )
        if nonmono:
            warnings.warn(
                "distance-vs-multiplier profile was not monotone; "
                "fallback scan engaged",
                RuntimeWarning,
                stacklevel=2,
            )
        if status == 2:
            raise BracketFailure(
                f"d(lam) = {dist:.3e} still above rho = {self.rho:.3e} at lam cap"
            )
        if status == 0:
            lam = self._polish(block, lam, dist)
        sel = _inner.eval_distance(block, lam)
        dist = float(np.sqrt(sel.dist_sq))
        rotation = None
        jump = False
        if status == 1 and abs(dist - self.rho) > self.lambda_tol:
            jump = True
            rotation = self._resolve_jump(block, sel)
            if rotation is not None:
                dist = self.rho
        return _InnerState(self, block, sel, lam, dist, True, jump, rotation)

    def _polish(self, block, lam: float, dist: float) -> float:
        """Secant refinement of the boundary multiplier.

        Bisection stops at |d - rho| <= lambda_tol, but the worst-case value
        responds to a radius miss at first order (envelope slope 2 lam rho),
        which is too coarse for finite-difference verification of the outer
        gradient. A few secant steps push the miss to machine scale.
        """
        atol = 1e-13 * max(1.0, np.sqrt(self.k))
        lam0, d0 = lam, dist
        lam1 = lam * (1.0 + 1e-7) + 1e-12
        d1 = float(np.sqrt(_inner.eval_distance(block, lam1).dist_sq))
        best_lam, best_err = lam0, abs(d0 - self.rho)
        for _ in range(12):
            if abs(d1 - self.rho) < best_err:
                best_lam, best_err = lam1, abs(d1 - self.rho)
            if best_err <= atol or d1 == d0:
                break
            step = (self.rho - d1) * (lam1 - lam0) / (d1 - d0)
            lam2 = lam1 + step
            if not np.isfinite(lam2) or lam2 < 0.0:
                break
            lam0, d0 = lam1, d1
            lam1 = lam2
            d1 = float(np.sqrt(_inner.eval_distance(block, lam1).dist_sq))
        if abs(d1 - self.rho) < best_err:
            best_lam = lam1
        return best_lam

    def _resolve_jump(self, block, sel):
        """Rotate inside the tied eigenspace so the worst case sits exactly on
        the ball boundary."""
        if sel.next_pick is None:
            return None
        target = (self.k - self.rho**2) - (self.k - sel.dist_sq - sel.last_key[1])
        kind_in, idx_in = sel.last_pick
        kind_out, idx_out = sel.next_pick
        v_in = self._pick_vector(block, sel, kind_in, idx_in, offset=0)
        v_out = self._pick_vector(block, sel, kind_out, idx_out, offset=1)
        Yh = self.Yh
        pi = Yh.T @ v_in
        po = Yh.T @ v_out
        a_in = float(pi @ pi)
        a_out = float(po @ po)
        h = float(pi @ po)
        cs = _inner.rotate_to_radius(a_in, a_out, h, target)
        if cs is None:
            return None
        return (cs[0], cs[1], kind_out, idx_out)

    def _pick_vector(self, block, sel, kind, idx, offset):
        if kind == KIND_BLOCK:
            return block.U @ sel.W[:, idx]
        if kind == KIND_CENTER:
            Z = _inner.center_complement(block, self.Yh)
            return Z[:, sel.n_center - 1 + offset]
        span = np.hstack([self.Yh, block.U[:, block.r :]])
        zeros = _inner.complete_orthogonal(span, sel.n_zero + offset)
        return zeros[:, sel.n_zero - 1 + offset]


def find_lambda(
    A_factored: FactoredSymmetric,
    prob: RobustLsqProblem,
    opts: SolverOptions | None = None,
) -> InnerSolution:
    """Worst-case subspace for one outer iterate.

    Complementary slackness first: if the unconstrained top-k eigenspace of A
    already sits inside the ball the multiplier is zero; otherwise lam* > 0 is
    bracketed by doubling and bisected until |d(lam) - rho| <= lambda_tol.
    """
    opts = opts or SolverOptions()
    lam_tol = opts.lambda_tol or _default_lambda_tol(prob.k)
    eng = _Engine(prob, lam_tol)
    state = eng.inner(A_factored)
    return state.to_solution(A_factored.x, prob)


def grad_x(x: np.ndarray, Y_star: StiefelPoint, prob: RobustLsqProblem) -> np.ndarray:
    """2 P(x - b) + 2 gamma P M^T M (P x - b) (+ 2 mu x) at P = P_{Y*},
    evaluated through k-dimensional contractions."""
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.size != prob.n_amb or Y_star.n_amb != prob.n_amb:
        raise DimensionMismatch("gradient operands are inconsistent")
    Yb = Y_star.basis
    xb = np.column_stack([x - prob.b, np.zeros_like(x)])
    w = Yb @ (Yb.T @ x)
    r = w - prob.b
    xb[:, 1] = prob.masked(r)
    proj = Yb @ (Yb.T @ xb)
    g = 2.0 * proj[:, 0] + 2.0 * prob.gamma * proj[:, 1]
    if prob.mu > 0:
        g += 2.0 * prob.mu * x
    return g


def riemannian_residual(
    A_factored: FactoredSymmetric,
    lam: float,
    Y_hat: StiefelPoint,
    Y: StiefelPoint,
) -> tuple[float, float]:
    """(||(I - Y Y^T) B Y||_F, ||B||_F) for B = A + lam Yh Yh^T, without
    forming B densely."""
    Yb = Y.basis
    Yh = Y_hat.basis
    G = A_factored.matmat(Yb) + lam * (Yh @ (Yh.T @ Yb))
    H = Yb.T @ G
    res = float(np.linalg.norm(G - Yb @ H))
    VtV = A_factored.V.T @ A_factored.V
    M1 = A_factored.C @ VtV
    fro2 = float(np.trace(M1 @ M1))
    VtY = A_factored.V.T @ Yh
    cross = float(np.trace(A_factored.C @ (VtY @ VtY.T)))
    fro2 += 2.0 * lam * cross + lam * lam * Y_hat.k
    return res, float(np.sqrt(max(fro2, 0.0)))


def solve(prob: RobustLsqProblem, opts: SolverOptions | None = None) -> SolverResult:
    """Gradient descent x_{i+1} = x_i - alpha grad with the closed-form worst
    case recomputed each iterate; stops at ||grad|| <= tolx or max_iter."""
    opts = opts or SolverOptions()
    amax = 1.0 / (1.0 + prob.gamma)
    alpha = opts.alpha
    if not alpha < amax:
        if opts.clamp_alpha:
            clamped = amax * (1.0 - 1e-3)
            warnings.warn(
                f"alpha = {alpha} violates alpha < 1/(1+gamma) = {amax:.6g}; "
                f"clamped to {clamped:.6g}",
                RuntimeWarning,
                stacklevel=2,
            )
            alpha = clamped
        else:
            raise ValueError(
                f"alpha = {alpha} violates the step-size bound alpha < 1/(1+gamma) = {amax:.6g}"
            )
    lam_tol = opts.lambda_tol or _default_lambda_tol(prob.k)
    eng = _Engine(prob, lam_tol)
    x = np.array(opts.x0 if opts.x0 is not None else prob.b, dtype=float).reshape(-1)
    if x.size != prob.n_amb:
        raise DimensionMismatch(f"x0 has size {x.size}, expected {prob.n_amb}")

    costs, gnorms, lams, bnds = [], [], [], []
    iterates = []
    nonmono = 0
    timings = {"inner": 0.0, "gradient": 0.0} if opts.profile else {}
    converged = False
    state = None
    b = prob.b
    midx = prob.m_index
    for _ in range(opts.max_iter):
        t0 = time.perf_counter() if opts.profile else 0.0
        state = eng.inner(build_A(x, prob))
        if opts.profile:
            t1 = time.perf_counter()
            timings["inner"] += t1 - t0
            t0 = t1
        X = np.column_stack([x, x - b])
        proj = state.apply_proj(X)
        w = proj[:, 0]
        r = w - b
        rm = r[midx]
        c_val = float(r @ r + prob.gamma * float(rm @ rm))
        if prob.mu > 0:
            c_val += prob.mu * float(x @ x)
        g = 2.0 * proj[:, 1] + 2.0 * prob.gamma * state.apply_proj(
            prob.masked(r)[:, None]
        )[:, 0]
        if prob.mu > 0:
            g += 2.0 * prob.mu * x
        if opts.profile:
            timings["gradient"] += time.perf_counter() - t0
        gn = float(np.linalg.norm(g))
        if costs and c_val > costs[-1] + 1e-10:
            nonmono += 1
            warnings.warn(
                f"robust objective increased by {c_val - costs[-1]:.3e} in one step",
                RuntimeWarning,
                stacklevel=2,
            )
        costs.append(c_val)
        gnorms.append(gn)
        lams.append(state.lam)
        bnds.append(state.boundary)
        if opts.record_iterates:
            iterates.append(x.copy())
        if gn <= opts.tolx:
            converged = True
            break
        x = x - alpha * g

    if not converged:
        # x moved after the last evaluated state; realign the worst case
        state = eng.inner(build_A(x, prob))
    inner_sol = state.to_solution(x, prob)
    w_star = state.apply_proj(x[:, None])[:, 0]
    return SolverResult(
        x_star=x,
        inner=inner_sol,
        w_star=w_star,
        iterations=len(costs),
        cost_trace=np.asarray(costs),
        gradnorm_trace=np.asarray(gnorms),
        lambda_trace=np.asarray(lams),
        boundary_trace=np.asarray(bnds, dtype=bool),
        converged=converged,
        nonmonotone_steps=nonmono,
        iterates=iterates,
        timings=timings,
    )


def write_trace_csv(result: SolverResult, path) -> None:
    """Convergence trace: iter,cost,gradnorm,lambda,boundary."""
    with open(path, "w") as fh:
        fh.write("iter,cost,gradnorm,lambda,boundary\n")
        for i in range(result.iterations):
            fh.write(
                f"{i},{float(result.cost_trace[i])!r},{float(result.gradnorm_trace[i])!r},"
                f"{float(result.lambda_trace[i])!r},{int(result.boundary_trace[i])}\n"
            )
