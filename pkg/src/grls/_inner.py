"""Structured worst-case subspace machinery.

The inner maximizer works with B(lam) = A + lam * Yh Yh^T where A = V C V^T is
symmetric with a handful of generator columns V (n x j) and Yh is the n x k
center basis. Split the ambient space along

    R = span(P_h V)        (inside span(Yh), dim r <= j)
    N = span((I - P_h) V)  (orthogonal to span(Yh))
    U = [R | N]            (n x s orthonormal, s = r + dim N)

U spans an invariant subspace of B(lam) for every lam, and on its orthogonal
complement B acts as lam on span(Yh) minus R and as zero elsewhere. Hence

    spectrum(B) = eig(A2 + lam * diag(1_r, 0))      (s values, "block")
                  + {lam} with multiplicity k - r
                  + {0}   with multiplicity n - k - (s - r)

with A2 = U^T A U. The overlap of a block eigenvector w with span(Yh) is the
energy of its first r coordinates, the lam-copies have overlap 1, the zeros
overlap 0. Top-k selection, the chordal distance to the center, worst-case
projector actions, and the boundary-tie rotation all reduce to this s x s
block plus counting, which is what makes the solver loop cheap.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "InteractionBlock",
    "Selection",
    "build_block",
    "eval_distance",
    "select_top_k",
    "rotate_to_radius",
]

# Candidate kinds inside the selection multiset.
KIND_BLOCK = 0
KIND_CENTER = 1  # eigenvalue lam, eigenvectors inside span(Yh) minus R
KIND_ZERO = 2

_DROP_TOL = 1e-13


def orth_cols(X: np.ndarray, scale: float) -> np.ndarray:
    """Orthonormal basis of the column span of X via modified Gram-Schmidt.

    Columns whose residual falls below _DROP_TOL * scale are dropped, so the
    output columns are exact linear combinations of the inputs (membership in
    span(Yh) or its complement is preserved).
    """
    n = X.shape[0]
    cols = []
    drop = (_DROP_TOL * scale) ** 2
    for j in range(X.shape[1]):
        v = X[:, j].copy()
        for q in cols:
            v -= q * (q @ v)
        nv2 = v @ v
        if nv2 > drop:
            v /= np.sqrt(nv2)
            # second pass for orthogonality at working precision
            for q in cols:
                v -= q * (q @ v)
            v /= np.sqrt(v @ v)
            cols.append(v)
    if not cols:
        return np.zeros((n, 0))
    return np.column_stack(cols)


@dataclass
class InteractionBlock:
    """Per-point compression of B(lam) onto the interaction subspace."""

    U: np.ndarray       # n x s, first r columns inside span(Yh), rest orthogonal
    A2: np.ndarray      # s x s symmetric, U^T A U
    r: int
    s: int
    k: int
    n: int
    trace_norm: float   # nuclear norm of A, exact
    spec_bound: float   # upper bound on |eig(A)|


def resnap_span(cols: np.ndarray, Yh: np.ndarray, inside: bool) -> np.ndarray:
    """Re-project orthonormal columns exactly onto span(Yh) or its complement
    and re-orthonormalize.

    Columns produced by normalizing small residuals carry span-membership
    dust of order eps * scale / residual, which would otherwise leak into the
    lifted basis; one projection pass pushes it back to working precision.
    """
    if cols.shape[1] == 0:
        return cols
    proj = Yh @ (Yh.T @ cols)
    snapped = proj if inside else cols - proj
    return orth_cols(snapped, 1.0)


def build_block(
    V: np.ndarray,
    C: np.ndarray,
    Yh: np.ndarray,
    *,
    PV: np.ndarray | None = None,
) -> InteractionBlock:
    """Compress A = V C V^T against the center basis Yh.

    PV may be supplied when the in-span components Yh (Yh^T V) were already
    computed by the caller.
    """
    n, k = Yh.shape
    if PV is None:
        PV = Yh @ (Yh.T @ V)
    Vp = V - PV
    norms = np.linalg.norm(V, axis=0)
    scale = float(np.max(norms)) if norms.size else 1.0
    if scale == 0.0:
        scale = 1.0
    R = resnap_span(orth_cols(PV, scale), Yh, inside=True)
    N = resnap_span(orth_cols(Vp, scale), Yh, inside=False)
    r = R.shape[1]
    U = np.hstack([R, N]) if N.size else R
    s = U.shape[1]
    W = U.T @ V if s else np.zeros((0, V.shape[1]))
    A2 = W @ C @ W.T
    A2 = 0.5 * (A2 + A2.T)
    # exact nuclear norm of A from the j x j compression in span(V)
    Q = orth_cols(V, scale)
    if Q.shape[1]:
        Wq = Q.T @ V
        small = Wq @ C @ Wq.T
        eigs = np.linalg.eigvalsh(0.5 * (small + small.T))
        tn = float(np.sum(np.abs(eigs)))
        sb = float(np.max(np.abs(eigs))) if eigs.size else 0.0
    else:
        tn, sb = 0.0, 0.0
    return InteractionBlock(U=U, A2=A2, r=r, s=s, k=k, n=n, trace_norm=tn, spec_bound=sb)


@dataclass
class Selection:
    """Result of picking the k algebraically largest eigendirections."""

    lam: float
    dist_sq: float            # chordal distance squared to the center
    theta: np.ndarray         # block eigenvalues, descending
    ov: np.ndarray            # block overlaps with span(Yh), same order
    W: np.ndarray             # block eigenvectors (s x s), columns match theta
    picks: list               # merge-ordered (kind, index_or_count) tuples
    block_sel: list           # indices into theta of selected block vectors
    n_center: int             # lam-copies selected (of k - r available)
    n_zero: int               # zero-copies selected
    last_key: tuple           # (value, overlap) of the k-th selection
    next_key: tuple | None    # (value, overlap) of the (k+1)-th candidate
    last_pick: tuple          # (kind, block index or -1) of the k-th selection
    next_pick: tuple | None   # same for the (k+1)-th candidate
    degenerate: bool          # k-th and (k+1)-th eigenvalues tie


def _sorted_block(theta: np.ndarray, ov: np.ndarray):
    idx = sorted(range(theta.size), key=lambda i: (-theta[i], -ov[i]))
    return idx


def _select_no_center(theta, ov, W, m_zero, k, tie_tol) -> "Selection":
    """Bulk selection when there is no lam-group: candidates are the block
    values plus a zero group, so the merge reduces to one insertion point."""
    order = np.lexsort((-ov, -theta))
    s = theta.size
    ins = int(np.sum(theta[order] >= 0.0))  # zero group slots after these
    n_before = min(k, ins)
    rem = k - n_before
    n_zero = min(rem, m_zero)
    rem -= n_zero
    tail = order[ins : ins + rem] if rem > 0 else order[:0]
    head = order[:n_before]
    block_sel = np.concatenate([head, tail]).astype(np.intp)
    if n_zero:
        picks = [(KIND_BLOCK, int(i)) for i in head]
        picks.append((KIND_ZERO, n_zero))
        picks.extend((KIND_BLOCK, int(i)) for i in tail)
    else:
        picks = []  # merge order == block_sel order; walkers use the fast path
    sum_ov = float(np.sum(ov[head])) + float(np.sum(ov[tail]))
    # k-th selection and the first leftover candidate
    if rem > 0:
        last = (float(theta[tail[-1]]), float(ov[tail[-1]]), KIND_BLOCK, int(tail[-1]))
    elif n_zero:
        last = (0.0, 0.0, KIND_ZERO, -1)
    else:
        last = (float(theta[head[-1]]), float(ov[head[-1]]), KIND_BLOCK, int(head[-1]))
    heads = []
    nxt_block = ins + rem if rem > 0 or n_zero else n_before
    if nxt_block < s:
        i = int(order[nxt_block])
        heads.append((float(theta[i]), float(ov[i]), KIND_BLOCK, i))
    if m_zero - n_zero > 0:
        heads.append((0.0, 0.0, KIND_ZERO, -1))
    nxt = max(heads, key=lambda h: (h[0], h[1])) if heads else None
    degenerate = nxt is not None and abs(last[0] - nxt[0]) <= tie_tol
    return Selection(
        lam=0.0,
        dist_sq=max(0.0, k - sum_ov),
        theta=theta,
        ov=ov,
        W=W,
        picks=picks,
        block_sel=list(map(int, block_sel)),
        n_center=0,
        n_zero=n_zero,
        last_key=(last[0], last[1]),
        next_key=(nxt[0], nxt[1]) if nxt else None,
        last_pick=(last[2], last[3]),
        next_pick=(nxt[2], nxt[3]) if nxt else None,
        degenerate=degenerate,
    )


def select_top_k(
    theta: np.ndarray,
    ov: np.ndarray,
    W: np.ndarray,
    lam: float,
    m_center: int,
    m_zero: int,
    k: int,
    tie_tol: float,
) -> Selection:
    """Merge the block values with the lam- and zero-eigenvalue groups and pick
    the k largest by (eigenvalue, overlap with the center).

    Group members are identical so they are taken in bulk; on exact key ties
    the center group wins, then block vectors, then zeros, which keeps the
    choice deterministic.
    """
    if m_center == 0 and theta.size >= 16:
        return _select_no_center(theta, ov, W, m_zero, k, tie_tol)
    order = _sorted_block(theta, ov)
    picks = []
    block_sel = []
    n_center = 0
    n_zero = 0
    sum_ov = 0.0
    remaining = k
    bp = 0
    c_left = m_center
    z_left = m_zero
    keys = []  # (value, overlap, kind, block index) in merge order
    while remaining > 0:
        bh = None
        if bp < len(order):
            i = order[bp]
            bh = (theta[i], ov[i])
        ch = (lam, 1.0) if c_left > 0 else None
        zh = (0.0, 0.0) if z_left > 0 else None
        # pick the largest head; center beats block beats zero on exact ties
        best = KIND_ZERO
        best_key = zh
        if bh is not None and (best_key is None or bh >= best_key):
            best, best_key = KIND_BLOCK, bh
        if ch is not None and (best_key is None or ch >= best_key):
            best, best_key = KIND_CENTER, ch
        if best_key is None:
            raise AssertionError("ran out of candidates before k picks")
        if best == KIND_BLOCK:
            i = order[bp]
            block_sel.append(i)
            picks.append((KIND_BLOCK, i))
            keys.append((theta[i], ov[i], KIND_BLOCK, i))
            sum_ov += ov[i]
            bp += 1
            remaining -= 1
        elif best == KIND_CENTER:
            t = min(c_left, remaining)
            n_center += t
            picks.append((KIND_CENTER, t))
            keys.extend([(lam, 1.0, KIND_CENTER, -1)] * t)
            sum_ov += t
            c_left -= t
            remaining -= t
        else:
            t = min(z_left, remaining)
            n_zero += t
            picks.append((KIND_ZERO, t))
            keys.extend([(0.0, 0.0, KIND_ZERO, -1)] * t)
            z_left -= t
            remaining -= t
    # the first unselected candidate, for degeneracy detection and rotation
    heads = []
    if bp < len(order):
        i = order[bp]
        heads.append((theta[i], ov[i], KIND_BLOCK, i))
    if c_left > 0:
        heads.append((lam, 1.0, KIND_CENTER, -1))
    if z_left > 0:
        heads.append((0.0, 0.0, KIND_ZERO, -1))
    nxt = max(heads, key=lambda h: (h[0], h[1])) if heads else None
    last = keys[-1]
    degenerate = nxt is not None and abs(last[0] - nxt[0]) <= tie_tol
    return Selection(
        lam=lam,
        dist_sq=max(0.0, k - sum_ov),
        theta=theta,
        ov=ov,
        W=W,
        picks=picks,
        block_sel=block_sel,
        n_center=n_center,
        n_zero=n_zero,
        last_key=(last[0], last[1]),
        next_key=(nxt[0], nxt[1]) if nxt else None,
        last_pick=(last[2], last[3]),
        next_pick=(nxt[2], nxt[3]) if nxt else None,
        degenerate=degenerate,
    )


def eval_distance(
    block: InteractionBlock, lam: float, tie_tol_rel: float = 1e-10
) -> Selection:
    """Full selection at a single multiplier value."""
    s, r, k, n = block.s, block.r, block.k, block.n
    if s:
        Bs = block.A2.copy()
        if r:
            Bs[np.arange(r), np.arange(r)] += lam
        theta, W = np.linalg.eigh(Bs)
        ov = np.sum(W[:r, :] ** 2, axis=0) if r else np.zeros(s)
    else:
        theta = np.zeros(0)
        ov = np.zeros(0)
        W = np.zeros((0, 0))
    spec = max(block.spec_bound + abs(lam), abs(lam), 1e-30)
    return select_top_k(
        theta, ov, W, lam, k - r, n - k - (s - r), k, tie_tol_rel * spec
    )


def center_complement(block: InteractionBlock, Yh: np.ndarray) -> np.ndarray:
    """Orthonormal basis of span(Yh) minus R, the lam-eigenspace of B.

    Built as Yh times the null space of R^T Yh, so the columns are exactly
    orthonormal and deterministic.
    """
    r = block.r
    if r == 0:
        return Yh
    RtY = block.U[:, :r].T @ Yh
    _, _, vh = np.linalg.svd(RtY)
    return Yh @ vh[r:].T


def complete_orthogonal(basis: np.ndarray, count: int) -> np.ndarray:
    """Deterministic orthonormal completion: the `count` standard basis
    vectors with the largest residual after projecting out `basis`, in
    residual order, Gram-Schmidt orthonormalized."""
    n = basis.shape[0]
    if count == 0:
        return np.zeros((n, 0))
    resid = 1.0 - np.sum(basis**2, axis=1)
    order = np.argsort(-resid, kind="stable")
    cols = []
    for i in order:
        v = np.zeros(n)
        v[i] = 1.0
        v -= basis @ (basis.T @ v)
        for q in cols:
            v -= q * (q @ v)
        nv = np.linalg.norm(v)
        if nv > 1e-8:
            cols.append(v / nv)
        if len(cols) == count:
            break
    if len(cols) < count:
        raise AssertionError("orthogonal completion failed")
    return np.column_stack(cols)


def materialize(
    block: InteractionBlock,
    sel: Selection,
    Yh: np.ndarray,
    rotation: tuple | None = None,
) -> np.ndarray:
    """Explicit n x k basis of the selected top-k eigenspace, columns in merge
    order (eigenvalue descending, overlap descending).

    rotation, when given, is (c, s, next_kind, next_idx): the k-th column is
    replaced by c * v_k + s * v_next to land exactly on the ball boundary.
    """
    n, k = block.n, block.k
    Z = center_complement(block, Yh)
    need_zero = sel.n_zero + (
        1 if rotation is not None and rotation[2] == KIND_ZERO else 0
    )
    cols = np.empty((n, k))
    j = 0
    z_used = 0
    zero_used = 0
    zero_basis = None
    if need_zero:
        span = np.hstack([Yh, block.U[:, block.r :]])
        zero_basis = complete_orthogonal(span, need_zero)
    block_cols, block_pos = [], []
    for kind, val in sel.picks:
        if kind == KIND_BLOCK:
            block_cols.append(val)
            block_pos.append(j)
            j += 1
        elif kind == KIND_CENTER:
            cols[:, j : j + val] = Z[:, z_used : z_used + val]
            z_used += val
            j += val
        else:
            cols[:, j : j + val] = zero_basis[:, zero_used : zero_used + val]
            zero_used += val
            j += val
    if block_cols:
        cols[:, block_pos] = block.U @ sel.W[:, block_cols]
    if rotation is not None:
        c, s, nkind, nidx = rotation
        if nkind == KIND_BLOCK:
            v_next = block.U @ sel.W[:, nidx]
        elif nkind == KIND_CENTER:
            v_next = Z[:, z_used]
        else:
            v_next = zero_basis[:, zero_used]
        cols[:, k - 1] = c * cols[:, k - 1] + s * v_next
    return cols


def rotate_to_radius(a_in: float, a_out: float, h: float, target: float):
    """Mix coefficients (c, s) with c*v_in + s*v_out achieving overlap target.

    The overlap of the mixed unit vector is c^2 a_in + 2 c s h + s^2 a_out.
    Returns None when the target is outside the attainable range.
    """
    mean = 0.5 * (a_in + a_out)
    half = 0.5 * (a_in - a_out)
    R = np.hypot(half, h)
    if R < 1e-300:
        return (1.0, 0.0) if abs(target - mean) < 1e-12 else None
    u = (target - mean) / R
    if abs(u) > 1.0 + 1e-9:
        return None
    u = float(np.clip(u, -1.0, 1.0))
    # overlap(t) = mean + R cos(2t - phi), phi = atan2(h, half)
    phi = np.arctan2(h, half)
    t = 0.5 * (phi + np.arccos(u))
    return (float(np.cos(t)), float(np.sin(t)))
