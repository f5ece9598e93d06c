# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Multiplier search, compiled kernel.

Same contract as grls._lambda_py.lambda_search: scalar bisection with a
cyclic-Jacobi eigensolver on the s x s interaction block (s is at most a few
times the generator count, so stack buffers suffice).
"""

from libc.math cimport fabs, sqrt, log10, pow

BACKEND = "compiled"

DEF SMAX = 16
DEF WIDTH_REL = 1e-13


cdef void _eig_sym(double* Aw, double* V, double* w, int s) noexcept nogil:
    """Cyclic Jacobi with eigenvector accumulation; Aw (row-major) destroyed."""
    cdef int i, j, p, q, sweep
    cdef double off, scale, app, aqq, apq, tau, t, c, sn, aip, aiq, vip, viq
    for i in range(s):
        for j in range(s):
            V[i * s + j] = 1.0 if i == j else 0.0
    scale = 0.0
    for i in range(s):
        for j in range(s):
            scale += fabs(Aw[i * s + j])
    if scale == 0.0:
        for i in range(s):
            w[i] = 0.0
        return
    for sweep in range(64):
        off = 0.0
        for p in range(s - 1):
            for q in range(p + 1, s):
                off += fabs(Aw[p * s + q])
        if off <= 1e-16 * scale:
            break
        for p in range(s - 1):
            for q in range(p + 1, s):
                apq = Aw[p * s + q]
                if fabs(apq) <= 1e-18 * scale:
                    continue
                app = Aw[p * s + p]
                aqq = Aw[q * s + q]
                tau = (aqq - app) / (2.0 * apq)
                if tau >= 0.0:
                    t = 1.0 / (tau + sqrt(1.0 + tau * tau))
                else:
                    t = -1.0 / (-tau + sqrt(1.0 + tau * tau))
                c = 1.0 / sqrt(1.0 + t * t)
                sn = t * c
                for i in range(s):
                    aip = Aw[i * s + p]
                    aiq = Aw[i * s + q]
                    Aw[i * s + p] = c * aip - sn * aiq
                    Aw[i * s + q] = sn * aip + c * aiq
                for i in range(s):
                    aip = Aw[p * s + i]
                    aiq = Aw[q * s + i]
                    Aw[p * s + i] = c * aip - sn * aiq
                    Aw[q * s + i] = sn * aip + c * aiq
                for i in range(s):
                    vip = V[i * s + p]
                    viq = V[i * s + q]
                    V[i * s + p] = c * vip - sn * viq
                    V[i * s + q] = sn * vip + c * viq
    for i in range(s):
        w[i] = Aw[i * s + i]


cdef double _dist(double* A2, int s, int r, int k, long n, double lam,
                  double* work, double* vecs, double* theta, double* ov,
                  int* order) noexcept nogil:
    """Chordal distance of the top-k eigenspace of B(lam) to the center."""
    cdef int i, j, bp, kind, tmp
    cdef long remaining, c_left, z_left, take
    cdef double sum_ov, bt, bo, best_t, best_o
    cdef int best_kind, have_b
    for i in range(s * s):
        work[i] = A2[i]
    for i in range(r):
        work[i * s + i] += lam
    _eig_sym(work, vecs, theta, s)
    for i in range(s):
        sum_ov = 0.0
        for j in range(r):
            sum_ov += vecs[j * s + i] * vecs[j * s + i]
        ov[i] = sum_ov
    # insertion sort, descending by (theta, ov)
    for i in range(s):
        order[i] = i
    for i in range(1, s):
        j = i
        while j > 0 and (
            theta[order[j - 1]] < theta[order[j]]
            or (theta[order[j - 1]] == theta[order[j]] and ov[order[j - 1]] < ov[order[j]])
        ):
            tmp = order[j - 1]
            order[j - 1] = order[j]
            order[j] = tmp
            j -= 1
    sum_ov = 0.0
    remaining = k
    bp = 0
    c_left = k - r
    z_left = n - k - (s - r)
    while remaining > 0:
        have_b = 1 if bp < s else 0
        if have_b:
            bt = theta[order[bp]]
            bo = ov[order[bp]]
        best_kind = -1
        best_t = 0.0
        best_o = 0.0
        if z_left > 0:
            best_kind = 2
        if have_b and (best_kind == -1 or bt > best_t or (bt == best_t and bo >= best_o)):
            best_kind = 0
            best_t = bt
            best_o = bo
        if c_left > 0 and (best_kind == -1 or lam > best_t or (lam == best_t and 1.0 >= best_o)):
            best_kind = 1
            best_t = lam
            best_o = 1.0
        if best_kind == 0:
            sum_ov += bo
            bp += 1
            remaining -= 1
        elif best_kind == 1:
            take = c_left if c_left < remaining else remaining
            sum_ov += take
            c_left -= take
            remaining -= take
        else:
            take = z_left if z_left < remaining else remaining
            z_left -= take
            remaining -= take
    bt = k - sum_ov
    if bt < 0.0:
        bt = 0.0
    return sqrt(bt)


cpdef tuple lambda_search(double[:, ::1] A2, int r, int k, long n, double rho,
                          double lam_tol, double lam_start, double lam_cap):
    cdef int s = A2.shape[0]
    if s > SMAX:
        raise ValueError("interaction block too large for the compiled kernel")
    cdef double buf[SMAX * SMAX]
    cdef double work[SMAX * SMAX]
    cdef double vecs[SMAX * SMAX]
    cdef double theta[SMAX]
    cdef double ov[SMAX]
    cdef int order[SMAX]
    cdef int i, j
    for i in range(s):
        for j in range(s):
            buf[i * s + j] = A2[i, j]
    cdef bint nonmono = False
    cdef double lo = 0.0
    cdef double hi = 0.0
    cdef double lam = lam_start
    cdef double d = 0.0
    cdef double prev_d = 1e308
    cdef bint bracketed = False
    while lam <= lam_cap:
        d = _dist(buf, s, r, k, n, lam, work, vecs, theta, ov, order)
        if d > prev_d + 1e-12:
            nonmono = True
        prev_d = d
        if fabs(d - rho) <= lam_tol:
            return lam, d, 0, nonmono
        if d <= rho:
            hi = lam
            bracketed = True
            break
        lo = lam
        lam *= 2.0
    if not bracketed:
        res = _scan(buf, s, r, k, n, rho, lam_tol, lam_cap,
                    work, vecs, theta, ov, order)
        if res is not None:
            return res[0], res[1], res[2], True
        return lo, prev_d, 2, nonmono
    cdef double mid
    while True:
        if hi - lo <= WIDTH_REL * (1.0 if hi < 1.0 else hi):
            mid = 0.5 * (lo + hi)
            d = _dist(buf, s, r, k, n, mid, work, vecs, theta, ov, order)
            return mid, d, 1, nonmono
        mid = 0.5 * (lo + hi)
        d = _dist(buf, s, r, k, n, mid, work, vecs, theta, ov, order)
        if fabs(d - rho) <= lam_tol:
            return mid, d, 0, nonmono
        if d > rho:
            lo = mid
        else:
            hi = mid


cdef _scan(double* buf, int s, int r, int k, long n, double rho,
           double lam_tol, double lam_cap,
           double* work, double* vecs, double* theta, double* ov, int* order):
    """Logarithmic 200-point rescue scan for non-monotone profiles."""
    cdef double lo = 0.0
    cdef double hi = -1.0
    cdef double lam, d, prev
    cdef int i
    cdef double lmax = log10(lam_cap)
    prev = 0.0
    for i in range(200):
        lam = pow(10.0, -12.0 + (lmax + 12.0) * i / 199.0)
        d = _dist(buf, s, r, k, n, lam, work, vecs, theta, ov, order)
        if d <= rho:
            hi = lam
            lo = prev
            break
        prev = lam
    if hi < 0.0:
        return None
    if fabs(d - rho) <= lam_tol:
        return (hi, d, 0)
    cdef double mid
    while hi - lo > WIDTH_REL * (1.0 if hi < 1.0 else hi):
        mid = 0.5 * (lo + hi)
        d = _dist(buf, s, r, k, n, mid, work, vecs, theta, ov, order)
        if fabs(d - rho) <= lam_tol:
            return (mid, d, 0)
        if d > rho:
            lo = mid
        else:
            hi = mid
    mid = 0.5 * (lo + hi)
    d = _dist(buf, s, r, k, n, mid, work, vecs, theta, ov, order)
    return (mid, d, 1)
