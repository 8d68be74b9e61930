# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled coordinate-descent kernels for the l1 solvers.

Both functions work on the Gram form of the problem (G = D^T D, b = D^T y,
yy = y^T y) so that cost per sweep is independent of the signal length.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, sqrt, log, exp

cnp.import_array()

cdef enum:
    FIRST_POLISH = 10
    POLISH_EVERY = 10


cdef inline double _soft(double v, double t) noexcept nogil:
    if v > t:
        return v - t
    if v < -t:
        return v + t
    return 0.0


cdef class _Work:
    cdef double[::1] L, rhs, z, qn
    cdef Py_ssize_t[::1] idx
    cdef char[::1] keep

    def __init__(self, Py_ssize_t s):
        self.keep = np.empty(max(s, 1), dtype=np.int8)
        self.L = np.empty(max(s * s, 1))
        self.rhs = np.empty(max(s, 1))
        self.z = np.empty(max(s, 1))
        self.qn = np.empty(max(s, 1))
        self.idx = np.empty(max(s, 1), dtype=np.intp)


cdef int _chol_solve(const double[:, ::1] G, Py_ssize_t na, _Work w) noexcept nogil:
    # solve G[idx, idx] z = rhs for the first na entries of w.idx; fails on
    # a pivot below 1e-14 of its diagonal entry
    cdef Py_ssize_t a, c, k
    cdef double acc
    for a in range(na):
        for c in range(a + 1):
            acc = G[w.idx[a], w.idx[c]]
            for k in range(c):
                acc -= w.L[a * na + k] * w.L[c * na + k]
            if a == c:
                if acc <= 1e-14 * G[w.idx[a], w.idx[a]]:
                    return 0
                w.L[a * na + a] = sqrt(acc)
            else:
                w.L[a * na + c] = acc / w.L[c * na + c]
    for a in range(na):
        acc = w.rhs[a]
        for k in range(a):
            acc -= w.L[a * na + k] * w.z[k]
        w.z[a] = acc / w.L[a * na + a]
    for a in range(na - 1, -1, -1):
        acc = w.z[a]
        for k in range(a + 1, na):
            acc -= w.L[k * na + a] * w.z[k]
        w.z[a] = acc / w.L[a * na + a]
    return 1


cdef int _ls_start(const double[:, ::1] G, const double[::1] b, double[::1] x,
                   double[::1] q, _Work w) noexcept nogil:
    # least-squares warm start x = G^-1 b when G is safely positive definite
    cdef Py_ssize_t s = G.shape[0]
    cdef Py_ssize_t j, k
    cdef double acc
    for j in range(s):
        w.idx[j] = j
        w.rhs[j] = b[j]
    if not _chol_solve(G, s, w):
        return 0
    for j in range(s):
        x[j] = w.z[j]
    for j in range(s):
        acc = b[j]
        for k in range(s):
            acc -= G[j, k] * x[k]
        q[j] = acc
    return 1


cdef int _polish(const double[:, ::1] G, double[::1] x, double[::1] q,
                 double lam, _Work w, Py_ssize_t skip) noexcept nogil:
    # exact solve on the current support/sign pattern (optionally without
    # coordinate `skip`); accepted only if it satisfies the optimality
    # conditions of the penalized problem
    cdef Py_ssize_t s = G.shape[0]
    cdef Py_ssize_t na = 0, i, j, k, a
    cdef double acc, sg
    for j in range(s):
        w.keep[j] = x[j] != 0.0 and j != skip
    for j in range(s):
        if w.keep[j]:
            w.idx[na] = j
            na += 1
    if na == 0:
        return 0
    for a in range(na):
        i = w.idx[a]
        acc = q[i]
        for k in range(s):
            acc += G[i, k] * x[k]
        sg = 1.0 if x[i] > 0.0 else -1.0
        w.rhs[a] = acc - lam * sg
    if not _chol_solve(G, na, w):
        return 0
    for a in range(na):
        i = w.idx[a]
        if (w.z[a] > 0.0) != (x[i] > 0.0) or w.z[a] == 0.0:
            return 0
    # new gradient q' = b - G[:, A] z, with b = q + G x
    for j in range(s):
        acc = q[j]
        for k in range(s):
            acc += G[j, k] * x[k]
        for a in range(na):
            acc -= G[j, w.idx[a]] * w.z[a]
        w.qn[j] = acc
    a = 0
    for j in range(s):
        if a < na and w.idx[a] == j:
            a += 1
        elif fabs(w.qn[j]) > lam * (1.0 + 1e-9) + 1e-14:
            return 0
    for j in range(s):
        x[j] = 0.0
        q[j] = w.qn[j]
    for a in range(na):
        x[w.idx[a]] = w.z[a]
    return 1


cdef int _cd_sweeps(const double[:, ::1] G, double[::1] x, double[::1] q,
                    double lam, double tol, int max_sweeps, _Work w,
                    int* converged) noexcept nogil:
    # q holds b - G x on entry and is kept in sync
    cdef Py_ssize_t s = G.shape[0]
    cdef Py_ssize_t j, k
    cdef int sweep = 0
    cdef double old, new, delta, maxd, gjj
    cdef int next_polish = FIRST_POLISH
    converged[0] = 0
    while sweep < max_sweeps:
        sweep += 1
        maxd = 0.0
        for j in range(s):
            gjj = G[j, j]
            old = x[j]
            new = _soft(q[j] + gjj * old, lam) / gjj
            delta = new - old
            if delta != 0.0:
                x[j] = new
                for k in range(s):
                    q[k] -= G[k, j] * delta
                if fabs(delta) > maxd:
                    maxd = fabs(delta)
        if maxd < tol:
            converged[0] = 1
            break
        if sweep % POLISH_EVERY == 0 and _polish(G, x, q, lam, w, -1):
            converged[0] = 1
            break
        if sweep == next_polish:
            next_polish *= 2
            for j in range(s):
                if x[j] != 0.0 and _polish(G, x, q, lam, w, j):
                    converged[0] = 1
                    break
            if converged[0]:
                break
    return sweep


cdef double _residual(const double[::1] b, const double[::1] x,
                      const double[::1] q, double yy) noexcept nogil:
    cdef Py_ssize_t j
    cdef double acc = yy
    for j in range(x.shape[0]):
        acc -= x[j] * (b[j] + q[j])
    if acc < 0.0:
        acc = 0.0
    return sqrt(acc)


def lasso_cd(double[:, ::1] G, double[::1] b, double lam, x0=None,
             double tol=1e-8, int max_sweeps=1000):
    """Minimize 0.5 x'Gx - b'x + lam*|x|_1 by cyclic coordinate descent.

    Returns (x, sweeps, converged).
    """
    cdef Py_ssize_t s = G.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] xa
    if x0 is None:
        xa = np.zeros(s)
    else:
        xa = np.array(x0, dtype=np.float64, copy=True)
    cdef double[::1] x = xa
    cdef cnp.ndarray[cnp.float64_t, ndim=1] qa = np.asarray(b) - np.asarray(G) @ xa
    cdef double[::1] q = qa
    cdef int conv = 0
    cdef int sweeps
    cdef _Work w = _Work(s)
    with nogil:
        sweeps = _cd_sweeps(G, x, q, lam, tol, max_sweeps, w, &conv)
    return xa, sweeps, bool(conv)


def bpdn_gram(double[:, ::1] G, double[::1] b, double yy, double eps,
              double res_tol, double lam_floor_rel=1e-10, double tol=1e-8,
              int max_sweeps=1000, int max_bisect=200):
    """Residual-constrained l1 solve via a log-spaced bisection on lambda.

    The floor solve starts from the least-squares solution when G is
    positive definite. Returns (x, lam, residual, sweeps, bisections,
    status, converged) where
    status is 0 (constraint met), 1 (zero solution feasible),
    2 (infeasible even at the lambda floor), 3 (bisection budget exhausted).
    """
    cdef Py_ssize_t s = G.shape[0]
    cdef Py_ssize_t j
    cdef cnp.ndarray[cnp.float64_t, ndim=1] xa = np.zeros(s)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] qa = np.array(b, dtype=np.float64, copy=True)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] xlo_a = np.zeros(s)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] qlo_a = np.zeros(s)
    cdef double[::1] x = xa
    cdef double[::1] q = qa
    cdef double[::1] xlo = xlo_a
    cdef double[::1] qlo = qlo_a
    cdef double lam_max = 0.0, lam_lo, lam_hi, lam, res, res_lo, ynorm
    cdef int conv = 0, floor_conv = 0, final_conv = 1, lo_conv = 0, found = 0, status = 0
    cdef long sweeps = 0
    cdef int nb = 0
    cdef _Work w = _Work(s)

    ynorm = sqrt(yy)
    for j in range(s):
        if fabs(b[j]) > lam_max:
            lam_max = fabs(b[j])
    if eps >= ynorm or lam_max == 0.0:
        return xa, lam_max, ynorm, 0, 0, 1, True

    with nogil:
        lam_lo = lam_max * lam_floor_rel
        if not _ls_start(G, b, x, q, w):
            for j in range(s):
                x[j] = 0.0
                q[j] = b[j]
        sweeps += _cd_sweeps(G, x, q, lam_lo, tol, max_sweeps, w, &conv)
        floor_conv = conv
        res_lo = _residual(b, x, q, yy)
        lam = lam_lo
        res = res_lo
        final_conv = conv
        if eps == 0.0 or (res_lo > eps + res_tol and floor_conv):
            # floor reached (or provably infeasible); nothing to bisect toward
            status = 2 if res_lo > eps + res_tol else 0
        elif fabs(res_lo - eps) <= res_tol:
            status = 0
        else:
            # keep the floor solution as the fallback answer
            for j in range(s):
                xlo[j] = x[j]
                qlo[j] = q[j]
            lo_conv = floor_conv
            found = res_lo <= eps
            lam_hi = lam_max
            status = 3
            while nb < max_bisect and lam_hi > lam_lo * (1.0 + 1e-12):
                nb += 1
                lam = exp(0.5 * (log(lam_lo) + log(lam_hi)))
                sweeps += _cd_sweeps(G, x, q, lam, tol, max_sweeps, w, &conv)
                final_conv = conv
                res = _residual(b, x, q, yy)
                if fabs(res - eps) <= res_tol:
                    status = 0
                    break
                if res > eps:
                    lam_hi = lam
                else:
                    found = 1
                    lam_lo = lam
                    res_lo = res
                    lo_conv = conv
                    for j in range(s):
                        xlo[j] = x[j]
                        qlo[j] = q[j]
            if status == 3:
                for j in range(s):
                    x[j] = xlo[j]
                    q[j] = qlo[j]
                lam = lam_lo
                res = res_lo
                final_conv = lo_conv
                if not found:
                    status = 2
    return xa, lam, res, sweeps, nb, status, bool(final_conv)
